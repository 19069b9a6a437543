"""``mmsqueeze`` command-line entry point.

Every stage reads the same INI config (defaults reproduce the experiment) and
writes ``<stage>.<ext>`` files under ``--out``. Exit codes: 0 success,
2 configuration error, 3 infeasible calibration, 4 incomplete data,
5 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ExperimentConfig, load_config
from .entanglement import ppt_scan
from .errors import ConfigurationError, SqueezeError
from .gauss import GaussianState, squeezing_table
from .pipeline import (
    build_jsa,
    calibrated_model,
    pulse_config,
    pulse_mode_truth,
    pulse_variance_function,
)
from .pulses import (
    calibration_record,
    estimate_squeezing,
    optimize_window,
    stream_pulse_quadratures,
    verify_pulse_isolation,
)
from .spdc import schmidt_decompose
from .tomography import (
    VarianceDataset,
    propagate_uncertainty,
    reconstruct_covariance,
    recover_supermodes,
    simulate_variance_dataset,
)


class Context:
    def __init__(self, args, config: ExperimentConfig):
        self.args = args
        self.config = config
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def say(self, text: str) -> None:
        if not self.args.quiet:
            print(text)

    def write_json(self, name: str, payload: dict) -> Path:
        payload = {"config": self.config.to_dict(), **payload}
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def _table_rows(entries) -> list:
    return [{"mode": e.mode_index, "squeeze_dB": e.squeeze_dB, "antisqueeze_dB": e.antisqueeze_dB} for e in entries]


def cmd_jsa(ctx: Context) -> int:
    jsa = build_jsa(ctx.config, separable=ctx.args.separable)
    dec = schmidt_decompose(jsa, n_keep=min(ctx.config.modes.n_state_modes, jsa.grid.n_points))
    jsa.to_csv(ctx.out / "jsa.csv")
    ctx.write_json(
        "jsa.json",
        {
            **dec.to_dict(),
            "separable_hook": bool(ctx.args.separable),
            "waveguide_offset_per_m": jsa.waveguide_offset,
            "takagi_mismatch": dec.takagi_mismatch,
        },
    )
    ctx.say(f"K = {dec.schmidt_K:.4f}  (sellmeier_set {dec.sellmeier_set})")
    return 0


def cmd_state(ctx: Context) -> int:
    model = calibrated_model(ctx.config)
    n = ctx.config.modes.n_supermodes
    sup = model.state
    leading = GaussianState(sup.Vqq[:n, :n], sup.Vpp[:n, :n], "supermode")
    hg = model.hg_state()
    frexel = model.frexel_state()
    sup_table = model.supermode_table()
    ctx.write_json(
        "state.json",
        {
            "gain": model.gain,
            "schmidt_K": model.decomposition.schmidt_K,
            "n_simulated_supermodes": sup.n_modes,
            "supermode_table": _table_rows(sup_table),
            "hg_table": _table_rows(squeezing_table(hg)),
            "supermode_state": leading.to_dict(),
            "hg_state": hg.to_dict(),
            "frexel_state": frexel.to_dict(),
        },
    )
    ctx.say(f"gain = {model.gain:.6f}")
    ctx.say("mode  supermode sqz/asqz (dB)   HG-LO sqz/asqz (dB)")
    for s, h in zip(sup_table, squeezing_table(hg)):
        ctx.say(f"{s.mode_index:4d}  {s.squeeze_dB:8.3f} {s.antisqueeze_dB:7.3f}     {h.squeeze_dB:8.3f} {h.antisqueeze_dB:7.3f}")
    return 0


def _load_state(path) -> GaussianState:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"state file not found: {p}")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p}: invalid JSON ({exc})") from None
    if "frexel_state" in d:  # output of the state command
        d = d["frexel_state"]
    return GaussianState.from_dict(d)


def cmd_tomography(ctx: Context) -> int:
    truth = None
    if ctx.args.dataset:
        path = Path(ctx.args.dataset)
        if not path.is_file():
            raise ConfigurationError(f"dataset file not found: {path}")
        data = VarianceDataset.from_csv(path)
    else:
        truth = calibrated_model(ctx.config).frexel_state()
        data = simulate_variance_dataset(truth, ctx.config.noise.variance_noise_dB, ctx.config.noise.seed)
        data.to_csv(ctx.out / "tomography-dataset.csv")
    rec = reconstruct_covariance(data)
    recovery = recover_supermodes(rec.state)
    unc = propagate_uncertainty(data, recovery) if data.has_uncertainty else None

    rows = []
    truth_rec = recover_supermodes(truth) if truth is not None else None
    for k in range(rec.state.n_modes):
        row = {
            "mode": k,
            "squeeze_dB": float(recovery.squeeze_dB[k]),
            "antisqueeze_dB": float(recovery.antisqueeze_dB[k]),
        }
        if unc is not None:
            row["squeeze_sigma_dB"] = float(unc.sigma_squeeze_dB[k])
            row["antisqueeze_sigma_dB"] = float(unc.sigma_antisqueeze_dB[k])
        if truth_rec is not None:
            row["truth_squeeze_dB"] = float(truth_rec.squeeze_dB[k])
            row["truth_antisqueeze_dB"] = float(truth_rec.antisqueeze_dB[k])
        rows.append(row)
    with open(ctx.out / "tomography.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    ctx.write_json(
        "tomography.json",
        {
            "reconstruction": rec.state.to_dict(),
            "physicality": rec.report(),
            "recovery": recovery.to_dict(),
            "comparison": rows,
            "source": str(ctx.args.dataset) if ctx.args.dataset else "simulated",
        },
    )
    verdict = "physical" if rec.physicality.physical else "UNPHYSICAL"
    ctx.say(f"reconstructed {rec.state.n_modes}-mode covariance ({verdict}, min eig {rec.physicality.min_eigenvalue:.3e})")
    for r in rows:
        ctx.say(f"{r['mode']:3d}  {r['squeeze_dB']:8.3f} {r['antisqueeze_dB']:7.3f}")
    return 0


def cmd_ppt(ctx: Context) -> int:
    state = _load_state(ctx.args.state) if ctx.args.state else calibrated_model(ctx.config).frexel_state()
    scan = ppt_scan(state)
    scan.to_csv(ctx.out / "ppt.csv")
    ctx.write_json("ppt.json", {"summary": scan.summary})
    ctx.say(f"{scan.n_entangled} of {len(scan.results)} bipartitions entangled")
    for band, s in scan.summary["bands"].items():
        if s["count"]:
            ctx.say(f"  {band:12s} n={s['count']:3d} entangled={s['n_entangled']:3d} median={s['median']:.5f}")
    return 0


def cmd_pulses(ctx: Context) -> int:
    cfg = ctx.config
    modes = cfg.pulse.modes
    truths = [pulse_mode_truth(m) for m in modes]  # validate names before any work
    results = []
    window = None
    for k, (name, (t_sq, t_asq)) in enumerate(zip(modes, truths)):
        pcfg = pulse_config(cfg, seed_offset=k)
        cal = calibration_record(pcfg)
        choice = optimize_window(cal)
        window = (choice.offset, choice.length)
        keep = cfg.pulse.record_pulses if k == 0 else 0
        pv, head = stream_pulse_quadratures(pulse_variance_function(name), pcfg, *window, calibration=cal,
                                            keep_pulses=keep)
        est = estimate_squeezing(pv.values, pv.phases, pv.vacuum_values, pv.dark_values)
        iso = verify_pulse_isolation(pv.values, pv.phases)
        if head is not None:
            head = replace(head, metadata={"mode": name, "window": list(window)})
            head.write(ctx.out / "pulses.ptrn", ctx.out / "pulses-truth.csv")
        se_sq, se_asq = est.standard_error_dB
        results.append(
            {
                "mode": name,
                "truth_squeeze_dB": t_sq,
                "truth_antisqueeze_dB": t_asq,
                **est.to_dict(),
                "window": [choice.offset, choice.length],
                "window_snr": choice.snr,
                "isolation": {"rho1": iso.rho1, "threshold": float(iso.threshold), "passed": bool(iso.passed)},
                "deviation_sigma": [(est.squeeze_dB - t_sq) / se_sq, (est.antisqueeze_dB - t_asq) / se_asq],
            }
        )
        ctx.say(
            f"{name:7s} sqz {est.squeeze_dB:+.3f} +/- {se_sq:.3f} dB (truth {t_sq:+.2f})  "
            f"asqz {est.antisqueeze_dB:+.3f} +/- {se_asq:.3f} dB (truth {t_asq:+.2f})  "
            f"window {window}  rho1 {iso.rho1:+.2e} {'ok' if iso.passed else 'FAIL'}"
        )
    with open(ctx.out / "pulses.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "truth_squeeze_dB", "truth_antisqueeze_dB", "squeeze_dB", "antisqueeze_dB",
                    "squeeze_se_dB", "antisqueeze_se_dB"])
        for r in results:
            w.writerow([r["mode"], r["truth_squeeze_dB"], r["truth_antisqueeze_dB"], r["squeeze_dB"],
                        r["antisqueeze_dB"], *r["standard_error_dB"]])
    ctx.write_json(
        "pulses.json",
        {
            "metadata": {
                "electronic_noise_clearance_dB": cfg.pulse.clearance_dB,
                "electronic_noise_subtracted": True,
                "kernel_backend": kernels.BACKEND,
            },
            "modes": results,
        },
    )
    return 0


COMMANDS = {
    "jsa": cmd_jsa,
    "state": cmd_state,
    "tomography": cmd_tomography,
    "ppt": cmd_ppt,
    "pulses": cmd_pulses,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (defaults reproduce the experiment)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="override the pulse and noise seeds")
    common.add_argument("--quiet", action="store_true", help="suppress the console summary")

    parser = argparse.ArgumentParser(prog="mmsqueeze", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("jsa", parents=[common], help="joint spectral amplitude and Schmidt spectrum")
    p.add_argument("--separable", action="store_true", help="phase-matched, flat-pump test hook (K = 1)")
    sub.add_parser("state", parents=[common], help="calibrated supermode, HG and frexel states")
    p = sub.add_parser("tomography", parents=[common], help="covariance reconstruction and supermode recovery")
    p.add_argument("--dataset", help="variance dataset CSV (default: simulate from the config)")
    p = sub.add_parser("ppt", parents=[common], help="PPT scan over all bipartitions")
    p.add_argument("--state", help="state JSON (a GaussianState, or the output of 'state')")
    sub.add_parser("pulses", parents=[common], help="pulse-by-pulse squeezing estimation")
    sub.add_parser("config", parents=[common], help="print the resolved config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        if args.command == "config":
            print(config.to_ini(), end="")
            return 0
        return COMMANDS[args.command](Context(args, config))
    except SqueezeError as exc:
        print(f"mmsqueeze {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"mmsqueeze {args.command}: numerical error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
