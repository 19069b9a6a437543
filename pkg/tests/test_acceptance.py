"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import json
import subprocess
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from mmsqueeze.cli import main
from mmsqueeze.config import ExperimentConfig
from mmsqueeze.entanglement import DEFAULT_LABELS, NO_SPLIT, Bipartition, ppt_scan, ppt_value
from mmsqueeze.gauss import GaussianState, apply_loss, make_squeezed_vacuum, squeezing_table, transform_state
from mmsqueeze.pipeline import pulse_config, pulse_variance_function
from mmsqueeze.pulses import (
    calibration_record,
    estimate_squeezing,
    optimize_window,
    stream_pulse_quadratures,
    verify_pulse_isolation,
)
from mmsqueeze.tomography import reconstruct_covariance, recover_supermodes, simulate_variance_dataset

from conftest import ACCEPTANCE_LINES, random_orthogonal


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


_PULSE_CACHE = {}


def hg0_run(n_pulses, piezo_period=None):
    """Full HG0 pulse pipeline at the default settings with ``n_pulses`` pulses."""
    key = (n_pulses, piezo_period)
    if key not in _PULSE_CACHE:
        cfg = pulse_config(ExperimentConfig())
        cfg = replace(cfg, duration_pulses=n_pulses, piezo_period_pulses=piezo_period or cfg.piezo_period_pulses)
        t0 = time.perf_counter()
        cal = calibration_record(cfg)
        w = optimize_window(cal)
        pv, _ = stream_pulse_quadratures(pulse_variance_function("hg0"), cfg, w.offset, w.length, calibration=cal)
        est = estimate_squeezing(pv.values, pv.phases, pv.vacuum_values, pv.dark_values)
        iso = verify_pulse_isolation(pv.values, pv.phases)
        _PULSE_CACHE[key] = (est, iso, time.perf_counter() - t0)
    return _PULSE_CACHE[key]


def test_criterion_1_schmidt_number(tmp_path):
    t0 = time.perf_counter()
    code = main(["jsa", "--out", str(tmp_path), "--quiet"])
    dt = time.perf_counter() - t0
    k = json.loads((tmp_path / "jsa.json").read_text())["K"]
    report(1, code == 0 and 50 <= k <= 200 and dt < 30, f"K = {k:.2f} in [50, 200]; {dt:.1f} s at 512x512 (< 30 s)")


def test_criterion_2_squeezing_table(model):
    sup = model.supermode_table()
    hg = squeezing_table(model.hg_state())[:21]
    mags = np.abs([e.squeeze_dB for e in hg])
    ok = (
        abs(sup[0].squeeze_dB + 0.47) < 1e-6
        and len(hg) == 21
        and np.all(np.diff(mags) <= 0)
        and 0 < mags[20] <= 0.2
        and all(abs(e.squeeze_dB) <= e.antisqueeze_dB for e in hg)
        and all(abs(e.squeeze_dB) <= e.antisqueeze_dB for e in sup)
    )
    report(
        2,
        ok,
        f"mode 0 calibrated to {sup[0].squeeze_dB:.3f} dB; HG-LO |sqz| {mags[0]:.3f} -> {mags[20]:.3f} dB, "
        "non-increasing, |sqz| <= asqz",
    )


def test_criterion_3_covariance_round_trip(frexel_state):
    rng = np.random.default_rng(3)
    r = [0.6, -0.4, 0.3, 0.2, -0.1, 0.05, 0.5, -0.25]
    s = transform_state(apply_loss(make_squeezed_vacuum(r), 0.8), random_orthogonal(8, rng), "frexel")
    rec = reconstruct_covariance(simulate_variance_dataset(s, 0.0)).state
    err = max(np.abs(rec.Vqq - s.Vqq).max(), np.abs(rec.Vpp - s.Vpp).max())

    truth = recover_supermodes(frexel_state)
    hits = total = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # noisy reconstructions may be slightly unphysical
        for seed in range(100):
            data = simulate_variance_dataset(frexel_state, 0.05, seed)
            got = recover_supermodes(reconstruct_covariance(data).state)
            sq = np.abs(np.sort(got.squeeze_dB) - np.sort(truth.squeeze_dB)) < 0.1
            asq = np.abs(np.sort(got.antisqueeze_dB) - np.sort(truth.antisqueeze_dB)) < 0.1
            hits += int(np.sum(sq & asq))
            total += sq.size
    frac = hits / total
    report(3, err < 1e-12 and frac >= 0.9,
           f"noiseless max error {err:.1e} (< 1e-12); {100 * frac:.2f}% of modes within 0.1 dB over 100 seeds")


def test_criterion_4_antidiagonal(frexel_state):
    ok = True
    worst = np.inf
    for block in (frexel_state.Vqq, frexel_state.Vpp):
        c = block - np.eye(8)
        for i, j in ((0, 7), (1, 6), (2, 5), (3, 4)):
            for row in (i, j):
                off = np.abs(np.delete(c[row], row))
                ratio = abs(c[i, j]) / np.median(off)
                worst = min(worst, ratio)
                ok &= ratio > 1
    report(4, bool(ok), f"smallest anti-diagonal / row-median ratio {worst:.2f} (> 1) in both blocks")


def test_criterion_5_ppt(frexel_state):
    vac = ppt_scan(GaussianState.vacuum(8))
    vac_ok = len(vac.results) == 127 and all(abs(r.ppt_value) < 1e-9 for r in vac.results)
    bs = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    tms_err = max(
        abs(ppt_value(transform_state(make_squeezed_vacuum([r, -r]), bs), Bipartition(2, 2)).ppt_value
            - (np.exp(-2 * r) - 1))
        for r in (0.1, 0.5, 1.0)
    )
    t0 = time.perf_counter()
    scan = ppt_scan(frexel_state)
    dt = time.perf_counter() - t0
    bands = scan.summary["bands"]
    medians = [bands[k]["median"] for k in (*DEFAULT_LABELS, NO_SPLIT)]
    ordered = all(a < b for a, b in zip(medians, medians[1:]))
    report(
        5,
        vac_ok and tms_err < 1e-9 and scan.n_entangled >= 100 and ordered and dt < 5,
        f"vacuum 127 zeros {vac_ok}; two-mode oracle error {tms_err:.1e}; {scan.n_entangled}/127 entangled; "
        f"medians {' < '.join(f'{m:.4f}' for m in medians)}; {dt:.2f} s",
    )


def test_criterion_6_pulse_estimator():
    est, iso, dt = hg0_run(1_000_000)
    ok = abs(est.squeeze_dB + 0.47) <= 0.1 and abs(est.antisqueeze_dB - 0.55) <= 0.1 and iso.passed and dt < 120
    report(
        6,
        ok,
        f"sqz {est.squeeze_dB:+.3f} dB (truth -0.47), asqz {est.antisqueeze_dB:+.3f} dB (truth +0.55), "
        f"|rho1| {abs(iso.rho1):.1e} < {iso.threshold:.1e}; {dt:.1f} s",
    )


def test_criterion_7_standard_error_scaling():
    ns = [10_000, 100_000, 1_000_000]
    # every run must sweep the full phase range, so the sweep fits inside the shortest run
    ses = np.array([hg0_run(n, piezo_period=10_000)[0].standard_error_dB for n in ns])
    slopes = [np.polyfit(np.log10(ns), np.log10(ses[:, k]), 1)[0] for k in range(2)]
    report(7, all(abs(s + 0.5) <= 0.1 for s in slopes),
           f"log-log slopes {slopes[0]:.3f} (squeezing), {slopes[1]:.3f} (antisqueezing); target -0.5 +/- 0.1")


def test_criterion_8_property_suites():
    here = Path(__file__).parent
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(here / "test_properties.py")],
        capture_output=True, text=True, cwd=here.parent,
    )
    dt = time.perf_counter() - t0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    report(8, proc.returncode == 0 and dt < 60, f"{tail}; {dt:.1f} s (< 60 s)")
