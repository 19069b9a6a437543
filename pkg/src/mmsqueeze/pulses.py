"""Pulse-resolved homodyne: photocurrent synthesis and per-pulse squeezing estimation.

A record holds three acquisitions made with the same detector: the signal
(squeezed light, LO phase swept by a slow piezo), a vacuum reference (signal
blocked) and a dark trace (LO blocked, electronic noise only). Samples are in
units where a full-period integral of one vacuum pulse has variance 1.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterator, NamedTuple

import numpy as np

from . import kernels
from .errors import ConfigurationError, InvalidParameterError
from .gauss import variance_to_dB

MAGIC = b"PTRN"
FORMAT_VERSION = 1
DB_PER_NEPER = 10 / np.log(10)
SEGMENTS = ("signal", "vacuum", "dark")


@dataclass(frozen=True)
class PulseTrainConfig:
    rep_rate: float = 156e6
    samples_per_pulse: int = 256
    detector_bandwidth: float = 300e6  # inf: ideal detector
    electronic_noise_dB: float = 10.0  # clearance of shot noise over electronic noise
    cmrr_dB: float = 64.0
    lo_excess_noise: float = 1.0  # classical LO noise before common-mode rejection, shot-noise units
    piezo_period_pulses: int = 100_000
    duration_pulses: int = 100_000
    n_vacuum_pulses: int = 100_000
    n_dark_pulses: int = 20_000
    pulse_start: int | None = None  # default: samples_per_pulse // 8
    pulse_width: int | None = None  # default: samples_per_pulse // 32
    flicker_level: float = 0.0  # 1/f contamination, shot-noise units; robustness studies only
    chunk_pulses: int = 32_768
    seed: int = 0

    def __post_init__(self):
        if not self.rep_rate > 0:
            raise ConfigurationError("rep_rate must be positive")
        if self.duration_pulses < 1:
            raise ConfigurationError("duration_pulses must be >= 1")
        if self.samples_per_pulse < 4:
            raise ConfigurationError("samples_per_pulse must be >= 4")
        if not self.detector_bandwidth >= self.rep_rate / 2:
            raise ConfigurationError(
                f"detector bandwidth {self.detector_bandwidth:.3g} Hz is below half the repetition "
                f"rate ({self.rep_rate / 2:.3g} Hz): pulses cannot be resolved"
            )
        if self.piezo_period_pulses < 2:
            raise ConfigurationError("piezo_period_pulses must be >= 2")
        if self.n_vacuum_pulses < 2 or self.n_dark_pulses < 0:
            raise ConfigurationError("need at least two vacuum pulses and a non-negative dark length")
        start, width = self.start, self.width
        if start < 0 or width < 1 or start + width > self.samples_per_pulse:
            raise ConfigurationError("optical pulse does not fit in one repetition period")
        if self.chunk_pulses < 1:
            raise ConfigurationError("chunk_pulses must be >= 1")

    @property
    def start(self) -> int:
        return self.samples_per_pulse // 8 if self.pulse_start is None else self.pulse_start

    @property
    def width(self) -> int:
        return max(1, self.samples_per_pulse // 32) if self.pulse_width is None else self.pulse_width

    @property
    def sample_rate(self) -> float:
        return self.rep_rate * self.samples_per_pulse

    @property
    def decay(self) -> float:
        """One-pole low-pass coefficient per sample."""
        if np.isinf(self.detector_bandwidth):
            return 0.0
        return float(np.exp(-2 * np.pi * self.detector_bandwidth / self.sample_rate))

    @property
    def electronic_sigma(self) -> float:
        """Per-sample electronic noise standard deviation."""
        if np.isinf(self.electronic_noise_dB):
            return 0.0
        return float(np.sqrt(10 ** (-self.electronic_noise_dB / 10) / self.samples_per_pulse))

    @property
    def classical_sigma(self) -> float:
        return float(np.sqrt(self.lo_excess_noise * 10 ** (-self.cmrr_dB / 10)))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and np.isinf(v):
                d[k] = "inf"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PulseTrainConfig":
        d = {k: (float("inf") if v == "inf" else v) for k, v in d.items()}
        return cls(**d)


def quadrature_variance(v_squeezed: float, v_antisqueezed: float) -> Callable:
    """``V(theta) = V_sq cos^2 theta + V_asq sin^2 theta``."""
    if not (v_squeezed > 0 and v_antisqueezed > 0):
        raise InvalidParameterError("variances must be positive")
    return lambda theta: v_squeezed * np.cos(theta) ** 2 + v_antisqueezed * np.sin(theta) ** 2


def vacuum_variance(theta):
    return np.ones_like(np.asarray(theta, dtype=float))


def piezo_phase(index: np.ndarray, period: int) -> np.ndarray:
    """Triangular sweep 0 -> pi -> 0 over ``period`` pulses."""
    u = (np.asarray(index) % period) / period
    return np.pi * np.where(u < 0.5, 2 * u, 2 - 2 * u)


def _streams(seed: int, segment: str):
    """Independent generators (quadratures, electronic, classical, flicker) per segment."""
    ss = np.random.SeedSequence([seed, SEGMENTS.index(segment)])
    return [np.random.default_rng(s) for s in ss.spawn(4)]


def _flicker(rng: np.random.Generator, n: int, level: float) -> np.ndarray:
    if level <= 0 or n < 2:
        return np.zeros(n)
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n)
    f[0] = f[1]
    x = np.fft.irfft(spec / np.sqrt(f), n)
    return x * np.sqrt(level) / x.std()


class Chunk(NamedTuple):
    start: int
    samples: np.ndarray
    theta: np.ndarray
    x: np.ndarray


def iter_segment(variance_of_phase: Callable | None, config: PulseTrainConfig, segment: str,
                 n_pulses: int | None = None) -> Iterator[Chunk]:
    """Yield a segment chunk by chunk; concatenating the chunks gives the full segment.

    ``variance_of_phase=None`` generates a dark trace (no optical pulses).
    """
    if n_pulses is None:
        n_pulses = {
            "signal": config.duration_pulses,
            "vacuum": config.n_vacuum_pulses,
            "dark": config.n_dark_pulses,
        }[segment]
    rng_x, rng_e, rng_c, rng_f = _streams(config.seed, segment)
    spp = config.samples_per_pulse
    sigma_e = config.electronic_sigma
    sigma_c = config.classical_sigma
    flicker = _flicker(rng_f, n_pulses, config.flicker_level) if variance_of_phase is not None else None
    state = 0.0
    for start in range(0, n_pulses, config.chunk_pulses):
        n = min(config.chunk_pulses, n_pulses - start)
        idx = np.arange(start, start + n)
        if variance_of_phase is None:
            theta = np.zeros(n)
            x = np.zeros(n)
            samples = np.zeros(n * spp)
        else:
            theta = piezo_phase(idx, config.piezo_period_pulses)
            v = np.asarray(variance_of_phase(theta), dtype=float)
            if np.any(~(v > 0)):
                raise InvalidParameterError("variance function must be positive")
            x = rng_x.standard_normal(n) * np.sqrt(v)
            amps = x + sigma_c * rng_c.standard_normal(n) + flicker[start : start + n]
            samples, state = kernels.render_pulses(amps, spp, config.start, config.width, config.decay, state)
        if sigma_e > 0:
            samples = samples + sigma_e * rng_e.standard_normal(n * spp)
        yield Chunk(start, samples, theta, x)


@dataclass(frozen=True)
class PulseTrainRecord:
    samples: np.ndarray
    theta: np.ndarray
    x: np.ndarray
    config: PulseTrainConfig
    vacuum_samples: np.ndarray
    dark_samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_pulses(self) -> int:
        return self.samples.size // self.config.samples_per_pulse

    def header(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "segments": {
                "signal": int(self.samples.size),
                "vacuum": int(self.vacuum_samples.size),
                "dark": int(self.dark_samples.size),
            },
            "metadata": self.metadata,
        }

    def write(self, path, truth_path=None) -> None:
        """Binary record: ``PTRN``, u32 version, u32 header length, JSON header, float64 samples."""
        header = json.dumps(self.header(), sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
            fh.write(header)
            for seg in (self.samples, self.vacuum_samples, self.dark_samples):
                fh.write(np.ascontiguousarray(seg, dtype="<f8").tobytes())
        if truth_path is not None:
            write_truth(truth_path, self.theta, self.x)


def write_truth(path, theta, x, start: int = 0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pulse_index", "theta", "x_m"])
        for k, (t, v) in enumerate(zip(theta, x)):
            w.writerow([start + k, repr(float(t)), repr(float(v))])


def read_record(path, truth_path=None) -> PulseTrainRecord:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise InvalidParameterError(f"{path} is not a pulse-train record")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise InvalidParameterError(f"unsupported record version {version}")
        header = json.loads(fh.read(hlen))
        data = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    seg = header["segments"]
    n_s, n_v = seg["signal"], seg["vacuum"]
    config = PulseTrainConfig.from_dict(header["config"])
    theta = x = np.empty(0)
    if truth_path is not None:
        rows = np.loadtxt(truth_path, delimiter=",", skiprows=1, ndmin=2)
        theta, x = rows[:, 1], rows[:, 2]
    return PulseTrainRecord(
        data[:n_s], theta, x, config, data[n_s : n_s + n_v], data[n_s + n_v :], header.get("metadata", {})
    )


def _collect(chunks) -> tuple:
    parts = list(chunks)
    if not parts:
        return np.empty(0), np.empty(0), np.empty(0)
    return tuple(np.concatenate([getattr(c, f) for c in parts]) for f in ("samples", "theta", "x"))


def synthesize_train(variance_of_phase: Callable, config: PulseTrainConfig) -> PulseTrainRecord:
    """Materialise signal, vacuum and dark acquisitions with per-pulse ground truth."""
    samples, theta, x = _collect(iter_segment(variance_of_phase, config, "signal"))
    vac, _, _ = _collect(iter_segment(vacuum_variance, config, "vacuum"))
    dark, _, _ = _collect(iter_segment(None, config, "dark"))
    return PulseTrainRecord(samples, theta, x, config, vac, dark)


def calibration_record(config: PulseTrainConfig) -> PulseTrainRecord:
    """Vacuum and dark segments of ``config`` with a one-pulse vacuum signal."""
    return synthesize_train(vacuum_variance, replace(config, duration_pulses=1))


class PulseValues(NamedTuple):
    values: np.ndarray
    phases: np.ndarray
    vacuum_values: np.ndarray
    dark_values: np.ndarray
    scale: float
    window: tuple


def _check_window(config: PulseTrainConfig, offset: int, length: int) -> None:
    spp = config.samples_per_pulse
    if length < 1:
        raise InvalidParameterError("window length must be positive")
    if offset < 0 or offset + length > spp:
        raise InvalidParameterError(f"window [{offset}, {offset + length}) leaves the pulse period of {spp} samples")


def _window_sums(samples, config, offset, length):
    return kernels.integrate_windows(np.ascontiguousarray(samples), config.samples_per_pulse, offset, length)


def calibration_scale(vacuum_sums: np.ndarray) -> float:
    v = np.var(vacuum_sums, ddof=1)
    if not v > 0:
        raise InvalidParameterError("vacuum calibration has zero variance")
    return float(1 / np.sqrt(v))


def extract_pulse_quadratures(record: PulseTrainRecord, window_offset: int, window_len: int) -> PulseValues:
    """Integrate each pulse over the window and normalise so the vacuum variance is 1."""
    cfg = record.config
    _check_window(cfg, window_offset, window_len)
    vac = _window_sums(record.vacuum_samples, cfg, window_offset, window_len)
    scale = calibration_scale(vac)
    sig = _window_sums(record.samples, cfg, window_offset, window_len) * scale
    dark = _window_sums(record.dark_samples, cfg, window_offset, window_len) * scale
    phases = record.theta[: sig.size] if record.theta.size else np.empty(0)
    return PulseValues(sig, phases, vac * scale, dark, scale, (window_offset, window_len))


def stream_pulse_quadratures(variance_of_phase: Callable, config: PulseTrainConfig,
                             window_offset: int, window_len: int,
                             calibration: PulseTrainRecord | None = None,
                             keep_pulses: int = 0) -> tuple:
    """Same values as ``extract_pulse_quadratures(synthesize_train(...))`` without
    holding the signal samples in memory.

    ``calibration`` supplies already synthesised vacuum/dark segments (they
    only depend on the seed). Returns ``(PulseValues, head)`` where ``head``
    is a record of the first ``keep_pulses`` signal pulses (or None).
    """
    _check_window(config, window_offset, window_len)
    if calibration is None:
        vac_s, _, _ = _collect(iter_segment(vacuum_variance, config, "vacuum"))
        dark_s, _, _ = _collect(iter_segment(None, config, "dark"))
    else:
        vac_s, dark_s = calibration.vacuum_samples, calibration.dark_samples
    vac = _window_sums(vac_s, config, window_offset, window_len)
    scale = calibration_scale(vac)
    dark = _window_sums(dark_s, config, window_offset, window_len) * scale
    values, phases, kept = [], [], []
    spp = config.samples_per_pulse
    for chunk in iter_segment(variance_of_phase, config, "signal"):
        values.append(_window_sums(chunk.samples, config, window_offset, window_len))
        phases.append(chunk.theta)
        if chunk.start < keep_pulses:
            n = min(keep_pulses - chunk.start, chunk.theta.size)
            kept.append(Chunk(chunk.start, chunk.samples[: n * spp], chunk.theta[:n], chunk.x[:n]))
    head = None
    if keep_pulses > 0:
        s, t, x = _collect(kept)
        head = PulseTrainRecord(s, t, x, replace(config, duration_pulses=t.size), vac_s, dark_s)
    pv = PulseValues(np.concatenate(values) * scale, np.concatenate(phases), vac * scale, dark, scale,
                     (window_offset, window_len))
    return pv, head


class IsolationCheck(NamedTuple):
    rho1: float
    threshold: float
    passed: bool
    n: int


def verify_pulse_isolation(values, phases=None, n_bins: int = 16) -> IsolationCheck:
    """Normalised lag-1 autocorrelation of per-pulse values.

    With ``phases`` the values are standardised within their phase bin first,
    so the slow variance modulation does not enter. Passes iff
    ``|rho_1| < 3/sqrt(N)``.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 1000:
        raise InvalidParameterError(f"isolation test needs at least 1000 pulses, got {n}")
    if phases is not None and len(phases):
        bins = phase_bins(phases, n_bins)
        counts, sums, sumsq = kernels.bin_moments(v, bins, n_bins)
        mean = np.divide(sums, counts, out=np.zeros(n_bins), where=counts > 0)
        var = np.divide(sumsq, counts, out=np.ones(n_bins), where=counts > 0) - mean**2
        z = (v - mean[bins]) / np.sqrt(np.where(var > 0, var, 1.0))[bins]
    else:
        z = v - v.mean()
    rho = float(np.dot(z[:-1], z[1:]) / np.dot(z, z))
    thr = 3 / np.sqrt(n)
    return IsolationCheck(rho, thr, abs(rho) < thr, n)


def phase_bins(phases, n_bins: int) -> np.ndarray:
    """Bin ``k`` is centred on ``k pi / n_bins``; angles are taken modulo pi."""
    t = np.mod(np.asarray(phases, dtype=float), np.pi)
    return (np.rint(t * n_bins / np.pi).astype(np.int64)) % n_bins


@dataclass(frozen=True)
class SqueezingEstimate:
    squeeze_dB: float
    antisqueeze_dB: float
    standard_error_dB: tuple  # (squeeze, antisqueeze)
    n_pulses_used: int
    window: tuple = ()
    bins: tuple = ()  # (squeezed bin, antisqueezed bin)
    bin_variances: tuple = ()
    electronic_noise_subtracted: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["standard_error_dB"] = list(self.standard_error_dB)
        d["window"] = list(self.window)
        d["bins"] = list(self.bins)
        d["bin_variances"] = [float(x) for x in self.bin_variances]
        return d


class _Moments(NamedTuple):
    n: int
    var: float


def _moments(values) -> _Moments:
    v = np.asarray(values, dtype=float)
    return _Moments(v.size, float(np.var(v, ddof=1)))


def _ratio_and_error(sig: _Moments, vac: _Moments, dark: _Moments | None):
    d = dark.var if dark is not None else 0.0
    den = vac.var - d
    if not den > 0:
        raise InvalidParameterError("vacuum variance does not exceed the electronic noise")
    ratio = (sig.var - d) / den
    # chi-squared sampling variance of an estimated variance: 2 s^4 / (n - 1)
    var_terms = [(1 / den) ** 2 * 2 * sig.var**2 / (sig.n - 1), (ratio / den) ** 2 * 2 * vac.var**2 / (vac.n - 1)]
    if dark is not None:
        var_terms.append(((ratio - 1) / den) ** 2 * 2 * dark.var**2 / (dark.n - 1))
    return ratio, float(np.sqrt(sum(var_terms)))


def estimate_squeezing(values, phases, vacuum_values, dark_values=None, n_bins: int = 16,
                       block: int | None = None) -> SqueezingEstimate:
    """Squeezing and antisqueezing from the extremal phase bins.

    Values are binned by LO phase; the bins with the lowest and highest
    variance are kept and the rest discarded. Each is divided by the vacuum
    variance (after subtracting the dark variance when ``dark_values`` is
    given). If ``phases`` is None, consecutive blocks of ``block`` pulses stand
    in for phase bins (the piezo moves slowly) and the lowest/highest-variance
    ``1/n_bins`` of the blocks are pooled.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise InvalidParameterError("need at least two pulses")
    vac = _moments(vacuum_values)
    dark = _moments(dark_values) if dark_values is not None and len(dark_values) > 1 else None

    if phases is not None and len(phases):
        bins = phase_bins(phases[: v.size], n_bins)
        counts, sums, sumsq = kernels.bin_moments(v, bins, n_bins)
        ok = counts > 1
        mean = np.divide(sums, counts, out=np.zeros(n_bins), where=ok)
        var = np.where(ok, (sumsq - counts * mean**2) / np.maximum(counts - 1, 1), np.nan)
        lo, hi = int(np.nanargmin(var)), int(np.nanargmax(var))
        sig_lo, sig_hi = _Moments(int(counts[lo]), float(var[lo])), _Moments(int(counts[hi]), float(var[hi]))
        bin_vars = tuple(float(x) for x in var)
        used = int(counts[lo] + counts[hi])
        chosen = (lo, hi)
    else:
        if block is None:
            block = max(100, v.size // (8 * n_bins))
        n_blocks = v.size // block
        if n_blocks < 2:
            raise InvalidParameterError("not enough pulses to form variance blocks")
        blocks = v[: n_blocks * block].reshape(n_blocks, block)
        bvar = blocks.var(axis=1, ddof=1)
        k = max(1, n_blocks // n_bins)
        order = np.argsort(bvar, kind="stable")
        sig_lo = _moments(blocks[order[:k]].ravel())
        sig_hi = _moments(blocks[order[-k:]].ravel())
        bin_vars = ()
        used = 2 * k * block
        chosen = ()

    r_lo, e_lo = _ratio_and_error(sig_lo, vac, dark)
    r_hi, e_hi = _ratio_and_error(sig_hi, vac, dark)
    return SqueezingEstimate(
        variance_to_dB(r_lo),
        variance_to_dB(r_hi),
        (DB_PER_NEPER * e_lo / r_lo, DB_PER_NEPER * e_hi / r_hi),
        used,
        bins=chosen,
        bin_variances=bin_vars,
        electronic_noise_subtracted=dark is not None,
    )


class WindowChoice(NamedTuple):
    offset: int
    length: int
    snr: float
    rho1: float


def _pulse_covariances(samples: np.ndarray, spp: int, max_pulses: int | None):
    """Zero-lag and lag-1 covariance of the per-period sample vectors."""
    n = samples.size // spp
    if max_pulses is not None:
        n = min(n, max_pulses)
    x = samples[: n * spp].reshape(n, spp)
    x = x - x.mean(axis=0)
    c0 = x.T @ x / n
    c1 = x[:-1].T @ x[1:] / (n - 1)
    return c0, c1, n


def _block_sums(c: np.ndarray) -> np.ndarray:
    """``P[a, b] = sum(c[:a, :b])`` so any sub-block sum is four lookups."""
    p = np.zeros((c.shape[0] + 1, c.shape[1] + 1))
    p[1:, 1:] = c.cumsum(axis=0).cumsum(axis=1)
    return p


def window_statistics(record: PulseTrainRecord, max_pulses: int | None = None):
    """SNR and lag-1 correlation of every window ``(offset, length)`` inside the period.

    Returns arrays indexed ``[offset, length]`` (NaN where the window leaves
    the period) and the number of vacuum pulses used.
    """
    spp = record.config.samples_per_pulse
    c0, c1, n = _pulse_covariances(record.vacuum_samples, spp, max_pulses)
    dark = record.dark_samples
    sigma2 = float(np.mean(dark**2)) if dark.size else 0.0
    p0, p1 = _block_sums(c0), _block_sums(c1)
    o = np.arange(spp)[:, None]
    ln = np.arange(spp + 1)[None, :]
    e = o + ln
    valid = (e <= spp) & (ln >= 1)
    e = np.minimum(e, spp)
    o_b = np.broadcast_to(o, e.shape)

    def sub(p):
        return p[e, e] - p[o_b, e] - p[e, o_b] + p[o_b, o_b]

    total = sub(p0)
    cross = sub(p1)
    noise = ln * sigma2
    signal = total - noise
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = np.where(noise > 0, signal / noise, np.where(signal > 0, np.inf, 0.0))
        rho = np.where(total > 0, cross / total, 0.0)
    snr = np.where(valid, snr, np.nan)
    rho = np.where(valid, rho, np.nan)
    return snr, rho, n


def optimize_window(record: PulseTrainRecord, max_pulses: int | None = 50_000) -> WindowChoice:
    """Window maximising the per-pulse SNR among those passing the isolation test.

    SNR is the vacuum (shot-noise) variance captured by the window over the
    electronic-noise variance it collects; the isolation test is
    ``|rho_1| < 3/sqrt(N)`` on the vacuum reference. Ties go to the earliest,
    then shortest, window.
    """
    snr, rho, n = window_statistics(record, max_pulses)
    if n < 1000:
        raise InvalidParameterError(f"vacuum reference has {n} pulses; at least 1000 are needed")
    ok = np.isfinite(rho) & (np.abs(rho) < 3 / np.sqrt(n)) & ~np.isnan(snr)
    if not ok.any():
        raise InvalidParameterError("no window passes the pulse-isolation test")
    score = np.where(ok, snr, -np.inf)
    flat = int(np.argmax(score))  # first maximum in (offset, length) order
    off, ln = np.unravel_index(flat, score.shape)
    return WindowChoice(int(off), int(ln), float(snr[off, ln]), float(rho[off, ln]))
