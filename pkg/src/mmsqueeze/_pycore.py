"""NumPy/SciPy implementations of the compiled kernels in ``_core.pyx``."""

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy.signal import lfilter


def render_pulses(amps, spp, pulse_start, pulse_width, decay, state=0.0):
    amps = np.ascontiguousarray(amps, dtype=np.float64)
    drive = np.zeros((amps.size, spp))
    drive[:, pulse_start : pulse_start + pulse_width] = (amps / pulse_width)[:, None]
    drive = drive.ravel()
    if drive.size == 0:
        return drive, state
    out, zf = lfilter([1.0 - decay], [1.0, -decay], drive, zi=[decay * state])
    return out, float(out[-1])


def integrate_windows(samples, spp, offset, length):
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    n_win = (samples.size - offset - length) // spp + 1 if samples.size - offset - length >= 0 else 0
    if n_win == 0:
        return np.empty(0)
    step = samples.strides[0]
    view = as_strided(samples[offset:], shape=(n_win, length), strides=(spp * step, step), writeable=False)
    return view.sum(axis=1)


def bin_moments(values, bins, n_bins):
    values = np.asarray(values, dtype=np.float64)
    bins = np.asarray(bins, dtype=np.int64)
    if bins.size and (bins.min() < 0 or bins.max() >= n_bins):
        raise IndexError(f"bin index outside [0, {n_bins})")
    counts = np.bincount(bins, minlength=n_bins).astype(np.int64)
    sums = np.bincount(bins, weights=values, minlength=n_bins)
    sumsq = np.bincount(bins, weights=values * values, minlength=n_bins)
    return counts, sums, sumsq
