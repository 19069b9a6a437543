# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for pulse-train synthesis and per-pulse integration."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def render_pulses(const double[::1] amps, Py_ssize_t spp, Py_ssize_t pulse_start,
                  Py_ssize_t pulse_width, double decay, double state=0.0):
    """Rectangular pulses of area ``amps[m]`` through a one-pole low-pass.

    Returns the filtered samples and the filter state after the last sample.
    """
    cdef Py_ssize_t n = amps.shape[0]
    cdef Py_ssize_t m, k, base
    cdef double y = state
    cdef double gain = 1.0 - decay
    cdef double level
    out = np.empty(n * spp, dtype=np.float64)
    cdef double[::1] o = out
    for m in range(n):
        base = m * spp
        level = gain * amps[m] / pulse_width
        for k in range(pulse_start):
            y = decay * y
            o[base + k] = y
        for k in range(pulse_start, pulse_start + pulse_width):
            y = decay * y + level
            o[base + k] = y
        for k in range(pulse_start + pulse_width, spp):
            y = decay * y
            o[base + k] = y
    return out, y


def integrate_windows(const double[::1] samples, Py_ssize_t spp, Py_ssize_t offset,
                      Py_ssize_t length):
    """Sum of ``samples[m*spp + offset : m*spp + offset + length]`` for every complete window."""
    cdef Py_ssize_t total = samples.shape[0]
    cdef Py_ssize_t n_win = 0
    if total - offset - length >= 0:
        n_win = (total - offset - length) // spp + 1
    out = np.empty(n_win, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t m, k, start
    cdef double acc
    for m in range(n_win):
        start = m * spp + offset
        acc = 0.0
        for k in range(start, start + length):
            acc += samples[k]
        o[m] = acc
    return out


def bin_moments(const double[::1] values, const cnp.int64_t[::1] bins, Py_ssize_t n_bins):
    """Per-bin count, sum and sum of squares."""
    cdef Py_ssize_t n = values.shape[0]
    counts = np.zeros(n_bins, dtype=np.int64)
    sums = np.zeros(n_bins, dtype=np.float64)
    sumsq = np.zeros(n_bins, dtype=np.float64)
    cdef cnp.int64_t[::1] c = counts
    cdef double[::1] s = sums
    cdef double[::1] s2 = sumsq
    cdef Py_ssize_t i
    cdef cnp.int64_t b
    cdef double v
    for i in range(n):
        b = bins[i]
        if b < 0 or b >= n_bins:
            raise IndexError(f"bin index {b} outside [0, {n_bins})")
        v = values[i]
        c[b] += 1
        s[b] += v
        s2[b] += v * v
    return counts, sums, sumsq
