"""Hot loops of the pulse simulator, compiled when available.

The Cython extension ``_core`` is used if it was built; otherwise, or when
``MMSQUEEZE_PURE_PYTHON=1`` is set, the NumPy versions in ``_pycore`` are
used. Both expose ``render_pulses``, ``integrate_windows`` and ``bin_moments``.
"""

import os

import numpy as np

from . import _pycore as python_backend

try:
    from . import _core as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("MMSQUEEZE_PURE_PYTHON", "") not in ("1", "true"):
    _impl = compiled_backend
    BACKEND = "cython"
else:
    _impl = python_backend
    BACKEND = "python"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def render_pulses(amps, spp, pulse_start, pulse_width, decay, state=0.0):
    """Filtered photocurrent of rectangular pulses with areas ``amps``; returns (samples, state)."""
    if pulse_start < 0 or pulse_width < 1 or pulse_start + pulse_width > spp:
        raise ValueError("pulse does not fit in the period")
    return _impl.render_pulses(_f64(amps), int(spp), int(pulse_start), int(pulse_width), float(decay), float(state))


def integrate_windows(samples, spp, offset, length):
    """Per-period window sums over every complete window."""
    if spp < 1 or offset < 0 or length < 1:
        raise ValueError("need spp >= 1, offset >= 0 and length >= 1")
    return _impl.integrate_windows(_f64(samples), int(spp), int(offset), int(length))


def bin_moments(values, bins, n_bins):
    """Per-bin (count, sum, sum of squares); the partial results of chunks add up."""
    return _impl.bin_moments(_f64(values), np.ascontiguousarray(bins, dtype=np.int64), int(n_bins))
