"""Spectral mode functions, overlap integrals and covariance basis changes."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_hermite, gammaln

from .errors import InvalidParameterError, InvalidProjectionError
from .gauss import GaussianState
from .grid import FrequencyGrid, fwhm_nm_to_omega, nm_to_omega

ORTHONORMAL_TOL = 1e-8
TRUNCATION_LEVEL = 1e-3


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ModeBasis:
    """``functions[k]`` is mode k sampled on ``grid``; rows orthonormal under the grid weight."""

    grid: FrequencyGrid
    functions: np.ndarray
    label: str
    warnings: tuple = ()

    def __post_init__(self):
        f = np.array(self.functions, dtype=float)
        if f.ndim == 1:
            f = f[None, :]
        if f.shape[1] != self.grid.n_points:
            raise InvalidParameterError(
                f"mode functions have {f.shape[1]} samples, grid has {self.grid.n_points}"
            )
        if f.shape[0] > f.shape[1]:
            raise InvalidParameterError("more modes than grid points")
        f.setflags(write=False)
        object.__setattr__(self, "functions", f)

    @property
    def n_modes(self) -> int:
        return self.functions.shape[0]

    def gram(self) -> np.ndarray:
        return self.functions @ self.functions.T * self.grid.weight

    def is_orthonormal(self, tol: float = ORTHONORMAL_TOL) -> bool:
        return bool(np.abs(self.gram() - np.eye(self.n_modes)).max() < tol)

    def subset(self, n: int) -> "ModeBasis":
        return ModeBasis(self.grid, self.functions[:n], self.label, self.warnings)

    def to_csv(self, path) -> None:
        """Wavelength column followed by one column per mode."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["wavelength_nm"] + [f"{self.label}_{k}" for k in range(self.n_modes)])
            for i, wl in enumerate(self.grid.wavelength_nm):
                w.writerow([repr(float(wl))] + [repr(float(v)) for v in self.functions[:, i]])


def _hermite_function(n: int, x: np.ndarray) -> np.ndarray:
    # log-space normalisation keeps high orders finite
    log_norm = -0.5 * (n * np.log(2.0) + gammaln(n + 1) + 0.5 * np.log(np.pi))
    return eval_hermite(n, x) * np.exp(log_norm - x**2 / 2)


def _orthonormalize(raw: np.ndarray, weight: float) -> np.ndarray:
    """QR in the weighted inner product, keeping the sign of each input row."""
    q, r = np.linalg.qr((raw * np.sqrt(weight)).T)
    q = q * np.sign(np.diag(r))
    return q.T / np.sqrt(weight)


def hermite_gauss_basis(
    grid: FrequencyGrid,
    center_wavelength: float = 795.0,
    hg0_fwhm: float = 18.0,
    n_modes: int = 21,
    lo_window_nm: float | None = 40.0,
) -> ModeBasis:
    """Hermite-Gauss functions of frequency, re-orthonormalised on the grid.

    ``hg0_fwhm`` is the intensity FWHM of ``|HG_0|^2`` in nm. Modes whose edge
    amplitude exceeds 1e-3 of their peak, or whose classical extent
    (``sqrt(2n+1)`` widths) leaves an ``lo_window_nm`` band around the centre,
    are listed in ``warnings`` and reported with a :class:`TruncationWarning`.
    """
    if n_modes < 1:
        raise InvalidParameterError("n_modes must be >= 1")
    w0 = float(nm_to_omega(center_wavelength))
    # |psi_0(x)|^2 = exp(-x^2)/sqrt(pi): FWHM in x is 2 sqrt(ln 2)
    scale = fwhm_nm_to_omega(center_wavelength, hg0_fwhm) / (2 * np.sqrt(np.log(2)))
    x = (grid.omega - w0) / scale
    raw = np.array([_hermite_function(n, x) for n in range(n_modes)])
    funcs = _orthonormalize(raw, grid.weight)

    notes = []
    for n in range(n_modes):
        peak = np.abs(funcs[n]).max()
        edge = max(abs(funcs[n, 0]), abs(funcs[n, -1]))
        if edge > TRUNCATION_LEVEL * peak:
            notes.append(f"HG{n}: truncated by grid (edge/peak = {edge / peak:.2e})")
    if lo_window_nm is not None:
        half = np.sqrt(2 * np.arange(n_modes) + 1) * scale
        lo_half = fwhm_nm_to_omega(center_wavelength, lo_window_nm) / 2
        for n in np.nonzero(half > lo_half)[0]:
            notes.append(f"HG{n}: extent exceeds the {lo_window_nm:g} nm LO window")
    if any("grid" in s for s in notes):
        warnings.warn("; ".join(s for s in notes if "grid" in s), TruncationWarning, stacklevel=2)
    return ModeBasis(grid, funcs, "hg", tuple(notes))


@dataclass(frozen=True)
class FrexelSpec:
    band_edges: tuple

    def __post_init__(self):
        edges = tuple(float(e) for e in self.band_edges)
        if len(edges) < 2:
            raise InvalidParameterError("need at least one band (two edges)")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise InvalidParameterError("band edges must be strictly increasing")
        object.__setattr__(self, "band_edges", edges)

    @property
    def n_bands(self) -> int:
        return len(self.band_edges) - 1

    @classmethod
    def uniform(cls, start_nm: float = 775.0, width_nm: float = 5.0, n_bands: int = 8) -> "FrexelSpec":
        return cls(tuple(start_nm + width_nm * k for k in range(n_bands + 1)))


def lo_spectrum(
    grid: FrequencyGrid,
    center_nm: float = 795.0,
    source_fwhm_nm: float = 42.0,
    window_nm: float | None = 40.0,
) -> np.ndarray:
    """LO field amplitude: Gaussian source spectrum clipped to a flat-edged window."""
    w0 = float(nm_to_omega(center_nm))
    dw = fwhm_nm_to_omega(center_nm, source_fwhm_nm)
    amp = np.exp(-2 * np.log(2) * (grid.omega - w0) ** 2 / dw**2)
    if window_nm is not None:
        wl = grid.wavelength_nm
        amp = np.where(np.abs(wl - center_nm) <= window_nm / 2, amp, 0.0)
    return amp


def window_mask(grid: FrequencyGrid, center_nm: float = 795.0, width_nm: float = 40.0) -> np.ndarray:
    return (np.abs(grid.wavelength_nm - center_nm) <= width_nm / 2).astype(float)


def frexel_basis(grid: FrequencyGrid, spec: FrexelSpec, lo_amplitude=None) -> ModeBasis:
    """One mode per band: the (optionally LO-weighted) band indicator, normalised."""
    wl = grid.wavelength_nm
    lo_edges = spec.band_edges
    if lo_edges[0] < wl.min() or lo_edges[-1] > wl.max():
        raise InvalidParameterError(
            f"frexel bands {lo_edges[0]}-{lo_edges[-1]} nm exceed the grid {wl.min():.1f}-{wl.max():.1f} nm"
        )
    weight = np.ones(grid.n_points) if lo_amplitude is None else np.asarray(lo_amplitude, dtype=float)
    funcs = np.zeros((spec.n_bands, grid.n_points))
    for k in range(spec.n_bands):
        lo, hi = lo_edges[k], lo_edges[k + 1]
        # half-open bands so a grid point never belongs to two frexels
        inside = (wl >= lo) & (wl < hi) if k < spec.n_bands - 1 else (wl >= lo) & (wl <= hi)
        f = np.where(inside, weight, 0.0)
        norm = np.sqrt(np.sum(f**2) * grid.weight)
        if norm == 0:
            raise InvalidParameterError(f"frexel {k} ({lo}-{hi} nm) contains no grid point or no LO power")
        funcs[k] = f / norm
    return ModeBasis(grid, funcs, "frexel")


def band_powers(grid: FrequencyGrid, spec: FrexelSpec, lo_amplitude) -> np.ndarray:
    """Relative LO power in each band, normalised to the mean band power."""
    wl = grid.wavelength_nm
    amp2 = np.asarray(lo_amplitude, dtype=float) ** 2
    p = np.array(
        [
            amp2[(wl >= spec.band_edges[k]) & (wl < spec.band_edges[k + 1])].sum() * grid.weight
            for k in range(spec.n_bands)
        ]
    )
    return p / p.mean()


def overlap_matrix(a: ModeBasis, b: ModeBasis, weight=None) -> np.ndarray:
    """``O[k, j] = <a_k | w | b_j>``; ``weight`` is an optional real filter with ``|w| <= 1``."""
    if a.grid != b.grid:
        raise InvalidParameterError("mode bases live on different grids")
    fa = a.functions if weight is None else a.functions * np.asarray(weight, dtype=float)
    return fa @ b.functions.T * a.grid.weight


def project_state(state: GaussianState, O: np.ndarray, basis: str | None = None) -> GaussianState:
    """Covariance seen in the modes ``O`` maps onto; missing weight is vacuum.

    ``V_a = O (V_b - I) O^T + I`` on each block.
    """
    O = np.atleast_2d(np.asarray(O, dtype=float))
    if O.shape[1] != state.n_modes:
        raise InvalidProjectionError(
            f"overlap matrix has {O.shape[1]} columns, state has {state.n_modes} modes"
        )
    norms = np.sqrt(np.sum(O**2, axis=1))
    if np.any(norms > 1 + 1e-6):
        raise InvalidProjectionError(f"overlap row norm {norms.max():.9f} exceeds 1")
    eye_b = np.eye(state.n_modes)
    eye_a = np.eye(O.shape[0])
    vqq = O @ (state.Vqq - eye_b) @ O.T + eye_a
    vpp = O @ (state.Vpp - eye_b) @ O.T + eye_a
    return GaussianState((vqq + vqq.T) / 2, (vpp + vpp.T) / 2, basis or state.basis)
