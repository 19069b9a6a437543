from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidParameterError
from .sellmeier import C_LIGHT


def nm_to_omega(wl_nm):
    return 2 * np.pi * C_LIGHT / (np.asarray(wl_nm, dtype=float) * 1e-9)


def omega_to_nm(omega):
    return 2 * np.pi * C_LIGHT / np.asarray(omega, dtype=float) * 1e9


def fwhm_nm_to_omega(center_nm: float, fwhm_nm: float) -> float:
    """Angular-frequency FWHM of a narrow band given in wavelength units."""
    return 2 * np.pi * C_LIGHT * fwhm_nm * 1e-9 / (center_nm * 1e-9) ** 2


@dataclass(frozen=True)
class FrequencyGrid:
    """Points uniformly spaced in angular frequency between two wavelengths.

    The quadrature weight of every point is the spacing in rad/s, so the
    discrete inner product is ``sum(f * g) * spacing``.
    """

    n_points: int = 512
    lambda_min: float = 695.0
    lambda_max: float = 895.0

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 16:
            raise InvalidParameterError(f"grid needs at least 16 points, got {self.n_points}")
        if not (0 < self.lambda_min < self.lambda_max):
            raise InvalidParameterError(
                f"need 0 < lambda_min < lambda_max, got {self.lambda_min}, {self.lambda_max}"
            )

    @cached_property
    def omega(self) -> np.ndarray:
        w = np.linspace(nm_to_omega(self.lambda_max), nm_to_omega(self.lambda_min), self.n_points)
        w.setflags(write=False)
        return w

    @property
    def spacing(self) -> float:
        return float(self.omega[1] - self.omega[0])

    @property
    def weight(self) -> float:
        return self.spacing

    @cached_property
    def wavelength_nm(self) -> np.ndarray:
        wl = omega_to_nm(self.omega)
        wl.setflags(write=False)
        return wl

    def covers(self, wl_nm: float, tol_nm: float = 0.0) -> bool:
        return self.lambda_min - tol_nm <= wl_nm <= self.lambda_max + tol_nm

    def nearest_index(self, wl_nm: float) -> int:
        return int(np.argmin(np.abs(self.wavelength_nm - wl_nm)))

    def to_dict(self) -> dict:
        return {"n_points": self.n_points, "lambda_min_nm": self.lambda_min, "lambda_max_nm": self.lambda_max}
