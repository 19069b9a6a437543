"""Refractive-index tables for the nonlinear crystal.

Only z-polarised KTP is shipped: every wave of a type-0 process sees n_z.
Wavelengths are in micrometres, temperatures in degrees Celsius.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError

C_LIGHT = 299_792_458.0


def _ktp_z_fradkin_emanueli(wl_um, temperature_c):
    # room-temperature dispersion (Fradkin et al. 1999, n_z)
    A, B, C, D, E, F = 2.12725, 1.18431, 5.14852e-2, 0.6603, 100.00507, 9.68956e-3
    l2 = wl_um**2
    n25 = np.sqrt(A + B / (1 - C / l2) + D / (1 - E / l2) - F * l2)
    # thermo-optic correction (Emanueli & Arie 2003), referenced to 25 C
    a = (9.9587e-6, 9.9228e-6, -8.9603e-6, 4.1010e-6)
    b = (-1.1882e-8, 10.459e-8, -9.8136e-8, 3.1481e-8)
    n1 = sum(a[m] / wl_um**m for m in range(4))
    n2 = sum(b[m] / wl_um**m for m in range(4))
    dt = temperature_c - 25.0
    return n25 + n1 * dt + n2 * dt**2


@dataclass(frozen=True)
class SellmeierSet:
    name: str
    description: str
    index: Callable

    def n(self, wl_um, temperature_c):
        return self.index(np.asarray(wl_um, dtype=float), temperature_c)

    def k(self, omega, temperature_c):
        """Wavenumber in rad/m for angular frequency ``omega`` in rad/s."""
        omega = np.asarray(omega, dtype=float)
        wl_um = 2 * np.pi * C_LIGHT / omega * 1e6
        return self.n(wl_um, temperature_c) * omega / C_LIGHT


SELLMEIER_SETS = {
    s.name: s
    for s in (
        SellmeierSet(
            "ktp_z_fradkin1999_emanueli2003",
            "KTP n_z: Fradkin et al. (1999) dispersion, Emanueli & Arie (2003) temperature terms",
            _ktp_z_fradkin_emanueli,
        ),
    )
}
DEFAULT_SELLMEIER = "ktp_z_fradkin1999_emanueli2003"


def get_sellmeier(name: str) -> SellmeierSet:
    try:
        return SELLMEIER_SETS[name]
    except KeyError:
        known = ", ".join(sorted(SELLMEIER_SETS))
        raise ConfigurationError(f"unknown Sellmeier set {name!r}; known sets: {known}") from None
