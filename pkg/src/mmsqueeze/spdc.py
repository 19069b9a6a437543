"""Type-0 quasi-phase-matched SPDC: joint spectral amplitude and its supermodes."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, InfeasibleTargetError, InvalidParameterError, NumericalError
from .gauss import GaussianState, apply_loss, make_squeezed_vacuum, variance_to_dB
from .grid import FrequencyGrid, fwhm_nm_to_omega, nm_to_omega
from .modes import ModeBasis
from .sellmeier import DEFAULT_SELLMEIER, get_sellmeier

WAVEGUIDE_CORRECTIONS = ("degenerate", "none")


@dataclass(frozen=True)
class PumpEnvelope:
    """Gaussian pump; ``fwhm`` is the intensity FWHM in nm."""

    center_wavelength: float = 397.5
    fwhm: float = 0.7
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.fwhm > 0:
            raise InvalidParameterError("pump FWHM must be positive")
        if self.shape != "gaussian":
            raise ConfigurationError(f"unsupported pump shape {self.shape!r}")

    def amplitude(self, omega_sum):
        w0 = nm_to_omega(self.center_wavelength)
        dw = fwhm_nm_to_omega(self.center_wavelength, self.fwhm)
        # intensity FWHM dw <=> amplitude exp(-2 ln2 x^2 / dw^2)
        return np.exp(-2 * np.log(2) * (omega_sum - w0) ** 2 / dw**2)


@dataclass(frozen=True)
class PhaseMatchingSpec:
    """Poled-waveguide parameters.

    ``waveguide_correction="degenerate"`` adds the constant wavevector offset
    that makes the poling period phase-match exactly the degenerate process
    at ``temperature`` (the bulk index table does not describe the guided
    mode); ``"none"`` uses the bulk table as is.
    """

    poling_period: float = 3.19  # um
    interaction_length: float = 1.0  # mm
    temperature: float = 89.1  # C
    sellmeier_set: str = DEFAULT_SELLMEIER
    waveguide_correction: str = "degenerate"

    def __post_init__(self):
        if not self.poling_period > 0:
            raise InvalidParameterError("poling period must be positive")
        if not self.interaction_length > 0:
            raise InvalidParameterError("interaction length must be positive")
        if self.waveguide_correction not in WAVEGUIDE_CORRECTIONS:
            raise ConfigurationError(
                f"waveguide_correction must be one of {WAVEGUIDE_CORRECTIONS}, got {self.waveguide_correction!r}"
            )

    def bulk_mismatch(self, omega_s, omega_i):
        """``k_p - k_s - k_i - 2 pi / Lambda`` in rad/m from the index table alone."""
        table = get_sellmeier(self.sellmeier_set)
        t = self.temperature
        return (
            table.k(omega_s + omega_i, t)
            - table.k(omega_s, t)
            - table.k(omega_i, t)
            - 2 * np.pi / (self.poling_period * 1e-6)
        )

    def waveguide_offset(self, pump: PumpEnvelope) -> float:
        if self.waveguide_correction == "none":
            return 0.0
        w_deg = float(nm_to_omega(2 * pump.center_wavelength))
        return -float(self.bulk_mismatch(w_deg, w_deg))


@dataclass(frozen=True)
class JointSpectralAmplitude:
    grid: FrequencyGrid
    amplitude: np.ndarray
    sellmeier_set: str = DEFAULT_SELLMEIER
    waveguide_offset: float = 0.0

    def symmetry_error(self) -> float:
        return float(np.abs(self.amplitude - self.amplitude.T).max())

    def to_csv(self, path) -> None:
        w = self.grid.omega
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["omega_s", "omega_i", "re_A", "im_A"])
            for a in range(w.size):
                row = self.amplitude[a]
                for b in range(w.size):
                    out.writerow([repr(float(w[a])), repr(float(w[b])), repr(float(row[b].real)), repr(float(row[b].imag))])


def compute_jsa(
    pump: PumpEnvelope,
    pm: PhaseMatchingSpec,
    grid: FrequencyGrid,
    *,
    force_phase_matched: bool = False,
    flat_pump: bool = False,
) -> JointSpectralAmplitude:
    """Pump envelope times ``sinc(dk l / 2)``, normalised to unit Frobenius norm.

    ``force_phase_matched`` sets ``dk = 0`` everywhere; together with
    ``flat_pump`` (infinitely broadband pump) the JSA becomes a constant and
    therefore separable.
    """
    deg_nm = 2 * pump.center_wavelength
    if not grid.covers(deg_nm):
        raise ConfigurationError(
            f"grid {grid.lambda_min}-{grid.lambda_max} nm does not cover the degenerate wavelength {deg_nm} nm"
        )
    if np.abs(grid.wavelength_nm - deg_nm).min() > 0.5:
        raise ConfigurationError(f"no grid point within 0.5 nm of the degenerate wavelength {deg_nm} nm")
    table = get_sellmeier(pm.sellmeier_set)  # fail early on unknown tables

    w = grid.omega
    ws, wi = w[:, None], w[None, :]
    alpha = np.ones((w.size, w.size)) if flat_pump else pump.amplitude(ws + wi)
    offset = pm.waveguide_offset(pump)
    if force_phase_matched:
        phi = np.ones_like(alpha)
    else:
        dk = pm.bulk_mismatch(ws, wi) + offset
        # symmetrise against rounding so A(ws, wi) == A(wi, ws) bit for bit
        dk = (dk + dk.T) / 2
        phi = np.sinc(dk * pm.interaction_length * 1e-3 / (2 * np.pi))
    amp = (alpha * phi).astype(complex)
    norm = np.linalg.norm(amp)
    if norm == 0 or not np.isfinite(norm):
        raise NumericalError("joint spectral amplitude vanishes on the grid")
    return JointSpectralAmplitude(grid, amp / norm, table.name, offset)


@dataclass(frozen=True)
class SchmidtDecomposition:
    lambdas: np.ndarray
    modes: ModeBasis
    schmidt_K: float
    sellmeier_set: str = DEFAULT_SELLMEIER
    takagi_mismatch: float = 0.0
    signs: np.ndarray | None = None

    def __post_init__(self):
        if self.signs is None:
            object.__setattr__(self, "signs", np.ones_like(self.lambdas))

    def to_dict(self) -> dict:
        return {
            "lambdas": [float(x) for x in self.lambdas],
            "signs": [int(x) for x in self.signs],
            "K": float(self.schmidt_K),
            "sellmeier_set": self.sellmeier_set,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def schmidt_number(lambdas) -> float:
    lam = np.asarray(lambdas, dtype=float)
    return float(1.0 / np.sum(lam**4))


def schmidt_decompose(jsa: JointSpectralAmplitude, n_keep: int | None = None) -> SchmidtDecomposition:
    """SVD of the JSA; ``lambdas`` are the singular values with ``sum(lambda^2) = 1``.

    ``K`` uses the full spectrum, ``lambdas`` and ``modes`` keep the leading
    ``n_keep`` entries. ``signs[j]`` is the sign of ``S_j^T A S_j``: supermodes
    with a negative sign are squeezed in p rather than q. ``takagi_mismatch``
    is the largest ``1 - |<conj v_j|u_j>|`` over modes with non-degenerate
    singular values; it vanishes for a signal/idler-symmetric JSA.
    """
    a = jsa.amplitude
    n = a.shape[0]
    if n_keep is None:
        n_keep = n
    if not 1 <= n_keep <= n:
        raise InvalidParameterError(f"n_keep must be in [1, {n}], got {n_keep}")
    try:
        u, s, vh = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(np.abs(a))
        raise NumericalError(f"SVD failed ({exc}); |A| condition number {cond:.3e}") from exc
    total = np.sqrt(np.sum(s**2))
    lam = s / total

    uk = u[:, :n_keep]
    # fix the global phase of every mode so its largest sample is real and positive
    pivot = uk[np.argmax(np.abs(uk), axis=0), np.arange(n_keep)]
    uk = uk * (np.abs(pivot) / pivot)
    if np.abs(uk.imag).max() > 1e-9 * np.abs(uk).max():
        raise NumericalError("supermodes are not real up to a global phase")
    funcs = uk.real.T / np.sqrt(jsa.grid.weight)

    rel_gap = np.full(n_keep, np.inf)
    for j in range(n_keep):
        nb = [lam[k] for k in (j - 1, j + 1) if 0 <= k < n]
        if nb and lam[j] > 0:
            rel_gap[j] = min(abs(lam[j] - x) for x in nb) / lam[j]
    checked = np.nonzero((rel_gap > 1e-6) & (lam[:n_keep] > 1e-8))[0]
    mismatch = 0.0
    if checked.size:
        dots = np.abs(np.sum(np.conj(vh[checked]) * u[:, checked].T, axis=1))
        mismatch = float(np.max(1 - dots))

    signs = np.sign(np.einsum("kj,kl,lj->j", uk.real, a, uk.real).real)
    signs[signs == 0] = 1.0

    modes = ModeBasis(jsa.grid, funcs, "supermode")
    return SchmidtDecomposition(
        lam[:n_keep].copy(), modes, schmidt_number(lam), jsa.sellmeier_set, mismatch, signs
    )


def squeezing_spectrum(dec: SchmidtDecomposition, gain: float, n_modes: int | None = None) -> np.ndarray:
    """``r_j = gain * lambda_j`` for the leading ``n_modes`` supermodes."""
    if not gain >= 0 or not np.isfinite(gain):
        raise InvalidParameterError(f"gain must be non-negative and finite, got {gain}")
    n = dec.lambdas.size if n_modes is None else n_modes
    if not 1 <= n <= dec.lambdas.size:
        raise InvalidParameterError(f"n_modes must be in [1, {dec.lambdas.size}]")
    return gain * dec.lambdas[:n]


def supermode_state(
    dec: SchmidtDecomposition, gain: float, eta: float = 1.0, n_modes: int | None = None
) -> GaussianState:
    """Squeezed supermodes (q or p according to ``dec.signs``) after loss ``eta``."""
    r = squeezing_spectrum(dec, gain, n_modes)
    state = make_squeezed_vacuum(r * dec.signs[: r.size], basis="supermode")
    return apply_loss(state, eta)


def lossy_squeezing_dB(r, eta: float):
    """Squeezed and antisqueezed variance in dB of a pure squeezer sent through loss ``eta``."""
    r = np.asarray(r, dtype=float)
    sq = variance_to_dB(eta * np.exp(-2 * r) + 1 - eta)
    asq = variance_to_dB(eta * np.exp(2 * r) + 1 - eta)
    return sq, asq


def calibrate_gain(dec: SchmidtDecomposition, target_dB: float, eta: float, upper: float = 10.0) -> float:
    """Gain making supermode 0 show ``target_dB`` of squeezing after loss ``eta``."""
    if not target_dB < 0:
        raise InvalidParameterError("target squeezing must be negative (below shot noise)")
    if not 0 < eta <= 1:
        raise InvalidParameterError(f"eta must lie in (0, 1], got {eta}")
    if eta < 1:
        floor = 10 * np.log10(1 - eta)
        if target_dB <= floor:
            raise InfeasibleTargetError(
                f"{target_dB} dB unreachable with eta={eta}: loss floor is {floor:.3f} dB"
            )
    lam0 = float(dec.lambdas[0])

    def excess(g):
        return float(lossy_squeezing_dB(g * lam0, eta)[0]) - target_dB

    if excess(upper) > 0:
        raise InfeasibleTargetError(f"{target_dB} dB needs gain beyond the search bracket [0, {upper}]")
    return float(optimize.bisect(excess, 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
