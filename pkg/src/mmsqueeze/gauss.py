"""Covariance-matrix representation of zero-mean multimode Gaussian states.

Conventions: shot noise (vacuum) variance is 1, quadratures are ordered
``(q_1 .. q_n, p_1 .. p_n)`` and q/p cross-correlations are absent, so a state
is fully described by the two real symmetric blocks ``Vqq`` and ``Vpp``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InvalidParameterError

PHYSICALITY_TOL = 1e-9
SYMMETRY_RTOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianState:
    """Block-diagonal covariance matrix ``diag(Vqq, Vpp)``.

    ``basis`` names the mode basis the quadratures refer to (``"supermode"``,
    ``"frexel"``, ``"hg"``, ...).
    """

    Vqq: np.ndarray
    Vpp: np.ndarray
    basis: str = "unspecified"

    def __post_init__(self):
        vqq = _frozen(self.Vqq)
        vpp = _frozen(self.Vpp)
        if vqq.ndim != 2 or vqq.shape[0] != vqq.shape[1] or vqq.shape[0] == 0:
            raise InvalidParameterError(f"Vqq must be a non-empty square matrix, got shape {vqq.shape}")
        if vpp.shape != vqq.shape:
            raise InvalidParameterError(f"Vpp shape {vpp.shape} differs from Vqq shape {vqq.shape}")
        for name, block in (("Vqq", vqq), ("Vpp", vpp)):
            if not np.all(np.isfinite(block)):
                raise InvalidParameterError(f"{name} contains non-finite entries")
            scale = max(np.abs(block).max(), 1.0)
            if np.abs(block - block.T).max() > SYMMETRY_RTOL * scale:
                raise InvalidParameterError(f"{name} is not symmetric")
        object.__setattr__(self, "Vqq", vqq)
        object.__setattr__(self, "Vpp", vpp)

    @property
    def n_modes(self) -> int:
        return self.Vqq.shape[0]

    @property
    def V(self) -> np.ndarray:
        """Full ``2n x 2n`` covariance matrix in (q..., p...) order."""
        n = self.n_modes
        v = np.zeros((2 * n, 2 * n))
        v[:n, :n] = self.Vqq
        v[n:, n:] = self.Vpp
        return v

    @classmethod
    def vacuum(cls, n_modes: int, basis: str = "unspecified") -> "GaussianState":
        eye = np.eye(n_modes)
        return cls(eye, eye, basis)

    def with_basis(self, basis: str) -> "GaussianState":
        return GaussianState(self.Vqq, self.Vpp, basis)

    def to_dict(self) -> dict:
        return {
            "n_modes": self.n_modes,
            "basis": self.basis,
            "Vqq": self.Vqq.tolist(),
            "Vpp": self.Vpp.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianState":
        try:
            state = cls(d["Vqq"], d["Vpp"], d.get("basis", "unspecified"))
        except KeyError as exc:
            raise InvalidParameterError(f"state JSON lacks field {exc}") from None
        if "n_modes" in d and int(d["n_modes"]) != state.n_modes:
            raise InvalidParameterError(
                f"n_modes={d['n_modes']} disagrees with matrix size {state.n_modes}"
            )
        return state

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "GaussianState":
        return cls.from_dict(json.loads(text))


def symplectic_form(n_modes: int) -> np.ndarray:
    """``J = [[0, -I], [I, 0]]`` for (q..., p...) ordering."""
    if n_modes < 1:
        raise InvalidParameterError("n_modes must be positive")
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, -eye], [eye, zero]])


def make_squeezed_vacuum(r_list, basis: str = "supermode") -> GaussianState:
    """Product of single-mode squeezed vacua; positive ``r`` squeezes q."""
    r = np.atleast_1d(np.asarray(r_list, dtype=float))
    if r.ndim != 1 or r.size == 0:
        raise InvalidParameterError("r_list must be a non-empty vector")
    if not np.all(np.isfinite(r)):
        raise InvalidParameterError("squeezing parameters must be finite")
    return GaussianState(np.diag(np.exp(-2 * r)), np.diag(np.exp(2 * r)), basis)


def apply_loss(state: GaussianState, eta: float) -> GaussianState:
    """Pure-loss channel of transmission ``eta`` applied to every mode."""
    if not (0.0 <= eta <= 1.0) or not np.isfinite(eta):
        raise InvalidParameterError(f"eta must lie in [0, 1], got {eta}")
    eye = np.eye(state.n_modes)
    return GaussianState(
        eta * state.Vqq + (1 - eta) * eye,
        eta * state.Vpp + (1 - eta) * eye,
        state.basis,
    )


def variance_to_dB(v):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("variance must be strictly positive to express in dB")
    out = 10 * np.log10(v)
    return float(out) if out.ndim == 0 else out


def dB_to_variance(db):
    out = 10 ** (np.asarray(db, dtype=float) / 10)
    return float(out) if out.ndim == 0 else out


def r_from_dB(db: float) -> float:
    """Squeezing parameter of a pure state whose squeezed variance is ``db``."""
    return -np.log(10 ** (db / 20))


class Physicality(NamedTuple):
    physical: bool
    min_eigenvalue: float


def check_physicality(state: GaussianState, tol: float = PHYSICALITY_TOL) -> Physicality:
    """Smallest eigenvalue of the Hermitian matrix ``V + iJ`` and its verdict."""
    m = state.V + 1j * symplectic_form(state.n_modes)
    lam = float(np.linalg.eigvalsh(m)[0])
    return Physicality(lam >= -tol, lam)


@dataclass(frozen=True)
class SqueezingReportEntry:
    mode_index: int
    squeeze_dB: float
    antisqueeze_dB: float


def squeezing_report(state: GaussianState) -> list[SqueezingReportEntry]:
    """Per-mode diagonal variances in dB relative to shot noise."""
    q = variance_to_dB(np.diag(state.Vqq))
    p = variance_to_dB(np.diag(state.Vpp))
    return [
        SqueezingReportEntry(i, float(q[i]), float(p[i])) for i in range(state.n_modes)
    ]


def squeezing_table(state: GaussianState) -> list[SqueezingReportEntry]:
    """Per-mode extremes of the phase-scanned variance, in dB.

    Without q/p cross terms the variance ``Vqq cos^2 + Vpp sin^2`` is extremal
    on the q and p axes, so the minimum and maximum diagonal entry suffice.
    """
    q = np.diag(state.Vqq)
    p = np.diag(state.Vpp)
    lo = variance_to_dB(np.minimum(q, p))
    hi = variance_to_dB(np.maximum(q, p))
    return [SqueezingReportEntry(i, float(lo[i]), float(hi[i])) for i in range(state.n_modes)]


def transform_state(state: GaussianState, O: np.ndarray, basis: str | None = None) -> GaussianState:
    """Congruence ``O V O^T`` applied identically to both blocks."""
    O = np.asarray(O, dtype=float)
    vqq = O @ state.Vqq @ O.T
    vpp = O @ state.Vpp @ O.T
    return GaussianState(
        (vqq + vqq.T) / 2, (vpp + vpp.T) / 2, state.basis if basis is None else basis
    )
