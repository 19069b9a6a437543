"""Covariance reconstruction from single- and pair-mode variances.

A pair measurement uses the combined mode ``x_{i+j} = (x_i + x_j)/sqrt(2)``,
so ``Var(x_{i+j}) = (V_ii + V_jj)/2 + V_ij`` and the off-diagonal element is
recovered as ``V_ij = Var(x_{i+j}) - (Var(x_i) + Var(x_j))/2``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import IncompleteDatasetError, InvalidParameterError
from .gauss import GaussianState, Physicality, check_physicality, transform_state, variance_to_dB

DB_PER_NEPER = 10 / np.log(10)
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class VarianceDataset:
    """Measured variances in shot-noise units.

    ``single`` has shape ``(n, 2)`` holding ``(var_q, var_p)`` per mode;
    ``pairs`` maps ``(i, j)`` with ``i < j`` to ``(var_q, var_p)``.
    ``sigma_single``/``sigma_pairs`` hold standard errors in the same layout.
    """

    n_modes: int
    single: np.ndarray
    pairs: dict
    sigma_single: np.ndarray | None = None
    sigma_pairs: dict | None = None

    def __post_init__(self):
        single = np.asarray(self.single, dtype=float)
        if single.shape != (self.n_modes, 2):
            raise InvalidParameterError(f"single variances must have shape ({self.n_modes}, 2)")
        if np.any(~(single > 0)):
            raise InvalidParameterError("variances must be positive")
        pairs = {}
        for (i, j), v in self.pairs.items():
            i, j = int(i), int(j)
            if not (0 <= i < self.n_modes and 0 <= j < self.n_modes) or i == j:
                raise InvalidParameterError(f"pair ({i},{j}) is not a valid mode pair")
            v = np.asarray(v, dtype=float)
            if v.shape != (2,) or np.any(~(v > 0)):
                raise InvalidParameterError(f"pair ({i},{j}) needs two positive variances")
            pairs[(min(i, j), max(i, j))] = v
        object.__setattr__(self, "single", single)
        object.__setattr__(self, "pairs", pairs)

    def missing_pairs(self) -> list:
        return [p for p in combinations(range(self.n_modes), 2) if p not in self.pairs]

    @property
    def has_uncertainty(self) -> bool:
        return self.sigma_single is not None and self.sigma_pairs is not None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "i", "j", "var_q", "var_p", "sigma_q", "sigma_p"])
            for i in range(self.n_modes):
                s = self.sigma_single[i] if self.sigma_single is not None else (0.0, 0.0)
                w.writerow(["single", i, i, *map(repr, map(float, self.single[i])), *map(repr, map(float, s))])
            for (i, j), v in sorted(self.pairs.items()):
                s = self.sigma_pairs[(i, j)] if self.sigma_pairs is not None else (0.0, 0.0)
                w.writerow(["pair", i, j, *map(repr, map(float, v)), *map(repr, map(float, s))])

    @classmethod
    def from_csv(cls, path) -> "VarianceDataset":
        singles, pairs, s_singles, s_pairs = {}, {}, {}, {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                kind = row["kind"].strip()
                i, j = int(row["i"]), int(row["j"])
                v = (float(row["var_q"]), float(row["var_p"]))
                s = (float(row.get("sigma_q") or 0.0), float(row.get("sigma_p") or 0.0))
                if kind == "single":
                    singles[i], s_singles[i] = v, s
                elif kind == "pair":
                    key = (min(i, j), max(i, j))
                    pairs[key], s_pairs[key] = v, s
                else:
                    raise InvalidParameterError(f"unknown row kind {kind!r}")
        if not singles:
            raise InvalidParameterError("dataset contains no single-mode rows")
        n = max(singles) + 1
        if sorted(singles) != list(range(n)):
            missing = sorted(set(range(n)) - set(singles))
            raise IncompleteDatasetError([(k, k) for k in missing])
        return cls(
            n,
            np.array([singles[k] for k in range(n)]),
            pairs,
            np.array([s_singles[k] for k in range(n)]),
            {k: np.asarray(v) for k, v in s_pairs.items()},
        )


def simulate_variance_dataset(
    state: GaussianState,
    noise_dB: float = 0.0,
    rng: np.random.Generator | int | None = None,
    band_power_imbalance=None,
) -> VarianceDataset:
    """Variances a spectrum analyser would report for ``state``.

    Each entry is multiplied by ``10**(eps/10)``, ``eps ~ U(-noise_dB, noise_dB)``.
    ``band_power_imbalance`` (relative LO powers per mode) breaks the
    equal-power assumption of the pair modes to study the resulting bias.
    """
    if noise_dB < 0:
        raise InvalidParameterError("noise_dB must be non-negative")
    rng = np.random.default_rng(rng)
    n = state.n_modes
    blocks = (state.Vqq, state.Vpp)
    single = np.stack([np.diag(b) for b in blocks], axis=1)
    pairs = {}
    for i, j in combinations(range(n), 2):
        if band_power_imbalance is None:
            pairs[(i, j)] = np.array([(b[i, i] + b[j, j]) / 2 + b[i, j] for b in blocks])
            continue
        pi, pj = band_power_imbalance[i], band_power_imbalance[j]
        ci, cj = np.sqrt(pi / (pi + pj)), np.sqrt(pj / (pi + pj))
        pairs[(i, j)] = np.array([ci**2 * b[i, i] + cj**2 * b[j, j] + 2 * ci * cj * b[i, j] for b in blocks])

    # entry-wise noise, drawn in a fixed order: singles then pairs
    sigma_rel = noise_dB / (np.sqrt(3) * DB_PER_NEPER)
    if noise_dB > 0:
        single = single * 10 ** (rng.uniform(-noise_dB, noise_dB, single.shape) / 10)
        for key in sorted(pairs):
            pairs[key] = pairs[key] * 10 ** (rng.uniform(-noise_dB, noise_dB, 2) / 10)
    sigma_single = single * sigma_rel
    sigma_pairs = {k: v * sigma_rel for k, v in pairs.items()}
    return VarianceDataset(n, single, pairs, sigma_single, sigma_pairs)


@dataclass(frozen=True)
class Reconstruction:
    state: GaussianState
    physicality: Physicality

    def report(self) -> dict:
        return {
            "physical": bool(self.physicality.physical),
            "min_eigenvalue": self.physicality.min_eigenvalue,
        }


def reconstruct_covariance(data: VarianceDataset, basis: str = "frexel") -> Reconstruction:
    """Fill the covariance blocks from single and pair variances.

    The result is never altered to enforce physicality; the verdict is attached.
    """
    missing = data.missing_pairs()
    if missing:
        raise IncompleteDatasetError(missing)
    blocks = []
    for x in range(2):
        v = np.diag(data.single[:, x]).astype(float)
        for (i, j), pv in data.pairs.items():
            v[i, j] = v[j, i] = pv[x] - (data.single[i, x] + data.single[j, x]) / 2
        blocks.append(v)
    state = GaussianState(blocks[0], blocks[1], basis)
    phys = check_physicality(state)
    if not phys.physical:
        warnings.warn(
            f"reconstructed covariance is unphysical (min eigenvalue {phys.min_eigenvalue:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return Reconstruction(state, phys)


def gram_schmidt(vectors: np.ndarray) -> np.ndarray:
    """Orthonormalise the rows of ``vectors`` in order (modified Gram-Schmidt)."""
    out = np.array(vectors, dtype=float)
    for k in range(out.shape[0]):
        for m in range(k):
            out[k] -= (out[m] @ out[k]) * out[m]
        norm = np.linalg.norm(out[k])
        if norm < 1e-14:
            raise InvalidParameterError("eigenvectors are linearly dependent")
        out[k] /= norm
    return out


@dataclass(frozen=True)
class SupermodeRecovery:
    transform: np.ndarray
    squeeze_dB: np.ndarray
    antisqueeze_dB: np.ndarray
    relative_signs: np.ndarray
    state: GaussianState
    ties: tuple = ()
    driving_block: str = "p"

    @property
    def eigen_dB(self) -> list:
        return [
            {"squeeze_dB": float(s), "antisqueeze_dB": float(a)}
            for s, a in zip(self.squeeze_dB, self.antisqueeze_dB)
        ]

    def offdiagonal_residual(self) -> float:
        """Largest off-diagonal element left in the transformed q block."""
        v = self.state.Vqq
        return float(np.abs(v - np.diag(np.diag(v))).max()) if v.shape[0] > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "driving_block": self.driving_block,
            "transform": self.transform.tolist(),
            "eigen_dB": self.eigen_dB,
            "relative_signs": [int(s) for s in self.relative_signs],
            "ties": [list(t) for t in self.ties],
            "q_offdiagonal_residual": self.offdiagonal_residual(),
        }


def recover_supermodes(state: GaussianState) -> SupermodeRecovery:
    """Diagonalise the p block and impose its eigenbasis on both blocks.

    Eigenvectors of ``Vpp`` are ordered by descending eigenvalue, passed
    through Gram-Schmidt and stacked as the rows of ``transform``. For every
    recovered mode the smaller of the transformed ``Vqq``/``Vpp`` diagonal
    entries is reported as squeezing and the larger as antisqueezing;
    ``relative_signs`` is ``sign(Vpp_kk - 1)``, i.e. +1 for a mode squeezed in
    q and -1 for one squeezed in p.
    """
    evals, evecs = np.linalg.eigh(state.Vpp)
    order = np.argsort(-evals, kind="stable")
    evals, evecs = evals[order], evecs[:, order]
    t = gram_schmidt(evecs.T)
    # deterministic orientation: largest component of each row positive
    t *= np.sign(t[np.arange(t.shape[0]), np.argmax(np.abs(t), axis=1)])[:, None]

    ties = []
    rotated = transform_state(state, t)
    qdiag = np.abs(np.diag(rotated.Vqq) - 1)
    k = 0
    while k < evals.size:
        m = k + 1
        while m < evals.size and abs(evals[m] - evals[k]) < DEGENERACY_TOL:
            m += 1
        if m - k > 1:
            sub = np.arange(k, m)
            order_q = sub[np.argsort(-qdiag[sub], kind="stable")]
            t[k:m] = t[order_q]
            ties.append(tuple(int(i) for i in order_q))
        k = m
    if ties:
        rotated = transform_state(state, t)

    q = np.diag(rotated.Vqq)
    p = np.diag(rotated.Vpp)
    sq = variance_to_dB(np.minimum(q, p))
    asq = variance_to_dB(np.maximum(q, p))
    signs = np.where(p >= 1, 1, -1)
    return SupermodeRecovery(t, np.atleast_1d(sq), np.atleast_1d(asq), signs, rotated, tuple(ties))


@dataclass(frozen=True)
class Uncertainty:
    sigma_Vqq: np.ndarray
    sigma_Vpp: np.ndarray
    sigma_squeeze_dB: np.ndarray
    sigma_antisqueeze_dB: np.ndarray

    def to_dict(self) -> dict:
        return {k: v.tolist() for k, v in self.__dict__.items()}


def _measurement_jacobian(t_row: np.ndarray, n: int):
    """Coefficients of ``t^T V t`` with respect to single and pair variances."""
    s = t_row.sum()
    d_single = 2 * t_row**2 - t_row * s
    d_pair = {(i, j): 2 * t_row[i] * t_row[j] for i, j in combinations(range(n), 2)}
    return d_single, d_pair


def propagate_uncertainty(data: VarianceDataset, recovery: SupermodeRecovery | None = None) -> Uncertainty:
    """First-order error propagation of the measured variances.

    Matrix elements: ``sigma_ij^2 = sigma_{i+j}^2 + (sigma_i^2 + sigma_j^2)/4``.
    Recovered-mode variances ``t^T V t`` use the exact linear dependence on the
    raw measurements (singles enter both the diagonal and every off-diagonal
    element of their row), holding the transform ``t`` fixed.
    """
    if not data.has_uncertainty:
        raise InvalidParameterError("dataset carries no uncertainties")
    if recovery is None:
        recovery = recover_supermodes(reconstruct_covariance(data).state)
    n = data.n_modes
    sig = []
    for x in range(2):
        s = np.diag(data.sigma_single[:, x]).astype(float)
        for (i, j), sp in data.sigma_pairs.items():
            s[i, j] = s[j, i] = np.sqrt(sp[x] ** 2 + (data.sigma_single[i, x] ** 2 + data.sigma_single[j, x] ** 2) / 4)
        sig.append(s)

    var_mode = np.zeros((2, n))
    for k, row in enumerate(recovery.transform):
        d_single, d_pair = _measurement_jacobian(row, n)
        for x in range(2):
            v = np.sum((d_single * data.sigma_single[:, x]) ** 2)
            v += sum((c * data.sigma_pairs[key][x]) ** 2 for key, c in d_pair.items())
            var_mode[x, k] = v
    q = np.diag(recovery.state.Vqq)
    p = np.diag(recovery.state.Vpp)
    sd_q = DB_PER_NEPER * np.sqrt(var_mode[0]) / q
    sd_p = DB_PER_NEPER * np.sqrt(var_mode[1]) / p
    q_is_low = q <= p
    return Uncertainty(
        sig[0],
        sig[1],
        np.where(q_is_low, sd_q, sd_p),
        np.where(q_is_low, sd_p, sd_q),
    )
