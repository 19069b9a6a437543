"""PPT (partial transposition) scan over all bipartitions of a Gaussian state."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NumericalError
from .gauss import GaussianState, symplectic_form

ENTANGLEMENT_TOL = 1e-9

# Centre-out pairs of 8 frexels (0-indexed) and the names of their bands.
DEFAULT_PAIRS = ((3, 4), (2, 5), (1, 6))
DEFAULT_LABELS = ("splits-4-5", "splits-3-6", "splits-2-7")
NO_SPLIT = "splits-none"


@dataclass(frozen=True)
class Bipartition:
    """Mode ``i`` is on side B iff bit ``i`` of ``mask`` is set."""

    n_modes: int
    mask: int

    def __post_init__(self):
        full = (1 << self.n_modes) - 1
        if not 0 < self.mask < full:
            raise InvalidParameterError(f"mask {self.mask:#b} leaves a side empty")

    @property
    def side_b(self) -> tuple:
        return tuple(i for i in range(self.n_modes) if self.mask >> i & 1)

    @property
    def side_a(self) -> tuple:
        return tuple(i for i in range(self.n_modes) if not self.mask >> i & 1)

    @property
    def is_canonical(self) -> bool:
        return not self.mask & 1

    def complement(self) -> "Bipartition":
        return Bipartition(self.n_modes, ((1 << self.n_modes) - 1) ^ self.mask)

    def canonical(self) -> "Bipartition":
        return self if self.is_canonical else self.complement()

    def __str__(self):
        a = "".join(map(str, self.side_a))
        b = "".join(map(str, self.side_b))
        return f"{a}|{b}"


def enumerate_bipartitions(n: int) -> list[Bipartition]:
    """All ``2**(n-1) - 1`` bipartitions with mode 0 on side A, by ascending mask."""
    if not 2 <= n <= 24:
        raise InvalidParameterError(f"n must lie in [2, 24], got {n}")
    return [Bipartition(n, m) for m in range(2, 1 << n, 2)]


def _sign_flips(n: int, masks: np.ndarray) -> np.ndarray:
    bits = (masks[:, None] >> np.arange(n)[None, :]) & 1
    return np.concatenate([np.ones((masks.size, n)), 1 - 2 * bits], axis=1)


def _ppt_values(state: GaussianState, masks, canonicalize: bool = True) -> np.ndarray:
    n = state.n_modes
    masks = np.asarray(masks, dtype=np.int64)
    if canonicalize:
        # a bipartition and its complement share one evaluation
        masks = np.where(masks & 1, masks ^ ((1 << n) - 1), masks)
    lam = _sign_flips(n, masks)
    v = state.V
    p = lam[:, :, None] * v[None] * lam[:, None, :] - 1j * symplectic_form(n)[None]
    try:
        return np.linalg.eigvalsh(p)[:, 0]
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(v)
        raise NumericalError(f"PPT eigensolve failed ({exc}); cond(V) = {cond:.3e}") from exc


@dataclass(frozen=True)
class PPTResult:
    bipartition: Bipartition
    ppt_value: float
    entangled: bool
    band_class: str


def pair_labels(frexel_pairs) -> list:
    """Band names for the pairs; the default pairs use 1-based frexel numbers."""
    if tuple(map(tuple, frexel_pairs)) == DEFAULT_PAIRS:
        return list(DEFAULT_LABELS)
    return [f"splits-{i}-{j}" for i, j in frexel_pairs]


def classify_band(bp: Bipartition, frexel_pairs=DEFAULT_PAIRS, labels=None) -> str:
    """Label of the first pair (in priority order) whose members sit on opposite sides.

    ``labels`` defaults to ``splits-<i>-<j>`` built from each pair.
    """
    if labels is None:
        labels = pair_labels(frexel_pairs)
    if len(labels) != len(frexel_pairs):
        raise InvalidParameterError("one label per frexel pair is required")
    for (i, j), label in zip(frexel_pairs, labels):
        if (bp.mask >> i & 1) != (bp.mask >> j & 1):
            return label
    return NO_SPLIT


def ppt_value(
    state: GaussianState,
    bp: Bipartition,
    frexel_pairs=DEFAULT_PAIRS,
    labels=None,
    tol: float = ENTANGLEMENT_TOL,
) -> PPTResult:
    """Smallest eigenvalue of ``Lambda V Lambda - iJ`` with p flipped on side B."""
    if bp.n_modes != state.n_modes:
        raise InvalidParameterError("bipartition and state disagree on the number of modes")
    if labels is None:
        labels = pair_labels(frexel_pairs)
    val = float(_ppt_values(state, [bp.mask])[0])
    band = classify_band(bp, frexel_pairs, labels) if _pairs_fit(frexel_pairs, bp.n_modes) else NO_SPLIT
    return PPTResult(bp, val, val < -tol, band)


def _pairs_fit(pairs, n) -> bool:
    return all(0 <= i < n and 0 <= j < n for i, j in pairs)


@dataclass(frozen=True)
class PPTScan:
    results: list
    summary: dict

    @property
    def n_entangled(self) -> int:
        return self.summary["n_entangled"]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rank", "mask", "side_a", "side_b", "ppt_value", "entangled", "band_class"])
            for rank, r in enumerate(self.results):
                bp = r.bipartition
                w.writerow([
                    rank,
                    bp.mask,
                    " ".join(map(str, bp.side_a)),
                    " ".join(map(str, bp.side_b)),
                    repr(r.ppt_value),
                    int(r.entangled),
                    r.band_class,
                ])

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.summary, **kwargs)


def ppt_scan(
    state: GaussianState,
    frexel_pairs=DEFAULT_PAIRS,
    labels=None,
    tol: float = ENTANGLEMENT_TOL,
) -> PPTScan:
    """PPT values of every canonical bipartition, sorted ascending, with band statistics."""
    if labels is None:
        labels = pair_labels(frexel_pairs)
    bps = enumerate_bipartitions(state.n_modes)
    vals = _ppt_values(state, [bp.mask for bp in bps])
    use_pairs = _pairs_fit(frexel_pairs, state.n_modes)
    results = [
        PPTResult(bp, float(v), bool(v < -tol), classify_band(bp, frexel_pairs, labels) if use_pairs else NO_SPLIT)
        for bp, v in zip(bps, vals)
    ]
    # stable sort keeps mask order among equal values
    results.sort(key=lambda r: r.ppt_value)

    classes = (list(labels) if use_pairs else []) + [NO_SPLIT]
    bands = {}
    for c in classes:
        v = np.array([r.ppt_value for r in results if r.band_class == c])
        bands[c] = {
            "count": int(v.size),
            "n_entangled": int(np.sum(v < -tol)),
            "median": float(np.median(v)) if v.size else None,
            "min": float(v.min()) if v.size else None,
            "max": float(v.max()) if v.size else None,
        }
    n_ent = sum(r.entangled for r in results)
    summary = {
        "n_modes": state.n_modes,
        "n_bipartitions": len(results),
        "n_entangled": int(n_ent),
        "n_separable": len(results) - int(n_ent),
        "tolerance": tol,
        "bands": bands,
        "sorted_ppt_values": [r.ppt_value for r in results],
    }
    return PPTScan(results, summary)
