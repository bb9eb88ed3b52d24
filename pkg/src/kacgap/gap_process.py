"""Observables of the root configuration: scaled gaps in Omega_K, the counter
X_n(U), the minimal gap m_n over the whole plane, and in-disk separation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.spatial import cKDTree

from .intervals import IntervalSet
from .rootfinder import RootSet

DOUBLE_ROOT_TOL = 1e-12
ALL_PAIRS_LIMIT = 4096


def _roots(rs) -> np.ndarray:
    return rs.roots if isinstance(rs, RootSet) else np.asarray(rs, dtype=np.complex128)


def annulus_mask(roots: np.ndarray, K: float, n: int) -> np.ndarray:
    mod = np.abs(roots)
    return (mod >= 1.0 - K / n) & (mod <= 1.0 + K / n) & (roots.imag > 0)


def roots_in_annulus(rs, K: float, n: int) -> np.ndarray:
    if K <= 0:
        raise ValueError("K must be positive")
    r = _roots(rs)
    return r[annulus_mask(r, K, n)]


def _pairs_within(pts: np.ndarray, radius: float) -> np.ndarray:
    if pts.size < 2:
        return np.zeros((0, 2), dtype=np.int64)
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    return tree.query_pairs(radius, output_type="ndarray")


def pair_gaps(rs, n: int, K: float, cutoff: float = 100.0) -> np.ndarray:
    """Sorted scaled gaps n^{5/4}|a - a'| over pairs with both roots in Omega_K."""
    inside = roots_in_annulus(rs, K, n)
    scale = n**1.25
    pairs = _pairs_within(inside, cutoff / scale)
    if pairs.size == 0:
        return np.zeros(0)
    g = scale * np.abs(inside[pairs[:, 0]] - inside[pairs[:, 1]])
    return np.sort(g[g <= cutoff])


def count_X_n(rs, K: float, U: IntervalSet, n: int) -> int:
    """#{a in Omega_K : some other root a' has n^{5/4}|a - a'| in U}."""
    if not isinstance(U, IntervalSet):
        raise TypeError("U must be an IntervalSet")
    if U.is_empty:
        return 0
    r = _roots(rs)
    mask = annulus_mask(r, K, n)
    if not mask.any():
        return 0
    scale = n**1.25
    tree = cKDTree(np.column_stack([r.real, r.imag]))
    centres = np.flatnonzero(mask)
    hits = tree.query_ball_point(np.column_stack([r.real[centres], r.imag[centres]]), U.sup / scale * (1 + 1e-12))
    count = 0
    for ci, neigh in zip(centres, hits):
        d = scale * np.abs(r[np.array([j for j in neigh if j != ci], dtype=np.int64)] - r[ci])
        if d.size and np.any(U.contains(d)):
            count += 1
    return count


def count_pairs(gaps: np.ndarray, U: IntervalSet) -> int:
    """Unordered pairs in Omega_K with scaled gap in U (the quantity whose mean
    is lambda_{K,U})."""
    return int(np.count_nonzero(U.contains(np.asarray(gaps)))) if len(gaps) else 0


def _min_distance(pts: np.ndarray) -> float:
    m = pts.size
    if m < 2:
        return math.inf
    if m <= ALL_PAIRS_LIMIT:
        best = math.inf
        step = 512
        for s in range(0, m, step):
            blk = pts[s : s + step]
            d = np.abs(blk[:, None] - pts[None, :])
            rows = np.arange(blk.size)
            d[rows, s + rows] = np.inf
            best = min(best, float(d.min()))
        return best
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    dist, _ = tree.query(np.column_stack([pts.real, pts.imag]), k=2)
    return float(dist[:, 1].min())


def min_gap(rs, n: int) -> float:
    """n^{5/4} times the smallest distance between distinct root indices."""
    if n < 2:
        raise ValueError("n must be at least 2")
    d = _min_distance(_roots(rs))
    if d < DOUBLE_ROOT_TOL:
        return 0.0
    return n**1.25 * d


def double_root_count(rs) -> int:
    """Number of index pairs closer than DOUBLE_ROOT_TOL."""
    return int(_pairs_within(_roots(rs), DOUBLE_ROOT_TOL).shape[0])


def origin_double_root(rs) -> bool:
    r = _roots(rs)
    return int(np.count_nonzero(np.abs(r) < DOUBLE_ROOT_TOL)) >= 2


def disk_min_gap(rs, r0: float) -> float:
    if not 0 < r0 < 1:
        raise ValueError("r0 must lie in (0, 1)")
    r = _roots(rs)
    return _min_distance(r[np.abs(r) <= r0])


def inversion_violations(rs) -> int:
    """Count in-disk pairs breaking |a_i - a_j| < |1/a_j - 1/a_i| (should be 0)."""
    r = _roots(rs)
    inner = r[(np.abs(r) < 1) & (r != 0)]
    if inner.size < 2:
        return 0
    d = np.abs(inner[:, None] - inner[None, :])
    dinv = np.abs(1 / inner[:, None] - 1 / inner[None, :])
    iu = np.triu_indices(inner.size, 1)
    ok = (d[iu] < dinv[iu]) | (d[iu] == 0)
    return int(np.count_nonzero(~ok))


@dataclass
class GapRecord:
    trial: int
    seed: int
    n: int
    law: str
    m_n_scaled: float
    gaps: list[float]
    x_counts: dict[str, int]
    disk_min_gap: float
    max_residual: float
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d["disk_min_gap"] = None if math.isinf(self.disk_min_gap) else self.disk_min_gap
        extra = d.pop("extra")
        d.update(extra)
        return json.dumps(d, separators=(",", ":"), sort_keys=False)

    @classmethod
    def from_json(cls, line: str) -> "GapRecord":
        d = json.loads(line)
        core = {k: d.pop(k) for k in ("trial", "seed", "n", "law", "m_n_scaled", "gaps", "x_counts", "disk_min_gap", "max_residual")}
        if core["disk_min_gap"] is None:
            core["disk_min_gap"] = math.inf
        return cls(**core, extra=d)

    @property
    def scaled_gaps(self) -> np.ndarray:
        return np.asarray(self.gaps)
