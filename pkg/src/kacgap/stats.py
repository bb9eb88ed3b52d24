"""Estimators tying Monte Carlo output to the limit law: KS distances,
factorial moments, the binned gap intensity, scaling-exponent regressions
and a Levy-Kolmogorov-Rogozin anti-concentration check."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats as sps
from scipy.spatial import cKDTree

from . import intensity as I
from .gap_process import GapRecord
from .rootfinder import find_roots
from .sampling import CoefficientLaw, derive_seed, make_rng, sample_trial

BIAS_NOTE = "finite-n comparison with an asymptotic law; no convergence rate is known"


# --------------------------------------------------------------------------
# KS distances

@dataclass(frozen=True)
class EmpiricalCDF:
    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("empirical CDF needs at least one sample")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / self.size


def ks_distance(ecdf: EmpiricalCDF | Sequence[float], survival: Callable) -> float:
    """sup_x |F_emp(x) - (1 - survival(x))|, attained at a sample point."""
    if not isinstance(ecdf, EmpiricalCDF):
        ecdf = EmpiricalCDF(ecdf)
    v = ecdf.values
    model = 1.0 - np.asarray(survival(v), dtype=float)
    m = v.size
    upper = np.arange(1, m + 1) / m - model
    lower = model - np.arange(m) / m
    return float(np.clip(max(upper.max(), lower.max()), 0.0, 1.0))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> float:
    return float(sps.ks_2samp(np.asarray(a, float), np.asarray(b, float)).statistic)


# --------------------------------------------------------------------------
# factorial moments

def falling(x: np.ndarray, m: int) -> np.ndarray:
    out = np.ones_like(x, dtype=float)
    for j in range(m):
        out = out * (x - j)
    return out


@dataclass
class MomentReport:
    orders: list[int]
    empirical: list[float]
    theory: list[float | None]
    stderr: list[float]
    samples: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def factorial_moments(counts: Sequence[int], max_m: int = 3, lam: float | None = None) -> MomentReport:
    """Empirical E[(X)_m], m = 1..max_m, with jackknife standard errors."""
    if not 1 <= max_m <= 4:
        raise ValueError("max_m must lie in 1..4")
    x = np.asarray(counts, dtype=float)
    N = x.size
    emp, se = [], []
    for m in range(1, max_m + 1):
        v = falling(x, m)
        mean = float(v.mean()) if N else 0.0
        if N > 1:
            loo = (v.sum() - v) / (N - 1)
            se.append(float(math.sqrt((N - 1) / N * np.sum((loo - loo.mean()) ** 2))))
        else:
            se.append(0.0)
        emp.append(mean)
    theory = [lam**m if lam is not None else None for m in range(1, max_m + 1)]
    return MomentReport(list(range(1, max_m + 1)), emp, theory, se, N)


# --------------------------------------------------------------------------
# binned intensity

@dataclass
class HistogramTable:
    n: int
    K: float
    trials: int
    bins: list[tuple[float, float]]
    pairs: list[int]
    rate: list[float]
    theory: list[float]
    theory_joint: list[float]
    ratio: list[float]
    chi2: float
    note: str = BIAS_NOTE

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    def to_csv(self) -> str:
        lines = ["lo,hi,pairs,rate,theory,theory_joint,ratio"]
        for (lo, hi), p, r, t, tj, q in zip(self.bins, self.pairs, self.rate, self.theory, self.theory_joint, self.ratio):
            lines.append(f"{lo!r},{hi!r},{p},{r!r},{t!r},{tj!r},{q!r}")
        return "\n".join(lines) + "\n"


def gap_intensity_histogram(records: Sequence[GapRecord], bins: Sequence[tuple[float, float]], K: float) -> HistogramTable:
    """Mean number of Omega_K pairs per trial with scaled gap in each bin,
    against c*(K) (b^4 - a^4)/4 (both profile forms)."""
    records = list(records)
    ns = {r.n for r in records}
    if len(ns) > 1:
        raise ValueError(f"records mix degrees {sorted(ns)}")
    n = ns.pop() if ns else 0
    T = len(records)
    allg = np.concatenate([np.asarray(r.gaps, float) for r in records]) if records else np.zeros(0)
    cK = I.c_star_K(K)
    cKj = I.c_star_K(K, form="joint")
    pairs, rate, th, thj, ratio = [], [], [], [], []
    chi2 = 0.0
    for lo, hi in bins:
        c = int(np.count_nonzero((allg >= lo) & (allg < hi))) if hi > lo else 0
        q = (hi**4 - lo**4) / 4
        t = cK * q
        pairs.append(c)
        rate.append(c / T if T else 0.0)
        th.append(t)
        thj.append(cKj * q)
        ratio.append((c / T) / t if T and t > 0 else math.nan)
        if T and t > 0:
            chi2 += (c - T * t) ** 2 / (T * t)
    return HistogramTable(n, K, T, [(float(a), float(b)) for a, b in bins], pairs, rate, th, thj, ratio, chi2)


# --------------------------------------------------------------------------
# scaling exponents

def _arc_halfwidth(points: np.ndarray, eps: float, rho: float) -> np.ndarray:
    """Half-width in angle of {phi : |rho e^{i phi} - p| <= eps} (nan if empty)."""
    r = np.abs(points)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = (rho * rho + r * r - eps * eps) / (2 * rho * r)
    out = np.full(points.shape, np.nan)
    ok = c <= 1
    out[ok] = np.arccos(np.clip(c[ok], -1.0, 1.0))
    return out


def double_cover_fraction(points: np.ndarray, eps: float, arc: tuple[float, float], rho: float = 1.0) -> float:
    """Fraction of centres c = rho e^{i phi}, phi in arc, whose eps-disk holds two or more points.

    Exact: the set is a union of pairwise intersections of arcs.
    """
    lo, hi = arc
    h = _arc_halfwidth(points, eps, rho)
    keep = np.isfinite(h)
    p, h = points[keep], h[keep]
    if p.size < 2:
        return 0.0
    th = np.angle(p)
    tree = cKDTree(np.column_stack([p.real, p.imag]))
    pairs = tree.query_pairs(2 * eps, output_type="ndarray")
    if pairs.size == 0:
        return 0.0
    a1, a2 = th[pairs[:, 0]] - h[pairs[:, 0]], th[pairs[:, 0]] + h[pairs[:, 0]]
    b1, b2 = th[pairs[:, 1]] - h[pairs[:, 1]], th[pairs[:, 1]] + h[pairs[:, 1]]
    s, e = np.maximum(a1, b1), np.minimum(a2, b2)
    s, e = np.maximum(s, lo), np.minimum(e, hi)
    ok = e > s
    if not ok.any():
        return 0.0
    s, e = s[ok], e[ok]
    order = np.argsort(s)
    total, cur_s, cur_e = 0.0, s[order[0]], e[order[0]]
    for i in order[1:]:
        if s[i] > cur_e:
            total += cur_e - cur_s
            cur_s, cur_e = s[i], e[i]
        else:
            cur_e = max(cur_e, e[i])
    total += cur_e - cur_s
    return float(total / (hi - lo))


@dataclass
class SlopeResult:
    slope: float
    intercept: float
    radii: list[float]
    probs: list[float]
    hits: list[int]
    trials: int
    model: str
    n: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _fit_slope(radii, probs, hits, trials, model, n) -> SlopeResult:
    radii = np.asarray(radii, float)
    probs = np.asarray(probs, float)
    good = probs > 0
    if good.sum() * 2 <= radii.size or good.sum() < 2:
        raise ValueError(f"zero hits at {int((~good).sum())} of {radii.size} radii")
    # log p has standard error ~ 1/sqrt(hits): weight accordingly
    w = np.sqrt(np.maximum(np.asarray(hits, float)[good], 1.0))
    slope, icpt = np.polyfit(np.log(radii[good]), np.log(probs[good]), 1, w=w)
    return SlopeResult(float(slope), float(icpt), radii.tolist(), probs.tolist(), list(map(int, hits)), trials, model, n)


def toy_points(n: int, rng, width: float | None = None) -> np.ndarray:
    """n points uniform in the annulus 1 - w <= |z| <= 1 + w, w = 1/n by default."""
    w = 1.0 / n if width is None else width
    r = np.sqrt((1 - w) ** 2 + rng.random(n) * ((1 + w) ** 2 - (1 - w) ** 2))
    return r * np.exp(2j * math.pi * rng.random(n))


def cover_probability(points: np.ndarray, eps: float, arc: tuple[float, float], rho_band: tuple[float, float], nodes: int = 64) -> float:
    """P[>= 2 points in D(c, eps)] for c uniform (by area) in the polar band
    rho_band x arc: midpoint rule in rho over exact per-circle fractions."""
    r_lo, r_hi = rho_band
    h = (r_hi - r_lo) / nodes
    rho = r_lo + h * (np.arange(nodes) + 0.5)
    frac = np.array([double_cover_fraction(points, eps, arc, r) for r in rho])
    return float(np.sum(frac * rho) / np.sum(rho))


def scaling_regression(
    law: CoefficientLaw | None,
    n: int,
    center: complex,
    radii: Sequence[float],
    trials: int,
    seed: int = 0,
    model: str = "roots",
    arc_halfwidth: float = 0.5,
    band: float = 2.0,
    nodes: int = 64,
    enforce_range: bool = True,
) -> SlopeResult:
    """Slope of log P[>= 2 points in D(c, eps)] against log eps.

    P is averaged over centres c with |arg c - arg center| <= arc_halfwidth
    and |c| within band/n of |center|, computed without sampling the centre
    (``cover_probability``); model "roots" uses the roots of f_n, model "toy"
    n i.i.d. uniform points in the annulus of width 2/n.
    """
    radii = np.asarray(radii, float)
    if enforce_range and (radii.min() < n**-1.5 * (1 - 1e-12) or radii.max() > 1.0 / n * (1 + 1e-12)):
        raise ValueError("radii must lie within [n^{-3/2}, n^{-1}]")
    if model not in ("roots", "toy"):
        raise ValueError("model must be 'roots' or 'toy'")
    rho, phi = abs(center), math.atan2(center.imag, center.real)
    arc = (phi - arc_halfwidth, phi + arc_halfwidth)
    rho_band = (rho - band / n, rho + band / n)
    acc = np.zeros(radii.size)
    hits = np.zeros(radii.size, dtype=int)
    for t in range(trials):
        if model == "roots":
            pts = find_roots(sample_trial(law, n, seed, t)).roots
        else:
            pts = toy_points(n, make_rng(derive_seed(seed, n, t, 0x70)))
        # only points that can reach the band matter
        pts = pts[np.abs(np.abs(pts) - rho) <= band / n + radii.max()]
        for i, e in enumerate(radii):
            f = cover_probability(pts, e, arc, rho_band, nodes)
            acc[i] += f
            hits[i] += f > 0
    return _fit_slope(radii, acc / trials, hits, trials, model, n)


# --------------------------------------------------------------------------
# anti-concentration

@dataclass
class LKRResult:
    max_prob: float
    bound: float
    fitted_C: float
    n: int
    R: float
    trials: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def lkr_check(law: CoefficientLaw, weights: Sequence[complex], R: float, trials: int, seed: int = 0) -> LKRResult:
    """Monte Carlo sup_x P[|sum a_j c_j - x| <= R] over a grid of spacing R/4."""
    if R < 1:
        raise ValueError("R must be at least 1")
    c = np.asarray(weights, dtype=np.complex128).ravel()
    if np.any(np.abs(c) < 1 - 1e-12):
        raise ValueError("weights must satisfy |c_j| >= 1")
    n = c.size
    rng = make_rng(derive_seed(seed, n, 0x1C2))
    S = np.empty(trials, dtype=np.complex128)
    step = 50_000
    for s in range(0, trials, step):
        m = min(step, trials - s)
        S[s : s + m] = law.draw(rng, m * n).reshape(m, n) @ c
    real = np.all(c.imag == 0)
    sd = math.sqrt(law.variance * float(np.sum(np.abs(c) ** 2)))
    span = 6 * sd + R
    h = R / 4
    xs = np.arange(-span, span + h, h)
    if real:
        v = np.sort(S.real)
        cnt = np.searchsorted(v, xs + R, side="right") - np.searchsorted(v, xs - R, side="left")
        best = int(cnt.max())
    else:
        gx, gy = np.meshgrid(xs, xs)
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        tree = cKDTree(np.column_stack([S.real, S.imag]))
        best = int(max(len(l) for l in tree.query_ball_point(grid, R)))
    p = best / trials
    bound = R / math.sqrt(n)
    return LKRResult(p, bound, p / bound, n, R, trials)
