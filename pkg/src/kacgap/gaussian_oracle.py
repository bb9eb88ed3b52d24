"""Gaussian-side computations: the covariance matrices V_n(z) and W_n(z),
the conditional laws of (F, F', F''), the tilted fourth moment, a Monte
Carlo estimate of P_G[A_z(U)] and the psi-sum diagnostic."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import intensity as I
from .intervals import IntervalSet
from .net_machinery import build_net, dist_to_int
from .polyeval import effective_degree
from .sampling import derive_seed, make_rng

# Beyond this x the quoted Schur expression for sigma_1^2 loses all digits
# to cancellation (terms of size e^{4x} cancel to e^{2x}); the stable
# determinant routines take over.
SCHUR_X_LIMIT = 6.0


# --------------------------------------------------------------------------
# covariance V_n(z)

@dataclass(frozen=True)
class CovarianceV:
    z: complex
    d: float
    entries: np.ndarray
    lambda_min: float


def design_matrix_V(z: complex, n: int, d: float | None = None) -> np.ndarray:
    """(n+1) x 4 real matrix with rows (r^k cos, r^k sin, (k/d) r^k cos, (k/d) r^k sin)."""
    r, theta = abs(z), math.atan2(z.imag, z.real)
    if d is None:
        d = effective_degree(z, n)
    k = np.arange(n + 1, dtype=float)
    rk = r**k
    c, s = rk * np.cos(k * theta), rk * np.sin(k * theta)
    return np.column_stack([c, s, (k / d) * c, (k / d) * s])


def covariance_V(z: complex, n: int) -> CovarianceV:
    z = complex(z)
    if abs(z) > 1:
        raise ValueError("covariance_V expects |z| <= 1")
    d = effective_degree(z, n)
    G = design_matrix_V(z, n, d)
    V = G.T @ G / d
    V = 0.5 * (V + V.T)
    return CovarianceV(z, d, V, float(np.linalg.eigvalsh(V)[0]))


def singularity_envelope(theta: float, d: float) -> float:
    return min(1.0, (d * theta) ** 7, (d * (math.pi - theta)) ** 7)


@dataclass(frozen=True)
class EnvelopeFit:
    c: float
    ratios: np.ndarray
    thetas: np.ndarray
    ds: np.ndarray


def fit_singularity_constant(thetas: Sequence[float], ds: Sequence[float], n: int | None = None) -> EnvelopeFit:
    """Smallest ratio lambda_min / min{1,(d theta)^7,(d(pi-theta))^7} over a grid.

    Each d is realised by the radius r = 1 - 1/d (with n >= d) so the
    effective degree is exactly d.
    """
    thetas = np.asarray(thetas, float)
    ds = np.asarray(ds, float)
    ratios = np.empty((ds.size, thetas.size))
    for i, d in enumerate(ds):
        nn = int(n if n is not None else math.ceil(4 * d))
        r = 1.0 - 1.0 / d if d < nn else 1.0
        for j, th in enumerate(thetas):
            lam = covariance_V(r * np.exp(1j * th), nn).lambda_min
            ratios[i, j] = lam / singularity_envelope(th, min(d, nn))
    return EnvelopeFit(float(ratios.min()), ratios, thetas, ds)


# --------------------------------------------------------------------------
# tuple matrix W_n(z)

@dataclass(frozen=True)
class TupleMatrixW:
    zs: np.ndarray
    rows: np.ndarray
    sigma_min: float


def build_W(zs: Sequence[complex], n: int) -> TupleMatrixW:
    zs = np.asarray(zs, dtype=np.complex128).ravel()
    if zs.size == 0:
        raise ValueError("need at least one point")
    if np.unique(zs).size != zs.size:
        raise ValueError("points must be pairwise distinct")
    k = np.arange(n + 1, dtype=float)[:, None]
    zk = zs[None, :] ** k
    W = np.hstack([zk, (k / n) * zk, (k * (k - 1) / n**2) * zk]) / math.sqrt(n)
    # real form: min over unit (u1, u2) of ||W u1 + conj(W) u2||
    # (SVD rather than eigvalsh of B^H B, which would square the condition)
    B = np.hstack([W, W.conj()])
    sv = np.linalg.svd(B, compute_uv=False)
    return TupleMatrixW(zs, W, float(sv[-1]))


# --------------------------------------------------------------------------
# the Sigma matrix and conditional laws

def sigma_matrix(x: float, n: int) -> np.ndarray:
    """(1/n) sum_k e^{2xk/n} [t^{i+j}] with t = k/n: the covariance of
    (F, F', F'') at w = x + iy, up to the vanishing relation matrix."""
    t = np.arange(n + 1) / n
    w = np.exp(2 * x * t) / n
    return np.array([[np.sum(w * t ** (i + j)) for j in range(3)] for i in range(3)])


def hankel_a(x: float) -> np.ndarray:
    a = I.a_all(x)
    return np.array([[a[i + j] for j in range(3)] for i in range(3)])


@dataclass(frozen=True)
class ConditionalLaw:
    mean: complex
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"conditional variance must be positive, got {self.variance}")


def conditional_law_A(f2: complex, x: float) -> ConditionalLaw:
    """Law of F' given F'' = f2."""
    a2, a3, a4 = (I.a_j(x, j) for j in (2, 3, 4))
    _, d2, _ = I.deltas_eta(x)
    return ConditionalLaw(complex(a3 / a4 * f2), float(d2 / a4))


def sigma1_sq_schur(x: float) -> float:
    """a0 - [a1 a2] M^{-1} [a1 a2]^T with M = [[a2, a3], [a3, a4]], verbatim."""
    a0, a1, a2, a3, a4 = (I.a_j(x, j) for j in range(5))
    return a0 - (a1 * a1 * a4 - 2 * a1 * a2 * a3 + a2**3) / (a2 * a4 - a3 * a3)


def conditional_law_B(f1: complex, f2: complex, x: float) -> ConditionalLaw:
    """Law of F given (F', F'') = (f1, f2)."""
    a0, a1, a2, a3, a4 = (I.a_j(x, j) for j in range(5))
    d1, d2, eta = I.deltas_eta(x)
    # cofactor form of [a1 a2] adj(M) / det(M); a2^2 - a1 a3 = -Delta1
    m1 = (a1 * a4 - a2 * a3) / d2
    m2 = -d1 / d2
    if abs(x) < I.X_SWITCH or x > SCHUR_X_LIMIT:
        var = eta / d2
    else:
        var = sigma1_sq_schur(x)
    return ConditionalLaw(complex(m1 * f1 + m2 * f2), float(var))


def tilted_fourth_moment(sigma2: float, c: float) -> float:
    """E[|Z|^4 e^{-c|Z|^2}] for Z complex Gaussian with E|Z|^2 = sigma2."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if c < 0:
        raise ValueError("c must be nonnegative")
    return 2 * sigma2**2 / (1 + c * sigma2) ** 3


def tilted_fourth_moment_mc(sigma2: float, c: float, draws: int = 10**6, seed: int = 0) -> tuple[float, float]:
    rng = make_rng(derive_seed(seed, 0x7117))
    z = rng.standard_normal((draws, 2)) * math.sqrt(sigma2 / 2)
    r2 = np.einsum("ij,ij->i", z, z)
    v = r2 * r2 * np.exp(-c * r2)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(draws))


# --------------------------------------------------------------------------
# exact joint law of (f, f', f'') at z

def complex_moments(z: complex, n: int, scale: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Covariance C = E[v v^H] and relation R = E[v v^T] of v = (f, f', f'')(z).

    With scale=True, v is normalised to (n^{-1/2} f, n^{-3/2} f', n^{-5/2} f'').
    """
    k = np.arange(n + 1, dtype=float)
    fall = np.stack([np.ones_like(k), k, k * (k - 1)])
    if scale:
        fall = fall / np.array([n**0.5, n**1.5, n**2.5])[:, None]
    zc = complex(z)
    C = np.empty((3, 3), complex)
    R = np.empty((3, 3), complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        logz = np.log(zc)
    for i in range(3):
        for j in range(3):
            w = fall[i] * fall[j]
            m = k >= max(i, j)
            ki, kj = k[m] - i, k[m] - j
            C[i, j] = np.sum(w[m] * np.exp(ki * logz + kj * np.conj(logz)))
            R[i, j] = np.sum(w[m] * np.exp((ki + kj) * logz))
    return C, R


def real_covariance(C: np.ndarray, R: np.ndarray) -> np.ndarray:
    """6x6 covariance of (Re v1, Im v1, Re v2, Im v2, Re v3, Im v3)."""
    XX = 0.5 * (C + R).real
    YY = 0.5 * (C - R).real
    XY = 0.5 * (R.imag - C.imag)  # E[X Y^T]
    m = C.shape[0]
    S = np.empty((2 * m, 2 * m))
    S[0::2, 0::2] = XX
    S[1::2, 1::2] = YY
    S[0::2, 1::2] = XY
    S[1::2, 0::2] = XY.T
    return 0.5 * (S + S.T)


class _GaussCond:
    """Conditional law of block `a` given block `b` for a real Gaussian."""

    def __init__(self, S: np.ndarray, a: slice, b: slice | None):
        if b is None:
            self.A = np.zeros((2, 0))
            cov = S[a, a]
        else:
            Sab, Sbb = S[a, b], S[b, b]
            self.A = np.linalg.solve(Sbb, Sab.T).T
            cov = S[a, a] - self.A @ Sab.T
        cov = 0.5 * (cov + cov.T)
        self.cov = cov
        self.inv = np.linalg.inv(cov)
        self.norm = 1.0 / (2 * math.pi * math.sqrt(np.linalg.det(cov)))
        self.L = np.linalg.cholesky(cov)

    def mean(self, xb: np.ndarray) -> np.ndarray:
        return xb @ self.A.T if self.A.shape[1] else np.zeros((xb.shape[0], 2))

    def density(self, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
        r = xa - self.mean(xb)
        q = np.einsum("ij,jk,ik->i", r, self.inv, r)
        return self.norm * np.exp(-0.5 * q)

    def sample(self, xb: np.ndarray, rng) -> np.ndarray:
        g = rng.standard_normal((xb.shape[0], 2))
        return self.mean(xb) + g @ self.L.T


def _c2r(v: np.ndarray) -> np.ndarray:
    return np.column_stack([v.real, v.imag])


def _r2c(v: np.ndarray) -> np.ndarray:
    return v[:, 0] + 1j * v[:, 1]


# --------------------------------------------------------------------------
# P_G[A_z(U)]

@dataclass
class OracleResult:
    estimate: float
    stderr: float
    theory: float
    theory_joint: float
    method: str
    widen: float
    widened_fallback: bool
    trials: int
    hits: int | None
    area_factor: float
    rect: str
    x: float
    n: int
    K: float
    beta: float
    relation_norm: float
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _polar_box(z: complex, n: int, net, margin: float, widen: float):
    """(r_lo, r_hi, t_lo, t_hi) of a cell centred at z, half-widths scaled by widen."""
    h = (0.5 - margin) * widen
    r0, t0 = abs(z), math.atan2(z.imag, z.real)
    dr = 2 * net.K / (n * net.M1)
    dt = math.pi / net.M2
    return r0 - h * dr, r0 + h * dr, t0 - h * dt, t0 + h * dt


def _box_area(box) -> float:
    r_lo, r_hi, t_lo, t_hi = box
    return 0.5 * (r_hi**2 - r_lo**2) * (t_hi - t_lo)


def prob_A_z_gaussian(
    z: complex,
    U: IntervalSet,
    K: float,
    n: int,
    trials: int,
    seed: int = 0,
    *,
    beta: float = 0.3,
    widen: float = 1.0,
    method: str = "importance",
    rect: str = "inner",
    a_exponent: float = 0.15,
    batch: int = 200_000,
) -> OracleResult:
    """Monte Carlo P[A_z(U)] for gaussian coefficients from the exact law of (f, f', f'').

    ``method="importance"`` draws f'' from its marginal, f' uniformly on the
    admissible annulus and the predicted root uniformly in the rectangle,
    weighting by the exact conditional densities; it is unbiased for the
    un-widened event however small.  ``method="direct"`` samples the 6-real
    dimensional vector and counts hits, widening the rectangle when fewer
    than 10 hits are expected (flagged in the result).

    The theory values scale K/(M1 M2) F(x) int_U t^3 by the area of the
    rectangle actually used relative to R_z, so they are comparable with the
    estimate at any margin and widening.
    """
    z = complex(z)
    if method not in ("importance", "direct"):
        raise ValueError("method must be 'importance' or 'direct'")
    theta = math.atan2(z.imag, z.real)
    tau4 = 4 * a_exponent / 7
    lo = n ** (-1 + tau4)
    if not (lo <= theta <= math.pi - lo):
        raise ValueError(f"arg z must lie in [{lo:.3g}, pi - {lo:.3g}]")
    net = build_net(K, n, beta)
    margin = {"inner": net.margin_inner, "sharp": net.margin_sharp, "full": 0.0}[rect]
    x = n * math.log(abs(z))
    integral = U.quartic_measure()
    cell_area = _box_area(_polar_box(z, n, net, 0.0, 1.0))
    C, R = complex_moments(z, n)
    rel = float(np.linalg.norm(R, 2) / np.linalg.norm(C, 2))
    notes: list[str] = []

    def theory_at(w):
        box = _polar_box(z, n, net, margin, w)
        fac = _box_area(box) / cell_area if margin < 0.5 else 0.0
        base = K / (net.M1 * net.M2) * integral * fac
        return base * I.intensity_F(x), base * I.intensity_F_joint(x), fac, box

    th, thj, fac, box = theory_at(widen)
    if U.is_empty or fac == 0.0:
        return OracleResult(0.0, 0.0, th, thj, method, widen, False, trials, 0 if method == "direct" else None,
                            fac, rect, x, n, K, beta, rel, ["empty event"])
    fallback = False
    if method == "direct" and trials * thj < 10:
        w_new = widen * math.sqrt(100.0 / max(trials * thj, 1e-300))
        notes.append(f"expected hits {trials * thj:.3g} < 10; rectangle widened by {w_new:.3g}")
        widen, fallback = w_new, True
        th, thj, fac, box = theory_at(widen)

    S = real_covariance(C, R)
    rng = make_rng(derive_seed(seed, n, 0xA2))
    thr = n**-0.25 / math.log(n)  # |F'| threshold in normalised units
    q = n**-0.25 / 2
    total, total2, hits, done = 0.0, 0.0, 0, 0
    r_lo, r_hi, t_lo, t_hi = box
    if method == "direct":
        L = np.linalg.cholesky(S + 1e-300 * np.eye(6))
        while done < trials:
            m = min(batch, trials - done)
            v = rng.standard_normal((m, 6)) @ L.T
            F, F1, F2 = _r2c(v[:, 0:2]), _r2c(v[:, 2:4]), _r2c(v[:, 4:6])
            a1 = np.abs(F1)
            ok = (a1 >= thr) & U.contains(np.where(F2 != 0, a1 / (q * np.abs(F2)), -1.0))
            pred = z - F / (n * F1)
            pr, pt = np.abs(pred), np.angle(pred)
            ok &= (pr >= r_lo) & (pr <= r_hi) & (pt >= t_lo) & (pt <= t_hi)
            hits += int(ok.sum())
            done += m
        p = hits / trials
        return OracleResult(p, math.sqrt(max(p * (1 - p), 0.0) / trials), th, thj, method, widen, fallback,
                            trials, hits, fac, rect, x, n, K, beta, rel, notes)

    marg2 = _GaussCond(S, slice(4, 6), None)
    c1 = _GaussCond(S, slice(2, 4), slice(4, 6))
    c0 = _GaussCond(S, slice(0, 2), slice(2, 6))
    pieces = np.array(U.intervals, dtype=float)
    box_area = _box_area(box)
    while done < trials:
        m = min(batch, trials - done)
        x2 = marg2.sample(np.zeros((m, 0)), rng)
        F2 = _r2c(x2)
        rad = q * np.abs(F2)
        # admissible |F'| radii: rad * U intersected with [thr, inf)
        lo_r = np.maximum(rad[:, None] * pieces[None, :, 0], thr)
        hi_r = np.maximum(rad[:, None] * pieces[None, :, 1], thr)
        areas = math.pi * (hi_r**2 - lo_r**2)
        tot_area = areas.sum(axis=1)
        cum = np.cumsum(areas, axis=1)
        u = rng.random(m) * tot_area
        idx = np.minimum((cum < u[:, None]).sum(axis=1), pieces.shape[0] - 1)
        a_lo, a_hi = lo_r[np.arange(m), idx], hi_r[np.arange(m), idx]
        rr = np.sqrt(a_lo**2 + rng.random(m) * (a_hi**2 - a_lo**2))
        F1 = rr * np.exp(2j * math.pi * rng.random(m))
        x1 = _c2r(F1)
        w1 = tot_area * c1.density(x1, x2)
        # predicted root y uniform (by area) in the polar box
        yr = np.sqrt(r_lo**2 + rng.random(m) * (r_hi**2 - r_lo**2))
        yt = t_lo + rng.random(m) * (t_hi - t_lo)
        y = yr * np.exp(1j * yt)
        F = n * F1 * (z - y)
        w0 = (n * np.abs(F1)) ** 2 * box_area * c0.density(_c2r(F), np.column_stack([x1, x2]))
        w = np.where(tot_area > 0, w1 * w0, 0.0)
        total += float(w.sum())
        total2 += float(np.dot(w, w))
        done += m
    mean = total / trials
    var = max(total2 / trials - mean * mean, 0.0)
    return OracleResult(mean, math.sqrt(var / trials), th, thj, method, widen, fallback, trials, None,
                        fac, rect, x, n, K, beta, rel, notes)


# --------------------------------------------------------------------------
# psi-sum diagnostic

def psi_values(zs: Sequence[complex], eta: Sequence[complex], n: int) -> np.ndarray:
    zs = np.asarray(zs, dtype=np.complex128).ravel()
    eta = np.asarray(eta, dtype=np.complex128).ravel()
    m = zs.size
    if eta.size != 3 * m:
        raise ValueError(f"eta must have 3m = {3 * m} entries")
    k = np.arange(n + 1, dtype=float)[:, None]
    zk = zs[None, :] ** k
    coef = eta[None, :m] + (k / n) * eta[None, m : 2 * m] + (k * (k - 1) / n**2) * eta[None, 2 * m :]
    return np.real(np.sum(zk * coef, axis=1))


def psi_sum(zs: Sequence[complex], eta: Sequence[complex], n: int) -> float:
    """sum_{k=0}^n ||psi(k)||^2_{R/Z}."""
    return float(np.sum(dist_to_int(psi_values(zs, eta, n)) ** 2))
