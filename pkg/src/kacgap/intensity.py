"""Radial intensity profile of close root pairs and the constants built from it.

The moments a_j(x) = int_0^1 t^j e^{2xt} dt (j = 0..4) are the entries of the
limiting covariance of (F, F', F'') in logarithmic coordinates, where
x = n log|z|.  From them:

    Delta1 = a1 a3 - a2^2,   Delta2 = a2 a4 - a3^2,   Delta0 = a0 a2 - a1^2,
    eta    = det[a_{i+j}]_{0<=i,j<=2}.

Two profiles are offered.

``intensity_F``
    The published closed form
    (1/2pi) a4^5/eta * (1 + (a4^2 Delta1^2/eta + a4 a3^2)/Delta2)^{-3}.

``intensity_F_joint``
    eta^2 / (2 Delta0^3), obtained by integrating |F''|^4 against the exact
    joint density of (F, F', F'') at F = F' = 0.  It is even in x, as the
    inversion z -> 1/z demands, and it is the profile that matches simulated
    pair counts (see tests/test_intensity_vs_simulation.py).

Numerics.  For |x| < X_SWITCH the a_j and the determinants come from Taylor
series with exact rational coefficients.  For x < 0 the closed forms and
direct products are well conditioned.  For x > 0 the determinants are
obtained from the reflection t -> 1 - t, which turns them into Gram
determinants at -x under polynomial weights; this avoids the loss of
~log10(x^10) digits that the direct products suffer for large x.  Values for
x > 0 are carried with the factors e^{2x}, e^{4x}, e^{6x} removed so that
nothing overflows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .intervals import IntervalSet

X_SWITCH = 0.25
A_TERMS = 20
SERIES_ORDER = 30
_TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# series coefficients (built once, exactly)

def _a_series_exact(j: int, order: int) -> list[Fraction]:
    # a_j(x) = sum_m (2x)^m / (m! (m+j+1))
    return [Fraction(2**m, math.factorial(m) * (m + j + 1)) for m in range(order + 1)]


def _mul(p: list[Fraction], q: list[Fraction], order: int) -> list[Fraction]:
    out = [Fraction(0)] * (order + 1)
    for i, pi in enumerate(p):
        if pi == 0:
            continue
        for k, qk in enumerate(q[: order + 1 - i]):
            out[i + k] += pi * qk
    return out


def _lin(*terms) -> list[Fraction]:
    order = len(terms[0][1]) - 1
    out = [Fraction(0)] * (order + 1)
    for coef, ser in terms:
        for m in range(order + 1):
            out[m] += coef * ser[m]
    return out


def _build_series():
    N = SERIES_ORDER
    a = [_a_series_exact(j, N) for j in range(5)]
    d1 = _lin((1, _mul(a[1], a[3], N)), (-1, _mul(a[2], a[2], N)))
    d2 = _lin((1, _mul(a[2], a[4], N)), (-1, _mul(a[3], a[3], N)))
    d0 = _lin((1, _mul(a[0], a[2], N)), (-1, _mul(a[1], a[1], N)))
    eta = _lin(
        (1, _mul(_mul(a[0], a[2], N), a[4], N)),
        (-1, _mul(_mul(a[0], a[3], N), a[3], N)),
        (-1, _mul(_mul(a[1], a[1], N), a[4], N)),
        (2, _mul(_mul(a[1], a[2], N), a[3], N)),
        (-1, _mul(_mul(a[2], a[2], N), a[2], N)),
    )
    as_f = lambda s: np.array([float(c) for c in s])
    return (
        [as_f(s[: A_TERMS]) for s in a],
        {"delta1": as_f(d1), "delta2": as_f(d2), "delta0": as_f(d0), "eta": as_f(eta)},
        {"delta1": d1[0], "delta2": d2[0], "delta0": d0[0], "eta": eta[0]},
    )


_A_SERIES, _DET_SERIES, EXACT_AT_ZERO = _build_series()


def _horner(coefs: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for c in coefs[::-1]:
        out = out * x + c
    return out


# --------------------------------------------------------------------------
# moments a_j

def _a_closed_scaled(j: int, x: np.ndarray) -> np.ndarray:
    """e^{-2x^+} a_j(x) from the closed form; x must avoid a neighbourhood of 0.

    a_j(x) = (-1)^j j!/u^{j+1} (e^u P_j(-u) - 1) with u = 2x and
    P_j the degree-j Taylor polynomial of exp.
    """
    u = 2.0 * x
    p = np.zeros_like(u)
    term = np.ones_like(u)
    for i in range(j + 1):
        p += term
        term = term * (-u) / (i + 1)
    pos = x > 0
    # for x > 0 divide through by e^u; for x <= 0 leave as is
    eu = np.where(pos, 1.0, np.exp(np.minimum(u, 0.0)))
    tail = np.where(pos, np.exp(-np.abs(u)), 1.0)
    bracket = eu * p - tail
    return (-1) ** j * math.factorial(j) / u ** (j + 1) * bracket


def _a_scaled(j: int, x: np.ndarray) -> np.ndarray:
    """e^{-2x^+} a_j(x): Taylor series near 0, closed form elsewhere."""
    small = np.abs(x) < X_SWITCH
    out = np.empty_like(x)
    if small.any():
        xs = x[small]
        out[small] = _horner(_A_SERIES[j], xs) * np.exp(-2.0 * np.maximum(xs, 0.0))
    if (~small).any():
        out[~small] = _a_closed_scaled(j, x[~small])
    return out


def _as_array(x):
    arr = np.asarray(x, dtype=np.float64)
    return arr, arr.ndim == 0


def _ret(v, scalar):
    return float(v) if scalar else v


def a_j(x, j: int):
    """int_0^1 t^j e^{2xt} dt for j in 0..4 (vectorised in x)."""
    if j not in (0, 1, 2, 3, 4):
        raise ValueError(f"j must be in 0..4, got {j}")
    arr, scalar = _as_array(x)
    xs = np.atleast_1d(arr)
    v = _a_scaled(j, xs) * np.exp(2.0 * np.maximum(xs, 0.0))
    return _ret(v.reshape(arr.shape), scalar)


def a_all(x) -> np.ndarray:
    """Array of shape (5, ...) holding a_0..a_4."""
    arr, _ = _as_array(x)
    return np.stack([np.asarray(a_j(arr, j)) for j in range(5)])


# --------------------------------------------------------------------------
# determinants

def _dets_negative(x: np.ndarray) -> dict[str, np.ndarray]:
    """Direct products of closed-form moments; intended for x <= -X_SWITCH."""
    a0, a1, a2, a3, a4 = (_a_closed_scaled(j, x) for j in range(5))
    return {
        "delta1": a1 * a3 - a2 * a2,
        "delta2": a2 * a4 - a3 * a3,
        "delta0": a0 * a2 - a1 * a1,
        "eta": a0 * a2 * a4 - a0 * a3 * a3 - a1 * a1 * a4 + 2.0 * a1 * a2 * a3 - a2 * a2 * a2,
    }


def _dets_scaled(x: np.ndarray) -> dict[str, np.ndarray]:
    """Delta0, Delta1, Delta2 times e^{-4x^+}; eta times e^{-6x^+}."""
    out = {k: np.empty_like(x) for k in ("delta0", "delta1", "delta2", "eta")}
    small = np.abs(x) < X_SWITCH
    neg = (~small) & (x < 0)
    pos = (~small) & (x > 0)
    if small.any():
        xs = x[small]
        e4 = np.exp(-4.0 * np.maximum(xs, 0.0))
        for k in ("delta0", "delta1", "delta2"):
            out[k][small] = _horner(_DET_SERIES[k], xs) * e4
        out["eta"][small] = _horner(_DET_SERIES["eta"], xs) * e4 * np.exp(-2.0 * np.maximum(xs, 0.0))
    if neg.any():
        d = _dets_negative(x[neg])
        for k in out:
            out[k][neg] = d[k]
    if pos.any():
        y = -x[pos]
        b = [_a_closed_scaled(j, y) for j in range(5)]
        # Substituting t = 1 - s maps the weight e^{2xt} to e^{2x} e^{-2xs};
        # {1, t} and {1, t, t^2} span the same spaces in s, while the weights
        # t and t^2 become (1 - s) and (1 - s)^2.
        c = [b[j] - b[j + 1] for j in range(3)]
        dd = [b[j] - 2.0 * b[j + 1] + b[j + 2] for j in range(3)]
        out["delta1"][pos] = c[0] * c[2] - c[1] * c[1]
        out["delta2"][pos] = dd[0] * dd[2] - dd[1] * dd[1]
        neg_d = _dets_negative(y)
        out["delta0"][pos] = neg_d["delta0"]
        out["eta"][pos] = neg_d["eta"]
    return out


def deltas_eta(x):
    """(Delta1, Delta2, eta) at x; vectorised."""
    arr, scalar = _as_array(x)
    xs = np.atleast_1d(arr)
    d = _dets_scaled(xs)
    xp = np.maximum(xs, 0.0)
    d1 = (d["delta1"] * np.exp(4.0 * xp)).reshape(arr.shape)
    d2 = (d["delta2"] * np.exp(4.0 * xp)).reshape(arr.shape)
    eta = (d["eta"] * np.exp(6.0 * xp)).reshape(arr.shape)
    return _ret(d1, scalar), _ret(d2, scalar), _ret(eta, scalar)


def delta0(x):
    """a0 a2 - a1^2, the Gram determinant of {1, t}."""
    arr, scalar = _as_array(x)
    xs = np.atleast_1d(arr)
    v = _dets_scaled(xs)["delta0"] * np.exp(4.0 * np.maximum(xs, 0.0))
    return _ret(v.reshape(arr.shape), scalar)


def eta_sinh_form(x):
    """e^{3x}(2x^3 cosh x - x^2(3+x^2) sinh x + sinh^3 x)/(16 x^9).

    Only a cross-check: the numerator cancels to O(x^9) near zero, so this
    form is meaningful for |x| of order one and larger.
    """
    arr, scalar = _as_array(x)
    with np.errstate(over="ignore", invalid="ignore"):
        num = 2 * arr**3 * np.cosh(arr) - arr**2 * (3 + arr**2) * np.sinh(arr) + np.sinh(arr) ** 3
        v = np.exp(3 * arr) * num / (16 * arr**9)
    return _ret(v, scalar)


# --------------------------------------------------------------------------
# profiles

def intensity_F(x):
    """The published closed-form profile; finite and positive on all of R."""
    arr, scalar = _as_array(x)
    xs = np.atleast_1d(arr)
    d = _dets_scaled(xs)
    b3 = _a_scaled(3, xs)
    b4 = _a_scaled(4, xs)
    e = np.exp(-2.0 * np.maximum(xs, 0.0))
    head = b4**5 / d["eta"]
    inner = (b4**2 * d["delta1"] ** 2 / d["eta"] + b4 * b3**2) / d["delta2"]
    v = head * e / (e + inner) ** 3 / _TWO_PI
    return _ret(v.reshape(arr.shape), scalar)


def intensity_F_joint(x):
    """eta^2 / (2 Delta0^3): pair profile from the exact Gaussian joint density."""
    arr, scalar = _as_array(x)
    # even in x exactly; evaluate on the non-positive side
    xs = -np.abs(np.atleast_1d(arr))
    d = _dets_scaled(xs)
    v = d["eta"] ** 2 / (2.0 * d["delta0"] ** 3)
    return _ret(v.reshape(arr.shape), scalar)


@dataclass(frozen=True)
class Profile:
    name: str
    F: Callable
    # tail envelope on x > 0 and x < 0: ("exp", rate) for C e^{-rate x},
    # ("pow", p) for C |x|^{-p}
    right: tuple[str, float]
    left: tuple[str, float]


PROFILES = {
    "closed": Profile("closed", intensity_F, ("exp", 1.0), ("pow", 16.0)),
    "joint": Profile("joint", intensity_F_joint, ("pow", 6.0), ("pow", 6.0)),
}


def _profile(form) -> Profile:
    if isinstance(form, Profile):
        return form
    try:
        return PROFILES[form]
    except KeyError:
        raise ValueError(f"unknown profile {form!r}; choose from {sorted(PROFILES)}") from None


# --------------------------------------------------------------------------
# constants

def c_star_K(K: float, form="closed", with_error: bool = False):
    """(1/4) int_{-K}^{K} F(x) dx by adaptive quadrature."""
    if K < 0:
        raise ValueError("K must be non-negative")
    if K == 0:
        return (0.0, 0.0) if with_error else 0.0
    F = _profile(form).F
    pts = [p for p in (-1.0, 0.0, 1.0) if -K < p < K]
    val, err = integrate.quad(F, -K, K, points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=400)
    return (val / 4.0, err / 4.0) if with_error else val / 4.0


def c_star_K_gauss_legendre(K: float, nodes: int = 256, form="closed") -> float:
    """Fixed-order Gauss-Legendre value of c_star_K, used as an independent check."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    return float(K * np.dot(w, _profile(form).F(K * t)) / 4.0)


@dataclass(frozen=True)
class CStar:
    value: float
    error: float
    K_max: float
    quad_error: float
    tail_right: float
    tail_left: float
    envelope_constants: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "K_max": self.K_max,
            "quad_error": self.quad_error,
            "tail_right": self.tail_right,
            "tail_left": self.tail_left,
            "envelope_constants": dict(self.envelope_constants),
        }


ENVELOPE_SAFETY = 10.0


def _tail(F, side: int, env: tuple[str, float], K: float) -> tuple[float, float]:
    """Certified bound on (1/4) int_{|x|>K, sign x = side} F, and the fitted constant."""
    grid = side * np.linspace(20.0, 60.0, 801)
    vals = F(grid)
    kind, p = env
    if kind == "exp":
        C = float(np.max(vals * np.exp(p * np.abs(grid))))
        tail = C * math.exp(-p * K) / p
    else:
        C = float(np.max(vals * np.abs(grid) ** p))
        tail = C * K ** (1.0 - p) / (p - 1.0)
    return ENVELOPE_SAFETY * tail / 4.0, C


@lru_cache(maxsize=32)
def _c_star_cached(K_max: float, form: str) -> CStar:
    prof = _profile(form)
    val, qerr = c_star_K(K_max, prof, with_error=True)
    tr, cr = _tail(prof.F, +1, prof.right, K_max)
    tl, cl = _tail(prof.F, -1, prof.left, K_max)
    return CStar(val, qerr + tr + tl, K_max, qerr, tr, tl, {"right": cr, "left": cl})


def c_star(K_max: float = 60.0, form: str = "closed") -> CStar:
    """(1/4) int_R F with a certified error: quadrature on [-K_max, K_max] plus
    fitted tail envelopes inflated by ENVELOPE_SAFETY."""
    return _c_star_cached(float(K_max), form)


def lambda_K_U(K: float, U: IntervalSet, form="closed") -> float:
    """Expected number of close pairs in Omega_K with scaled gap in U."""
    if U.is_empty:
        return 0.0
    return c_star_K(K, form) * U.quartic_measure()


def min_gap_survival(s, c: float | None = None):
    """exp(-c s^4 / 4); c defaults to the closed-form constant."""
    arr, scalar = _as_array(s)
    if np.any(arr < 0):
        raise ValueError("s must be non-negative")
    if c is None:
        c = c_star().value
    return _ret(np.exp(-c * arr**4 / 4.0), scalar)


def survival_median(c: float) -> float:
    return (4.0 * math.log(2.0) / c) ** 0.25


# --------------------------------------------------------------------------
# table

@dataclass
class IntensityTable:
    grid: np.ndarray
    values: dict[str, np.ndarray]
    c_star_K: dict[float, float]
    c_star: CStar
    c_star_joint: CStar | None = None

    COLUMNS = ("a0", "a1", "a2", "a3", "a4", "delta1", "delta2", "eta", "F")

    def csv_text(self, with_joint: bool = False) -> str:
        cols = list(self.COLUMNS) + (["F_joint"] if with_joint else [])
        lines = [",".join(["x", *cols])]
        for i, x in enumerate(self.grid):
            lines.append(",".join([repr(float(x))] + [repr(float(self.values[c][i])) for c in cols]))
        return "\n".join(lines) + "\n"

    def to_csv(self, path, with_joint: bool = False) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.csv_text(with_joint))


def build_table(x_min: float, x_max: float, step: float, K_values=(10.0,)) -> IntensityTable:
    if step <= 0 or x_max < x_min:
        raise ValueError("need x_min <= x_max and step > 0")
    count = int(math.floor((x_max - x_min) / step + 1e-9)) + 1
    grid = x_min + step * np.arange(count)
    a = a_all(grid)
    d1, d2, eta = deltas_eta(grid)
    values = {f"a{j}": a[j] for j in range(5)}
    values.update(delta1=d1, delta2=d2, eta=eta, F=intensity_F(grid), F_joint=intensity_F_joint(grid))
    return IntensityTable(
        grid=grid,
        values=values,
        c_star_K={float(K): c_star_K(K) for K in K_values},
        c_star=c_star(),
        c_star_joint=c_star(form="joint"),
    )
