"""The polar net on Omega_K, its rectangles, root predictions, the events
A_z(U) and the net counters X_n^{+-}(U).

The net has (M1 + 1) * M2 points, about 16 K n^{3/2 + 2 beta}; at n = 1000
that is 10^7 to 10^9 points, so :class:`Net` never stores them.  A point is
addressed by (a, b); coordinates, rectangles and smoothness are computed on
demand, and the counters only visit cells near roots (or every cell, when the
net is small enough for an exhaustive sweep).

Rectangle conventions, with cell coordinates (a + s, b + t):
    R_z      s, t in [-1/2, 1/2]
    R_z^o    s, t in [-1/2 + n^{-beta/2}, 1/2 - n^{-beta/2}]
    R_z^#    s, t in [-1/2 + n^{-3 beta/4}, 1/2 - n^{-3 beta/4}]
each intersected with the closed upper half-plane.  The inner and sharp
rectangles are empty unless n^{-beta/2} < 1/2, i.e. n > 4^{1/beta}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numba import njit

from .intervals import IntervalSet
from .polyeval import EvalBundle, effective_degree, horner4
from .sampling import PolynomialSample

DEFAULT_MAX_POINTS = 10**8


# --------------------------------------------------------------------------
# smoothness and spread

def dist_to_int(x):
    x = np.asarray(x, dtype=float)
    return np.abs(x - np.round(x))


def is_smooth(z: complex, A: float, n: int, d: float | None = None) -> bool:
    """||p theta/pi|| >= A/d for every integer p in [1, A + 1].

    For |z| > 1 the test runs on 1/z, whose argument is -theta and whose
    effective degree replaces d; the distance-to-integer is unchanged.
    """
    z = complex(z)
    if z.imag == 0:
        return False
    w = z if abs(z) <= 1 else 1 / z
    if d is None:
        d = effective_degree(w, n)
    theta = abs(math.atan2(w.imag, w.real))
    p = np.arange(1, int(math.floor(A + 1)) + 1)
    return bool(np.all(dist_to_int(p * theta / math.pi) >= A / d))


def smooth_mask(theta: np.ndarray, A: float, d: float) -> np.ndarray:
    """Vectorised is_smooth for angles theta at a common effective degree d."""
    theta = np.asarray(theta, dtype=float)
    ok = (theta > 0) & (theta < math.pi)
    for p in range(1, int(math.floor(A + 1)) + 1):
        ok &= dist_to_int(p * theta / math.pi) >= A / d
    return ok


def is_spread(zs: Sequence[complex], gamma: float, n: int) -> bool:
    zs = np.asarray(zs, dtype=np.complex128)
    if zs.size < 2:
        raise ValueError("need at least two points")
    d = np.abs(zs[:, None] - zs[None, :])
    iu = np.triu_indices(zs.size, 1)
    return bool(np.all(d[iu] >= gamma / n))


# --------------------------------------------------------------------------
# rectangles and net points

@dataclass(frozen=True)
class PolarRect:
    r_lo: float
    r_hi: float
    t_lo: float
    t_hi: float

    @property
    def is_empty(self) -> bool:
        return self.r_lo > self.r_hi or self.t_lo > self.t_hi

    def contains(self, w) -> bool:
        w = np.asarray(w, dtype=np.complex128)
        r = np.abs(w)
        t = np.angle(w)
        out = (r >= self.r_lo) & (r <= self.r_hi) & (t >= self.t_lo) & (t <= self.t_hi) & (w.imag >= 0)
        return bool(out) if out.ndim == 0 else out

    def contains_rect(self, other: "PolarRect") -> bool:
        if other.is_empty:
            return True
        return self.r_lo <= other.r_lo and other.r_hi <= self.r_hi and self.t_lo <= other.t_lo and other.t_hi <= self.t_hi


@dataclass(frozen=True)
class NetPoint:
    z: complex
    a_index: int
    b_index: int
    is_smooth: bool
    rect: PolarRect
    rect_inner: PolarRect
    rect_sharp: PolarRect


class NetTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Net(Sequence):
    K: float
    n: int
    beta: float
    A: float
    max_points: int | None = DEFAULT_MAX_POINTS

    def __post_init__(self):
        if self.n < 3 or self.K <= 0:
            raise ValueError("need n >= 3 and K > 0")
        if self.M1 < 1:
            raise ValueError("net has no radial rows; increase n or beta")

    # geometry -------------------------------------------------------------
    @property
    def delta(self) -> float:
        return self.n ** (-1.25 - self.beta)

    @property
    def M1(self) -> int:
        return int(math.ceil(4 * self.K / (self.delta * self.n) - 1e-9))

    @property
    def M2(self) -> int:
        return int(math.ceil(4 / self.delta - 1e-9))

    @property
    def margin_inner(self) -> float:
        return self.n ** (-self.beta / 2)

    @property
    def margin_sharp(self) -> float:
        return self.n ** (-3 * self.beta / 4)

    @property
    def d(self) -> float:
        # effective degree used for smoothness throughout Omega_K
        return float(self.n)

    def radius(self, a):
        return 1 - self.K / self.n + (2 * self.K / self.n) * (np.asarray(a, float) / self.M1)

    def angle(self, b):
        return math.pi * np.asarray(b, float) / self.M2

    def point(self, a, b):
        return self.radius(a) * np.exp(1j * self.angle(b))

    def locate(self, w):
        """Nearest (a, b) cell indices to w (unclipped)."""
        w = np.asarray(w, dtype=np.complex128)
        a = np.rint((np.abs(w) - (1 - self.K / self.n)) * self.M1 * self.n / (2 * self.K)).astype(np.int64)
        b = np.rint(np.angle(w) * self.M2 / math.pi).astype(np.int64)
        return a, b

    def rect_bounds(self, a, b, margin: float):
        """Vectorised (r_lo, r_hi, t_lo, t_hi) of the rectangle with given margin."""
        h = 0.5 - margin
        r_lo = self.radius(np.asarray(a) - h)
        r_hi = self.radius(np.asarray(a) + h)
        t_lo = np.maximum(self.angle(np.asarray(b) - h), 0.0)
        t_hi = np.minimum(self.angle(np.asarray(b) + h), math.pi)
        return r_lo, r_hi, t_lo, t_hi

    def rect(self, a: int, b: int, kind: str = "full") -> PolarRect:
        m = {"full": 0.0, "inner": self.margin_inner, "sharp": self.margin_sharp}[kind]
        return PolarRect(*(float(v) for v in self.rect_bounds(a, b, m)))

    def smooth(self, b) -> np.ndarray:
        return smooth_mask(self.angle(b), self.A, self.d)

    # sequence protocol ----------------------------------------------------
    def __len__(self) -> int:
        return (self.M1 + 1) * self.M2

    def index_to_ab(self, i: int) -> tuple[int, int]:
        if not 0 <= i < len(self):
            raise IndexError(i)
        a, b = divmod(int(i), self.M2)
        return a, b + 1

    def net_point(self, a: int, b: int) -> NetPoint:
        z = complex(self.point(a, b))
        return NetPoint(
            z=z,
            a_index=int(a),
            b_index=int(b),
            is_smooth=bool(self.smooth(np.array([b]))[0]),
            rect=self.rect(a, b, "full"),
            rect_inner=self.rect(a, b, "inner"),
            rect_sharp=self.rect(a, b, "sharp"),
        )

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        return self.net_point(*self.index_to_ab(i))

    def __iter__(self) -> Iterator[NetPoint]:
        self.check_materializable()
        for i in range(len(self)):
            yield self[i]

    def check_materializable(self) -> None:
        if self.max_points is not None and len(self) > self.max_points:
            raise NetTooLarge(
                f"net has {len(self):,} points (M1={self.M1}, M2={self.M2}) above the cap "
                f"{self.max_points:,}; raise max_points, lower beta, or reduce K. "
                f"Cardinality is about 16 K n^(3/2 + 2 beta)."
            )

    def all_indices(self) -> tuple[np.ndarray, np.ndarray]:
        self.check_materializable()
        a, b = np.meshgrid(np.arange(self.M1 + 1), np.arange(1, self.M2 + 1), indexing="ij")
        return a.ravel(), b.ravel()


def build_net(K: float, n: int, beta: float = 0.3, A: float | None = None, max_points: int | None = DEFAULT_MAX_POINTS) -> Net:
    """Lazy net; ``max_points`` caps full enumeration, not construction."""
    if A is None:
        A = n**0.15
    return Net(float(K), int(n), float(beta), float(A), max_points)


# --------------------------------------------------------------------------
# predictions and events

class DegeneratePrediction(ValueError):
    pass


@dataclass(frozen=True)
class PredictionPair:
    alpha_hat: complex
    alpha_prime_hat: complex
    f_over_fprime: complex
    two_fprime_over_fsecond: complex


def predict_roots(bundle: EvalBundle) -> PredictionPair:
    if bundle.f1 == 0 or bundle.f2 == 0:
        raise DegeneratePrediction("f' or f'' vanishes; no quadratic prediction")
    q = bundle.f / bundle.f1
    r = 2 * bundle.f1 / bundle.f2
    return PredictionPair(bundle.z - q, bundle.z + q - r, q, r)


def u_variants(U: IntervalSet, n: int) -> tuple[IntervalSet, IntervalSet]:
    if n < 3:
        raise ValueError("n must be at least 3")
    r = 1.0 / math.log(n)
    return U.blow_up(r), U.blow_down(r)


VARIANTS = ("base", "plus", "minus")


def _variant_parts(net: Net, U: IntervalSet, variant: str):
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    Up, Um = u_variants(U, net.n)
    UU = {"base": U, "plus": Up, "minus": Um}[variant]
    margin = net.margin_sharp if variant == "plus" else net.margin_inner
    return UU, margin


def _in_rect(w: np.ndarray, r_lo, r_hi, t_lo, t_hi) -> np.ndarray:
    r = np.abs(w)
    t = np.angle(w)
    return (r >= r_lo) & (r <= r_hi) & (t >= t_lo) & (t <= t_hi) & (w.imag >= 0)


def event_A_z(bundle: EvalBundle, net_point: NetPoint, U: IntervalSet, n: int, variant: str = "base") -> bool:
    """The three conditions of A_z(U) (or A_z^{+-}(U)).

    The rectangle condition is on the Newton prediction z - f/f'.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    f1 = bundle.f1
    if f1 == 0 or bundle.f2 == 0:
        return False
    ln = math.log(n)
    if abs(f1) < n**1.25 / ln:
        return False
    Up, Um = u_variants(U, n)
    UU = {"base": U, "plus": Up, "minus": Um}[variant]
    if not UU.contains(n**1.25 * 2 * abs(f1) / abs(bundle.f2)):
        return False
    rect = net_point.rect_sharp if variant == "plus" else net_point.rect_inner
    if rect.is_empty:
        return False
    return bool(rect.contains(bundle.z - bundle.f / f1))


@njit(cache=True, nogil=True)
def _eval_points(c, zs, out):
    for i in range(zs.shape[0]):
        f, f1, f2, f3 = horner4(c, zs[i])
        out[i, 0] = f
        out[i, 1] = f1
        out[i, 2] = f2


def events_many(net: Net, a: np.ndarray, b: np.ndarray, vals: np.ndarray, U: IntervalSet, variant: str) -> np.ndarray:
    """Vectorised event test; vals[:, :3] = (f, f', f'') at net.point(a, b)."""
    n = net.n
    UU, margin = _variant_parts(net, U, variant)
    f, f1, f2 = vals[:, 0], vals[:, 1], vals[:, 2]
    z = net.point(a, b)
    ok = (np.abs(f1) >= n**1.25 / math.log(n)) & (f2 != 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = n**1.25 * 2 * np.abs(f1) / np.abs(f2)
        pred = z - f / f1
    ok &= UU.contains(np.where(ok, ratio, -1.0))
    if 0.5 - margin < 0:
        return np.zeros(a.shape, dtype=bool)
    ok &= _in_rect(pred, *net.rect_bounds(a, b, margin))
    return ok


# --------------------------------------------------------------------------
# counting over the net

def candidate_cells(net: Net, roots: np.ndarray, window: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Cells within ``window`` rows/columns of a root near Omega_K."""
    n, K = net.n, net.K
    rad_pad = (window + 1) * 2 * K / (n * net.M1)
    mod = np.abs(roots)
    near = (mod >= 1 - K / n - rad_pad) & (mod <= 1 + K / n + rad_pad) & (roots.imag >= -rad_pad)
    a0, b0 = net.locate(roots[near])
    off = np.arange(-window, window + 1)
    aa = (a0[:, None, None] + off[None, :, None] + 0 * off[None, None, :]).ravel()
    bb = (b0[:, None, None] + 0 * off[None, :, None] + off[None, None, :]).ravel()
    keep = (aa >= 0) & (aa <= net.M1) & (bb >= 1) & (bb <= net.M2)
    key = np.unique(aa[keep] * (net.M2 + 1) + bb[keep])
    return key // (net.M2 + 1), key % (net.M2 + 1)


@dataclass
class NetEvaluation:
    a: np.ndarray
    b: np.ndarray
    z: np.ndarray
    vals: np.ndarray
    smooth: np.ndarray
    exhaustive: bool


def evaluate_net(poly, net: Net, roots: np.ndarray | None = None, window: int = 2, exhaustive: bool | None = None) -> NetEvaluation:
    c = poly.coeffs if isinstance(poly, PolynomialSample) else np.asarray(poly, float)
    if exhaustive is None:
        exhaustive = roots is None
    if exhaustive:
        a, b = net.all_indices()
    else:
        a, b = candidate_cells(net, np.asarray(roots), window)
    z = np.ascontiguousarray(net.point(a, b), dtype=np.complex128)
    vals = np.empty((z.size, 3), dtype=np.complex128)
    _eval_points(np.ascontiguousarray(c), z, vals)
    return NetEvaluation(a, b, z, vals, net.smooth(b), exhaustive)


def _count_close_pairs(zs: np.ndarray, radius: float) -> int:
    if zs.size < 2:
        return 0
    # bucket by angle: sort and sweep a window
    order = np.argsort(np.angle(zs), kind="stable")
    zs = zs[order]
    th = np.angle(zs)
    count = 0
    j0 = 0
    for i in range(zs.size):
        while th[i] - th[j0] > 2 * radius:
            j0 += 1
        for j in range(j0, i):
            if abs(zs[i] - zs[j]) <= radius:
                count += 1
    return count


def firing_mask(ev: NetEvaluation, net: Net, U: IntervalSet, variant: str) -> np.ndarray:
    return ev.smooth & events_many(net, ev.a, ev.b, ev.vals, U, variant)


def count_X_pm(poly, net: Net, U: IntervalSet, n: int, variant: str = "plus", roots=None, window: int = 2,
               evaluation: NetEvaluation | None = None) -> int:
    """Unordered pairs of firing smooth net points within log n / n^{5/4}.

    A close root pair fires two net points and so contributes one pair here
    but two roots to X_n(U); compare X_n with twice this count.

    With ``roots`` given only cells near those roots are evaluated; without
    them the whole net is swept (subject to the net's point cap).
    """
    if n != net.n:
        raise ValueError("n does not match the net")
    ev = evaluation or evaluate_net(poly, net, roots, window)
    fire = firing_mask(ev, net, U, variant)
    return _count_close_pairs(ev.z[fire], math.log(n) / n**1.25)


# --------------------------------------------------------------------------
# audit

@dataclass
class NetAudit:
    n: int
    K: float
    beta: float
    A: float
    U: str
    net_size: int
    evaluated_points: int
    exhaustive: bool
    x_minus: int
    x_base: int
    x_plus: int
    hits: list[dict] = field(default_factory=list)
    bounds: dict = field(default_factory=dict)

    def ordered(self, variant: str) -> int:
        """Counter in ordered-pair units (2 per pair), the units of X_n(U),
        which counts roots rather than pairs."""
        return 2 * {"minus": self.x_minus, "base": self.x_base, "plus": self.x_plus}[variant]

    def sandwich_holds(self, x_n: int) -> bool:
        return self.ordered("minus") <= x_n <= self.ordered("plus")

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["ordered_counts"] = {v: self.ordered(v) for v in VARIANTS}
        return d


def audit_net(poly, net: Net, U: IntervalSet, roots: np.ndarray, window: int = 2, exhaustive: bool = False) -> NetAudit:
    """Evaluate the events on the net and compare predictions with the true roots."""
    n = net.n
    roots = np.asarray(roots, dtype=np.complex128)
    ev = evaluate_net(poly, net, None if exhaustive else roots, window, exhaustive)
    counts = {v: _count_close_pairs(ev.z[firing_mask(ev, net, U, v)], math.log(n) / n**1.25) for v in VARIANTS}
    base = firing_mask(ev, net, U, "base")
    hits = []
    for i in np.flatnonzero(base):
        f, f1, f2 = ev.vals[i]
        z = ev.z[i]
        ah = z - f / f1
        aph = z + f / f1 - 2 * f1 / f2
        d = np.abs(roots - ah)
        j = int(np.argmin(d))
        d2 = np.abs(roots - aph)
        d2[j] = np.inf
        hits.append(
            {
                "a": int(ev.a[i]),
                "b": int(ev.b[i]),
                "z": [float(z.real), float(z.imag)],
                "alpha_hat": [float(ah.real), float(ah.imag)],
                "alpha_prime_hat": [float(aph.real), float(aph.imag)],
                "root_distance": float(d[j]),
                "second_root_distance": float(d2.min()) if d2.size > 1 else math.inf,
                "scaled_ratio": float(n**1.25 * 2 * abs(f1) / abs(f2)),
            }
        )
    base_scale = n ** (-1.25 - 2 * net.beta)
    ln = math.log(n)
    return NetAudit(
        n=n, K=net.K, beta=net.beta, A=net.A, U=str(U), net_size=len(net),
        evaluated_points=int(ev.z.size), exhaustive=ev.exhaustive,
        x_minus=counts["minus"], x_base=counts["base"], x_plus=counts["plus"], hits=hits,
        bounds={"linear": base_scale * ln**4, "quadratic": base_scale * ln**5},
    )
