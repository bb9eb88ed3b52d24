"""All roots of a real polynomial: Aberth-Ehrlich iteration with a companion
matrix oracle for small degree.

Exact zero coefficients at either end are stripped before iterating: trailing
zeros (xi_0 = xi_1 = ... = 0) become exact roots at the origin, and leading
zeros lower the algebraic degree, which is recorded in the result.  This
matters for the uniform3 law, whose atom at zero produces genuine multiple
roots at the origin.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .sampling import PolynomialSample


@dataclass(frozen=True)
class SolverOptions:
    residual_tol: float = 1e-10
    max_iters: int = 200
    polish: bool = True
    step_tol: float = 1e-14
    polish_scale: float = 10.0  # pairs closer than polish_scale * n^{-5/4}
    cluster_radius: float = 1e-5  # relative size of a numerically multiple root


@dataclass(frozen=True, eq=False)
class RootSet:
    roots: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    n: int
    algebraic_degree: int
    zero_roots: int = 0
    polished: int = 0
    method: str = "aberth"
    notes: tuple[str, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return self.roots.size

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0


# --------------------------------------------------------------------------
# kernels

FLOOR_FACTOR = 4.0 * 2.220446049250313e-16


@njit(cache=True, nogil=True)
def _newton_ratio(c, zi):
    """(f/f', ok, at_floor) at zi; the reversed polynomial is used when |zi| > 1.

    at_floor means |f(zi)| is within a few rounding errors of the Horner sum
    of absolute values, so further iteration cannot improve this root.
    """
    n = c.shape[0] - 1
    if abs(zi) <= 1.0:
        az = abs(zi)
        p = c[n] + 0j
        dp = 0j
        s = abs(c[n])
        for k in range(n - 1, -1, -1):
            dp = dp * zi + p
            p = p * zi + c[k]
            s = s * az + abs(c[k])
        if p == 0:
            return 0j, True, True
        floor = abs(p) <= FLOOR_FACTOR * (n + 1) * s
        if dp == 0:
            return 0j, False, floor
        return p / dp, True, floor
    w = 1.0 / zi
    aw = abs(w)
    q = c[0] + 0j
    dq = 0j
    s = abs(c[0])
    for k in range(1, n + 1):
        dq = dq * w + q
        q = q * w + c[k]
        s = s * aw + abs(c[k])
    if q == 0:
        return 0j, True, True
    floor = abs(q) <= FLOOR_FACTOR * (n + 1) * s
    # f(z) = z^n g(w), g the reversed polynomial, w = 1/z:
    # f/f' = 1 / (w (n - w g'(w)/g(w)))
    den = (n - w * dq / q) * w
    if den == 0:
        return 0j, False, floor
    return 1.0 / den, True, floor


@njit(cache=True, nogil=True)
def aberth_kernel(c, z, step_tol, max_iters):
    """In-place Gauss-Seidel Aberth iteration; returns iterations or -1."""
    n = z.shape[0]
    done = np.zeros(n, dtype=np.bool_)
    for it in range(max_iters):
        maxcorr = 0.0
        for i in range(n):
            if done[i]:
                continue
            zi = z[i]
            ratio, ok, floor = _newton_ratio(c, zi)
            if not ok:
                # f' vanished: nudge off the critical point
                z[i] = zi * (1.0 + 1e-7) + 1e-7j
                maxcorr = 1.0
                continue
            if ratio == 0:
                done[i] = True
                continue
            s = 0j
            for j in range(n):
                if j != i:
                    d = zi - z[j]
                    if d != 0:
                        s += 1.0 / d
            corr = ratio / (1.0 - ratio * s)
            z[i] = zi - corr
            a = abs(corr) / max(1.0, abs(zi))
            if a > maxcorr:
                maxcorr = a
            if a < step_tol or (floor and a < 1e-8):
                done[i] = True
        if maxcorr < step_tol:
            return it + 1
    return -1


@njit(cache=True, nogil=True)
def residuals_kernel(c, z, out):
    n = c.shape[0] - 1
    cmax = 0.0
    for k in range(n + 1):
        if abs(c[k]) > cmax:
            cmax = abs(c[k])
    for i in range(z.shape[0]):
        zi = z[i]
        if abs(zi) <= 1.0:
            p = c[n] + 0j
            for k in range(n - 1, -1, -1):
                p = p * zi + c[k]
            out[i] = abs(p) / cmax
        else:
            # |f(z)| / |z|^n = |g(1/z)|
            w = 1.0 / zi
            q = c[0] + 0j
            for k in range(1, n + 1):
                q = q * w + c[k]
            out[i] = abs(q) / cmax


def initial_guesses(c: np.ndarray) -> np.ndarray:
    """Points on four interleaved rings of radius R(1 +- k/(2n)).

    R is the geometric mean modulus |xi_0/xi_n|^{1/n}, which is close to one
    for Kac polynomials.  A small angular offset keeps the starting set free of
    conjugate symmetry, which would otherwise stall on real roots.
    """
    n = c.size - 1
    R = math.exp((math.log(abs(c[0])) - math.log(abs(c[-1]))) / n)
    k = np.arange(n)
    ang = 2.0 * np.pi * (k + 0.5) / n + 0.3 / n
    r = R * (1.0 + ((k % 4) - 1.5) / (2.0 * n))
    return r * np.exp(1j * ang)


def _strip(c: np.ndarray) -> tuple[np.ndarray, int, int]:
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise ValueError("zero polynomial has no well-defined roots")
    lo, hi = int(nz[0]), int(nz[-1])
    return c[lo : hi + 1], lo, hi


def residuals(poly, roots) -> np.ndarray:
    c = poly.coeffs if isinstance(poly, PolynomialSample) else np.asarray(poly, float)
    roots = np.ascontiguousarray(roots, dtype=np.complex128)
    out = np.empty(roots.size)
    residuals_kernel(np.ascontiguousarray(c), roots, out)
    return out


REAL_SNAP = 1e-14
EPS = 2.220446049250313e-16
MAX_CLUSTER = 8  # larger clusters are left alone


def _snap_real(roots: np.ndarray) -> np.ndarray:
    """Zero the imaginary part of isolated near-real roots.

    A real polynomial's non-real roots come in conjugate pairs, so a root
    within REAL_SNAP of the axis with no neighbour within 1e-10 must be real;
    without this, the sign of a ~1e-30 imaginary part decides upper half-plane
    membership.
    """
    near = np.flatnonzero(np.abs(roots.imag) <= REAL_SNAP * np.maximum(1.0, np.abs(roots)))
    if near.size == 0:
        return roots
    out = roots.copy()
    for i in near:
        d = np.abs(roots - roots[i])
        d[i] = np.inf
        if d.min() > 1e-10:
            out[i] = complex(roots[i].real, 0.0)
    return out


def _assemble(poly, core_roots, zero_roots, degree, iterations, converged, opts, method, notes):
    n = poly.n
    roots = _snap_real(np.concatenate([np.zeros(zero_roots, dtype=np.complex128), core_roots]))
    # roots "at infinity" from a vanishing leading coefficient are not roots;
    # report the algebraic degree and keep exactly `degree` entries
    res = residuals(poly, roots)
    return RootSet(
        roots=roots,
        residuals=res,
        iterations=iterations,
        converged=bool(converged and (res.size == 0 or res.max() <= opts.residual_tol)),
        n=n,
        algebraic_degree=degree,
        zero_roots=zero_roots,
        method=method,
        notes=tuple(notes),
    )


def find_roots(poly: PolynomialSample, opts: SolverOptions | None = None) -> RootSet:
    opts = opts or SolverOptions()
    c = poly.coeffs
    if c[-1] == 0 and (poly.law is None or not poly.law.atom_at_zero):
        raise ValueError("leading coefficient is zero")
    core, zeros, deg = _strip(c)
    notes = []
    if deg < poly.n:
        notes.append(f"leading zeros: algebraic degree {deg} < n = {poly.n}")
    m = core.size - 1
    if m == 0:
        core_roots = np.zeros(0, dtype=np.complex128)
        it, conv = 0, True
    elif m == 1:
        core_roots = np.array([-core[0] / core[1]], dtype=np.complex128)
        it, conv = 1, True
    else:
        z = initial_guesses(core)
        it = aberth_kernel(np.ascontiguousarray(core), z, opts.step_tol, opts.max_iters)
        conv = it >= 0
        it = it if conv else opts.max_iters
        core_roots = z
    rs = _assemble(poly, core_roots, zeros, deg, it, conv, opts, "aberth", notes)
    if opts.polish and poly.n >= 2:
        rs = polish_close_pairs(poly, rs, opts)
        rs = recentre_clusters(poly, rs, opts)
    return rs


def companion_roots(poly: PolynomialSample) -> RootSet:
    if not 2 <= poly.n <= 64:
        raise ValueError(f"companion oracle supports 2 <= n <= 64, got {poly.n}")
    core, zeros, deg = _strip(poly.coeffs)
    m = core.size - 1
    if m >= 1:
        C = np.zeros((m, m))
        C[1:, :-1] = np.eye(m - 1)
        C[:, -1] = -core[:-1] / core[-1]
        core_roots = np.linalg.eigvals(C).astype(np.complex128)
    else:
        core_roots = np.zeros(0, dtype=np.complex128)
    notes = [f"leading zeros: algebraic degree {deg} < n = {poly.n}"] if deg < poly.n else []
    return _assemble(poly, core_roots, zeros, deg, 1, True, SolverOptions(), "companion", notes)


# --------------------------------------------------------------------------
# extended-precision polish of close pairs

def close_pairs(roots: np.ndarray, radius: float) -> list[tuple[int, int]]:
    if roots.size < 2:
        return []
    from scipy.spatial import cKDTree

    pts = np.column_stack([roots.real, roots.imag])
    return sorted(cKDTree(pts).query_pairs(radius))


@njit(cache=True, nogil=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True, nogil=True, inline="always")
def _split(a):
    t = 134217729.0 * a  # 2^27 + 1
    hi = t - (t - a)
    return hi, a - hi


@njit(cache=True, nogil=True, inline="always")
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, nogil=True)
def comp_horner(c, z):
    """Compensated Horner: f(z) as accurate as if evaluated in double-double,
    together with a plain-precision f'(z)."""
    n = c.shape[0] - 1
    zr = z.real
    zi = z.imag
    pr = c[n]
    pi = 0.0
    er = 0.0
    ei = 0.0
    d = 0j
    for k in range(n - 1, -1, -1):
        d = d * z + complex(pr + er, pi + ei)
        t1, e1 = _two_prod(pr, zr)
        t2, e2 = _two_prod(pi, zi)
        t3, e3 = _two_prod(pr, zi)
        t4, e4 = _two_prod(pi, zr)
        r1, e5 = _two_sum(t1, -t2)
        r2, e6 = _two_sum(r1, c[k])
        i1, e7 = _two_sum(t3, t4)
        # carry the error polynomial: e <- e*z + local rounding errors
        ner = er * zr - ei * zi + (e1 - e2 + e5 + e6)
        nei = er * zi + ei * zr + (e3 + e4 + e7)
        pr, pi, er, ei = r2, i1, ner, nei
    return complex(pr + er, pi + ei), d


@njit(cache=True, nogil=True)
def polish_kernel(c, crev, roots, idx, sweeps):
    for t in range(idx.shape[0]):
        i = idx[t]
        z = roots[i]
        if abs(z) <= 1.0:
            for _ in range(sweeps):
                p, dp = comp_horner(c, z)
                if p == 0 or dp == 0:
                    break
                z = z - p / dp
        else:
            w = 1.0 / z
            for _ in range(sweeps):
                p, dp = comp_horner(crev, w)
                if p == 0 or dp == 0:
                    break
                w = w - p / dp
            z = 1.0 / w
        roots[i] = z


def polish_close_pairs(poly: PolynomialSample, rs: RootSet, opts: SolverOptions) -> RootSet:
    """Newton steps with compensated (double-double) evaluation for every root
    that has a neighbour within opts.polish_scale * n^{-5/4}.

    The solver's error (~1e-13) lies far inside the Newton basin of a simple
    root whose neighbour is ~n^{-5/4} away, so plain Newton converges; the
    accurate residual removes the rounding floor of ordinary Horner.
    Exact zero roots are left alone.
    """
    n = poly.n
    radius = opts.polish_scale * n ** -1.25
    pairs = close_pairs(rs.roots, radius)
    idx = np.array(sorted({i for p in pairs for i in p if rs.roots[i] != 0}), dtype=np.int64)
    if idx.size == 0:
        return rs
    roots = rs.roots.copy()
    c = np.ascontiguousarray(poly.coeffs)
    polish_kernel(c, np.ascontiguousarray(c[::-1]), roots, idx, 3)
    roots = _snap_real(roots)
    res = residuals(poly, roots)
    return RootSet(
        roots=roots,
        residuals=res,
        iterations=rs.iterations,
        converged=bool(rs.converged and res.max() <= opts.residual_tol),
        n=rs.n,
        algebraic_degree=rs.algebraic_degree,
        zero_roots=rs.zero_roots,
        polished=int(idx.size),
        method=rs.method,
        notes=rs.notes,
    )


# --------------------------------------------------------------------------
# numerically multiple roots

def _groups(roots: np.ndarray, radius, relative: bool = False) -> list[list[int]]:
    """Connected components (size >= 2) of the graph |z_i - z_j| <= radius,
    or <= radius * max(1, |z_i|, |z_j|) when ``relative``."""
    if relative and roots.size:
        pairs = [(i, j) for i, j in close_pairs(roots, radius * max(1.0, float(np.abs(roots).max())))
                 if abs(roots[i] - roots[j]) <= radius * max(1.0, abs(roots[i]), abs(roots[j]))]
    else:
        pairs = close_pairs(roots, radius)
    if not pairs:
        return []
    parent = list(range(roots.size))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(roots.size):
        groups.setdefault(find(i), []).append(i)
    return [g for g in groups.values() if len(g) > 1]


def _derivative_coeffs(c: np.ndarray, order: int) -> np.ndarray:
    k = np.arange(c.size, dtype=float)
    fall = np.ones_like(k)
    for j in range(order):
        fall *= k - j
    return (c * fall)[order:]


def recentre_clusters(poly: PolynomialSample, rs: RootSet, opts: SolverOptions) -> RootSet:
    """Move each tight cluster of m roots so that its mean is the simple root
    of f^(m-1) nearby.

    An m-fold root is only determined to eps^(1/m) in double precision, and
    the solver stops once each residual is at the rounding floor, so the
    cluster's mean can be off by far more than the O(eps) error of the
    (well conditioned) centre.  The spread is left as found.

    A move is kept only if the lower derivatives also vanish at the new
    centre, so clusters of distinct simple roots are left alone.
    """
    roots = rs.roots
    groups = [g for g in _groups(roots, opts.cluster_radius, relative=True)
              if len(g) <= MAX_CLUSTER and not np.any(roots[g] == 0)]
    if not groups:
        return rs
    out = roots.copy()
    c = poly.coeffs.astype(float)
    moved = 0
    for g in groups:
        m = len(g)
        zs = roots[g]
        mean = zs.mean()
        diam = float(np.abs(zs[:, None] - zs[None, :]).max())
        d = np.ascontiguousarray(_derivative_coeffs(c, m - 1))
        if d.size < 2:
            continue
        w = complex(mean)
        for _ in range(8):
            f, f1 = comp_horner(d, w)
            if f1 == 0:
                break
            step = f / f1
            w -= step
            if abs(step) <= 4e-16 * max(1.0, abs(w)):
                break
        if not abs(w - mean) <= diam:
            continue
        if abs(w.imag) <= REAL_SNAP * max(1.0, abs(w)):
            w = complex(w.real, 0.0)
        # an m-fold root is also a root of f, f', ..., f^(m-2); a pair of
        # close simple roots has |f| ~ |f''| delta^2 at its critical point
        floor = max(4 * rs.residuals[g].max(), 8 * EPS)
        if any(residuals(_derivative_coeffs(c, j), np.array([w]))[0] > floor for j in range(m - 1)):
            continue
        out[g] = zs + (w - mean)
        moved += m
    if moved == 0:
        return rs
    res = residuals(poly, out)
    return RootSet(
        roots=out, residuals=res, iterations=rs.iterations,
        converged=bool(rs.converged and res.max() <= opts.residual_tol), n=rs.n,
        algebraic_degree=rs.algebraic_degree, zero_roots=rs.zero_roots, polished=rs.polished + moved,
        method=rs.method, notes=rs.notes + (f"recentred {len(groups)} cluster(s) of {moved} roots",),
    )


# --------------------------------------------------------------------------
# validation

def greedy_match(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Greedy nearest matching; returns (max matched distance, perm with a[i] ~ b[perm[i]])."""
    if a.size != b.size:
        raise ValueError("multisets of different sizes")
    if a.size == 0:
        return 0.0, np.zeros(0, dtype=int)
    D = np.abs(a[:, None] - b[None, :])
    order = np.argsort(D, axis=None, kind="stable")
    perm = -np.ones(a.size, dtype=int)
    used_a = np.zeros(a.size, bool)
    used_b = np.zeros(b.size, bool)
    left = a.size
    worst = 0.0
    for flat in order:
        i, j = divmod(int(flat), b.size)
        if used_a[i] or used_b[j]:
            continue
        used_a[i] = used_b[j] = True
        perm[i] = j
        worst = max(worst, float(D[i, j]))
        left -= 1
        if left == 0:
            break
    return worst, perm


@dataclass(frozen=True)
class ValidationReport:
    max_residual: float
    vieta_sum_error: float
    vieta_product_error: float
    conjugate_defect: float
    outside_count: int
    vieta_advisory: bool
    flagged: tuple[int, ...]
    condition_proxy: float

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


VIETA_CONDITION_LIMIT = 1e3


def validate_roots(poly: PolynomialSample, rs: RootSet, K: float = 1.0, residual_tol: float = 1e-10) -> ValidationReport:
    c = poly.coeffs
    roots = rs.roots
    n = poly.n
    res = residuals(poly, roots)
    deg = rs.algebraic_degree
    lead = c[deg]
    # relative error of sum: |sum - target| / max(1, |target|)
    if deg >= 1:
        target_sum = -c[deg - 1] / lead
        vs = abs(roots.sum() - target_sum) / max(1.0, abs(target_sum))
        if c[0] == 0:
            vp = float(np.abs(roots).min())
        else:
            # compare products in log form to avoid overflow
            log_prod = np.sum(np.log(roots.astype(np.complex128)))
            target = (-1) ** deg * c[0] / lead
            vp = float(abs(np.exp(log_prod - np.log(complex(target))) - 1.0))
    else:
        vs = vp = 0.0
    defect, _ = greedy_match(roots, np.conj(roots))
    band = K * math.log(n) / n
    mod = np.abs(roots)
    outside = int(np.count_nonzero((mod < 1 - band) | (mod > 1 + band)))
    cond = float(np.abs(c).max() / abs(lead)) if lead != 0 else math.inf
    return ValidationReport(
        max_residual=float(res.max()) if res.size else 0.0,
        vieta_sum_error=float(vs),
        vieta_product_error=float(vp),
        conjugate_defect=float(defect),
        outside_count=outside,
        vieta_advisory=cond > VIETA_CONDITION_LIMIT,
        flagged=tuple(int(i) for i in np.flatnonzero(res > residual_tol)),
        condition_proxy=cond,
    )


# --------------------------------------------------------------------------
# exact multiplicity for integer coefficients

def _int_poly_gcd(f: list[int], g: list[int]) -> list[Fraction]:
    """Monic gcd over Q of two polynomials (ascending coefficient lists)."""
    a = [Fraction(x) for x in f]
    b = [Fraction(x) for x in g]

    def trim(p):
        while p and p[-1] == 0:
            p.pop()
        return p

    a, b = trim(a), trim(b)
    while b:
        r = a[:]
        while len(r) >= len(b) and r:
            q = r[-1] / b[-1]
            shift = len(r) - len(b)
            for i, bc in enumerate(b):
                r[shift + i] -= q * bc
            r = trim(r)
        a, b = b, r
    return [c / a[-1] for c in a] if a else a


def repeated_factor_degree(coeffs) -> int:
    """deg gcd(f, f') over Q for integer coefficients (0 when square-free).

    Identically zero trailing and leading coefficients are stripped first, so
    the multiple root at the origin produced by xi_0 = xi_1 = 0 is not counted.
    """
    c = np.asarray(coeffs, float)
    if not np.all(c == np.round(c)):
        raise ValueError("exact multiplicity needs integer coefficients")
    core, _, _ = _strip(c)
    f = [int(x) for x in core]
    if len(f) < 3:
        return 0
    df = [k * f[k] for k in range(1, len(f))]
    return max(len(_int_poly_gcd(f, df)) - 1, 0)


def cluster_means(roots: np.ndarray, radius: float) -> np.ndarray:
    """Replace every cluster (connected within ``radius``) by copies of its mean.

    The individual approximations of a k-fold root carry errors of order
    eps^{1/k}, but their mean is accurate to O(eps)."""
    roots = np.asarray(roots, np.complex128).copy()
    for idx in _groups(roots, radius):
        roots[idx] = roots[idx].mean()
    return roots
