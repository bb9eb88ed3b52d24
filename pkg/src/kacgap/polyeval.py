"""Evaluation of f_n and its first three derivatives, effective degree, and the
derivative-maximum ("good event") check on the circle |z| = 1 + K/n."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .sampling import PolynomialSample


@dataclass(frozen=True)
class EvalBundle:
    z: complex
    f: complex
    f1: complex
    f2: complex
    f3: complex


@njit(cache=True, nogil=True)
def horner4(c, z):
    """f, f', f'', f''' at z by a fixed high-to-low Horner sweep.

    Uses the Taylor-shift form: after the sweep d[j] holds f^{(j)}(z)/j!.
    """
    n = c.shape[0] - 1
    p0 = c[n] + 0j
    p1 = 0j
    p2 = 0j
    p3 = 0j
    for k in range(n - 1, -1, -1):
        p3 = p3 * z + p2
        p2 = p2 * z + p1
        p1 = p1 * z + p0
        p0 = p0 * z + c[k]
    return p0, p1, 2.0 * p2, 6.0 * p3


@njit(cache=True, nogil=True)
def horner4_many(c, zs, out):
    for i in range(zs.shape[0]):
        f, f1, f2, f3 = horner4(c, zs[i])
        out[i, 0] = f
        out[i, 1] = f1
        out[i, 2] = f2
        out[i, 3] = f3


def _coeffs(poly) -> np.ndarray:
    if isinstance(poly, PolynomialSample):
        return poly.coeffs
    return np.ascontiguousarray(poly, dtype=np.float64)


def eval_derivatives(poly, z: complex) -> EvalBundle:
    c = _coeffs(poly)
    z = complex(z)
    f, f1, f2, f3 = horner4(c, z)
    return EvalBundle(z, complex(f), complex(f1), complex(f2), complex(f3))


def eval_derivatives_many(poly, zs) -> np.ndarray:
    """Array of shape (len(zs), 4): columns f, f', f'', f'''."""
    c = _coeffs(poly)
    zs = np.ascontiguousarray(zs, dtype=np.complex128).ravel()
    out = np.empty((zs.size, 4), dtype=np.complex128)
    horner4_many(c, zs, out)
    return out


def effective_degree(z: complex, n: int) -> float:
    r = abs(z)
    if r > 1.0:
        raise ValueError("effective_degree expects |z| <= 1; use 1/z outside the disk")
    if r == 1.0:
        return float(n)
    return float(min(n, 1.0 / (1.0 - r)))


@dataclass(frozen=True)
class GoodEventResult:
    holds: bool
    margins: tuple[float, float, float, float]
    bound: float


def circle_derivative_max(poly, radius: float, grid_factor: int = 8) -> np.ndarray:
    """max over an equispaced angular grid of |f^{(j)}(radius e^{i theta})|, j = 0..3.

    Each |f^{(j)}| on the circle is the modulus of a trigonometric polynomial
    whose coefficients are c_k (k)_j radius^{k-j}; one FFT per derivative.
    """
    c = _coeffs(poly)
    n = c.size - 1
    L = max(grid_factor * max(n, 1), 64)
    k = np.arange(n + 1, dtype=np.float64)
    out = np.empty(4)
    falling = np.ones(n + 1)
    for j in range(4):
        if j > 0:
            falling = falling * (k - (j - 1))
        with np.errstate(divide="ignore"):
            powr = np.where(k >= j, radius ** np.maximum(k - j, 0.0), 0.0)
        coef = c * falling * powr
        vals = np.fft.ifft(coef, n=L) * L
        out[j] = np.abs(vals).max()
    return out


def check_good_event(poly, K: float, n: int | None = None, grid_factor: int = 8) -> GoodEventResult:
    c = _coeffs(poly)
    n = c.size - 1 if n is None else int(n)
    ln = math.log(n)
    bound = ln * ln
    maxima = circle_derivative_max(c, 1.0 + K / n, grid_factor)
    margins = tuple(float(maxima[j] / n ** (j + 0.5)) for j in range(4))
    return GoodEventResult(all(m <= bound for m in margins), margins, bound)
