"""Coefficient laws and reproducible sampling of Kac polynomials.

A trial's coefficients come from a Philox generator whose key is derived
from ``(master_seed, trial)`` through a SeedSequence.  Philox is counter based,
so the stream for one trial never depends on which other trials ran first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

MASK64 = (1 << 64) - 1


class LawKind(str, Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM3 = "uniform3"
    UNIFORM_CONTINUOUS = "uniform_continuous"


@dataclass(frozen=True)
class CoefficientLaw:
    kind: LawKind
    params: Mapping[str, float] = field(default_factory=dict)

    @property
    def atom_at_zero(self) -> bool:
        return self.kind is LawKind.UNIFORM3

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def variance(self) -> float:
        if self.kind is LawKind.UNIFORM3:
            return 2.0 / 3.0
        if self.kind is LawKind.UNIFORM_CONTINUOUS:
            return self.params["half_width"] ** 2 / 3.0
        return 1.0

    @property
    def tag(self) -> str:
        """Round-trippable text form accepted by :func:`parse_law`."""
        if self.kind is LawKind.UNIFORM_CONTINUOUS:
            return f"uniform:{self.params['half_width']!r}"
        return self.kind.value

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        k = self.kind
        if k is LawKind.GAUSSIAN:
            return rng.standard_normal(size)
        if k is LawKind.RADEMACHER:
            return 2.0 * rng.integers(0, 2, size=size).astype(np.float64) - 1.0
        if k is LawKind.UNIFORM3:
            return rng.integers(-1, 2, size=size).astype(np.float64)
        h = self.params["half_width"]
        return rng.uniform(-h, h, size=size)


def make_law(kind, params: Mapping[str, float] | None = None) -> CoefficientLaw:
    params = dict(params or {})
    try:
        kind = LawKind(kind)
    except ValueError:
        raise ValueError(f"unknown coefficient law {kind!r}") from None
    if kind is LawKind.UNIFORM_CONTINUOUS:
        # Default half-width sqrt(3) gives unit variance.
        h = float(params.get("half_width", np.sqrt(3.0)))
        if not h > 0:
            raise ValueError("uniform half-width must be positive")
        params = {"half_width": h}
    elif params:
        raise ValueError(f"law {kind.value} takes no parameters, got {sorted(params)}")
    return CoefficientLaw(kind, params)


def parse_law(text: str) -> CoefficientLaw:
    """Parse ``gaussian | rademacher | uniform3 | uniform[:<half-width>]``."""
    text = text.strip()
    if text == "uniform":
        return make_law(LawKind.UNIFORM_CONTINUOUS)
    if text.startswith("uniform:"):
        try:
            h = float(text.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad uniform half-width in {text!r}") from None
        return make_law(LawKind.UNIFORM_CONTINUOUS, {"half_width": h})
    return make_law(text)


def derive_seed(master: int, *indices: int) -> int:
    """Mix a master seed with trial indices into a 64-bit stream key."""
    ss = np.random.SeedSequence([int(master) & MASK64, *[int(i) & MASK64 for i in indices]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


@dataclass(frozen=True, eq=False)
class PolynomialSample:
    n: int
    law: CoefficientLaw | None
    seed: int | None
    coeffs: np.ndarray  # coeffs[k] multiplies z**k

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if c.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} coefficients, got {c.shape}")

    @classmethod
    def from_coeffs(cls, coeffs) -> "PolynomialSample":
        """Wrap a fixed coefficient list (ascending powers); no law attached."""
        c = np.asarray(coeffs, dtype=np.float64)
        return cls(n=c.size - 1, law=None, seed=None, coeffs=c)

    @property
    def algebraic_degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else -1

    def reversed(self) -> "PolynomialSample":
        """g(z) = z^n f(1/z)."""
        return PolynomialSample(self.n, self.law, self.seed, self.coeffs[::-1].copy())


def sample_polynomial(law: CoefficientLaw, n: int, seed: int) -> PolynomialSample:
    if n < 2:
        raise ValueError(f"degree must be at least 2, got {n}")
    rng = make_rng(seed)
    # A law without an atom at zero yields xi_n = 0 with probability zero,
    # so no resampling is done; uniform3 keeps its zero leading coefficient.
    return PolynomialSample(int(n), law, int(seed) & MASK64, law.draw(rng, n + 1))


def sample_trial(law: CoefficientLaw, n: int, master_seed: int, trial: int) -> PolynomialSample:
    return sample_polynomial(law, n, derive_seed(master_seed, n, trial))
