"""Finite unions of closed intervals in [0, inf).

Gap windows U are always given in scaled units (multiples of n^{-5/4}).
The text form is ``a:b[,c:d...]``; overlapping or touching pieces are
merged on construction so that the stored intervals are disjoint and sorted.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def _fmt(x: float) -> str:
    """Shortest text that parses back to the same float."""
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


@dataclass(frozen=True)
class IntervalSet:
    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        cleaned = []
        for lo, hi in self.intervals:
            lo, hi = float(lo), float(hi)
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(f"unbounded interval [{lo}, {hi}]")
            if lo < 0 or hi < lo:
                raise ValueError(f"malformed interval [{lo}, {hi}]")
            cleaned.append((lo, hi))
        cleaned.sort()
        merged: list[tuple[float, float]] = []
        for lo, hi in cleaned:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        object.__setattr__(self, "intervals", tuple(merged))

    @classmethod
    def of(cls, *pairs: Sequence[float]) -> "IntervalSet":
        return cls(tuple((p[0], p[1]) for p in pairs))

    @classmethod
    def parse(cls, text: str) -> "IntervalSet":
        """Parse ``"0:1,2:3.5"``; an empty string gives the empty set."""
        text = text.strip()
        if not text:
            return cls(())
        pairs = []
        for piece in text.split(","):
            parts = piece.split(":")
            if len(parts) != 2:
                raise ValueError(f"malformed interval {piece!r}; expected a:b")
            try:
                pairs.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ValueError(f"malformed interval {piece!r}") from exc
        return cls(tuple(pairs))

    def __str__(self) -> str:
        return ",".join(f"{_fmt(lo)}:{_fmt(hi)}" for lo, hi in self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def sup(self) -> float:
        return self.intervals[-1][1] if self.intervals else 0.0

    def contains(self, t):
        """Membership test, vectorised over ``t``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (t >= lo) & (t <= hi)
        return bool(out) if out.ndim == 0 else out

    def quartic_measure(self) -> float:
        """The integral of t^3 over the set, sum of (b^4 - a^4)/4."""
        return sum((hi**4 - lo**4) / 4.0 for lo, hi in self.intervals)

    def blow_up(self, r: float) -> "IntervalSet":
        return IntervalSet(tuple((max(0.0, lo - r), hi + r) for lo, hi in self.intervals))

    def blow_down(self, r: float) -> "IntervalSet":
        # The ambient space is [0, inf), so a piece starting at 0 has no
        # complement on its left and keeps its left end.
        out = []
        for lo, hi in self.intervals:
            a = lo if lo == 0.0 else lo + r
            b = hi - r
            if a <= b:
                out.append((a, b))
        return IntervalSet(tuple(out))

    def issubset(self, other: "IntervalSet", tol: float = 0.0) -> bool:
        return all(
            any(olo - tol <= lo and hi <= ohi + tol for olo, ohi in other.intervals)
            for lo, hi in self.intervals
        )


def parse_u_list(text: str) -> list[IntervalSet]:
    """Split ``"0:1,1:2"`` into one single-interval set per piece."""
    return [IntervalSet.parse(piece) for piece in text.split(",") if piece.strip()]


def union(sets: Iterable[IntervalSet]) -> IntervalSet:
    return IntervalSet(tuple(iv for s in sets for iv in s.intervals))
