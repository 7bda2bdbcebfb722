"""Minimal interval arithmetic for bounding second derivatives over boxes.

Only what the remainder enclosure needs: elementwise arithmetic on
(lo, hi) pairs, a few transcendental envelopes, and the absolute bound.
Intervals hold numpy arrays so whole Hessian slices can be bounded at
once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Interval"]


@dataclass(frozen=True)
class Interval:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("interval bounds must share a shape")
        if np.any(hi < lo):
            raise ValueError("interval upper bound below lower bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, value) -> "Interval":
        v = np.asarray(value, dtype=float)
        return cls(v, v.copy())

    def _coerce(self, other) -> "Interval":
        if isinstance(other, Interval):
            return other
        return Interval.point(other)

    def __add__(self, other):
        o = self._coerce(other)
        return Interval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        cands = np.stack([self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi])
        return Interval(cands.min(axis=0), cands.max(axis=0))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if np.any((o.lo <= 0) & (o.hi >= 0)):
            raise ZeroDivisionError("interval division by a range containing zero")
        return self * Interval(1.0 / o.hi, 1.0 / o.lo)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def square(self) -> "Interval":
        lo = np.where((self.lo <= 0) & (self.hi >= 0), 0.0,
                      np.minimum(self.lo ** 2, self.hi ** 2))
        hi = np.maximum(self.lo ** 2, self.hi ** 2)
        return Interval(lo, hi)

    def cube(self) -> "Interval":
        return Interval(self.lo ** 3, self.hi ** 3)

    def sqrt(self) -> "Interval":
        if np.any(self.lo < 0):
            raise ValueError("sqrt of an interval reaching below zero")
        return Interval(np.sqrt(self.lo), np.sqrt(self.hi))

    def absmax(self) -> np.ndarray:
        """Entrywise bound on |x| over the interval."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))
