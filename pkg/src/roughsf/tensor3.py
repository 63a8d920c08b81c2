"""Truncated tensor algebra T^3(R^d) and its group-like elements.

An element is stored as three arrays ``(x1, x2, x3)`` of shapes ``(..., d)``,
``(..., d, d)`` and ``(..., d, d, d)``; the scalar level is always 1. The
array-level helpers broadcast over leading axes so that whole grids of steps
can be combined at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def mul(a1, a2, a3, b1, b2, b3):
    """Product in T^3 of ``(1, a1, a2, a3)`` and ``(1, b1, b2, b3)``."""
    c1 = a1 + b1
    c2 = a2 + b2 + a1[..., :, None] * b1[..., None, :]
    c3 = (
        a3
        + b3
        + a1[..., :, None, None] * b2[..., None, :, :]
        + a2[..., :, :, None] * b1[..., None, None, :]
    )
    return c1, c2, c3


def inverse(x1, x2, x3):
    """Antipode of a group-like element, i.e. its group inverse."""
    o11 = x1[..., :, None] * x1[..., None, :]
    y2 = -x2 + o11
    y3 = (
        -x3
        + x1[..., :, None, None] * x2[..., None, :, :]
        + x2[..., :, :, None] * x1[..., None, None, :]
        - o11[..., :, :, None] * x1[..., None, None, :]
    )
    return -x1, y2, y3


def segment_levels(delta):
    """Signature levels of the straight segment with increment ``delta``."""
    delta = np.asarray(delta, dtype=float)
    d2 = delta[..., :, None] * delta[..., None, :]
    d3 = d2[..., :, :, None] * delta[..., None, None, :]
    return delta, d2 / 2.0, d3 / 6.0


@dataclass(frozen=True)
class Tensor3:
    """A group-like element ``(1, x1, x2, x3)`` of T^3(R^d)."""

    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray

    def __post_init__(self):
        x1 = np.asarray(self.x1, dtype=float)
        x2 = np.asarray(self.x2, dtype=float)
        x3 = np.asarray(self.x3, dtype=float)
        if x1.ndim != 1:
            raise ValueError(f"level 1 must be a vector, got shape {x1.shape}")
        d = x1.shape[0]
        if x2.shape != (d, d) or x3.shape != (d, d, d):
            raise ValueError(
                f"level shapes {x1.shape}, {x2.shape}, {x3.shape} do not share a dimension"
            )
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "x3", x3)

    @property
    def dim(self) -> int:
        return self.x1.shape[0]

    @classmethod
    def identity(cls, d: int) -> "Tensor3":
        return cls(np.zeros(d), np.zeros((d, d)), np.zeros((d, d, d)))

    def levels(self):
        return self.x1, self.x2, self.x3

    def __mul__(self, other: "Tensor3") -> "Tensor3":
        if not isinstance(other, Tensor3):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return Tensor3(*mul(*self.levels(), *other.levels()))

    def inverse(self) -> "Tensor3":
        return Tensor3(*inverse(*self.levels()))

    def dilate(self, lam: float) -> "Tensor3":
        """Dilation: level k is scaled by ``lam**k``."""
        return Tensor3(lam * self.x1, lam**2 * self.x2, lam**3 * self.x3)

    def max_abs_diff(self, other: "Tensor3") -> float:
        return max(
            float(np.max(np.abs(self.x1 - other.x1), initial=0.0)),
            float(np.max(np.abs(self.x2 - other.x2), initial=0.0)),
            float(np.max(np.abs(self.x3 - other.x3), initial=0.0)),
        )


def segment_exp(delta) -> Tensor3:
    """``(1, delta, delta^2/2, delta^3/6)`` for a single increment vector."""
    return Tensor3(*segment_levels(delta))
