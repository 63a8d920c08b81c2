"""Level-3 controlled paths with respect to a grid rough path.

Array layout: a path with values of shape ``S`` has Gubinelli derivatives of
shapes ``S + (d,)`` and ``S + (d, d)``. Derivative axes are appended, and the
first derivative axis of ``ydd`` is the slot that receives ``X^1`` in
``ydag_t - ydag_s = ydd_s X^1_st + remainder``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from roughsf.io import fmt
from roughsf.roughpath import GridRoughPath, grid_pairs, holder_sup, path_holder

SEAM_TOL = 1e-10


@dataclass(frozen=True)
class SmoothMap3:
    """A smooth map ``g: R^n -> R^S`` with its first two derivatives.

    All callables take arrays of shape ``(..., n)`` and return shapes
    ``(..., *S)``, ``(..., *S, n)`` and ``(..., *S, n, n)``.
    """

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    n_in: int
    out_shape: tuple
    approximate: bool = False

    @classmethod
    def numeric(cls, fn, n_in: int, out_shape: tuple, h: float = 1e-5) -> "SmoothMap3":
        """Wrap a plain function using central differences with relative step ``h``.

        The result carries ``approximate=True`` so callers can report it.
        """
        eye = np.eye(n_in)

        def steps(y):
            return h * np.maximum(1.0, np.abs(y))

        def grad(y):
            y = np.asarray(y, dtype=float)
            hs = steps(y)
            cols = [
                (fn(y + hs[..., i, None] * eye[i]) - fn(y - hs[..., i, None] * eye[i]))
                / (2 * hs[..., i]).reshape(hs.shape[:-1] + (1,) * len(out_shape))
                for i in range(n_in)
            ]
            return np.stack(cols, axis=-1)

        def hess(y):
            y = np.asarray(y, dtype=float)
            hs = steps(y)
            rows = [
                (grad(y + hs[..., i, None] * eye[i]) - grad(y - hs[..., i, None] * eye[i]))
                / (2 * hs[..., i]).reshape(hs.shape[:-1] + (1,) * (len(out_shape) + 1))
                for i in range(n_in)
            ]
            out = np.stack(rows, axis=-1)
            return 0.5 * (out + np.swapaxes(out, -1, -2))

        return cls(fn, grad, hess, n_in, tuple(out_shape), True)

    @classmethod
    def affine(cls, a, b) -> "SmoothMap3":
        """``y -> a @ y + b`` where ``a`` has shape ``S + (n,)``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        n = a.shape[-1]
        out = a.shape[:-1]

        flat = a.reshape(-1, n)

        def value(y):
            y = np.asarray(y, dtype=float)
            return (y @ flat.T).reshape(y.shape[:-1] + out) + b

        def grad(y):
            lead = np.asarray(y).shape[:-1]
            return np.broadcast_to(a, lead + a.shape).copy()

        def hess(y):
            lead = np.asarray(y).shape[:-1]
            return np.zeros(lead + a.shape + (n,))

        return cls(value, grad, hess, n, out)


class ControlledPath:
    """Grid values of ``(Y, Y^dag, Y^ddag)`` above a reference rough path."""

    def __init__(self, ref: GridRoughPath, y, ydag, ydd):
        self.ref = ref
        self.y = np.asarray(y, dtype=float)
        self.ydag = np.asarray(ydag, dtype=float)
        self.ydd = np.asarray(ydd, dtype=float)
        n1 = ref.n_steps + 1
        d = ref.dim
        shape = self.y.shape[1:]
        if self.y.shape[0] != n1:
            raise ValueError(f"need {n1} grid values, got {self.y.shape[0]}")
        if self.ydag.shape != (n1,) + shape + (d,):
            raise ValueError(f"Y^dag must have shape {(n1,) + shape + (d,)}, got {self.ydag.shape}")
        if self.ydd.shape != (n1,) + shape + (d, d):
            raise ValueError(f"Y^ddag must have shape {(n1,) + shape + (d, d)}, got {self.ydd.shape}")

    @property
    def target_shape(self) -> tuple:
        return self.y.shape[1:]

    @property
    def times(self) -> np.ndarray:
        return self.ref.times

    def remainders(self, i, j):
        """``(Y^sharp, Y^sharpsharp)`` for index arrays ``i`` and ``j``."""
        i = np.asarray(i)
        j = np.asarray(j)
        scalar = i.ndim == 0
        i = np.atleast_1d(i)
        j = np.atleast_1d(j)
        x1, x2 = self.ref.pair_increments(i, j, levels=2)
        sharp = (
            self.y[j]
            - self.y[i]
            - np.einsum("p...a,pa->p...", self.ydag[i], x1)
            - np.einsum("p...ab,pab->p...", self.ydd[i], x2)
        )
        sharp2 = self.ydag[j] - self.ydag[i] - np.einsum("p...ab,pa->p...b", self.ydd[i], x1)
        if scalar:
            return sharp[0], sharp2[0]
        return sharp, sharp2

    def seminorm(self, alpha: float, strategy: str = "auto") -> dict:
        """Components of the controlled-path seminorm on the grid."""
        pairs = grid_pairs(self.ref.n_steps, strategy)
        k = len(self.target_shape)
        dd = path_holder(self.ydd, self.times, alpha, strategy)
        sharp = holder_sup(lambda i, j: self.remainders(i, j)[0], self.times, 3 * alpha, pairs, k)
        sharp2 = holder_sup(lambda i, j: self.remainders(i, j)[1], self.times, 2 * alpha, pairs, k + 1)
        return {"ydd": dd, "sharp": sharp, "sharpsharp": sharp2, "total": dd + sharp + sharp2}

    def derivative_bounds(self, alpha: float, strategy: str = "auto") -> dict:
        """Measured Hölder norms of ``Y`` and ``Y^dag`` next to the a priori bounds."""
        ref_norms = self.ref.holder_norms(alpha, strategy)
        semi = self.seminorm(alpha, strategy)
        span = self.ref.horizon**alpha

        def sup_norm(a):
            flat = a.reshape(a.shape[0], -1)
            return float(np.max(np.sqrt(np.sum(flat * flat, axis=1))))

        dag_meas = path_holder(self.ydag, self.times, alpha, strategy)
        y_meas = path_holder(self.y, self.times, alpha, strategy)
        ydd0 = float(np.sqrt(np.sum(self.ydd[0] ** 2)))
        ydag0 = float(np.sqrt(np.sum(self.ydag[0] ** 2)))
        dd_inf = sup_norm(self.ydd)
        dag_inf = sup_norm(self.ydag)
        dag_bound = dd_inf * ref_norms.level1 + span * semi["sharpsharp"]
        y_bound = (
            dag_inf * ref_norms.level1
            + dd_inf * span * ref_norms.level2
            + span**2 * semi["sharp"]
        )
        c = max(1.0, span)
        return {
            "ydag": dag_meas,
            "ydag_bound": dag_bound,
            "ydag_bound_start": (ydd0 + span * semi["ydd"]) * ref_norms.level1 + span * semi["sharpsharp"],
            "ydag_bound_coarse": c * (1 + ref_norms.level1) * (ydd0 + semi["total"]),
            "y": y_meas,
            "y_bound": y_bound,
            "ydag_start": ydag0,
            "ydd_start": ydd0,
        }

    def compose(self, g: SmoothMap3) -> "ControlledPath":
        """The controlled path ``g(Y)``; requires a vector-valued ``Y``."""
        if len(self.target_shape) != 1 or self.target_shape[0] != g.n_in:
            raise ValueError(f"map expects inputs of size {g.n_in}, path has shape {self.target_shape}")
        v = np.asarray(g.value(self.y))
        dg = np.asarray(g.grad(self.y))
        d2g = np.asarray(g.hess(self.y))
        dag = np.einsum("p...i,pia->p...a", dg, self.ydag)
        dd = np.einsum("p...i,piab->p...ab", dg, self.ydd) + np.einsum(
            "p...ij,pia,pjb->p...ab", d2g, self.ydag, self.ydag
        )
        return ControlledPath(self.ref, v, dag, dd)

    def restrict(self, i: int, j: int) -> "ControlledPath":
        return ControlledPath(
            self.ref.restrict(i, j), self.y[i : j + 1], self.ydag[i : j + 1], self.ydd[i : j + 1]
        )

    def write_csv(self, path) -> None:
        s = self.target_shape
        d = self.ref.dim
        names = ["t"]
        for label, shape in (("Y", s), ("Ydag", s + (d,)), ("Ydagdag", s + (d, d))):
            names += ["_".join([label] + [str(k) for k in ix]) for ix in np.ndindex(*shape)]
        n1 = self.y.shape[0]
        flat = np.concatenate(
            [self.y.reshape(n1, -1), self.ydag.reshape(n1, -1), self.ydd.reshape(n1, -1)], axis=1
        )
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for t, row in zip(self.times, flat):
                w.writerow([fmt(t)] + [fmt(v) for v in row])


def concatenate(first: ControlledPath, second: ControlledPath, tol: float = SEAM_TOL) -> ControlledPath:
    """Join two controlled paths whose grids meet at a common time."""
    if first.target_shape != second.target_shape:
        raise ValueError("target shapes differ")
    if first.times[-1] != second.times[0]:
        raise ValueError("reference grids do not meet")
    for name, a, b in (
        ("Y", first.y[-1], second.y[0]),
        ("Y^dag", first.ydag[-1], second.ydag[0]),
        ("Y^ddag", first.ydd[-1], second.ydd[0]),
    ):
        gap = float(np.max(np.abs(a - b), initial=0.0))
        if gap > tol:
            raise ValueError(f"{name} jumps by {gap:.3g} at the seam")
    ref = first.ref.concatenate(second.ref)
    return ControlledPath(
        ref,
        np.concatenate([first.y, second.y[1:]]),
        np.concatenate([first.ydag, second.ydag[1:]]),
        np.concatenate([first.ydd, second.ydd[1:]]),
    )


def smooth_function_path(ref: GridRoughPath, g: SmoothMap3, start=None) -> ControlledPath:
    """``g`` evaluated along the first-level path of ``ref`` as a controlled path.

    The underlying path is ``x_t = start + X^1_{0t}``; the result is
    ``g(x)`` with its canonical derivatives.
    """
    p1 = ref.prefix[0]
    if start is not None:
        p1 = p1 + np.asarray(start, dtype=float)
    d = ref.dim
    n1 = p1.shape[0]
    base = ControlledPath(
        ref, p1, np.broadcast_to(np.eye(d), (n1, d, d)).copy(), np.zeros((n1, d, d, d))
    )
    return base.compose(g)
