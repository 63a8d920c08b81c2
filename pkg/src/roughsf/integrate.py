"""Rough integration of controlled integrands against a level-3 rough path.

The integrand takes values in ``L(V, W)`` stored as arrays of shape
``W + (d,)``; its last axis pairs with ``X^1``. The local approximation on
``[s, t]`` is ``Y_s X^1 + Y^dag_s X^2 + Y^ddag_s X^3`` with the tensor
factors of ``X^k`` contracted in order against the ``V`` slots of the
integrand (the value slot of ``Y`` last).
"""

from __future__ import annotations

import math

import numpy as np

from roughsf.controlled import ControlledPath

# Bernoulli numbers B_2, B_4, ..., B_20
_BERNOULLI = [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510,
              43867 / 798, -174611 / 330]


def zeta(s: float, n_terms: int = 12) -> float:
    """Riemann zeta at real ``s > 1`` by Euler-Maclaurin summation."""
    if not s > 1:
        raise ValueError(f"zeta needs s > 1, got {s}")
    n = n_terms
    head = math.fsum(k ** (-s) for k in range(1, n))
    tail = n ** (1 - s) / (s - 1) + 0.5 * n ** (-s)
    rising = s
    corr = []
    for k, b in enumerate(_BERNOULLI, start=1):
        corr.append(b / math.factorial(2 * k) * rising * n ** (-s - 2 * k + 1))
        rising *= (s + 2 * k - 1) * (s + 2 * k)
    return math.fsum([head, tail] + corr)


def kappa(alpha: float) -> float:
    """Sewing constant ``2**(4 alpha) * zeta(4 alpha)`` for ``1/4 < alpha <= 1/3``."""
    if not 0.25 < alpha <= 1.0 / 3.0:
        raise ValueError(f"alpha must lie in (1/4, 1/3], got {alpha}")
    return 2.0 ** (4 * alpha) * zeta(4 * alpha)


def _check_integrand(cp: ControlledPath) -> None:
    shape = cp.target_shape
    if len(shape) < 1 or shape[-1] != cp.ref.dim:
        raise ValueError(
            f"integrand values must have a trailing axis of size {cp.ref.dim}, got shape {shape}"
        )


def local_summand(cp: ControlledPath, i, j) -> np.ndarray:
    """``J_{t_i t_j}`` for index arrays (or scalars) ``i`` and ``j``."""
    _check_integrand(cp)
    i = np.asarray(i)
    j = np.asarray(j)
    scalar = i.ndim == 0
    i = np.atleast_1d(i)
    j = np.atleast_1d(j)
    x1, x2, x3 = cp.ref.pair_increments(i, j)
    out = (
        np.einsum("p...c,pc->p...", cp.y[i], x1)
        + np.einsum("p...ca,pac->p...", cp.ydag[i], x2)
        + np.einsum("p...cab,pabc->p...", cp.ydd[i], x3)
    )
    return out[0] if scalar else out


def _step_summands(cp: ControlledPath) -> np.ndarray:
    ref = cp.ref
    y = cp.y[:-1]
    return (
        np.einsum("p...c,pc->p...", y, ref.s1)
        + np.einsum("p...ca,pac->p...", cp.ydag[:-1], ref.s2)
        + np.einsum("p...cab,pabc->p...", cp.ydd[:-1], ref.s3)
    )


def partition_sum(cp: ControlledPath, indices) -> np.ndarray:
    """Sum of local summands over consecutive points of a grid partition."""
    idx = np.asarray(indices, dtype=int)
    if idx.ndim != 1 or idx.size < 2 or np.any(np.diff(idx) <= 0):
        raise ValueError("partition indices must be strictly increasing")
    return np.sum(local_summand(cp, idx[:-1], idx[1:]), axis=0)


def rough_integral(cp: ControlledPath, start=None) -> ControlledPath:
    """Indefinite integral on the grid, as a controlled path with values in ``W``.

    The integral over each grid step is its local summand; the result is the
    limit of the compensated Riemann sums restricted to the finest partition.
    """
    _check_integrand(cp)
    steps = _step_summands(cp)
    w_shape = cp.target_shape[:-1]
    z = np.zeros((cp.ref.n_steps + 1,) + w_shape)
    z[1:] = np.cumsum(steps, axis=0)
    if start is not None:
        z = z + np.asarray(start, dtype=float)
    return ControlledPath(cp.ref, z, cp.y, np.swapaxes(cp.ydag, -1, -2))


def defect(cp: ControlledPath, i: int, u: int, j: int) -> np.ndarray:
    """``J_su + J_ut - J_st`` for grid points ``s < u < t``."""
    return local_summand(cp, i, u) + local_summand(cp, u, j) - local_summand(cp, i, j)


def defect_expansion(cp: ControlledPath, i: int, u: int, j: int) -> np.ndarray:
    """Closed form of :func:`defect` in terms of the remainders on ``[s, u]``."""
    sharp, sharp2 = cp.remainders(i, u)
    x1, x2, x3 = (a[0] for a in cp.ref.pair_increments(np.array([u]), np.array([j])))
    return (
        np.einsum("...c,c->...", sharp, x1)
        + np.einsum("...ca,ac->...", sharp2, x2)
        + np.einsum("...cab,abc->...", cp.ydd[u] - cp.ydd[i], x3)
    )


def sewing_bound(cp: ControlledPath, alpha: float, i: int, j: int, strategy: str = "auto") -> float:
    """Right-hand side of the sewing estimate on ``[t_i, t_j]``."""
    norms = cp.ref.holder_norms(alpha, strategy)
    semi = cp.seminorm(alpha, strategy)
    span = cp.times[j] - cp.times[i]
    return kappa(alpha) * span ** (4 * alpha) * (
        semi["sharp"] * norms.level1
        + semi["sharpsharp"] * norms.level2
        + semi["ydd"] * norms.level3
    )
