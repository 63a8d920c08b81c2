"""Rough differential equations ``dY = f(Y, psi) dt + sigma(Y) dX``.

The production solver is the explicit one-step scheme built from the local
expansion of the rough integral: on each grid step

    Y_{k+1} = Y_k + f(Y_k, psi_k) dt + sigma X^1 + (grad sigma . sigma) X^2
              + sigma(Y)^ddag X^3

where ``sigma(Y)^ddag = grad sigma . eta + hess sigma <sigma, sigma>`` and
``eta = grad sigma . sigma``. The same recursion runs on a batch of
independent drivers at once (leading sample axis), which is how Monte Carlo
experiments use it. A grid Picard iteration is kept as a reference solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from roughsf.controlled import ControlledPath, SmoothMap3
from roughsf.integrate import rough_integral
from roughsf.roughpath import GridRoughPath, path_holder

EXPLOSION_GUARD = 1e8
PICARD_MAX_POINTS = 1024
PICARD_MAX_ITER = 200
PICARD_TOL = 1e-10


class RdeExplosion(RuntimeError):
    """The solution left the explosion guard; ``time`` is the first offending grid time."""

    def __init__(self, time: float, index: int):
        super().__init__(f"solution exceeded {EXPLOSION_GUARD:g} at t={time:.6g}")
        self.time = time
        self.index = index


@dataclass
class RdeProblem:
    """Initial value, coefficients and auxiliary path of an RDE.

    ``drift(y, psi)`` maps arrays of shape ``(..., n)`` (and the auxiliary
    value, or None) to ``(..., n)``. ``psi`` is sampled on the driver grid,
    shape ``(N + 1, p)`` or ``(N + 1, B, p)`` for batches.
    """

    xi: np.ndarray
    sigma: SmoothMap3
    drift: Optional[Callable] = None
    psi: Optional[np.ndarray] = None
    alpha: float = 1.0 / 3.0
    beta: float = 0.3
    bound_constant: Optional[float] = None  # K = |sigma|_{C^4_b} v |f|_inf v L_f, when known
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if not 0.25 < self.beta < self.alpha <= 1.0 / 3.0 + 1e-15:
            raise ValueError(f"need 1/4 < beta < alpha <= 1/3, got beta={self.beta}, alpha={self.alpha}")
        if self.sigma.n_in != self.xi.shape[-1]:
            raise ValueError("sigma input size does not match the initial value")


def coefficient_terms(sigma: SmoothMap3, y: np.ndarray):
    """``(sigma, eta, sigma^ddag)`` at states ``y`` of shape ``(..., n)``.

    Shapes ``(..., n, d)``, ``(..., n, d, d)`` and ``(..., n, d, d, d)``;
    ``eta[i, a, c]`` pairs with ``X^2[a, c]`` and ``sigma^ddag[i, c, a, b]``
    with ``X^3[a, b, c]``.
    """
    s = np.asarray(sigma.value(y))
    ds = np.asarray(sigma.grad(y))
    d2s = np.asarray(sigma.hess(y))
    eta = np.einsum("...icj,...ja->...iac", ds, s)
    sdd = np.einsum("...icj,...jab->...icab", ds, eta) + np.einsum(
        "...icjk,...ja,...kb->...icab", d2s, s, s
    )
    return s, eta, sdd


def _step_increment(sigma, y, x1, x2, x3):
    s, eta, sdd = coefficient_terms(sigma, y)
    return (
        np.einsum("...ic,...c->...i", s, x1)
        + np.einsum("...iac,...ac->...i", eta, x2)
        + np.einsum("...icab,...abc->...i", sdd, x3)
    )


def step_scheme(sigma: SmoothMap3, y0, s1, s2, s3, dts, drift=None, psi=None, guard=EXPLOSION_GUARD):
    """Run the one-step scheme on a batch of drivers.

    Args:
        y0: initial states, shape ``(B, n)``.
        s1, s2, s3: driver steps with shapes ``(B, N, D)``, ``(B, N, D, D)``,
            ``(B, N, D, D, D)``.
        dts: step lengths, shape ``(N,)``.
        psi: auxiliary path, shape ``(B, N + 1, p)``, or None.

    Returns:
        ``(Y, exploded)`` with ``Y`` of shape ``(B, N + 1, n)`` and the index of
        the first grid point past the guard per sample (``-1`` if none). After
        an explosion the sample's entries are NaN.
    """
    y = np.array(y0, dtype=float)
    n_batch, n_steps = s1.shape[0], s1.shape[1]
    out = np.empty((n_batch, n_steps + 1) + y.shape[1:])
    out[:, 0] = y
    exploded = np.full(n_batch, -1, dtype=int)
    alive = np.ones(n_batch, dtype=bool)
    for k in range(n_steps):
        # overflow on an exploding step is caught by the finiteness test below
        with np.errstate(over="ignore", invalid="ignore"):
            inc = _step_increment(sigma, y, s1[:, k], s2[:, k], s3[:, k])
            if drift is not None:
                inc = inc + drift(y, None if psi is None else psi[:, k]) * dts[k]
            y_new = y + inc
        bad = alive & ~(np.all(np.isfinite(y_new), axis=-1) & (np.max(np.abs(y_new), axis=-1) <= guard))
        if np.any(bad):
            exploded[bad] = k + 1
            alive &= ~bad
            # keep dead samples at a harmless finite state so later steps stay quiet
            y_new[bad] = y[bad]
        y = y_new
        out[:, k + 1] = y
    for b in np.nonzero(exploded >= 0)[0]:
        out[b, exploded[b]:] = np.nan
    return out, exploded


def solution_path(ref: GridRoughPath, sigma: SmoothMap3, y: np.ndarray) -> ControlledPath:
    """``(Y, sigma(Y), grad sigma . sigma(Y))`` on the grid of ``ref``."""
    s, eta, _ = coefficient_terms(sigma, y)
    return ControlledPath(ref, y, s, eta)


def solve_rde(prob: RdeProblem, rp: GridRoughPath) -> ControlledPath:
    """Solve on the grid of ``rp`` with the one-step scheme.

    Raises:
        RdeExplosion: once ``|Y|`` exceeds the guard or becomes non-finite.
    """
    if prob.psi is not None and np.asarray(prob.psi).shape[0] != rp.n_steps + 1:
        raise ValueError("auxiliary path must be sampled on the driver grid")
    psi = None if prob.psi is None else np.asarray(prob.psi, dtype=float)[None]
    y, exploded = step_scheme(
        prob.sigma,
        prob.xi[None],
        rp.s1[None],
        rp.s2[None],
        rp.s3[None],
        np.diff(rp.times),
        prob.drift,
        psi,
    )
    if exploded[0] >= 0:
        raise RdeExplosion(float(rp.times[exploded[0]]), int(exploded[0]))
    return solution_path(rp, prob.sigma, y[0])


@dataclass
class PicardResult:
    path: ControlledPath
    iterations: int
    distances: list
    converged: bool
    message: str = ""

    @property
    def ratios(self) -> list:
        d = self.distances
        return [d[k + 1] / d[k] for k in range(len(d) - 1) if d[k] > 0]


def _q_distance(a: ControlledPath, b: ControlledPath, beta: float) -> float:
    diff = ControlledPath(a.ref, a.y - b.y, a.ydag - b.ydag, a.ydd - b.ydd)
    start = float(
        np.sqrt(np.sum((a.y[0] - b.y[0]) ** 2))
        + np.sqrt(np.sum((a.ydag[0] - b.ydag[0]) ** 2))
        + np.sqrt(np.sum((a.ydd[0] - b.ydd[0]) ** 2))
    )
    return start + diff.seminorm(beta, strategy="all")["total"]


def picard_solve(
    prob: RdeProblem,
    rp: GridRoughPath,
    tau: float,
    max_iter: int = PICARD_MAX_ITER,
    tol: float = PICARD_TOL,
) -> PicardResult:
    """Fixed-point iteration of ``(xi, 0, 0) + int sigma(Y) dX + int f ds`` on ``[0, tau]``.

    ``tau`` must be a grid time. The first iterate is the controlled path
    ``(xi + sigma X^1 + eta X^2, sigma + eta X^1, eta)`` frozen at ``xi``.
    Distances between successive iterates are measured in the controlled
    path norm at exponent ``prob.beta``. ``iterations`` counts the map
    applications needed to reach the fixed point.
    """
    k_end = int(np.searchsorted(rp.times, rp.times[0] + tau - 1e-12 * max(1.0, tau)))
    if k_end > rp.n_steps or not np.isclose(rp.times[k_end] - rp.times[0], tau, rtol=1e-9, atol=1e-14):
        raise ValueError(f"tau={tau} is not a grid time")
    if k_end + 1 > PICARD_MAX_POINTS:
        raise ValueError(f"Picard reference limited to {PICARD_MAX_POINTS} grid points")
    max_iter = min(max_iter, PICARD_MAX_ITER)
    ref = rp.restrict(0, k_end)
    psi = None if prob.psi is None else np.asarray(prob.psi, dtype=float)[: k_end + 1]
    dts = np.diff(ref.times)

    s0, eta0, _ = coefficient_terms(prob.sigma, prob.xi)
    p1, p2, _ = ref.prefix
    y = prob.xi + np.einsum("ic,pc->pi", s0, p1) + np.einsum("iac,pac->pi", eta0, p2)
    ydag = s0[None] + np.einsum("iac,pa->pic", eta0, p1)
    ydd = np.broadcast_to(eta0, (k_end + 1,) + eta0.shape).copy()
    current = ControlledPath(ref, y, ydag, ydd)

    distances = []
    stalled = 0
    for it in range(1, max_iter + 1):
        comp = current.compose(prob.sigma)
        integral = rough_integral(comp)
        drift_int = np.zeros_like(current.y)
        if prob.drift is not None:
            f = prob.drift(current.y[:-1], None if psi is None else psi[:-1])
            drift_int[1:] = np.cumsum(f * dts[:, None], axis=0)
        nxt = ControlledPath(ref, prob.xi + integral.y + drift_int, integral.ydag, integral.ydd)
        dist = _q_distance(nxt, current, prob.beta)
        distances.append(dist)
        current = nxt
        if dist < tol:
            return PicardResult(current, it - 1, distances, True)
        if len(distances) >= 2 and distances[-1] >= distances[-2]:
            stalled += 1
            if stalled >= 3:
                return PicardResult(current, it, distances, False, "iterate distance stopped decreasing")
        else:
            stalled = 0
    return PicardResult(current, max_iter, distances, False, "iteration limit reached")


def stability_functional(
    y: ControlledPath,
    y_tilde: ControlledPath,
    g: Callable,
    sigma: SmoothMap3,
    beta: float,
):
    """``M = (Y - Y~) - int (g(Y) - g(Y~)) ds - int (sigma(Y) - sigma(Y~)) dX`` on the grid.

    Both paths must be RDE solutions over the same reference rough path, so
    that their controlled structure is ``(Y, sigma(Y), grad sigma . sigma(Y))``.
    Returns ``(M, |M|_{3 beta}, note)``; ``note`` describes the shape of the
    a priori multiplier relating ``|Y - Y~|_beta`` to ``|M|_{3 beta}``.
    """
    if y.ref is not y_tilde.ref and (
        y.ref.n_steps != y_tilde.ref.n_steps or np.any(y.times != y_tilde.times)
    ):
        raise ValueError("both controlled paths must share the reference grid")
    dts = np.diff(y.times)
    drift = np.zeros_like(y.y)
    drift[1:] = np.cumsum((g(y.y[:-1]) - g(y_tilde.y[:-1])) * dts[:, None], axis=0)
    rough = rough_integral(y.compose(sigma)).y - rough_integral(y_tilde.compose(sigma)).y
    m = (y.y - y_tilde.y) - drift - rough
    norm = path_holder(m, y.times, 3 * beta)
    note = "|Y - Y~|_beta <= c exp[c (K'+1)^nu (|||X|||_alpha + 1)^nu] |M|_{3 beta}, c and nu unspecified"
    return m, norm, note
