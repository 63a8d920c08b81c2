"""Slow-fast systems driven by a mixed rough path.

The slow variable ``x`` (dimension m) is driven by the rough component ``B``
through ``sigma(x)``; the fast variable ``y`` (dimension n) relaxes on time
scale ``eps`` and is driven by the Brownian component ``w``. Written over
``z = (x, y)`` and ``Xi = (B, W)`` the system is a single RDE with block
coefficients

    F_eps(z) = (f(x, y), g(x, y) / eps)
    Sigma_eps(z) = diag(sigma(x), eps^(-1/2) h(x, y))

which is solved with the one-step scheme of :mod:`roughsf.rde`.

Evaluators take batched arrays ``x`` of shape ``(..., m)`` and ``y`` of
shape ``(..., n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from roughsf.controlled import ControlledPath, SmoothMap3
from roughsf.drivers import generator
from roughsf.rde import EXPLOSION_GUARD, coefficient_terms, solution_path, step_scheme
from roughsf.roughpath import GridRoughPath, path_holder

C_FAST = 1.0 / 20.0


@dataclass
class SlowFastSystem:
    """Coefficients and metadata of a slow-fast system.

    ``h_grad`` returns the derivative in ``z = (x, y)``, shape ``(..., n, e, m + n)``;
    ``h_hess`` the second derivative, shape ``(..., n, e, m + n, m + n)``.
    """

    m: int
    n: int
    d: int
    e: int
    f: Callable
    g: Callable
    sigma: SmoothMap3
    h: Callable
    h_grad: Callable
    h_hess: Callable
    x0: np.ndarray
    y0: np.ndarray
    fbar: Optional[Callable] = None
    gtilde_override: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        self.y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))
        if self.x0.shape != (self.m,) or self.y0.shape != (self.n,):
            raise ValueError("initial point does not match the dimensions")
        if self.sigma.n_in != self.m or self.sigma.out_shape != (self.m, self.d):
            raise ValueError(f"sigma must map R^{self.m} to {self.m}x{self.d} matrices")

    def split(self, z):
        return z[..., : self.m], z[..., self.m :]


def gtilde(sys: SlowFastSystem, x, y, correction: bool = True) -> np.ndarray:
    """Fast drift with the Itô-Stratonovich correction ``1/2 sum_ij d_{y_i} h^{kj} h^{ij}``."""
    if not correction:
        return sys.g(x, y)
    if sys.gtilde_override is not None:
        return sys.gtilde_override(x, y)
    hy = sys.h_grad(x, y)[..., sys.m :]
    return sys.g(x, y) + 0.5 * np.einsum("...kji,...ij->...k", hy, sys.h(x, y))


def block_diffusion(sys: SlowFastSystem, eps: float) -> SmoothMap3:
    """``Sigma_eps`` as a map on ``R^(m+n)`` with its first two derivatives."""
    m, n, d, e = sys.m, sys.n, sys.d, sys.e
    scale = eps**-0.5
    mn, de = m + n, d + e

    def value(z):
        x, y = sys.split(z)
        out = np.zeros(z.shape[:-1] + (mn, de))
        out[..., :m, :d] = sys.sigma.value(x)
        out[..., m:, d:] = scale * sys.h(x, y)
        return out

    def grad(z):
        x, y = sys.split(z)
        out = np.zeros(z.shape[:-1] + (mn, de, mn))
        out[..., :m, :d, :m] = sys.sigma.grad(x)
        out[..., m:, d:, :] = scale * sys.h_grad(x, y)
        return out

    def hess(z):
        x, y = sys.split(z)
        out = np.zeros(z.shape[:-1] + (mn, de, mn, mn))
        out[..., :m, :d, :m, :m] = sys.sigma.hess(x)
        out[..., m:, d:, :, :] = scale * sys.h_hess(x, y)
        return out

    return SmoothMap3(value, grad, hess, mn, (mn, de))


def block_drift(sys: SlowFastSystem, eps: float) -> Callable:
    def drift(z, _psi=None):
        x, y = sys.split(z)
        return np.concatenate([sys.f(x, y), sys.g(x, y) / eps], axis=-1)

    return drift


def check_fast_grid(times, eps: float, c_fast: float = C_FAST) -> None:
    dt = float(np.max(np.diff(times)))
    if dt > c_fast * eps * (1 + 1e-9):
        raise ValueError(f"grid step {dt:.3g} exceeds {c_fast:g} * eps = {c_fast * eps:.3g}")


def simulate_batch(sys: SlowFastSystem, times, s1, s2, s3, eps: float, c_fast: float = C_FAST):
    """Solve the slow-fast RDE on a batch of mixed drivers.

    ``s1, s2, s3`` are per-step levels over ``R^(d+e)`` with a leading sample
    axis. Returns ``(Z, exploded)`` as :func:`roughsf.rde.step_scheme` does.
    """
    check_fast_grid(times, eps, c_fast)
    z0 = np.concatenate([sys.x0, sys.y0])
    batch = s1.shape[0]
    return step_scheme(
        block_diffusion(sys, eps),
        np.broadcast_to(z0, (batch, z0.size)).copy(),
        s1, s2, s3,
        np.diff(times),
        block_drift(sys, eps),
    )


def simulate_slow_fast(sys: SlowFastSystem, xi: GridRoughPath, eps: float, c_fast: float = C_FAST) -> ControlledPath:
    """``Z = (X^eps, Y^eps)`` over the mixed rough path ``xi`` as a controlled path.

    Raises:
        RdeExplosion: if the guard is hit.
    """
    from roughsf.rde import RdeExplosion

    if xi.dim != sys.d + sys.e:
        raise ValueError(f"driver has dimension {xi.dim}, system needs {sys.d + sys.e}")
    z, exploded = simulate_batch(sys, xi.times, xi.s1[None], xi.s2[None], xi.s3[None], eps, c_fast)
    if exploded[0] >= 0:
        raise RdeExplosion(float(xi.times[exploded[0]]), int(exploded[0]))
    return solution_path(xi, block_diffusion(sys, eps), z[0])


def slow_driver(xi: GridRoughPath, d: int) -> GridRoughPath:
    """The rough block ``(B^1, B^2, B^3)`` of a mixed rough path."""
    return GridRoughPath(xi.times, xi.s1[:, :d], xi.s2[:, :d, :d], xi.s3[:, :d, :d, :d])


def resolve_slow(sys: SlowFastSystem, b: GridRoughPath, y_path) -> np.ndarray:
    """Slow equation ``dX = f(X, psi) dt + sigma(X) dB`` with ``psi`` the recorded fast path."""
    from roughsf.rde import RdeProblem, solve_rde

    prob = RdeProblem(
        xi=sys.x0,
        sigma=sys.sigma,
        drift=lambda x, y: sys.f(x, y),
        psi=np.asarray(y_path, dtype=float),
        alpha=1.0 / 3.0,
        beta=0.3,
    )
    return solve_rde(prob, b).y


def fast_summand_blocks(sys: SlowFastSystem, z, x1, x2, x3, eps: float, dt: float) -> dict:
    """Named pieces of the fast component of one step of the scheme.

    ``x1, x2, x3`` are the step levels over ``R^(d+e)``. The pieces are the
    drift, ``eps^-1/2 h W^1``, ``eps^-1/2 grad_x h . sigma <I[B,W]>``,
    ``eps^-1 (grad_y h . h) <W^2>`` and the third-level remainder, and they
    add up to the fast part of the full step.
    """
    m, d = sys.m, sys.d
    x, y = z[:m], z[m:]
    h = sys.h(x, y)
    hg = sys.h_grad(x, y)
    s = sys.sigma.value(x)
    w1 = x1[d:]
    ibw = x2[:d, d:]
    w2 = x2[d:, d:]
    pieces = {
        "drift": sys.g(x, y) / eps * dt,
        "h_w1": eps**-0.5 * h @ w1,
        "hx_sigma_ibw": eps**-0.5 * np.einsum("klj,ja,al->k", hg[:, :, :m], s, ibw),
        "hy_h_w2": eps**-1.0 * np.einsum("klj,jc,cl->k", hg[:, :, m:], h, w2),
    }
    _, _, sdd = coefficient_terms(block_diffusion(sys, eps), z)
    pieces["third_level"] = np.einsum("icab,abc->i", sdd, x3)[m:]
    return pieces


def fast_euler_maruyama(
    sys: SlowFastSystem, times, x_path, dw, eps: float, y0=None, correction: bool = True
) -> np.ndarray:
    """Euler-Maruyama for ``dY = eps^-1 g~(X, Y) dt + eps^-1/2 h(X, Y) dw`` with ``X`` given.

    ``x_path`` has shape ``(..., N + 1, m)`` and ``dw`` shape ``(..., N, e)``.
    """
    x_path = np.asarray(x_path, dtype=float)
    dw = np.asarray(dw, dtype=float)
    dts = np.diff(times)
    y = np.broadcast_to(sys.y0 if y0 is None else y0, x_path.shape[:-2] + (sys.n,)).astype(float)
    out = np.empty(x_path.shape[:-2] + (dts.size + 1, sys.n))
    out[..., 0, :] = y
    for k, dt in enumerate(dts):
        x = x_path[..., k, :]
        y = (
            y
            + gtilde(sys, x, y, correction) * (dt / eps)
            + eps**-0.5 * np.einsum("...ij,...j->...i", sys.h(x, y), dw[..., k, :])
        )
        out[..., k + 1, :] = y
    return out


def fast_ito_check(sys: SlowFastSystem, times, z_path, dw, eps: float, correction: bool = True) -> np.ndarray:
    """Largest pathwise gap between the rough fast component and the Itô SDE."""
    z_path = np.asarray(z_path, dtype=float)
    x, y = z_path[..., : sys.m], z_path[..., sys.m :]
    y_em = fast_euler_maruyama(sys, times, x, dw, eps, correction=correction)
    return np.max(np.sqrt(np.sum((y - y_em) ** 2, axis=-1)), axis=-1)


def frozen_sde_simulate(
    sys: SlowFastSystem, x, y0, horizon: float, dt: float, seed, *keys, chains: int = 1
) -> tuple:
    """Euler-Maruyama for the frozen fast dynamics ``dY = g~(x, Y) dt + h(x, Y) dw``.

    Returns ``(times, paths)`` with paths of shape ``(chains, K + 1, n)``.
    Chain ``c`` draws from the stream ``(seed, *keys, c)``.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError("need dt > 0 and horizon > 0")
    k_steps = int(round(horizon / dt))
    x = np.broadcast_to(np.atleast_1d(np.asarray(x, dtype=float)), (chains, sys.m))
    y = np.broadcast_to(np.atleast_1d(np.asarray(y0, dtype=float)), (chains, sys.n)).astype(float)
    noise = np.stack(
        [generator(seed, *keys, c).standard_normal((k_steps, sys.e)) for c in range(chains)]
    ) * math.sqrt(dt)
    out = np.empty((chains, k_steps + 1, sys.n))
    out[:, 0] = y
    for k in range(k_steps):
        y = y + gtilde(sys, x, y) * dt + np.einsum("cij,cj->ci", sys.h(x, y), noise[:, k])
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > EXPLOSION_GUARD:
            raise RuntimeError(f"frozen dynamics diverged at t={(k + 1) * dt:.4g}")
        out[:, k + 1] = y
    return np.arange(k_steps + 1) * dt, out


@dataclass
class MonteCarloSpec:
    burn_in: float = 5.0
    horizon: float = 50.0
    samples: int = 32
    dt: float = 0.01
    seed: int = 0
    se_threshold: float = 0.05


@dataclass
class DriftEstimate:
    value: np.ndarray
    stderr: np.ndarray
    converged: bool


def averaged_drift(sys: SlowFastSystem, x, mc: MonteCarloSpec, f: Optional[Callable] = None, key: int = 0) -> DriftEstimate:
    """Time average of ``f(x, Y_t)`` along frozen chains after burn-in.

    The standard error is the spread of the per-chain averages. ``converged``
    is False when it exceeds ``mc.se_threshold``.
    """
    f = sys.f if f is None else f
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _, paths = frozen_sde_simulate(
        sys, x, sys.y0, mc.burn_in + mc.horizon, mc.dt, mc.seed, 7, key, chains=mc.samples
    )
    start = int(round(mc.burn_in / mc.dt))
    tail = paths[:, start:-1]
    vals = f(np.broadcast_to(x, tail.shape[:-1] + (sys.m,)), tail)
    chain_means = vals.mean(axis=1)
    mean = chain_means.mean(axis=0)
    se = chain_means.std(axis=0, ddof=1) / math.sqrt(mc.samples) if mc.samples > 1 else np.full_like(mean, np.inf)
    return DriftEstimate(mean, se, bool(np.all(se <= mc.se_threshold)))


class TableRangeError(ValueError):
    def __init__(self, lo: float, hi: float):
        super().__init__(f"averaged drift table does not cover [{lo:.4g}, {hi:.4g}]")
        self.lo = lo
        self.hi = hi


class AveragedDriftTable:
    """Piecewise-linear interpolation of MC estimates of ``f_bar`` (scalar slow variable)."""

    def __init__(self, sys: SlowFastSystem, nodes, mc: MonteCarloSpec):
        if sys.m != 1:
            raise ValueError("drift tables support a scalar slow variable only")
        self.sys = sys
        self.mc = mc
        self.nodes = np.array([], dtype=float)
        self.values = np.zeros((0, sys.m))
        self.stderr = np.zeros((0, sys.m))
        self.converged = True
        self._add(np.asarray(nodes, dtype=float))

    def _add(self, new_nodes) -> None:
        new_nodes = np.setdiff1d(np.round(new_nodes, 12), self.nodes)
        ests = [averaged_drift(self.sys, x, self.mc, key=int(round(x * 1e6)) & 0x7FFFFFFF) for x in new_nodes]
        nodes = np.concatenate([self.nodes, new_nodes])
        values = np.concatenate([self.values, np.array([e.value for e in ests]).reshape(-1, self.sys.m)])
        stderr = np.concatenate([self.stderr, np.array([e.stderr for e in ests]).reshape(-1, self.sys.m)])
        order = np.argsort(nodes)
        self.nodes, self.values, self.stderr = nodes[order], values[order], stderr[order]
        self.converged = self.converged and all(e.converged for e in ests)

    @property
    def spacing(self) -> float:
        return float(np.min(np.diff(self.nodes))) if self.nodes.size > 1 else 1.0

    def extend(self, lo: float, hi: float) -> None:
        step = self.spacing
        new = []
        x = self.nodes[0] - step
        while x >= lo - step:
            new.append(x)
            x -= step
        x = self.nodes[-1] + step
        while x <= hi + step:
            new.append(x)
            x += step
        if new:
            self._add(np.array(new))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x[..., 0]
        live = flat[np.isfinite(flat)]
        if live.size and (live.min() < self.nodes[0] or live.max() > self.nodes[-1]):
            raise TableRangeError(float(live.min()), float(live.max()))
        return np.interp(flat, self.nodes, self.values[:, 0])[..., None]

    @property
    def max_stderr(self) -> float:
        return float(np.max(self.stderr))


def solve_averaged_batch(sys: SlowFastSystem, times, b1, b2, b3, fbar=None, max_extensions: int = 8):
    """Averaged slow equation ``dX = f_bar(X) dt + sigma(X) dB`` on a batch of rough drivers."""
    fbar = sys.fbar if fbar is None else fbar
    if fbar is None:
        raise ValueError("no averaged drift: supply an analytic f_bar or a table")
    x0 = np.broadcast_to(sys.x0, (b1.shape[0], sys.m)).copy()
    for _ in range(max_extensions + 1):
        try:
            return step_scheme(sys.sigma, x0, b1, b2, b3, np.diff(times), lambda x, _p: fbar(x))
        except TableRangeError as exc:
            if not isinstance(fbar, AveragedDriftTable):
                raise
            margin = 0.5 * (exc.hi - exc.lo) + fbar.spacing
            fbar.extend(exc.lo - margin, exc.hi + margin)
    raise TableRangeError(float(fbar.nodes[0]), float(fbar.nodes[-1]))


def solve_averaged(sys: SlowFastSystem, b: GridRoughPath, fbar=None) -> ControlledPath:
    """The averaged slow path ``X_bar`` over the rough driver ``b``."""
    from roughsf.rde import RdeExplosion

    x, exploded = solve_averaged_batch(sys, b.times, b.s1[None], b.s2[None], b.s3[None], fbar)
    if exploded[0] >= 0:
        raise RdeExplosion(float(b.times[exploded[0]]), int(exploded[0]))
    return solution_path(b, sys.sigma, x[0])


def frozen_index(times, delta: float) -> np.ndarray:
    """Grid index of the freezing time ``floor(t / delta) delta`` for every grid time.

    The freezing time is snapped down to the grid. If ``delta`` is not larger
    than the grid step the blocks are finer than the grid and every point is
    its own freezing time.
    """
    times = np.asarray(times, dtype=float)
    t0 = times[0]
    dt_max = float(np.max(np.diff(times)))
    if delta <= dt_max * (1 + 1e-9):
        return np.arange(times.size)
    rel = times - t0
    s = np.floor(rel / delta * (1 + 1e-12)) * delta
    return np.searchsorted(rel, s * (1 + 1e-12) + 1e-15, side="right") - 1


def hat_process(sys: SlowFastSystem, times, x_path, dw, delta: float, eps: float) -> np.ndarray:
    """Fast Euler-Maruyama with the slow input frozen on blocks of length ``delta``."""
    x_path = np.asarray(x_path, dtype=float)
    idx = frozen_index(times, delta)
    return fast_euler_maruyama(sys, times, x_path[..., idx, :], dw, eps)


@dataclass
class MTerms:
    terms: list  # four integral paths, each (N + 1, m)
    norms: list  # |term_1|_1, |term_2|_1, |term_3|_gamma, |term_4|_1
    total_norm: float  # |M|_{3 beta}


def m_decomposition(sys, times, x_path, y_path, yhat_path, delta: float, beta: float, gamma: float, fbar=None) -> MTerms:
    """Split ``int f(X, Y) - f_bar(X) ds`` into the four freezing terms.

    Integrals are left-point sums on the grid.
    """
    fbar = sys.fbar if fbar is None else fbar
    x = np.asarray(x_path, dtype=float)
    y = np.asarray(y_path, dtype=float)
    yh = np.asarray(yhat_path, dtype=float)
    xs = x[frozen_index(times, delta)]
    f = sys.f
    integrands = [
        f(x, y) - f(xs, y),
        f(xs, y) - f(xs, yh),
        f(xs, yh) - fbar(xs),
        fbar(xs) - fbar(x),
    ]
    dts = np.diff(times)
    terms = []
    for a in integrands:
        p = np.zeros_like(a)
        p[1:] = np.cumsum(a[:-1] * dts[:, None], axis=0)
        terms.append(p)
    exps = [1.0, 1.0, gamma, 1.0]
    norms = [path_holder(t, times, ex) for t, ex in zip(terms, exps)]
    total = path_holder(sum(terms), times, 3 * beta)
    return MTerms(terms, norms, total)


def proof_delta(eps: float, beta: float, dt: float, horizon: float) -> float:
    """``eps^(1/(6 beta)) log(1/eps)`` clipped to ``(dt, horizon]``."""
    delta = eps ** (1.0 / (6.0 * beta)) * math.log(1.0 / eps) if eps < 1 else horizon
    return float(min(max(delta, dt * (1 + 1e-9)), horizon))
