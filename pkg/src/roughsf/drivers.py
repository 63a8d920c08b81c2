"""Random drivers: fractional and standard Brownian motion on a uniform grid,
and the left-point cross integrals between two sampled paths.

Randomness is keyed by ``(root_seed, *keys)`` through numpy's SeedSequence
and the counter-based Philox generator, so a sample is a pure function of its
key no matter how work is split across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def generator(root_seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for the key ``(root_seed, *keys)``."""
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    hurst: float

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


def _fgn_autocov(hurst: float, n: int) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    h2 = 2 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def _fgn_circulant(hurst: float, n: int, rng, dim: int):
    """Unit-step fractional Gaussian noise by circulant embedding, or None."""
    gamma = _fgn_autocov(hurst, n)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    m = row.size
    z = rng.standard_normal((dim, m)) + 1j * rng.standard_normal((dim, m))
    return np.fft.fft(np.sqrt(lam / m) * z, axis=1).real[:, :n].T


def _fbm_cholesky(hurst: float, times: np.ndarray, rng, dim: int) -> np.ndarray:
    t = times[1:]
    h2 = 2 * hurst
    cov = 0.5 * (t[:, None] ** h2 + t[None, :] ** h2 - np.abs(t[:, None] - t[None, :]) ** h2)
    chol = np.linalg.cholesky(cov)
    vals = chol @ rng.standard_normal((t.size, dim))
    return np.vstack([np.zeros((1, dim)), vals])


def sample_fbm(hurst: float, dim: int, n_steps: int, horizon: float, seed, *keys) -> SamplePath:
    """Fractional Brownian motion started at 0 on a uniform grid of ``[0, horizon]``.

    ``seed`` is either an integer root seed (combined with ``keys``) or a
    ready :class:`numpy.random.Generator`.
    """
    if not 0 < hurst < 1:
        raise ValueError(f"Hurst index must lie in (0, 1), got {hurst}")
    if n_steps < 1 or horizon <= 0:
        raise ValueError("need n_steps >= 1 and horizon > 0")
    rng = seed if isinstance(seed, np.random.Generator) else generator(seed, *keys)
    times = np.linspace(0.0, horizon, n_steps + 1)
    noise = _fgn_circulant(hurst, n_steps, rng, dim)
    if noise is None:
        values = _fbm_cholesky(hurst, times, rng, dim)
    else:
        scale = (horizon / n_steps) ** hurst
        values = np.vstack([np.zeros((1, dim)), np.cumsum(noise * scale, axis=0)])
    return SamplePath(times, values, hurst)


def sample_bm(dim: int, n_steps: int, horizon: float, seed, *keys) -> SamplePath:
    """Standard Brownian motion started at 0 from exact Gaussian increments."""
    if n_steps < 1 or horizon <= 0:
        raise ValueError("need n_steps >= 1 and horizon > 0")
    rng = seed if isinstance(seed, np.random.Generator) else generator(seed, *keys)
    times = np.linspace(0.0, horizon, n_steps + 1)
    inc = rng.standard_normal((n_steps, dim)) * np.sqrt(horizon / n_steps)
    return SamplePath(times, np.vstack([np.zeros((1, dim)), np.cumsum(inc, axis=0)]), 0.5)


class CrossIntegrals:
    """Left-point iterated integrals ``I[B, W]`` and ``I[W, B]`` on a grid.

    The value over a single step is zero; longer intervals follow from the
    cross Chen relation ``I_su + I_ut + B_su (x) W_ut = I_st``.
    """

    def __init__(self, b: SamplePath, w: SamplePath):
        if b.times.shape != w.times.shape or np.any(b.times != w.times):
            raise ValueError("both paths must live on the same grid")
        self.times = b.times
        self.db = b.increments
        self.dw = w.increments
        n = self.db.shape[0]
        self.ibw_steps = np.zeros((n, b.dim, w.dim))
        self.iwb_steps = np.zeros((n, w.dim, b.dim))

    @property
    def n_steps(self) -> int:
        return self.db.shape[0]

    @cached_property
    def prefix(self):
        n = self.n_steps
        b0 = np.zeros((n + 1, self.db.shape[1]))
        b0[1:] = np.cumsum(self.db, axis=0)
        w0 = np.zeros((n + 1, self.dw.shape[1]))
        w0[1:] = np.cumsum(self.dw, axis=0)
        ibw = np.zeros((n + 1, b0.shape[1], w0.shape[1]))
        ibw[1:] = np.cumsum(b0[:-1, :, None] * self.dw[:, None, :], axis=0)
        iwb = np.zeros((n + 1, w0.shape[1], b0.shape[1]))
        iwb[1:] = np.cumsum(w0[:-1, :, None] * self.db[:, None, :], axis=0)
        return b0, w0, ibw, iwb

    def values(self, i, j):
        """``(I[B,W]_{t_i t_j}, I[W,B]_{t_i t_j})`` for index arrays."""
        b0, w0, ibw, iwb = self.prefix
        bij = b0[j] - b0[i]
        wij = w0[j] - w0[i]
        i_bw = ibw[j] - ibw[i] - b0[i][..., :, None] * wij[..., None, :]
        i_wb = iwb[j] - iwb[i] - w0[i][..., :, None] * bij[..., None, :]
        return i_bw, i_wb

    def by_parts_residual(self, i, j) -> float:
        """``I[B,W] + I[W,B]^T - B (x) W + sum_k dB_k (x) dw_k`` over the pairs."""
        b0, w0, _, _ = self.prefix
        i_bw, i_wb = self.values(i, j)
        bij = b0[j] - b0[i]
        wij = w0[j] - w0[i]
        cov = np.cumsum(self.db[:, :, None] * self.dw[:, None, :], axis=0)
        cov = np.concatenate([np.zeros((1,) + cov.shape[1:]), cov])
        r = i_bw + np.swapaxes(i_wb, -1, -2) - bij[..., :, None] * wij[..., None, :] + (cov[j] - cov[i])
        return float(np.max(np.abs(r)))


def dyadic_cross_error(g_values, w_values, level: int) -> float:
    """Root mean square of ``I[g, w(m)]_{0T} - I[g, w]_{0T}`` over samples of ``w``.

    ``g_values`` has shape ``(2**M + 1, d)`` and ``w_values`` shape
    ``(S, 2**M + 1, e)`` on the same uniform grid. ``w(m)`` is the
    piecewise-linear interpolation of ``w`` at the ``2**level`` dyadic points;
    the integral against it uses the piecewise-linear interpolation of ``g``.
    The reference integral is the left-point sum on the fine grid.
    """
    g = np.asarray(g_values, dtype=float)
    w = np.asarray(w_values, dtype=float)
    n = g.shape[0] - 1
    stride = n >> level
    if stride << level != n or stride < 1:
        raise ValueError(f"grid of {n} steps cannot be coarsened to level {level}")
    gc = g - g[0]
    ref = np.einsum("ka,skb->sab", gc[:-1], np.diff(w, axis=1))
    # exact integral of the linear interpolant of g over each fine step, in units of steps
    trap = 0.5 * (gc[:-1] + gc[1:])
    block = trap.reshape(1 << level, stride, -1).sum(axis=1) / stride
    slope = np.diff(w[:, ::stride], axis=1)
    approx = np.einsum("ka,skb->sab", block, slope)
    diff = approx - ref
    return float(np.sqrt(np.mean(np.sum(diff**2, axis=(1, 2)))))
