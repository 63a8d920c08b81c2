"""Anisotropic rough paths over R^d (+) R^e and their extension to level 3.

An anisotropic rough path carries the first two levels of the joint path
``z = (b, w)`` together with the pure third level ``B^3`` of the rough
component. :func:`ext` fills in the remaining third-level blocks so that the
result is a genuine :class:`GridRoughPath` over ``R^(d+e)``.

The dyadic majorants mirror the chaining argument for Kolmogorov-type
Hölder bounds: ``M = 2 sum_n 2^(n a) K_n`` with ``K_n`` the largest value on
the level-``n`` dyadic intervals, truncated at the deepest grid level.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import product

import numpy as np

from roughsf.drivers import CrossIntegrals, SamplePath
from roughsf.io import FormatError, fmt
from roughsf.roughpath import GridRoughPath, grid_pairs, holder_sup, lift_piecewise_linear

COMPONENTS = ("B1", "W1", "B2", "W2", "IBW", "IWB", "B3")


@dataclass
class AnisotropicRP:
    """Per-step components on a grid; entry ``k`` covers ``[t_k, t_{k+1}]``."""

    times: np.ndarray
    b1: np.ndarray
    w1: np.ndarray
    b2: np.ndarray
    w2: np.ndarray
    ibw: np.ndarray
    iwb: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        n = self.times.size - 1
        d, e = self.b1.shape[1], self.w1.shape[1]
        expected = {
            "b1": (n, d), "w1": (n, e), "b2": (n, d, d), "w2": (n, e, e),
            "ibw": (n, d, e), "iwb": (n, e, d), "b3": (n, d, d, d),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"component {name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def dims(self) -> tuple:
        return self.b1.shape[1], self.w1.shape[1]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    def joint_steps(self):
        """Per-step first and second levels over ``R^(d+e)``."""
        d, e = self.dims
        x1 = np.concatenate([self.b1, self.w1], axis=1)
        x2 = np.zeros((self.n_steps, d + e, d + e))
        x2[:, :d, :d] = self.b2
        x2[:, :d, d:] = self.ibw
        x2[:, d:, :d] = self.iwb
        x2[:, d:, d:] = self.w2
        return x1, x2

    def _carrier(self) -> GridRoughPath:
        # level-3 slot holds B^3 in its rough block only; Chen then composes
        # every component correctly and the other level-3 blocks are ignored
        d, e = self.dims
        x1, x2 = self.joint_steps()
        x3 = np.zeros((self.n_steps, d + e, d + e, d + e))
        x3[:, :d, :d, :d] = self.b3
        return GridRoughPath(self.times, x1, x2, x3)

    def components(self, i, j) -> dict:
        """All seven components at index arrays ``(i, j)`` via Chen."""
        d, _ = self.dims
        x1, x2, x3 = self._carrier().pair_increments(np.atleast_1d(i), np.atleast_1d(j))
        return {
            "B1": x1[:, :d], "W1": x1[:, d:],
            "B2": x2[:, :d, :d], "W2": x2[:, d:, d:],
            "IBW": x2[:, :d, d:], "IWB": x2[:, d:, :d],
            "B3": x3[:, :d, :d, :d],
        }

    def holder_vector(self, alpha: float, gamma: float) -> dict:
        """Grid Hölder norms of the seven components at their natural exponents."""
        pairs = grid_pairs(self.n_steps)
        comp = lambda key: (lambda i, j: self.components(i, j)[key])
        exps = {
            "B1": alpha, "W1": gamma, "B2": 2 * alpha, "W2": 2 * gamma,
            "IBW": alpha + gamma, "IWB": alpha + gamma, "B3": 3 * alpha,
        }
        ranks = {"B1": 1, "W1": 1, "B2": 2, "W2": 2, "IBW": 2, "IWB": 2, "B3": 3}
        return {
            key: holder_sup(comp(key), self.times, exps[key], pairs, ranks[key]) for key in COMPONENTS
        }

    def write_csv(self, path) -> None:
        d, e = self.dims
        n = self.n_steps
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([d, e, n, fmt(self.times[-1] - self.times[0])])
            for name in COMPONENTS:
                arr = getattr(self, name.lower()).reshape(n, -1)
                w.writerow([f"[{name}]"])
                for k in range(n):
                    w.writerow([fmt(self.times[k]), fmt(self.times[k + 1])] + [fmt(v) for v in arr[k]])

    @classmethod
    def read_csv(cls, path) -> "AnisotropicRP":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        try:
            d, e, n = (int(v) for v in rows[0][:3])
        except (ValueError, IndexError):
            raise FormatError(f"{path}: first line must be d,e,N,T") from None
        shapes = {"B1": (d,), "W1": (e,), "B2": (d, d), "W2": (e, e), "IBW": (d, e), "IWB": (e, d), "B3": (d, d, d)}
        out = {}
        pos = 1
        times = None
        for name in COMPONENTS:
            if pos >= len(rows) or rows[pos][0] != f"[{name}]":
                raise FormatError(f"{path}: expected section [{name}] at line {pos + 1}")
            body = np.array([[float(v) for v in r] for r in rows[pos + 1 : pos + 1 + n]])
            width = 2 + int(np.prod(shapes[name]))
            if body.shape != (n, width):
                raise FormatError(f"{path}: section [{name}] has shape {body.shape}, expected {(n, width)}")
            t = np.concatenate([body[:, 0], body[-1:, 1]])
            if times is None:
                times = t
            elif np.any(t != times):
                raise FormatError(f"{path}: section [{name}] uses a different grid")
            out[name.lower()] = body[:, 2:].reshape((n,) + shapes[name])
            pos += 1 + n
        return cls(times, **out)


def assemble_arp(b_lift: GridRoughPath, w: SamplePath, cross: CrossIntegrals, gamma: float = 0.5) -> AnisotropicRP:
    """Mixed object from the rough lift of ``b``, Brownian samples and Itô cross integrals.

    The Brownian second level is the piecewise-linear (Stratonovich) lift of
    ``w``; the cross components come from ``cross``.
    """
    if not 0 < gamma <= 0.5:
        raise ValueError(f"gamma must lie in (0, 1/2], got {gamma}")
    if b_lift.times.shape != w.times.shape or np.any(b_lift.times != w.times):
        raise ValueError("rough lift and Brownian samples use different grids")
    if cross.n_steps != b_lift.n_steps or np.any(cross.times != b_lift.times):
        raise ValueError("cross integrals use a different grid")
    if cross.db.shape[1] != b_lift.dim or cross.dw.shape[1] != w.dim:
        raise ValueError("cross integrals have the wrong dimensions")
    if np.max(np.abs(cross.db - b_lift.s1), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(b_lift.s1))):
        raise ValueError("cross integrals were built from a different rough path")
    dw = w.increments
    return AnisotropicRP(
        times=b_lift.times.copy(),
        b1=b_lift.s1.copy(),
        w1=dw,
        b2=b_lift.s2.copy(),
        w2=0.5 * dw[:, :, None] * dw[:, None, :],
        ibw=cross.ibw_steps.copy(),
        iwb=cross.iwb_steps.copy(),
        b3=b_lift.s3.copy(),
    )


def smooth_arp(times, b_values, w_values) -> AnisotropicRP:
    """The anisotropic data of the piecewise-linear joint path ``(b, w)``.

    Every component is the corresponding block of the canonical lift, so
    cross components are Riemann-Stieltjes integrals.
    """
    b_values = np.asarray(b_values, dtype=float)
    w_values = np.asarray(w_values, dtype=float)
    d = b_values.shape[1]
    joint = lift_piecewise_linear(times, np.concatenate([b_values, w_values], axis=1))
    return AnisotropicRP(
        times=joint.times,
        b1=joint.s1[:, :d], w1=joint.s1[:, d:],
        b2=joint.s2[:, :d, :d], w2=joint.s2[:, d:, d:],
        ibw=joint.s2[:, :d, d:], iwb=joint.s2[:, d:, :d],
        b3=joint.s3[:, :d, :d, :d],
    )


def _geodesic_level3(x1, x2):
    """Third level of the group element with the same first two levels and no
    third-level log component."""
    l2 = x2 - 0.5 * x1[:, :, None] * x1[:, None, :]
    return (
        0.5 * (x1[:, :, None, None] * l2[:, None, :, :] + l2[:, :, :, None] * x1[:, None, None, :])
        + x1[:, :, None, None] * x1[:, None, :, None] * x1[:, None, None, :] / 6.0
    )


def ext(arp: AnisotropicRP, alpha: float, gamma: float) -> GridRoughPath:
    """Extend to a level-3 rough path over ``R^(d+e)``.

    Each grid step gets the third level of the group element determined by its
    first two levels, with the rough block replaced by ``B^3``; longer
    intervals follow from Chen. For a piecewise-linear joint path this is the
    canonical lift, and the Brownian block is ``dw^(x)3 / 6``.
    """
    if not 2 * alpha + gamma > 1:
        raise ValueError(f"need 2 alpha + gamma > 1, got alpha={alpha}, gamma={gamma}")
    d, _ = arp.dims
    x1, x2 = arp.joint_steps()
    x3 = _geodesic_level3(x1, x2)
    x3[:, :d, :d, :d] = arp.b3
    return GridRoughPath(arp.times, x1, x2, x3)


def joint_lift_reference(b: SamplePath, w: SamplePath) -> GridRoughPath:
    """Canonical lift of the piecewise-linear joint path ``(b, w)``."""
    if b.times.shape != w.times.shape or np.any(b.times != w.times):
        raise ValueError("paths use different grids")
    return lift_piecewise_linear(b.times, np.concatenate([b.values, w.values], axis=1))


def block_slices(d: int, e: int, block) -> tuple:
    """Index slices of the level-3 block ``block`` (a word in {1, 2})."""
    sl = {1: slice(0, d), 2: slice(d, d + e)}
    return tuple(sl[k] for k in block)


def block_exponent(block, alpha: float, gamma: float) -> float:
    s = sum(block)
    return (6 - s) * alpha + (s - 3) * gamma


def mixed_block_norms(rp: GridRoughPath, d: int, alpha: float, gamma: float) -> dict:
    """Grid Hölder norms of the seven non-rough level-3 blocks at their exponents."""
    e = rp.dim - d
    pairs = grid_pairs(rp.n_steps)
    out = {}
    for block in product((1, 2), repeat=3):
        if block == (1, 1, 1):
            continue
        sl = block_slices(d, e, block)
        out[block] = holder_sup(
            lambda i, j, sl=sl: rp.pair_increments(i, j)[2][(slice(None),) + sl],
            rp.times,
            block_exponent(block, alpha, gamma),
            pairs,
            3,
        )
    return out


def compensated_block_sum(rp: GridRoughPath, d: int, block, stride: int) -> np.ndarray:
    """Compensated sum for a level-3 block over ``[t_0, t_N]`` on a partition of
    every ``stride``-th grid point, using only first and second levels."""
    n = rp.n_steps
    if stride < 1 or n % stride:
        raise ValueError(f"stride {stride} does not divide {n}")
    pts = np.arange(0, n + 1, stride)
    left = pts[:-1]
    right = pts[1:]
    a1, a2 = rp.pair_increments(np.zeros_like(left), left, levels=2)
    s1, s2 = rp.pair_increments(left, right, levels=2)
    total = np.sum(
        a1[:, :, None, None] * s2[:, None, :, :] + a2[:, :, :, None] * s1[:, None, None, :], axis=0
    )
    sl = block_slices(d, rp.dim - d, block)
    return total[sl]


def dyadic_levels(n_steps: int) -> int:
    level = int(round(np.log2(n_steps))) if n_steps > 0 else -1
    if level < 0 or (1 << level) != n_steps:
        raise ValueError(f"grid of {n_steps} steps is not dyadic")
    return level


def dyadic_sup_levels(values, n_steps: int) -> np.ndarray:
    """``K_n`` for ``n = 0..L`` from a callable ``values(i, j)``."""
    level = dyadic_levels(n_steps)
    k = np.zeros(level + 1)
    for n in range(level + 1):
        width = n_steps >> n
        i = np.arange(0, n_steps, width)
        v = np.asarray(values(i, i + width), dtype=float).reshape(i.size, -1)
        k[n] = float(np.max(np.sqrt(np.sum(v * v, axis=1))))
    return k


def dyadic_holder_bound(values, n_steps: int, exponent: float, horizon: float = 1.0) -> float:
    """Truncated dyadic majorant ``M`` with ``|Q_st| <= M (t - s)^exponent`` on dyadic pairs.

    ``values(i, j)`` returns ``Q`` at grid index arrays. Only levels down to
    the grid resolution enter, which is exact for pairs of grid points.
    """
    k = dyadic_sup_levels(values, n_steps)
    n = np.arange(k.size)
    return float(2.0 * np.sum(2.0 ** (n * exponent) * k) / horizon**exponent)


def dyadic_cross_bound(q_values, r_values, i_values, n_steps: int, a1: float, a2: float, horizon: float = 1.0) -> float:
    """Majorant for a cross term ``I`` with ``I_st = I_su + I_ut + Q_su (x) R_ut``."""
    m_q = dyadic_holder_bound(q_values, n_steps, a1)
    m_r = dyadic_holder_bound(r_values, n_steps, a2)
    k_i = dyadic_sup_levels(i_values, n_steps)
    n = np.arange(k_i.size)
    m_i = m_q * m_r + 2.0 * np.sum(2.0 ** (n * (a1 + a2)) * k_i)
    return float(m_i / horizon ** (a1 + a2))


def majorant_violation(values, n_steps: int, exponent: float, bound: float, horizon: float = 1.0) -> float:
    """Largest ``|Q_st| / (bound (t - s)^exponent)`` over all grid pairs (≤ 1 when the bound holds)."""
    i, j = np.triu_indices(n_steps + 1, k=1)
    v = np.asarray(values(i, j), dtype=float).reshape(i.size, -1)
    q = np.sqrt(np.sum(v * v, axis=1))
    dt = (j - i) * (horizon / n_steps)
    if bound == 0:
        return 0.0 if np.all(q == 0) else np.inf
    return float(np.max(q / (bound * dt**exponent)))
