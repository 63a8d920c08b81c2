"""Level-3 rough paths sampled on a finite time grid.

A :class:`GridRoughPath` stores one group element per grid step. Increments
over longer intervals are products of consecutive steps, so Chen's relation
holds by construction. Hölder-type norms are suprema over a finite set of
grid pairs; see :func:`grid_pairs` for how that set is chosen.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from roughsf import tensor3
from roughsf.tensor3 import Tensor3

ALL_PAIRS_LIMIT = 1024
RANDOM_PAIRS = 10_000
_CHUNK = 1 << 15


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("need at least two grid times")
    if not np.all(np.isfinite(times)):
        raise ValueError("grid times must be finite")
    if np.any(np.diff(times) <= 0):
        raise ValueError("grid times must be strictly increasing")
    return times


def grid_pairs(n_steps: int, strategy: str = "auto", seed: int = 0):
    """Index pairs ``(i, j)`` with ``0 <= i < j <= n_steps``.

    ``"all"`` returns every pair. ``"dyadic"`` returns every pair whose lag
    ``j - i`` is a power of two, plus ``RANDOM_PAIRS`` uniformly drawn pairs
    from a fixed-seed generator. ``"auto"`` picks ``"all"`` up to
    ``ALL_PAIRS_LIMIT`` steps and ``"dyadic"`` beyond.
    """
    if strategy == "auto":
        strategy = "all" if n_steps <= ALL_PAIRS_LIMIT else "dyadic"
    if strategy == "all":
        i, j = np.triu_indices(n_steps + 1, k=1)
        return i, j
    if strategy != "dyadic":
        raise ValueError(f"unknown pair strategy {strategy!r}")
    ii = []
    jj = []
    lag = 1
    while lag <= n_steps:
        start = np.arange(0, n_steps - lag + 1)
        ii.append(start)
        jj.append(start + lag)
        lag *= 2
    rng = np.random.default_rng(seed)
    a = rng.integers(0, n_steps + 1, size=RANDOM_PAIRS)
    b = rng.integers(0, n_steps + 1, size=RANDOM_PAIRS)
    keep = a != b
    ii.append(np.minimum(a, b)[keep])
    jj.append(np.maximum(a, b)[keep])
    return np.concatenate(ii), np.concatenate(jj)


def _norm(x: np.ndarray, n_trailing: int) -> np.ndarray:
    if n_trailing == 0:
        return np.abs(x)
    axes = tuple(range(x.ndim - n_trailing, x.ndim))
    return np.sqrt(np.sum(x * x, axis=axes))


def holder_sup(increments, times, exponent: float, pairs, n_trailing: int) -> float:
    """``sup |Q_ij| / (t_j - t_i)**exponent`` over the given pairs.

    ``increments(i, j)`` must return the values for index arrays ``i, j``
    with ``n_trailing`` value axes.
    """
    i_all, j_all = pairs
    best = 0.0
    for lo in range(0, i_all.size, _CHUNK):
        i = i_all[lo : lo + _CHUNK]
        j = j_all[lo : lo + _CHUNK]
        q = _norm(increments(i, j), n_trailing)
        r = q / (times[j] - times[i]) ** exponent
        if r.size:
            best = max(best, float(np.max(r)))
    return best


def path_holder(values, times, exponent: float, strategy: str = "auto") -> float:
    """Grid Hölder seminorm of a path given by its values on the grid."""
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    pairs = grid_pairs(times.size - 1, strategy)
    return holder_sup(
        lambda i, j: values[j] - values[i], times, exponent, pairs, values.ndim - 1
    )


@dataclass(frozen=True)
class HolderNorms:
    level1: float
    level2: float
    level3: float
    exponent: float

    @property
    def homogeneous(self) -> float:
        """Sum of ``level_i ** (1/i)``."""
        return self.level1 + self.level2**0.5 + self.level3 ** (1.0 / 3.0)


class GridRoughPath:
    """Per-step level-3 group elements on a strictly increasing grid.

    Args:
        times: grid of ``N + 1`` times.
        s1, s2, s3: step levels with shapes ``(N, d)``, ``(N, d, d)`` and
            ``(N, d, d, d)``; entry ``k`` is the increment over
            ``[times[k], times[k + 1]]``.
    """

    def __init__(self, times, s1, s2, s3):
        self.times = _check_times(times)
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        s3 = np.asarray(s3, dtype=float)
        n = self.times.size - 1
        if s1.ndim != 2 or s1.shape[0] != n:
            raise ValueError(f"level 1 steps must have shape ({n}, d), got {s1.shape}")
        d = s1.shape[1]
        if s2.shape != (n, d, d) or s3.shape != (n, d, d, d):
            raise ValueError("step levels do not share grid length and dimension")
        for name, arr in (("level 1", s1), ("level 2", s2), ("level 3", s3)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} steps contain non-finite values")
        self.s1 = s1
        self.s2 = s2
        self.s3 = s3

    @property
    def dim(self) -> int:
        return self.s1.shape[1]

    @property
    def n_steps(self) -> int:
        return self.s1.shape[0]

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    def step(self, k: int) -> Tensor3:
        return Tensor3(self.s1[k], self.s2[k], self.s3[k])

    def increment(self, i: int, j: int) -> Tensor3:
        """Increment over ``[times[i], times[j]]`` by successive products."""
        if not 0 <= i <= j <= self.n_steps:
            raise IndexError(f"bad grid pair ({i}, {j}) for {self.n_steps} steps")
        d = self.dim
        a1, a2, a3 = np.zeros(d), np.zeros((d, d)), np.zeros((d, d, d))
        for k in range(i, j):
            a1, a2, a3 = tensor3.mul(a1, a2, a3, self.s1[k], self.s2[k], self.s3[k])
        return Tensor3(a1, a2, a3)

    @cached_property
    def prefix(self):
        """Increments from the first grid time to every grid time."""
        d = self.dim
        p1 = np.zeros((self.n_steps + 1, d))
        p1[1:] = np.cumsum(self.s1, axis=0)
        p2 = np.zeros((self.n_steps + 1, d, d))
        p2[1:] = np.cumsum(self.s2 + p1[:-1, :, None] * self.s1[:, None, :], axis=0)
        p3 = np.zeros((self.n_steps + 1, d, d, d))
        p3[1:] = np.cumsum(
            self.s3
            + p1[:-1, :, None, None] * self.s2[:, None, :, :]
            + p2[:-1, :, :, None] * self.s1[:, None, None, :],
            axis=0,
        )
        return p1, p2, p3

    def pair_increments(self, i, j, levels: int = 3):
        """Vectorised increments for index arrays ``i`` and ``j``.

        Uses the stored prefix products; equal to :meth:`increment` up to
        rounding.
        """
        p1, p2, p3 = self.prefix
        x1 = p1[j] - p1[i]
        if levels == 1:
            return (x1,)
        x2 = p2[j] - p2[i] - p1[i][:, :, None] * x1[:, None, :]
        if levels == 2:
            return x1, x2
        x3 = (
            p3[j]
            - p3[i]
            - p1[i][:, :, None, None] * x2[:, None, :, :]
            - p2[i][:, :, :, None] * x1[:, None, None, :]
        )
        return x1, x2, x3

    def holder_norms(self, alpha: float, strategy: str = "auto") -> HolderNorms:
        """Per-level grid Hölder norms ``sup |X^k_st| / (t - s)**(k alpha)``."""
        pairs = grid_pairs(self.n_steps, strategy)
        out = []
        for level in (1, 2, 3):
            out.append(
                holder_sup(
                    lambda i, j, lv=level: self.pair_increments(i, j, lv)[lv - 1],
                    self.times,
                    level * alpha,
                    pairs,
                    level,
                )
            )
        return HolderNorms(out[0], out[1], out[2], alpha)

    def shuffle_residual(self, strategy: str = "auto") -> float:
        """Largest violation of the level-2 and level-3 shuffle relations."""
        i_all, j_all = grid_pairs(self.n_steps, strategy)
        worst = 0.0
        for lo in range(0, i_all.size, _CHUNK):
            x1, x2, x3 = self.pair_increments(i_all[lo : lo + _CHUNK], j_all[lo : lo + _CHUNK])
            r2 = x1[:, :, None] * x1[:, None, :] - x2 - np.swapaxes(x2, 1, 2)
            prod = x1[:, :, None, None] * x2[:, None, :, :]
            # X^p X^qr = X^pqr + X^qpr + X^qrp
            r3 = (
                prod
                - x3
                - np.einsum("nqpr->npqr", x3)
                - np.einsum("nqrp->npqr", x3)
            )
            worst = max(worst, float(np.max(np.abs(r2), initial=0.0)))
            worst = max(worst, float(np.max(np.abs(r3), initial=0.0)))
        return worst

    def chen_residual(self, max_triples: int = 50_000, seed: int = 0) -> float:
        """Chen residual of the increments on grid triples.

        Small grids use the exact all-pairs table; larger ones evaluate a
        random sample of triples from prefix products.
        """
        if self.n_steps <= 512:
            return self.to_two_param().chen_residual(max_triples, seed)
        tri = _triples(self.n_steps + 1, max_triples, seed)
        a, b, c = tri.T
        x = self.pair_increments(a, b)
        y = self.pair_increments(b, c)
        z = self.pair_increments(a, c)
        prod = tensor3.mul(*x, *y)
        return max(float(np.max(np.abs(p - q))) for p, q in zip(prod, z))

    def lag_increments(self, max_lag: int | None = None):
        """Yield ``(lag, X1, X2, X3)`` for all pairs ``(i, i + lag)``.

        Each lag is obtained from the previous one by one more step product,
        so the values agree with :meth:`increment` to the last bit.
        """
        n = self.n_steps
        max_lag = n if max_lag is None else min(max_lag, n)
        a1, a2, a3 = self.s1, self.s2, self.s3
        yield 1, a1, a2, a3
        for lag in range(2, max_lag + 1):
            a1, a2, a3 = tensor3.mul(
                a1[:-1], a2[:-1], a3[:-1], self.s1[lag - 1 :], self.s2[lag - 1 :], self.s3[lag - 1 :]
            )
            yield lag, a1, a2, a3

    def to_two_param(self, pairs=None) -> "TwoParamTensorData":
        """Export increments on ``pairs`` (default: all pairs, by exact step products)."""
        if pairs is None:
            ii, jj, v1, v2, v3 = [], [], [], [], []
            for lag, a1, a2, a3 in self.lag_increments():
                start = np.arange(self.n_steps - lag + 1)
                ii.append(start)
                jj.append(start + lag)
                v1.append(a1)
                v2.append(a2)
                v3.append(a3)
            return TwoParamTensorData(
                self.times,
                np.concatenate(ii),
                np.concatenate(jj),
                np.concatenate(v1),
                np.concatenate(v2),
                np.concatenate(v3),
            )
        i, j = (np.asarray(p) for p in pairs)
        x1, x2, x3 = self.pair_increments(i, j)
        return TwoParamTensorData(self.times, i, j, x1, x2, x3)

    def restrict(self, i: int, j: int) -> "GridRoughPath":
        if not 0 <= i < j <= self.n_steps:
            raise IndexError(f"bad grid range ({i}, {j})")
        return GridRoughPath(self.times[i : j + 1], self.s1[i:j], self.s2[i:j], self.s3[i:j])

    def concatenate(self, other: "GridRoughPath") -> "GridRoughPath":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        if other.times[0] != self.times[-1]:
            raise ValueError("grids do not meet")
        return GridRoughPath(
            np.concatenate([self.times, other.times[1:]]),
            np.concatenate([self.s1, other.s1]),
            np.concatenate([self.s2, other.s2]),
            np.concatenate([self.s3, other.s3]),
        )

    def coarsen(self, factor: int = 2) -> "GridRoughPath":
        """Merge each block of ``factor`` consecutive steps into one step."""
        if factor < 1 or self.n_steps % factor:
            raise ValueError(f"{self.n_steps} steps are not divisible by {factor}")
        a1, a2, a3 = self.s1[::factor], self.s2[::factor], self.s3[::factor]
        for r in range(1, factor):
            a1, a2, a3 = tensor3.mul(
                a1, a2, a3, self.s1[r::factor], self.s2[r::factor], self.s3[r::factor]
            )
        return GridRoughPath(self.times[::factor], a1, a2, a3)

    def dilate(self, lam: float) -> "GridRoughPath":
        return GridRoughPath(self.times, lam * self.s1, lam**2 * self.s2, lam**3 * self.s3)


def lift_piecewise_linear(times, values) -> GridRoughPath:
    """Canonical level-3 lift of the piecewise-linear interpolation."""
    times = _check_times(times)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != times.size:
        raise ValueError(f"{values.shape[0]} samples for {times.size} grid times")
    if not np.all(np.isfinite(values)):
        raise ValueError("path samples contain non-finite values")
    return GridRoughPath(times, *tensor3.segment_levels(np.diff(values, axis=0)))


class TwoParamTensorData:
    """Level-3 values ``X_{t_i t_j}`` on an arbitrary set of grid pairs.

    Unlike :class:`GridRoughPath`, nothing ties the values together, so
    Chen's relation is something to check rather than an invariant.
    """

    def __init__(self, times, i, j, x1, x2, x3):
        self.times = _check_times(times)
        self.i = np.asarray(i, dtype=int)
        self.j = np.asarray(j, dtype=int)
        self.x1 = np.asarray(x1, dtype=float)
        self.x2 = np.asarray(x2, dtype=float)
        self.x3 = np.asarray(x3, dtype=float)
        if np.any(self.i >= self.j) or np.any(self.i < 0) or np.any(self.j >= self.times.size):
            raise ValueError("pairs must satisfy 0 <= i < j <= N")

    def value(self, i: int, j: int) -> Tensor3:
        hit = np.nonzero((self.i == i) & (self.j == j))[0]
        if hit.size == 0:
            raise KeyError((i, j))
        k = int(hit[0])
        return Tensor3(self.x1[k], self.x2[k], self.x3[k])

    def chen_residual(self, max_triples: int = 50_000, seed: int = 0) -> float:
        """Largest ``|X_su X_ut - X_st|`` over stored triples ``s < u < t``.

        For a complete pair set the triples are all of them, or a uniform
        sample of ``max_triples`` when there are more.
        """
        n1 = self.times.size
        table = np.full((n1, n1), -1, dtype=np.int64)
        table[self.i, self.j] = np.arange(self.i.size)
        if self.i.size == n1 * (n1 - 1) // 2:
            tri = _triples(n1, max_triples, seed)
        else:
            tri = self._sparse_triples(table, max_triples, seed)
        if tri.size == 0:
            return 0.0
        worst = 0.0
        # chunks keep the gathered tensors cache-sized
        for lo in range(0, tri.shape[0], 4096):
            t = tri[lo : lo + 4096]
            k_su, k_ut, k_st = table[t[:, 0], t[:, 1]], table[t[:, 1], t[:, 2]], table[t[:, 0], t[:, 2]]
            c1, c2, c3 = tensor3.mul(
                self.x1[k_su], self.x2[k_su], self.x3[k_su],
                self.x1[k_ut], self.x2[k_ut], self.x3[k_ut],
            )
            worst = max(
                worst,
                float(np.max(np.abs(c1 - self.x1[k_st]))),
                float(np.max(np.abs(c2 - self.x2[k_st]))),
                float(np.max(np.abs(c3 - self.x3[k_st]))),
            )
        return worst

    def _sparse_triples(self, table, max_triples: int, seed: int) -> np.ndarray:
        by_start: dict[int, list[int]] = {}
        for a, b in zip(self.i.tolist(), self.j.tolist()):
            by_start.setdefault(a, []).append(b)
        triples = [
            (a, b, c)
            for a, mids in by_start.items()
            for b in mids
            for c in by_start.get(b, ())
            if table[a, c] >= 0
        ]
        tri = np.array(triples, dtype=np.int64).reshape(-1, 3)
        if len(tri) > max_triples:
            tri = tri[np.random.default_rng(seed).choice(len(tri), size=max_triples, replace=False)]
        return tri


def _triples(n: int, max_triples: int, seed: int) -> np.ndarray:
    """All index triples ``a < b < c`` below ``n``, or a uniform sample of them."""
    total = n * (n - 1) * (n - 2) // 6
    if total <= max_triples:
        a, b = np.triu_indices(n, k=1)
        pairs = np.column_stack([a[b < n - 1], b[b < n - 1]])
        reps = n - 1 - pairs[:, 1]
        first = np.repeat(pairs, reps, axis=0)
        offs = np.concatenate([np.arange(1, r + 1) for r in reps]) if reps.size else np.zeros(0, dtype=int)
        return np.column_stack([first, first[:, 1] + offs]).astype(np.int64)
    rng = np.random.default_rng(seed)
    got = np.zeros((0, 3), dtype=np.int64)
    while len(got) < max_triples:
        draw = np.sort(rng.integers(0, n, size=(2 * max_triples, 3)), axis=1)
        draw = draw[(draw[:, 0] < draw[:, 1]) & (draw[:, 1] < draw[:, 2])]
        got = np.concatenate([got, draw])
    return got[:max_triples]
