"""Monte Carlo averaging experiment and its configuration file.

Sample ``i`` of an experiment draws its fBm from the stream ``(seed, 1, i)``
and its Brownian motion from ``(seed, 2, i)``. Samples are processed in
chunks of fixed size, so the arithmetic never depends on how many worker
threads are used, and the per-sample values are reduced in sample order
with exactly rounded sums.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from roughsf.anisotropic import assemble_arp, ext
from roughsf.drivers import CrossIntegrals, sample_bm, sample_fbm
from roughsf.io import fmt
from roughsf.roughpath import GridRoughPath, lift_piecewise_linear, path_holder
from roughsf.slowfast import C_FAST, SlowFastSystem, proof_delta, simulate_batch, solve_averaged_batch
from roughsf.systems import get_system

CHUNK = 25
FBM_STREAM = 1
BM_STREAM = 2
RESULT_HEADER = ("epsilon", "delta", "estimate", "stderr", "samples_used", "exploded")


@dataclass
class MixedDriver:
    b: object  # SamplePath
    w: object
    b_lift: GridRoughPath
    xi: GridRoughPath


def mixed_driver(hurst: float, d: int, e: int, n_steps: int, horizon: float, seed, index: int,
                 alpha: float | None = None, gamma: float = 0.5) -> MixedDriver:
    """fBm, Brownian motion and the extended mixed rough path for sample ``index``."""
    alpha = hurst if alpha is None else alpha
    b = sample_fbm(hurst, d, n_steps, horizon, seed, FBM_STREAM, index)
    w = sample_bm(e, n_steps, horizon, seed, BM_STREAM, index)
    b_lift = lift_piecewise_linear(b.times, b.values)
    arp = assemble_arp(b_lift, w, CrossIntegrals(b, w), gamma)
    return MixedDriver(b, w, b_lift, ext(arp, alpha, gamma))


@dataclass
class ExperimentConfig:
    m: int = 1
    n: int = 1
    d: int = 1
    e: int = 1
    H: float = 0.3
    T: float = 1.0
    N: int = 256
    beta: float = 0.26
    p: float = 2.0
    epsilons: list = field(default_factory=lambda: [0.1, 0.05, 0.02, 0.01])
    samples: int = 200
    seed: int = 0
    system: str = "ou"
    delta_mode: str = "proof"

    def validate(self) -> None:
        if not 0.25 < self.beta < self.H:
            raise ValueError(f"need 1/4 < beta < H, got beta={self.beta}, H={self.H}")
        if not 0.25 < self.H <= 1.0 / 3.0 + 1e-12:
            raise ValueError(f"Hurst index must lie in (1/4, 1/3], got {self.H}")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.samples < 1 or self.N < 1 or self.T <= 0:
            raise ValueError("samples, N and T must be positive")
        if not self.epsilons or any(not 0 < eps <= 1 for eps in self.epsilons):
            raise ValueError("epsilons must be a non-empty list in (0, 1]")
        if self.delta_mode != "proof":
            try:
                float(self.delta_mode)
            except ValueError:
                raise ValueError("delta_mode must be 'proof' or a number") from None


_INT_KEYS = {"m", "n", "d", "e", "N", "samples", "seed"}
_FLOAT_KEYS = {"H", "T", "beta", "p"}


def parse_value_list(text: str) -> list:
    return [float(v) for v in text.replace(",", " ").split()]


def read_key_values(path, allowed: set) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in allowed:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            if key in out:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = (lineno, value)
    return out


def load_config(path) -> ExperimentConfig:
    fields_ = ExperimentConfig.__dataclass_fields__
    raw = read_key_values(path, set(fields_))
    kwargs = {}
    for key, (lineno, value) in raw.items():
        try:
            if key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key == "epsilons":
                kwargs[key] = parse_value_list(value)
            else:
                kwargs[key] = value
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from None
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def fine_steps(cfg: ExperimentConfig, c_fast: float = C_FAST) -> int:
    """Smallest ``N * 2^k`` with step ``T / N`` at most ``c_fast * min(eps)``."""
    n = cfg.N
    while cfg.T / n > c_fast * min(cfg.epsilons) * (1 + 1e-12):
        n *= 2
    return n


def delta_for(cfg: ExperimentConfig, eps: float, dt: float) -> float:
    if cfg.delta_mode == "proof":
        return proof_delta(eps, cfg.beta, dt, cfg.T)
    return float(min(max(float(cfg.delta_mode), dt), cfg.T))


@dataclass
class ResultRow:
    epsilon: float
    delta: float
    estimate: float
    stderr: float
    samples_used: int
    exploded: int

    @property
    def valid(self) -> bool:
        return self.samples_used > 0

    def csv_fields(self) -> list:
        return [fmt(self.epsilon), fmt(self.delta), fmt(self.estimate), fmt(self.stderr),
                str(self.samples_used), str(self.exploded)]


def _stack_steps(drivers, attr):
    rps = [getattr(dr, attr) for dr in drivers]
    return (np.stack([rp.s1 for rp in rps]), np.stack([rp.s2 for rp in rps]), np.stack([rp.s3 for rp in rps]))


def _chunk_values(sys: SlowFastSystem, cfg: ExperimentConfig, n_steps: int, indices) -> np.ndarray:
    """``|X^eps - X_bar|_beta^p`` for the samples ``indices``; NaN marks an explosion."""
    drivers = [mixed_driver(cfg.H, cfg.d, cfg.e, n_steps, cfg.T, cfg.seed, i) for i in indices]
    times = drivers[0].xi.times
    xbar, bad_bar = solve_averaged_batch(sys, times, *_stack_steps(drivers, "b_lift"))
    s1, s2, s3 = _stack_steps(drivers, "xi")
    out = np.full((len(cfg.epsilons), len(indices)), np.nan)
    for k, eps in enumerate(cfg.epsilons):
        z, bad = simulate_batch(sys, times, s1, s2, s3, eps)
        for b in range(len(indices)):
            if bad[b] >= 0 or bad_bar[b] >= 0:
                continue
            diff = z[b, :, : sys.m] - xbar[b]
            out[k, b] = path_holder(diff, times, cfg.beta) ** cfg.p
    return out


def averaging_experiment(cfg: ExperimentConfig, threads: int = 1, sys: SlowFastSystem | None = None) -> list:
    """Estimate ``E |X^eps - X_bar|_beta^p`` for every ``eps`` in the config."""
    cfg.validate()
    sys = get_system(cfg.system) if sys is None else sys
    if (sys.m, sys.n, sys.d, sys.e) != (cfg.m, cfg.n, cfg.d, cfg.e):
        raise ValueError(f"system {cfg.system!r} has dimensions {(sys.m, sys.n, sys.d, sys.e)}")
    n_steps = fine_steps(cfg)
    dt = cfg.T / n_steps
    chunks = [range(a, min(a + CHUNK, cfg.samples)) for a in range(0, cfg.samples, CHUNK)]
    work = lambda idx: _chunk_values(sys, cfg, n_steps, list(idx))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    values = np.concatenate(parts, axis=1)
    rows = []
    for k, eps in enumerate(cfg.epsilons):
        v = values[k]
        good = v[np.isfinite(v)]
        used = good.size
        if used:
            mean = math.fsum(good) / used
            var = math.fsum((good - mean) ** 2) / (used - 1) if used > 1 else float("nan")
            se = math.sqrt(var / used) if used > 1 else float("nan")
        else:
            mean = se = float("nan")
        rows.append(ResultRow(eps, delta_for(cfg, eps, dt), mean, se, used, cfg.samples - used))
    return rows


def write_results(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(RESULT_HEADER) + "\n")
        for row in rows:
            fh.write(",".join(row.csv_fields()) + "\n")
