import numpy as np
import pytest

from roughsf.roughpath import lift_piecewise_linear


def random_lift(rng, n_steps=64, dim=2, scale=None, horizon=1.0):
    """Lift of a Gaussian random walk whose total size is of order one."""
    scale = 1.0 / np.sqrt(n_steps) if scale is None else scale
    steps = rng.standard_normal((n_steps, dim)) * scale
    values = np.vstack([np.zeros((1, dim)), np.cumsum(steps, axis=0)])
    return lift_piecewise_linear(np.linspace(0.0, horizon, n_steps + 1), values)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def mixed_batch(sys, eps, samples, seed, n_steps, hurst=0.3):
    """Simulate the slow-fast system on ``samples`` mixed drivers.

    Returns ``(times, z, dw, b_lifts)`` with ``z`` of shape ``(S, N + 1, m + n)``.
    """
    from roughsf.experiment import mixed_driver
    from roughsf.slowfast import simulate_batch

    drivers = [mixed_driver(hurst, sys.d, sys.e, n_steps, 1.0, seed, i) for i in range(samples)]
    times = drivers[0].xi.times
    z, exploded = simulate_batch(
        sys, times,
        np.stack([dr.xi.s1 for dr in drivers]),
        np.stack([dr.xi.s2 for dr in drivers]),
        np.stack([dr.xi.s3 for dr in drivers]),
        eps,
    )
    assert np.all(exploded < 0)
    dw = np.stack([dr.w.increments for dr in drivers])
    return times, z, dw, [dr.b_lift for dr in drivers]


def delta_sweep(sys, eps, deltas, samples, seed, n_steps=2048, beta=0.28, gamma=None):
    """Per-delta Monte Carlo statistics of the freezing errors.

    ``gap``: sup over t of E|Y_t - Yhat_t|^2; ``term1`` and ``term3``: E of the
    squared norms of the first and third terms of the M decomposition.
    """
    from roughsf.slowfast import hat_process, m_decomposition

    gamma = 3 * beta if gamma is None else gamma
    times, z, dw, _ = mixed_batch(sys, eps, samples, seed, n_steps)
    x, y = sys.split(z)
    out = {"gap": [], "term1": [], "term3": []}
    for delta in deltas:
        yhat = hat_process(sys, times, x, dw, delta, eps)
        out["gap"].append(float(np.max(np.mean(np.sum((y - yhat) ** 2, axis=-1), axis=0))))
        t1, t3 = [], []
        for s in range(samples):
            mt = m_decomposition(sys, times, x[s], y[s], yhat[s], delta, beta, gamma)
            t1.append(mt.norms[0] ** 2)
            t3.append(mt.norms[2] ** 2)
        out["term1"].append(float(np.mean(t1)))
        out["term3"].append(float(np.mean(t3)))
    return {k: np.array(v) for k, v in out.items()}


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
