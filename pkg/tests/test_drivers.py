import numpy as np
import pytest

from roughsf.drivers import CrossIntegrals, SamplePath, dyadic_cross_error, generator, sample_bm, sample_fbm


def within(sample, target, var, n, k=4.0):
    return abs(sample - target) <= k * np.sqrt(var / n)


def test_half_hurst_covariance_is_min():
    n = 4000
    vals = np.stack([sample_fbm(0.5, 1, 8, 1.0, 11, i).values[:, 0] for i in range(n)])
    t = np.linspace(0, 1, 9)
    emp = vals.T @ vals / n
    target = np.minimum.outer(t, t)
    # Var(X_s X_t) = s t + min(s,t)^2 for Brownian motion
    var = np.outer(t, t) + target**2
    assert np.all(np.abs(emp - target) <= 4 * np.sqrt(var / n) + 1e-15)


def test_terminal_variance():
    n = 4000
    hurst, horizon = 0.3, 2.0
    end = np.array([sample_fbm(hurst, 1, 32, horizon, 12, i).values[-1, 0] for i in range(n)])
    target = horizon ** (2 * hurst)
    assert within(np.mean(end**2), target, 2 * target**2, n)
    assert within(np.mean(end), 0.0, target, n)


def test_increment_covariance_of_fgn():
    n = 3000
    hurst = 0.3
    inc = np.stack([sample_fbm(hurst, 1, 4, 4.0, 13, i).increments[:, 0] for i in range(n)])
    emp = np.mean(inc[:, 0] * inc[:, 1])
    target = 0.5 * (2 ** (2 * hurst) - 2)
    assert within(emp, target, 1 + target**2, n)


def test_brownian_mean_and_quadratic_variation():
    w = sample_bm(2, 2**16, 3.0, 14)
    qv = np.sum(w.increments**2, axis=0)
    # Var of the quadratic variation is 2 T^2 / N
    assert np.all(np.abs(qv - 3.0) <= 4 * np.sqrt(2 * 9.0 / 2**16))
    ends = np.array([sample_bm(1, 4, 3.0, 15, i).values[-1, 0] for i in range(2000)])
    assert within(ends.mean(), 0.0, 3.0, 2000)


def test_streams_are_independent_and_reproducible():
    a = sample_fbm(0.3, 1, 64, 1.0, 7, 1, 0)
    b = sample_bm(1, 64, 1.0, 7, 2, 0)
    assert np.array_equal(a.values, sample_fbm(0.3, 1, 64, 1.0, 7, 1, 0).values)
    assert not np.array_equal(a.values, sample_fbm(0.3, 1, 64, 1.0, 7, 1, 1).values)
    ends = np.array(
        [[sample_fbm(0.3, 1, 4, 1.0, 7, 1, i).values[-1, 0], sample_bm(1, 4, 1.0, 7, 2, i).values[-1, 0]]
         for i in range(2000)]
    )
    corr = np.corrcoef(ends.T)[0, 1]
    assert abs(corr) <= 4 / np.sqrt(2000)
    assert generator(3, 1).standard_normal() == generator(3, 1).standard_normal()


def test_generator_argument_is_accepted():
    a = sample_bm(1, 8, 1.0, generator(5, 0))
    b = sample_bm(1, 8, 1.0, 5, 0)
    assert np.array_equal(a.values, b.values)


def test_parameter_validation():
    with pytest.raises(ValueError):
        sample_fbm(1.2, 1, 8, 1.0, 0)
    with pytest.raises(ValueError):
        sample_bm(1, 0, 1.0, 0)


def test_cross_integrals_against_linear_path():
    w = sample_bm(2, 50, 1.0, 16)
    v = np.array([1.0, -2.0, 0.5])
    b = SamplePath(w.times, w.times[:, None] * v, 0.5)
    ci = CrossIntegrals(b, w)
    i_bw, i_wb = ci.values(np.array(0), np.array(50))
    h = 1.0 / 50
    assert np.allclose(i_wb, h * np.sum(w.values[:-1], axis=0)[:, None] * v, atol=1e-14)
    assert np.allclose(i_bw, v[:, None] * np.sum(w.times[:-1, None] * w.increments, axis=0), atol=1e-14)


def test_cross_integrals_single_step_chen_and_by_parts():
    b = sample_fbm(0.3, 2, 64, 1.0, 17)
    w = sample_bm(3, 64, 1.0, 18)
    ci = CrossIntegrals(b, w)
    k = np.arange(64)
    zero_bw, zero_wb = ci.values(k, k + 1)
    assert np.max(np.abs(zero_bw)) <= 1e-15 and np.max(np.abs(zero_wb)) <= 1e-15
    s, u, t = np.array([3, 10, 0]), np.array([20, 11, 40]), np.array([64, 30, 41])
    bsu = b.values[u] - b.values[s]
    wut = w.values[t] - w.values[u]
    wsu = w.values[u] - w.values[s]
    but = b.values[t] - b.values[u]
    bw_su, wb_su = ci.values(s, u)
    bw_ut, wb_ut = ci.values(u, t)
    bw_st, wb_st = ci.values(s, t)
    assert np.max(np.abs(bw_su + bw_ut + bsu[:, :, None] * wut[:, None, :] - bw_st)) <= 1e-12
    assert np.max(np.abs(wb_su + wb_ut + wsu[:, :, None] * but[:, None, :] - wb_st)) <= 1e-12
    i, j = np.triu_indices(65, 1)
    assert ci.by_parts_residual(i, j) <= 1e-12


def test_cross_integrals_need_matching_grids():
    with pytest.raises(ValueError):
        CrossIntegrals(sample_bm(1, 8, 1.0, 0), sample_bm(1, 8, 2.0, 0))


def test_dyadic_cross_error_decreases():
    n = 2**10
    t = np.linspace(0, 1, n + 1)
    g = np.stack([np.sin(3 * t), t**2], axis=1)
    ws = np.stack([sample_bm(1, n, 1.0, 19, s).values for s in range(64)])
    errs = [dyadic_cross_error(g, ws, m) for m in range(2, 10)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert dyadic_cross_error(g, ws, 10) <= 0.02 * errs[0]
    with pytest.raises(ValueError):
        dyadic_cross_error(g[:-1], ws[:, :-1], 3)


def test_half_hurst_noise_covariance_is_white():
    from roughsf.drivers import _fgn_autocov

    gamma = _fgn_autocov(0.5, 64)
    assert abs(gamma[0] - 1) <= 1e-12 and np.max(np.abs(gamma[1:])) <= 1e-12


def test_holder_regularity_trend():
    from roughsf.anisotropic import dyadic_holder_bound

    hurst = 0.3
    paths = [sample_fbm(hurst, 1, 2**12, 1.0, 20, s).values for s in range(20)]
    levels = np.arange(8, 13)

    def slope(exponent):
        ms = []
        for lev in levels:
            stride = 2 ** (12 - lev)
            vals = [
                dyadic_holder_bound(lambda i, j, v=p[::stride]: v[j] - v[i], 2**lev, exponent)
                for p in paths
            ]
            ms.append(np.mean(vals))
        return np.polyfit(levels * np.log(2), np.log(ms), 1)[0]

    below, above = slope(hurst - 0.1), slope(hurst + 0.1)
    assert above > 0.05
    assert below < above - 0.05


def test_holder_integrand_moment_constant():
    # I[g,w]_{s,t} is centred Gaussian with variance at most (t-s)^(2a+1)/(2a+1)
    # for g(t) = t^a, whose a-Hölder constant is 1
    a, n, samples = 0.3, 128, 2000
    t = np.linspace(0, 1, n + 1)
    g = SamplePath(t, t[:, None] ** a, a)
    vals = []
    i = np.array([0, 0, 0, 32, 64, 100])
    j = np.array([8, 32, 128, 40, 128, 116])
    for s in range(samples):
        vals.append(CrossIntegrals(g, sample_bm(1, n, 1.0, 21, s)).values(i, j)[0][:, 0, 0])
    vals = np.array(vals)
    scale = (t[j] - t[i]) ** (a + 0.5)
    for q, gauss in ((2, 1.0), (4, 3.0 ** 0.25)):
        ratio = np.mean(np.abs(vals) ** q, axis=0) ** (1 / q) / scale
        assert np.all(ratio <= 1.15 * gauss / np.sqrt(2 * a + 1))
