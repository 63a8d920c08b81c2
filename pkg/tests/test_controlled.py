import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_lift
from roughsf.controlled import ControlledPath, SmoothMap3, concatenate, smooth_function_path
from roughsf.drivers import sample_fbm
from roughsf.roughpath import grid_pairs, lift_piecewise_linear


def first_order_path(rp, xi, sigma, eta):
    """``(xi + sigma X^1_0t + eta X^2_0t, sigma + eta X^1_0t, eta)``: both remainders vanish."""
    p1, p2, _ = rp.prefix
    n1 = rp.n_steps + 1
    y = xi + np.einsum("ia,pa->pi", sigma, p1) + np.einsum("iab,pab->pi", eta, p2)
    ydag = sigma + np.einsum("iab,pa->pib", eta, p1)
    ydd = np.broadcast_to(eta, (n1,) + eta.shape).copy()
    return ControlledPath(rp, y, ydag, ydd)


def sine_map(n):
    return SmoothMap3(
        value=np.sin,
        grad=lambda y: np.cos(y)[..., :, None] * np.eye(n),
        hess=lambda y: (-np.sin(y))[..., :, None, None] * np.eye(n)[:, :, None] * np.eye(n)[:, None, :],
        n_in=n,
        out_shape=(n,),
    )


@pytest.fixture
def fbm_lift():
    b = sample_fbm(0.3, 2, 128, 1.0, 0, 17)
    return lift_piecewise_linear(b.times, b.values)


def test_first_order_data_has_zero_remainders(rng, fbm_lift):
    cp = first_order_path(fbm_lift, rng.standard_normal(3), rng.standard_normal((3, 2)), rng.standard_normal((3, 2, 2)))
    i, j = grid_pairs(fbm_lift.n_steps, "all")
    sharp, sharp2 = cp.remainders(i, j)
    assert np.max(np.abs(sharp)) <= 1e-12
    assert np.max(np.abs(sharp2)) <= 1e-12
    semi = cp.seminorm(0.3)
    assert semi["sharp"] <= 1e-11 and semi["sharpsharp"] <= 1e-11
    assert semi["ydd"] == 0.0


def test_smooth_embedding_remainders(rng):
    rp = random_lift(rng, 40, 2)
    phi = np.cumsum(rng.standard_normal((41, 3)), axis=0)
    cp = ControlledPath(rp, phi, np.zeros((41, 3, 2)), np.zeros((41, 3, 2, 2)))
    sharp, sharp2 = cp.remainders(np.array([0, 5]), np.array([7, 40]))
    assert np.array_equal(sharp, phi[[7, 40]] - phi[[0, 5]])
    assert np.all(sharp2 == 0)
    t = rp.times
    from roughsf.roughpath import path_holder

    assert cp.seminorm(0.3)["total"] == pytest.approx(path_holder(phi, t, 0.9), rel=1e-14)


def test_remainders_vanish_on_diagonal(rng, fbm_lift):
    cp = smooth_function_path(fbm_lift, sine_map(2))
    sharp, sharp2 = cp.remainders(7, 7)
    assert np.all(sharp == 0) and np.all(sharp2 == 0)


def test_derivative_bound_holds(fbm_lift):
    cp = smooth_function_path(fbm_lift, sine_map(2))
    b = cp.derivative_bounds(0.3)
    assert b["ydag"] <= b["ydag_bound"] * (1 + 1e-12)
    assert b["ydag"] <= b["ydag_bound_coarse"]
    assert b["y"] <= b["y_bound"] * (1 + 1e-12)


def test_compose_identity_and_constant(rng, fbm_lift):
    cp = smooth_function_path(fbm_lift, sine_map(2))
    ident = SmoothMap3.affine(np.eye(2), np.zeros(2))
    same = cp.compose(ident)
    assert np.array_equal(same.y, cp.y) and np.allclose(same.ydag, cp.ydag, atol=0) and np.allclose(same.ydd, cp.ydd, atol=0)
    const = cp.compose(SmoothMap3.affine(np.zeros((3, 2)), np.array([1.0, 2.0, 3.0])))
    assert np.all(const.y == [1.0, 2.0, 3.0]) and np.all(const.ydag == 0) and np.all(const.ydd == 0)


def test_compose_linear_scales_remainders(rng, fbm_lift):
    cp = smooth_function_path(fbm_lift, sine_map(2))
    a = rng.standard_normal((3, 2))
    lin = cp.compose(SmoothMap3.affine(a, np.zeros(3)))
    assert np.allclose(lin.ydag, np.einsum("ki,pia->pka", a, cp.ydag), atol=1e-14)
    i, j = np.array([0, 3, 50]), np.array([10, 90, 128])
    s0, ss0 = cp.remainders(i, j)
    s1, ss1 = lin.remainders(i, j)
    assert np.allclose(s1, np.einsum("ki,pi->pk", a, s0), atol=1e-13)
    assert np.allclose(ss1, np.einsum("ki,pia->pka", a, ss0), atol=1e-13)


def test_compose_functorial_on_linear_maps(rng, fbm_lift):
    cp = smooth_function_path(fbm_lift, sine_map(2))
    a = rng.standard_normal((3, 2))
    b = rng.standard_normal((2, 3))
    two = cp.compose(SmoothMap3.affine(a, np.zeros(3))).compose(SmoothMap3.affine(b, np.zeros(2)))
    one = cp.compose(SmoothMap3.affine(b @ a, np.zeros(2)))
    for u, v in ((two.y, one.y), (two.ydag, one.ydag), (two.ydd, one.ydd)):
        assert np.max(np.abs(u - v)) <= 1e-12


def test_compose_dimension_mismatch(fbm_lift):
    cp = smooth_function_path(fbm_lift, sine_map(2))
    with pytest.raises(ValueError):
        cp.compose(sine_map(3))


def test_composition_remainders_have_expected_order():
    # sharp remainder of g(X) scales like (t - s)^(3 alpha): halving the lag
    # shrinks the worst remainder by about 2^(-3 H) on smooth inputs
    t = np.linspace(0, 1, 1025)
    rp = lift_piecewise_linear(t, np.stack([np.sin(3 * t), np.cos(2 * t)], axis=1))
    cp = smooth_function_path(rp, sine_map(2))
    worst = []
    for lag in (64, 128, 256):
        i = np.arange(0, 1025 - lag)
        worst.append(np.max(np.abs(cp.remainders(i, i + lag)[0])))
    slopes = np.diff(np.log(worst)) / np.log(2)
    assert np.all(slopes > 2.5)


def test_numeric_map_matches_analytic(rng):
    g = sine_map(2)
    num = SmoothMap3.numeric(np.sin, 2, (2,))
    y = rng.standard_normal((5, 2))
    assert num.approximate and not g.approximate
    assert np.max(np.abs(num.grad(y) - g.grad(y))) <= 1e-8
    assert np.max(np.abs(num.hess(y) - g.hess(y))) <= 1e-5


def seam_terms(cp, s, b, t):
    x1, x2, _ = (v[0] for v in cp.ref.pair_increments(np.array([b]), np.array([t])))
    sharp_sb, sharp2_sb = cp.remainders(s, b)
    sharp_bt, sharp2_bt = cp.remainders(b, t)
    dd = cp.ydd[b] - cp.ydd[s]
    sharp2 = sharp2_sb + sharp2_bt + np.einsum("...ab,a->...b", dd, x1)
    sharp = sharp_sb + sharp_bt + np.einsum("...ab,ab->...", dd, x2) + np.einsum("...a,a->...", sharp2_sb, x1)
    return sharp, sharp2


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_concatenation_identities(seed):
    rng = np.random.default_rng(seed)
    rp = random_lift(rng, 48, 2, scale=0.2)
    full = smooth_function_path(rp, sine_map(2))
    b = int(rng.integers(1, 47))
    joined = concatenate(full.restrict(0, b), full.restrict(b, 48))
    s = int(rng.integers(0, b))
    t = int(rng.integers(b + 1, 49))
    sharp, sharp2 = joined.remainders(s, t)
    e_sharp, e_sharp2 = seam_terms(joined, s, b, t)
    assert np.max(np.abs(sharp - e_sharp)) <= 1e-12
    assert np.max(np.abs(sharp2 - e_sharp2)) <= 1e-12


def test_concatenate_with_own_restriction(fbm_lift):
    cp = smooth_function_path(fbm_lift, sine_map(2))
    joined = concatenate(cp.restrict(0, 60), cp.restrict(60, 128))
    assert np.array_equal(joined.y, cp.y) and np.array_equal(joined.ydag, cp.ydag)
    assert np.array_equal(joined.ydd, cp.ydd) and np.array_equal(joined.times, cp.times)


def test_concatenate_rejects_seam_jump(fbm_lift):
    cp = smooth_function_path(fbm_lift, sine_map(2))
    second = cp.restrict(60, 128)
    shifted = ControlledPath(second.ref, second.y + 1e-6, second.ydag, second.ydd)
    with pytest.raises(ValueError, match="seam"):
        concatenate(cp.restrict(0, 60), shifted)
    with pytest.raises(ValueError):
        concatenate(cp.restrict(0, 50), second)


def test_write_csv_header(tmp_path, fbm_lift):
    cp = smooth_function_path(fbm_lift, sine_map(2))
    path = tmp_path / "cp.csv"
    cp.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("t,Y_0,Y_1,Ydag_0_0,Ydag_0_1") and lines[0].endswith("Ydagdag_1_1_1")
    assert len(lines) == 130
