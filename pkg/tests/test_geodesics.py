import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.optimize import brentq, minimize_scalar

from _support import ball_point, groups, seeds
from ccdist.errors import BadTheta
from ccdist.geodesics import Covector, _Flow, exp_map, initial_velocity, normal_geodesics_through, verify_length_identity
from ccdist.groups import heisenberg_group, n32_group, star_group
from ccdist.kernels import cot_gap_slope
from ccdist.reference import critical_t

PI = math.pi


def oracle_endpoint(group, zeta0, theta0, steps=4000):
    """zeta(s) = expm(2 s A) zeta0, x = int zeta, t_k = 1/2 int zeta.U_k x, by Simpson's rule."""
    a = group.skew(theta0)
    h = 1.0 / steps
    step = expm(2 * h * a)
    zs = [np.asarray(zeta0, dtype=float)]
    for _ in range(steps):
        zs.append(step @ zs[-1])
    zs = np.array(zs)
    w = np.ones(steps + 1)
    w[1:-1:2], w[2:-1:2] = 4, 2
    w *= h / 3
    # cumulative x on the grid with the third-order two-step rule
    xs = np.zeros_like(zs)
    xs[1] = h / 12 * (5 * zs[0] + 8 * zs[1] - zs[2])
    for i in range(2, steps + 1):
        xs[i] = xs[i - 1] + h / 12 * (-zs[i - 2] + 8 * zs[i - 1] + 5 * zs[i])
    x_end = w @ zs
    rate = 0.5 * np.einsum("si,kij,sj->sk", zs, group.U, xs)
    return x_end, w @ rate


def test_straight_line():
    h = heisenberg_group(2)
    geo = exp_map(h, Covector([0.6, 0.8], [0.0]))
    assert np.allclose(geo.endpoint.x, [0.6, 0.8], atol=1e-15)
    assert np.allclose(geo.endpoint.t, 0.0, atol=1e-15)
    assert geo.length == pytest.approx(1.0)


def test_zero_covector():
    n = n32_group()
    geo = exp_map(n, Covector(np.zeros(3), [1.0, 2.0, 0.5]))
    assert np.all(geo.endpoint.x == 0) and np.all(geo.endpoint.t == 0)


def test_heisenberg_half_turn():
    h = heisenberg_group(2)
    geo = exp_map(h, Covector([1.0, 0.0], [PI / 2]), n_samples=33)
    assert np.linalg.norm(geo.endpoint.x) == pytest.approx(2 / PI, rel=1e-13)
    assert abs(geo.endpoint.t[0]) == pytest.approx(1 / (2 * PI), rel=1e-12)
    assert len(geo.samples) == 33 and geo.good


@given(groups(max_q=5), seeds)
@settings(max_examples=25)
def test_endpoint_matches_independent_integration(group, seed):
    rng = np.random.default_rng(seed)
    zeta, theta = rng.normal(size=group.q), rng.normal(size=group.m) * 1.5
    geo = exp_map(group, Covector(zeta, theta))
    x_ref, t_ref = oracle_endpoint(group, zeta, theta)
    scale = 1 + float(zeta @ zeta)
    assert np.abs(geo.endpoint.x - x_ref).max() <= 1e-10 * scale
    assert np.abs(geo.endpoint.t - t_ref).max() <= 1e-9 * scale


@given(groups(), seeds, st.floats(0.0, 1.0))
def test_constant_speed(group, seed, s):
    rng = np.random.default_rng(seed)
    zeta = rng.normal(size=group.q)
    flow = _Flow(group, Covector(zeta, rng.normal(size=group.m)))
    assert np.linalg.norm(flow.zeta(s)) == pytest.approx(np.linalg.norm(zeta), rel=1e-12)


@given(groups(max_q=5), seeds, st.floats(0.2, 3.0))
@settings(max_examples=20)
def test_dilation(group, seed, r):
    # exp(r zeta, r^2 theta') at unit time is the dilation of exp(zeta, theta): the
    # covector scales with the speed and theta stays fixed
    rng = np.random.default_rng(seed)
    zeta, theta = rng.normal(size=group.q), rng.normal(size=group.m)
    a = exp_map(group, Covector(zeta, theta)).endpoint
    b = exp_map(group, Covector(r * zeta, theta)).endpoint
    assert np.allclose(b.x, r * a.x, atol=1e-11 * r)
    assert np.allclose(b.t, r * r * a.t, atol=1e-10 * r * r)


@given(groups(), seeds)
def test_initial_velocity_round_trip(group, seed):
    rng = np.random.default_rng(seed)
    x0, theta = rng.normal(size=group.q), ball_point(group, rng, 0.0, 0.95)
    zeta = initial_velocity(group, x0, theta)
    assert np.allclose(exp_map(group, Covector(zeta, theta)).endpoint.x, x0, atol=1e-11 * (1 + np.linalg.norm(zeta)))


def test_initial_velocity_examples():
    h, n = heisenberg_group(2), n32_group()
    x0 = np.array([0.3, -0.4])
    assert np.allclose(initial_velocity(h, x0, [0.0]), x0)
    for group, x, theta in ((h, x0, [PI / 2]), (n, np.array([1.0, 0.2, 0.0]), [4.0, 0.0, 0.0])):
        zeta = initial_velocity(group, x, theta)
        assert np.allclose(exp_map(group, Covector(zeta, theta)).endpoint.x, x, atol=1e-11)
    with pytest.raises(BadTheta):
        initial_velocity(h, x0, [PI])


def test_geodesics_through_heisenberg():
    h = heisenberg_group(2)
    g = h.point([1.0, 0.0], [PI / 8])
    found = normal_geodesics_through(h, g, [[0.0]])
    assert len(found) == 1
    cov, value, resid = found[0]
    assert abs(cov.theta0[0]) == pytest.approx(PI / 2, rel=1e-10)
    assert value == pytest.approx(PI**2 / 4, rel=1e-10) and resid < 1e-9
    flat = normal_geodesics_through(h, h.point([1.0, 0.0], [0.0]), [[0.0]])
    assert np.allclose(flat[0][0].theta0, 0.0, atol=1e-12)


def test_multiple_critical_points_beyond_the_ball():
    # for H(2,1) the critical points solve cot_gap_slope(s) = 4 t / |x|^2; on a band (k pi, (k+1) pi)
    # with k >= 1 the slope is U-shaped, so each band holds up to two roots
    h = heisenberg_group(2)
    x, t = np.array([1.0, 0.0]), 3.0
    g = h.point(x, [t])
    seeds_ = [[s] for s in np.arange(0.5, 4.0, 1.0) * PI]
    found = normal_geodesics_through(h, g, seeds_, max_norm=4 * PI)
    sign = 1.0 if critical_t(h, x, [1.0])[0] > 0 else -1.0
    fn = lambda s: cot_gap_slope(s) / 4 - sign * t
    roots = [brentq(fn, 1e-9, PI - 1e-9, xtol=1e-15)]
    for k in range(1, 4):
        lo, hi = k * PI + 1e-9, (k + 1) * PI - 1e-9
        mid = minimize_scalar(fn, bounds=(lo, hi), method="bounded").x
        if fn(mid) < 0:
            roots += [brentq(fn, lo, mid, xtol=1e-15), brentq(fn, mid, hi, xtol=1e-15)]
    roots = np.array(roots) * sign
    got = [float(c.theta0[0]) for c, _, _ in found]
    assert len(got) >= 2
    for theta in got:
        assert np.min(np.abs(roots - theta)) <= 1e-9 * (1 + abs(theta))
    assert all(resid < 1e-8 for _, _, resid in found)
    assert min(v for _, v, _ in found) == pytest.approx(maximize_value(h, g), rel=1e-9)


def maximize_value(group, g):
    from ccdist.solver import maximize_phi

    return maximize_phi(group, g).value


@pytest.mark.parametrize(
    "group,x,theta",
    [
        (heisenberg_group(2), [1.0, 0.0], [1.0]),
        (star_group(2), [0.4, 1.0, -0.3], [0.5, 1.2]),
        (n32_group(), [1.0, 0.0, 0.0], [4.0, -0.5, 0.0]),
    ],
)
def test_length_identity(group, x, theta):
    lhs, rhs, diff = verify_length_identity(group, x, theta)
    assert diff <= 1e-10 * (1 + abs(lhs))


def test_length_dominates_distance():
    from ccdist.solver import maximize_phi

    rng = np.random.default_rng(8)
    s = star_group(2)
    for _ in range(10):
        zeta, theta = rng.normal(size=3), rng.normal(size=2) * 3
        geo = exp_map(s, Covector(zeta, theta))
        assert maximize_phi(s, geo.endpoint).value <= geo.length**2 + 1e-9
