import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _support import seeds
from ccdist.closed_form import (
    HTypeSpec,
    N32Region,
    htype_distance,
    htype_group,
    hurwitz_radon,
    in_outer_lobe,
    n32_distance,
    n32_gradient_map,
    n32_gradient_map_inverse,
    n32_gradient_map_jacobian,
    n32_region_of,
    star_distance,
    star_gradient_map,
    star_gradient_map_inverse,
    star_length_squared,
    star_reduced_value,
)
from ccdist.errors import OddInput, OutOfRegion, ValidationError
from ccdist.geodesics import verify_length_identity
from ccdist.groups import n32_group, star_group
from ccdist.kernels import TAN_FIXED_POINT, cot_gap_slope
from ccdist.reference import reference_value
from ccdist.solver import Certificate, maximize_phi

PI = math.pi


def rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    return q if np.linalg.det(q) > 0 else -q


# ---------------------------------------------------------------------------
# H-type


@pytest.mark.parametrize("n2,rho", [(2, 2), (4, 4), (6, 2), (8, 8), (16, 9), (32, 10), (64, 12), (128, 16)])
def test_hurwitz_radon(n2, rho):
    assert hurwitz_radon(n2) == rho


def test_hurwitz_radon_rejects_odd():
    with pytest.raises(OddInput):
        hurwitz_radon(3)


def test_spec_validation():
    with pytest.raises(ValidationError):
        HTypeSpec(((1.0, 1), (0.5, 1)), 1)
    with pytest.raises(ValidationError):
        HTypeSpec(((0.5, 1),), 1)
    with pytest.raises(ValidationError):
        htype_group(HTypeSpec(((1.0, 1),), 2))


@pytest.mark.parametrize("spec", [HTypeSpec(((1.0, 1),), 1), HTypeSpec(((0.5, 2), (1.0, 2)), 3),
                                  HTypeSpec(((0.3, 4), (1.0, 4)), 7)])
def test_anticommutation(spec):
    g = htype_group(spec)
    s2 = np.zeros((spec.q, spec.q))
    for (a, _), sl in zip(spec.blocks, spec.slices()):
        s2[sl, sl] = a * a * np.eye(sl.stop - sl.start)
    for k in range(spec.m):
        for l in range(spec.m):
            anti = g.U[k] @ g.U[l] + g.U[l] @ g.U[k]
            assert np.allclose(anti, -2.0 * (k == l) * s2, atol=1e-14)


def test_htype_examples():
    h = HTypeSpec(((1.0, 1),), 1)
    res = htype_distance(h, [1.0, 0.0], [PI / 8])
    assert res.d_squared == pytest.approx(PI**2 / 4, rel=1e-14)
    assert res.certificate is Certificate.EXACT_NONDEGENERATE
    res = htype_distance(h, [0.0, 0.0], [0.7])
    assert res.d_squared == pytest.approx(4 * PI * 0.7, rel=1e-15) and res.cut_locus
    assert htype_distance(h, [1.0, 0.0], [0.0]).d_squared == 1.0


@pytest.mark.parametrize("spec", [HTypeSpec(((0.5, 1), (1.0, 1)), 1), HTypeSpec(((0.5, 2), (1.0, 2)), 3)])
def test_htype_matches_solver(spec):
    group = htype_group(spec)
    rng = np.random.default_rng(spec.m)
    for _ in range(20):
        x, t = rng.normal(size=spec.q), rng.normal(size=spec.m)
        ref = htype_distance(spec, x, t)
        res = maximize_phi(group, group.point(x, t))
        assert res.value == pytest.approx(ref.d_squared, rel=1e-9)
        assert np.allclose(res.theta, ref.theta, atol=1e-7)


def test_htype_cut_locus_branch():
    spec = HTypeSpec(((0.5, 1), (1.0, 1)), 1)
    group = htype_group(spec)
    x = np.array([0.8, 0.3, 0.0, 0.0])
    xx = float(x[:2] @ x[:2])
    limit = 0.5 * xx * cot_gap_slope(0.5 * PI)
    t = np.array([limit / 4 + 0.5])
    res = htype_distance(spec, x, t)
    assert res.cut_locus and res.certificate.exact
    assert res.d_squared == pytest.approx(PI * (4 * t[0] + 0.5 * xx / math.tan(0.5 * PI)), rel=1e-14)
    assert maximize_phi(group, group.point(x, t)).value == pytest.approx(res.d_squared, rel=1e-7)
    # continuity as the top block comes in
    near = htype_distance(spec, x + np.array([0, 0, 1e-6, 0]), t).d_squared
    assert near == pytest.approx(res.d_squared, rel=1e-5)


# ---------------------------------------------------------------------------
# star graphs


def test_star_examples():
    res = star_distance(2, [0.0, 0.0, 0.0], [0.3, -0.4])
    assert res.d_squared == pytest.approx(4 * PI * 0.5, rel=1e-15) and res.cut_locus
    for t2 in (0.01, 0.2, 1.5):
        res = star_distance(2, [0.0, 1.0, 0.0], [0.0, t2])
        assert res.d_squared == pytest.approx(1 + 4 * PI * t2, rel=1e-14) and res.cut_locus
    res = star_distance(3, [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert res.d_squared == 1.0 and np.all(res.theta == 0)


def test_star_gradient_map_examples():
    for s in (0.3, 1.0, 2.5):
        assert star_gradient_map((s, 0.0)) == pytest.approx([cot_gap_slope(s), 0.0], rel=1e-14)
        assert star_gradient_map_inverse((cot_gap_slope(s), 0.0)) == pytest.approx([s, 0.0], rel=1e-13)
    with pytest.raises(OutOfRegion):
        star_gradient_map((-0.1, 0.5))
    with pytest.raises(OutOfRegion):
        star_gradient_map((3.0, 1.0))
    with pytest.raises(OutOfRegion):
        star_gradient_map_inverse((0.1, 1.0))
    # blows up at the rim
    assert np.linalg.norm(star_gradient_map((PI * (1 - 1e-6), 0.0))) > 1e5


@given(seeds)
def test_star_triple_identity(seed):
    rng = np.random.default_rng(seed)
    group = star_group(2)
    x, t = rng.normal(size=3), rng.normal(size=2)
    res = star_distance(2, x, t)
    g = group.point(x, t)
    full = reference_value(group, g, res.theta)
    assert full == pytest.approx(res.d_squared, rel=1e-10)
    lhs, rhs, _ = verify_length_identity(group, x, res.theta)
    assert rhs == pytest.approx(res.d_squared, rel=1e-9)
    assert maximize_phi(group, g).value == pytest.approx(res.d_squared, rel=1e-9)


def test_star_reduced_forms_agree():
    rng = np.random.default_rng(12)
    for _ in range(20):
        x1, xs = rng.uniform(0.1, 2.0, 2)
        tau = rng.uniform(0.1, 1.5, 2)
        t = np.array([0.3, 0.7])
        group = star_group(2)
        g = group.point([x1, xs, 0.0], t)
        assert star_reduced_value(x1, xs, t[0], t[1], tau) == pytest.approx(reference_value(group, g, tau), rel=1e-12)
        assert star_length_squared(x1, xs, tau) == pytest.approx(verify_length_identity(group, [x1, xs, 0.0], tau)[1],
                                                                 rel=1e-12)


@given(seeds, st.integers(2, 4))
def test_star_orthogonal_invariance(seed, n):
    rng = np.random.default_rng(seed)
    x, t = rng.normal(size=n + 1), rng.normal(size=n)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    y = np.concatenate([[x[0]], q @ x[1:]])
    assert star_distance(n, y, q @ t).d_squared == pytest.approx(star_distance(n, x, t).d_squared, rel=1e-10)


# ---------------------------------------------------------------------------
# N(3,2)


def test_n32_examples():
    assert n32_distance([0, 0, 0], [0.0, 0.3, 0.4]).d_squared == pytest.approx(2 * PI, rel=1e-15)
    assert n32_distance([1.0, 2.0, 2.0], [0, 0, 0]).d_squared == 9.0
    for alpha in (0.5, 1.0, 2.0):
        t = np.array([alpha**2 / PI, 2 * alpha / PI, 0.0]) / 4
        res = n32_distance([1.0, 0.0, 0.0], t)
        assert res.d_squared == pytest.approx(1 + alpha**2, rel=1e-13) and res.note == "boundary curve"


def test_n32_gradient_map_examples():
    assert n32_gradient_map((0.0, PI / 2), N32Region.HALF_BALL) == pytest.approx([0.0, PI / 2], rel=1e-14)
    assert n32_gradient_map_inverse((0.0, PI / 2), N32Region.HALF_BALL) == pytest.approx([0.0, PI / 2], rel=1e-13)
    with pytest.raises(OutOfRegion):
        n32_gradient_map((1.0, -0.5), N32Region.HALF_BALL)
    with pytest.raises(OutOfRegion):
        n32_gradient_map((1.0, 0.5), N32Region.OUTER_LOBE)
    with pytest.raises(OutOfRegion):
        n32_gradient_map_inverse((1.0, 10.0), N32Region.BELOW_CURVE)
    with pytest.raises(OutOfRegion):
        n32_gradient_map_inverse((10.0, 1.0), N32Region.ABOVE_CURVE)


def test_outer_lobe_jacobian_negative():
    rng = np.random.default_rng(2)
    count = 0
    while count < 100:
        v = (rng.uniform(PI, TAN_FIXED_POINT), -rng.uniform(0, 3.0))
        if in_outer_lobe(v):
            assert np.linalg.det(n32_gradient_map_jacobian(v)) < 0
            count += 1


@given(seeds)
def test_n32_triple_identity(seed):
    rng = np.random.default_rng(seed)
    group = n32_group()
    x, t = rng.normal(size=3), rng.normal(size=3)
    res = n32_distance(x, t)
    g = group.point(x, t)
    assert reference_value(group, g, res.theta) == pytest.approx(res.d_squared, rel=1e-9)
    assert verify_length_identity(group, x, res.theta)[1] == pytest.approx(res.d_squared, rel=1e-9)
    sup = maximize_phi(group, g).value
    if res.note == "half ball":
        assert sup == pytest.approx(res.d_squared, rel=1e-9)
    else:
        assert sup <= res.d_squared * (1 + 1e-12)


@given(seeds)
def test_n32_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    x, t = rng.normal(size=3), rng.normal(size=3)
    o = rotation(rng)
    a, b = n32_distance(x, t), n32_distance(o @ x, o @ t)
    assert b.d_squared == pytest.approx(a.d_squared, rel=1e-9)
    assert n32_region_of(o @ x, o @ t) == n32_region_of(x, t)


def test_n32_cut_flag_iff_parallel():
    rng = np.random.default_rng(5)
    x = rng.normal(size=3)
    assert n32_distance(x, 0.7 * x).cut_locus
    assert n32_distance(x, -0.2 * x).cut_locus
    assert n32_distance(np.zeros(3), x).cut_locus
    for _ in range(20):
        assert not n32_distance(x, rng.normal(size=3)).cut_locus


def test_n32_parallel_limit_is_continuous():
    x = np.array([1.0, 0.0, 0.0])
    base = n32_distance(x, [0.3, 0.0, 0.0])
    assert base.note == "parallel limit"
    near = n32_distance(x, [0.3, 1e-7, 0.0])
    assert near.note == "outer lobe"
    assert near.d_squared == pytest.approx(base.d_squared, rel=1e-5)
