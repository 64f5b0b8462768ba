import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.integrate import quad

from _support import seeds
from ccdist.closed_form import HTypeSpec, htype_distance
from ccdist.errors import DomainError, ValidationError
from ccdist.groups import heisenberg_group, n32_group, operator_norm, star_group
from ccdist.heat import (
    QuadratureConfig,
    _complex_matrix,
    _v_from_eigenvalues,
    heat_kernel,
    heat_kernel_log,
    v_factor,
    v_factor_shifted,
    varadhan_estimate,
)

PI = math.pi
H = heisenberg_group(2)
S = star_group(2)


def heisenberg_oracle(x, t):
    """p_1 on H(2,1) by direct quadrature along the real axis."""
    xx = float(np.dot(x, x))

    def f(lam):
        if lam == 0.0:
            return math.exp(-xx / 4)
        return lam / math.sinh(lam) * math.exp(-xx * lam / math.tanh(lam) / 4) * math.cos(t * lam)

    return 2 * quad(f, 0, 60, epsabs=0, epsrel=1e-13, limit=400)[0]


def star_oracle(x, t, step=0.08, box=32.0):
    """p_1 on K_{1,2} by the trapezoid rule on the real plane (exponentially accurate for analytic integrands)."""
    grid = np.arange(-box, box + step / 2, step)
    l1, l2 = np.meshgrid(grid, grid, indexing="ij")
    lam = np.stack([l1.ravel(), l2.ravel()], axis=1)
    herm = 1j * np.tensordot(lam, S.U, axes=1)
    w, v = np.linalg.eigh(herm)
    r = np.abs(w)
    safe = np.where(r < 1e-12, 1.0, r)
    coth = np.where(r < 1e-12, 1.0, safe / np.tanh(safe))
    vf = np.prod(np.where(r < 1e-12, 1.0, np.sqrt(safe / np.sinh(safe))), axis=1)
    coords = np.einsum("nij,i->nj", v.conj(), x)
    quad_form = np.sum(coth * np.abs(coords) ** 2, axis=1)
    vals = vf * np.exp(-quad_form / 4) * np.cos(lam @ t)
    return float(np.sum(vals) * step * step)


def test_v_factor_examples():
    assert v_factor(H, [0.0]) == 1.0
    for lam in (0.5, 2.0, 10.0):
        assert v_factor(H, [lam]) == pytest.approx(lam / math.sinh(lam), rel=1e-14)
    assert v_factor(S, [0.6, 0.8]) == pytest.approx(1 / math.sinh(1.0), rel=1e-14)


@settings(max_examples=30)
@given(seeds)
def test_shifted_v_bound_and_branch_agreement(seed):
    rng = np.random.default_rng(seed)
    group = [H, S][seed % 2]
    shift = rng.normal(size=group.m)
    shift *= rng.uniform(0, 0.95) * PI / operator_norm(group, shift)
    lam = rng.normal(size=group.m) * 3
    tracked = v_factor_shifted(group, shift, lam)
    paired = _v_from_eigenvalues(np.linalg.eigvals(_complex_matrix(group, shift, lam[None, :])))[0]
    assert abs(tracked - paired) <= 1e-10 * abs(paired)
    top = v_factor_shifted(group, shift, np.zeros(group.m)).real * v_factor(group, lam)
    assert abs(tracked) <= top * (1 + 1e-12)


def test_origin_value():
    assert heat_kernel(H, H.point([0.0, 0.0], [0.0]), 1.0) == pytest.approx(PI**2 / 2, rel=1e-9)


@pytest.mark.parametrize("x,t", [([0.0, 0.0], 0.5), ([1.0, 0.0], 0.0), ([0.7, -0.4], 1.3), ([2.0, 1.0], -2.0)])
def test_heisenberg_against_real_axis(x, t):
    got = heat_kernel(H, H.point(x, [t]), 1.0)
    assert got == pytest.approx(heisenberg_oracle(x, t), rel=1e-9)


@pytest.mark.parametrize("x,t", [([0.3, 0.5, -0.2], [0.4, 0.1]), ([1.0, 0.0, 0.0], [0.0, 0.0]), ([0.0, 0.8, 0.0], [0.2, -0.6])])
def test_star_against_real_plane(x, t):
    got = heat_kernel(S, S.point(x, t), 1.0)
    assert got == pytest.approx(star_oracle(np.array(x), np.array(t)), rel=1e-8)


@pytest.mark.parametrize("group,x,t", [(H, [0.5, 0.2], [0.7]), (S, [0.5, 0.2, 0.1], [0.3, -0.4])])
def test_symmetry_in_t(group, x, t):
    a = heat_kernel_log(group, group.point(x, t), 0.5).log_value
    b = heat_kernel_log(group, group.point(x, -np.asarray(t)), 0.5).log_value
    assert a == pytest.approx(b, abs=1e-9)


@pytest.mark.parametrize("group,x,t", [(H, [0.5, 0.2], [0.7]), (S, [0.5, 0.2, 0.1], [0.3, -0.4])])
def test_contour_invariance(group, x, t):
    g = group.point(x, t)
    a = heat_kernel_log(group, g, 1.0, QuadratureConfig(contour_shift=np.zeros(group.m))).log_value
    b = heat_kernel_log(group, g, 1.0).log_value
    c = heat_kernel_log(group, g, 1.0, QuadratureConfig(contour_shift=np.full(group.m, 0.4))).log_value
    assert a == pytest.approx(b, abs=1e-8) and a == pytest.approx(c, abs=1e-8)


@pytest.mark.parametrize("h", [0.25, 0.01])
def test_scaling_law(h):
    x, t = np.array([0.4, -0.3]), np.array([0.2])
    small = heat_kernel_log(H, H.point(x, t), h).log_value
    unit = heat_kernel_log(H, H.point(x / math.sqrt(h), t / h), 1.0).log_value
    assert small == pytest.approx(unit - (1 + 1) * math.log(h), abs=1e-8)


def test_radius_doubling():
    for group, g in ((H, H.point([0.5, 0.2], [0.7])), (S, S.point([0.5, 0.2, 0.1], [0.3, -0.4]))):
        base = heat_kernel_log(group, g, 0.1)
        wide = heat_kernel_log(group, g, 0.1, radius=2 * base.radius)
        assert wide.log_value == pytest.approx(base.log_value, abs=1e-9)


@pytest.mark.parametrize("x,t,d2", [([1.0, 0.0], 0.0, 1.0), ([1.0, 0.0], PI / 8, PI**2 / 4), ([0.0, 0.0], 1.0, 4 * PI)])
def test_varadhan_examples(x, t, d2):
    est = varadhan_estimate(H, H.point(x, [t]), [1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
    assert est.limit == pytest.approx(d2, rel=1e-3)
    assert len(est.values) == 5 and est.coefficients[0] == est.limit


def test_varadhan_on_star():
    g = S.point([0.6, 0.5, -0.2], [0.2, 0.3])
    from ccdist.closed_form import star_distance

    est = varadhan_estimate(S, g, [1e-2, 3e-3, 1e-3])
    assert est.limit == pytest.approx(star_distance(2, g.x, g.t).d_squared, rel=1e-2)


def test_varadhan_htype_intercept():
    spec = HTypeSpec(((1.0, 2),), 1)
    group = heisenberg_group(4)
    g = group.point([0.5, 0.1, -0.3, 0.2], [0.25])
    est = varadhan_estimate(group, g, [1e-2, 3e-3, 1e-3, 3e-4])
    assert est.limit == pytest.approx(htype_distance(spec, g.x, g.t).d_squared, rel=1e-3)


def test_errors():
    with pytest.raises(ValidationError):
        heat_kernel(n32_group(), n32_group().point([0, 0, 1.0], [0, 0, 0]), 1.0)
    with pytest.raises(DomainError):
        heat_kernel(H, H.point([0, 0], [0]), 0.0)
    with pytest.raises(DomainError):
        heat_kernel(H, H.point([0, 0], [0]), 1.0, QuadratureConfig(contour_shift=np.array([3.2])))
    with pytest.raises(ValidationError):
        varadhan_estimate(H, H.point([1, 0], [0]), [1e-3, 1e-2, 1e-4])
    with pytest.raises(ValidationError):
        varadhan_estimate(H, H.point([1, 0], [0]), [1e-2, 1e-3])
    with pytest.raises(ValidationError):
        QuadratureConfig(rel_tol=0.0)
