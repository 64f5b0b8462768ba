"""Exact distances for generalized H-type groups, star graphs and N(3,2).

Each family reduces, by orthogonal symmetry, to a problem in one or two
variables. Where the optimal parameter is characterized by a gradient-map
equation, that map is inverted by safeguarded Newton iterations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import DimensionMismatch, NewtonFailure, OddInput, OutOfRegion, ValidationError
from .groups import Group, validate_group
from .kernels import (
    PI,
    TAN_FIXED_POINT,
    cot_gap_slope,
    cot_gap_slope_d1,
    nearest_pole_distance,
    power_sums,
)
from .solver import Certificate, DistanceResult

SQRT_PI = math.sqrt(PI)
CURVE_TOL = 1e-10


def _radial(r: float) -> tuple[float, float, float]:
    """(psi, psi'/r, r^-1 (psi'/r)') at r for psi = (1 - r cot r)/r^2."""
    s1, s2, s3 = power_sums(np.array([r]))
    return 2.0 * float(s1[0]), 4.0 * float(s2[0]), 16.0 * float(s3[0])


def _s_over_sin(r: float) -> float:
    return 1.0 if r == 0.0 else r / math.sin(r)


# ---------------------------------------------------------------------------
# generalized H-type groups


def hurwitz_radon(n2: int) -> int:
    """rho(n2) = 8k + 2^l where n2 = odd * 2^(4k + l), 0 <= l <= 3."""
    if int(n2) != n2 or n2 <= 0 or n2 % 2:
        raise OddInput(f"expected an even positive integer, got {n2!r}")
    n2 = int(n2)
    e = 0
    while n2 % 2 == 0:
        n2 //= 2
        e += 1
    k, l = divmod(e, 4)
    return 8 * k + 2**l


def _cd_conj(a: np.ndarray) -> np.ndarray:
    out = -a.copy()
    out[0] = a[0]
    return out


def _cd_mult(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cayley-Dickson product on R^(2^k)."""
    n = a.size
    if n == 1:
        return a * b
    h = n // 2
    p, q = a[:h], a[h:]
    r, s = b[:h], b[h:]
    return np.concatenate([_cd_mult(p, r) - _cd_mult(_cd_conj(s), q), _cd_mult(s, p) + _cd_mult(q, _cd_conj(r))])


@lru_cache(maxsize=None)
def _left_multiplications(dim: int) -> tuple:
    """Left multiplication by the imaginary units of the algebra of dimension dim."""
    eye = np.eye(dim)
    mats = []
    for i in range(1, dim):
        mats.append(np.column_stack([_cd_mult(eye[i], eye[j]) for j in range(dim)]))
    return tuple(mats)


def anticommuting_structures(n2: int, m: int) -> list[np.ndarray]:
    """m anticommuting orthogonal skew n2 x n2 matrices (complex structures)."""
    if m > hurwitz_radon(n2) - 1:
        raise ValidationError(f"R^{n2} carries at most {hurwitz_radon(n2) - 1} anticommuting structures")
    for dim in (2, 4, 8):
        if m <= dim - 1 and n2 % dim == 0:
            base = _left_multiplications(dim)[:m]
            return [np.kron(np.eye(n2 // dim), c) for c in base]
    raise ValidationError(f"no construction implemented for m={m} on R^{n2}")


@dataclass(frozen=True)
class HTypeSpec:
    """Blocks (a_j, k_j): R^(2 k_j) with generators scaled by a_j; the largest a_j is 1."""

    blocks: tuple
    m: int

    def __post_init__(self):
        a = [float(b[0]) for b in self.blocks]
        if not a or any(v <= 0 for v in a) or any(y <= x for x, y in zip(a, a[1:])) or a[-1] != 1.0:
            raise ValidationError("block weights must increase strictly in (0, 1] and end at 1")
        if any(int(b[1]) != b[1] or b[1] < 1 for b in self.blocks) or self.m < 1:
            raise ValidationError("block multiplicities and m must be positive integers")

    @property
    def q(self) -> int:
        return sum(2 * int(k) for _, k in self.blocks)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for _, k in self.blocks:
            out.append(slice(start, start + 2 * int(k)))
            start += 2 * int(k)
        return out


def htype_group(spec: HTypeSpec) -> Group:
    q = spec.q
    per_block = [anticommuting_structures(2 * int(k), spec.m) for _, k in spec.blocks]
    gens = []
    for l in range(spec.m):
        u = np.zeros((q, q))
        for (a, _), sl, mats in zip(spec.blocks, spec.slices(), per_block):
            u[sl, sl] = float(a) * mats[l]
        gens.append(u)
    label = ",".join(f"{a:g}x{int(k)}" for a, k in spec.blocks)
    return validate_group(gens, name=f"htype:{spec.m}:{label}")


def _htype_slope(a: np.ndarray, w: np.ndarray, s: float) -> float:
    return float(np.sum(a * w * np.asarray(cot_gap_slope(a * s))))


def htype_distance(spec: HTypeSpec, x, t) -> DistanceResult:
    x = np.asarray(x, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if x.shape != (spec.q,) or t.shape != (spec.m,):
        raise DimensionMismatch("point does not match the H-type block structure")
    a = np.array([float(b[0]) for b in spec.blocks])
    w = np.array([float(x[sl] @ x[sl]) for sl in spec.slices()])  # |x_j|^2
    tn = float(np.linalg.norm(t))
    xx = float(w.sum())
    if tn == 0.0:
        return DistanceResult(xx, Certificate.EXACT_NONDEGENERATE if xx > 0 else Certificate.EXACT_CLOSURE,
                              np.zeros(spec.m), xx > 0, "closed_form", cut_locus=False)
    direction = t / tn
    top = w[-1]
    inner = a[:-1] < 1.0
    limit = float(np.sum(a[:-1] * w[:-1] * np.asarray(cot_gap_slope(a[:-1] * PI)))) if inner.any() else 0.0
    if top == 0.0 and 4.0 * tn >= limit:
        cot = np.array([1.0 / math.tan(v * PI) for v in a[:-1]])
        d2 = PI * (4.0 * tn + float(np.sum(a[:-1] * w[:-1] * cot)))
        return DistanceResult(d2, Certificate.EXACT_CLOSURE, PI * direction, False, "closed_form", cut_locus=True)
    target = 4.0 * tn
    g = lambda s: _htype_slope(a, w, s) - target
    width = 0.5
    hi = PI - width
    while g(hi) < 0.0:
        width *= 0.5
        hi = PI - width
        if width < 1e-300:
            raise NewtonFailure("cannot bracket the radial equation")
    s = brentq(g, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(2):
        deriv = float(np.sum(a * a * w * np.asarray(cot_gap_slope_d1(a * s))))
        step = g(s) / deriv
        if not math.isfinite(step) or abs(step) > 1e-8 * (1.0 + s):
            break
        s -= step
    d2 = float(sum(wj * _s_over_sin(aj * s) ** 2 for aj, wj in zip(a, w)))
    return DistanceResult(d2, Certificate.EXACT_NONDEGENERATE, s * direction, True, "closed_form", cut_locus=False)


# ---------------------------------------------------------------------------
# star graphs K_{1,n}


def star_gradient_map(tau) -> np.ndarray:
    """Gradient of tau_1^2 psi(|tau|) on the half ball {|tau| < pi, tau_1 > 0}."""
    t1, t2 = (float(v) for v in tau)
    r = math.hypot(t1, t2)
    if not (r < PI and t1 > 0.0):
        raise OutOfRegion("star gradient map needs |tau| < pi and tau_1 > 0")
    psi, k1, _ = _radial(r)
    return np.array([2.0 * t1 * psi + k1 * t1**3, k1 * t1 * t1 * t2])


def _star_map_jacobian(t1: float, t2: float, psi: float, k1: float, k2: float) -> np.ndarray:
    off = t1 * t2 * (2.0 * k1 + k2 * t1 * t1)
    return np.array(
        [[2.0 * psi + 5.0 * k1 * t1**2 + k2 * t1**4, off], [off, k1 * t1**2 + k2 * t1**2 * t2**2]]
    )


def _in_star_image(u1: float, u2: float) -> bool:
    return u1 > 2.0 / SQRT_PI * math.sqrt(abs(u2))


def _positive_cubic_root(p: float, q: float) -> float:
    """The real root of c^3 + p c = q for p > 0, q >= 0 (hyperbolic form, no cancellation)."""
    if q == 0.0:
        return 0.0
    k = math.sqrt(p / 3.0)
    return 2.0 * k * math.sinh(math.asinh(1.5 * q / (p * k)) / 3.0)


def star_gradient_map_inverse(u, tol: float = 1e-11) -> np.ndarray:
    """Inverse of :func:`star_gradient_map` onto {u_1 > (2/sqrt(pi)) sqrt|u_2|}.

    For a radius r the first equation is a cubic in tau_1 with one positive
    root; the second equation then becomes a scalar equation in r, which
    changes sign between the point on the axis (tau_2 = 0) and the rim
    exactly when u lies in the image.
    """
    u1, u2 = (float(v) for v in u)
    if not _in_star_image(u1, u2):
        raise OutOfRegion("target is not in the image of the star gradient map")
    from .kernels import cot_gap_slope_inverse

    r_axis = float(cot_gap_slope_inverse(u1))
    if u2 == 0.0:
        return np.array([r_axis, 0.0])
    w = abs(u2)

    def first_coord(r: float) -> tuple[float, float]:
        psi, k1, _ = _radial(r)
        c = min(_positive_cubic_root(2.0 * psi / k1, u1 / k1), r)
        return c, k1

    def mismatch(r: float) -> float:
        c, k1 = first_coord(r)
        return k1 * c * c * math.sqrt(max(r * r - c * c, 0.0)) - w

    hi = math.nextafter(PI, 0.0)
    if mismatch(hi) <= 0.0:
        raise NewtonFailure("target too close to the edge of the image to resolve in double precision")
    if mismatch(r_axis) < 0.0:
        r = brentq(mismatch, r_axis, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        c, _ = first_coord(r)
        tau = np.array([c, math.sqrt(max(r * r - c * c, 0.0))])
    else:
        # u2 below rounding level at the axis point: first-order offset from it
        _, k1, _ = _radial(r_axis)
        tau = np.array([r_axis, w / (k1 * r_axis * r_axis)])
    # Newton polish on the map itself
    target = np.array([u1, w])
    for _ in range(3):
        psi, k1, k2 = _radial(math.hypot(*tau))
        res = np.array([2.0 * tau[0] * psi + k1 * tau[0] ** 3, k1 * tau[0] ** 2 * tau[1]]) - target
        if np.linalg.norm(res) <= tol * (1.0 + np.linalg.norm(target)):
            break
        trial = tau - np.linalg.solve(_star_map_jacobian(tau[0], tau[1], psi, k1, k2), res)
        if not (trial[0] > 0.0 and trial[1] > 0.0 and math.hypot(*trial) < PI):
            break
        tr = star_gradient_map(trial) - target
        if np.linalg.norm(tr) >= np.linalg.norm(res):
            break
        tau = trial
    return np.array([tau[0], math.copysign(tau[1], u2)])


def star_group_point_frame(n: int, xs: np.ndarray, t: np.ndarray):
    """Orthonormal e1, e2 with xs = |xs| e1 and t = t1 e1 + t2 e2, t1, t2 >= 0."""
    xn = float(np.linalg.norm(xs))
    if xn > 0.0:
        e1 = xs / xn
        if float(t @ e1) < 0.0:
            e1 = -e1
    elif np.any(t):
        e1 = t / np.linalg.norm(t)
    else:
        e1 = np.eye(n)[0]
    perp = t - float(t @ e1) * e1
    pn = float(np.linalg.norm(perp))
    if pn > 1e-300:
        e2 = perp / pn
    else:
        # any unit vector orthogonal to e1
        k = int(np.argmin(np.abs(e1)))
        e2 = np.eye(n)[k] - e1[k] * e1
        e2 /= np.linalg.norm(e2)
    return e1, e2, float(t @ e1), pn


def _star_value(x1: float, xs: float, t1: float, t2: float, tau: np.ndarray) -> tuple:
    """Reduced reference value with gradient and Hessian (x_* = xs e1)."""
    r = math.hypot(*tau)
    psi, k1, k2 = _radial(r)
    f = r * r * psi
    grad_f = (2.0 * psi + r * r * k1) * tau
    hess_f = (2.0 * psi + r * r * k1) * np.eye(2) + (4.0 * k1 + r * r * k2) * np.outer(tau, tau)
    up = np.array([2.0 * tau[0] * psi + k1 * tau[0] ** 3, k1 * tau[0] ** 2 * tau[1]])
    jac = _star_map_jacobian(tau[0], tau[1], psi, k1, k2)
    t = np.array([t1, t2])
    value = x1 * x1 + xs * xs + 4.0 * float(t @ tau) - x1 * x1 * f - xs * xs * tau[0] ** 2 * psi
    grad = 4.0 * t - x1 * x1 * grad_f - xs * xs * up
    hess = -x1 * x1 * hess_f - xs * xs * jac
    return value, grad, hess


def _star_concave_newton(x1: float, xs: float, t1: float, t2: float) -> np.ndarray:
    tau = np.zeros(2)
    val, grad, hess = _star_value(x1, xs, t1, t2, tau)
    scale = x1 * x1 + xs * xs + math.hypot(t1, t2)
    for _ in range(400):
        if np.linalg.norm(grad) <= 1e-13 * (1.0 + scale):
            return tau
        step = np.linalg.solve(-hess, grad)
        dec = float(grad @ step)
        alpha = 1.0
        while alpha > 1e-14:
            trial = tau + alpha * step
            if math.hypot(*trial) < PI:
                tv, tg, th = _star_value(x1, xs, t1, t2, trial)
                small = dec <= 1e-10 * (1.0 + abs(val))
                if (small and np.linalg.norm(tg) < np.linalg.norm(grad)) or tv >= val + 1e-4 * alpha * dec:
                    break
            alpha *= 0.5
        else:
            break
        tau, val, grad, hess = trial, tv, tg, th
    if np.linalg.norm(grad) <= 1e-9 * (1.0 + scale):
        return tau
    raise NewtonFailure(f"star ascent stalled (gradient {np.linalg.norm(grad):.3e})")


def star_length_squared(x1: float, xs: float, tau) -> float:
    """|(U/sin U) x|^2 for x = (x1, xs e1) at the reduced parameter tau."""
    r = math.hypot(*tau)
    if r == 0.0:
        return x1 * x1 + xs * xs
    c = xs * tau[0] / r
    ratio = _s_over_sin(r) ** 2
    return ratio * x1 * x1 + xs * xs + (ratio - 1.0) * c * c


def star_distance(n: int, x, t) -> DistanceResult:
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if n < 2 or x.shape != (n + 1,) or t.shape != (n,):
        raise DimensionMismatch(f"star graph K_1,{n} needs x in R^{n + 1} and t in R^{n}")
    x1 = abs(float(x[0]))
    xs_vec = x[1:]
    xs = float(np.linalg.norm(xs_vec))
    e1, e2, t1, t2 = star_group_point_frame(n, xs_vec, t)
    tn = float(np.linalg.norm(t))
    if x1 == 0.0:
        if xs == 0.0:
            theta = PI * t / tn if tn > 0 else np.zeros(n)
            return DistanceResult(4.0 * PI * tn, Certificate.EXACT_CLOSURE, theta, False, "closed_form",
                                  cut_locus=tn > 0)
        u1, u2 = 4.0 * t1 / xs**2, 4.0 * t2 / xs**2
        if u1 <= 2.0 / SQRT_PI * math.sqrt(u2) * (1.0 + CURVE_TOL):
            d2 = xs * xs + 4.0 * PI * t2
            theta = PI * e2 if t2 > 0 else np.zeros(n)
            return DistanceResult(d2, Certificate.EXACT_CLOSURE, theta, False, "closed_form", cut_locus=True)
        tau = star_gradient_map_inverse((u1, u2))
    elif xs == 0.0:
        # radial problem: 4|t| = x1^2 mu(|theta|), theta parallel to t
        if tn == 0.0:
            return DistanceResult(x1 * x1, Certificate.EXACT_NONDEGENERATE, np.zeros(n), True, "closed_form",
                                  cut_locus=False)
        from .kernels import cot_gap_slope_inverse

        s = cot_gap_slope_inverse(4.0 * tn / (x1 * x1))
        return DistanceResult(x1 * x1 * _s_over_sin(s) ** 2, Certificate.EXACT_NONDEGENERATE, s * t / tn, True,
                              "closed_form", cut_locus=False)
    else:
        tau = _star_concave_newton(x1, xs, t1, t2)
    d2 = star_length_squared(x1, xs, tau)
    theta = tau[0] * e1 + tau[1] * e2
    return DistanceResult(d2, Certificate.EXACT_NONDEGENERATE, theta, True, "closed_form", cut_locus=False)


def star_reduced_value(x1: float, xs: float, t1: float, t2: float, tau) -> float:
    return _star_value(x1, xs, t1, t2, np.asarray(tau, dtype=float))[0]


# ---------------------------------------------------------------------------
# N(3,2)


class N32Region(enum.Enum):
    """Domains of the N(3,2) gradient map and their images."""

    HALF_BALL = "half_ball"  # |v| < pi, v2 > 0
    OUTER_LOBE = "outer_lobe"  # v2 < 0, pi < v1 < |v| < tan fixed point, transverse term < 0
    ABOVE_CURVE = "above_curve"  # u2 > (2/sqrt(pi)) sqrt|u1|
    BELOW_CURVE = "below_curve"  # u1 > 0, 0 < u2 < (2/sqrt(pi)) sqrt(u1)


def n32_transverse_term(v) -> float:
    """2 psi(r) + (psi'(r)/r) v2^2; negative on the outer lobe."""
    v1, v2 = (float(c) for c in v)
    psi, k1, _ = _radial(math.hypot(v1, v2))
    return 2.0 * psi + k1 * v2 * v2


def in_outer_lobe(v) -> bool:
    v1, v2 = (float(c) for c in v)
    r = math.hypot(v1, v2)
    return v2 < 0.0 and PI < v1 < r < TAN_FIXED_POINT and n32_transverse_term(v) < 0.0


def in_half_ball(v) -> bool:
    v1, v2 = (float(c) for c in v)
    return v2 > 0.0 and math.hypot(v1, v2) < PI


def _check_domain(v, region: N32Region) -> None:
    if region is N32Region.HALF_BALL:
        ok = in_half_ball(v)
    elif region is N32Region.OUTER_LOBE:
        ok = in_outer_lobe(v)
    else:
        raise OutOfRegion(f"{region} is an image region, not a domain")
    if not ok:
        raise OutOfRegion(f"{tuple(v)} is not in {region.value}")


def _lambda_and_jacobian(v1: float, v2: float):
    psi, k1, k2 = _radial(math.hypot(v1, v2))
    lam = np.array([k1 * v1 * v2 * v2, 2.0 * psi * v2 + k1 * v2**3])
    j = _star_map_jacobian(v2, v1, psi, k1, k2)
    return lam, j[::-1, ::-1]


def n32_gradient_map(v, region: N32Region = N32Region.HALF_BALL) -> np.ndarray:
    """v2 [ (psi'(r)/r) v2 v + 2 psi(r) e2 ]."""
    _check_domain(v, region)
    return _lambda_and_jacobian(float(v[0]), float(v[1]))[0]


def n32_gradient_map_jacobian(v) -> np.ndarray:
    return _lambda_and_jacobian(float(v[0]), float(v[1]))[1]


def in_above_curve(u) -> bool:
    u1, u2 = (float(c) for c in u)
    return u2 > 2.0 / SQRT_PI * math.sqrt(abs(u1))


def in_below_curve(u) -> bool:
    u1, u2 = (float(c) for c in u)
    return u1 > 0.0 and 0.0 < u2 < 2.0 / SQRT_PI * math.sqrt(u1)


@lru_cache(maxsize=1)
def _lobe_grid():
    """Seeds in the outer lobe with the logarithms of their images."""
    radii = PI + (TAN_FIXED_POINT - PI) * 10.0 ** np.linspace(-9.0, -1e-3, 90)
    s1, s2, _ = power_sums(radii)
    psi, k1 = 2.0 * s1, 4.0 * s2
    bound = np.minimum(np.sqrt(radii**2 - PI**2), np.sqrt(-2.0 * psi / k1))
    # cluster toward the edge where the transverse term vanishes: small u2 lives there
    fracs = np.concatenate([np.linspace(0.01, 0.99, 50), 1.0 - np.logspace(-13.0, -2.1, 25)])
    v2 = -np.outer(bound, fracs)
    v1 = np.sqrt(radii[:, None] ** 2 - v2**2)
    lam1 = k1[:, None] * v1 * v2**2
    lam2 = 2.0 * psi[:, None] * v2 + k1[:, None] * v2**3
    keep = (lam1 > 0) & (lam2 > 0) & (v1 > PI)
    pts = np.column_stack([v1[keep], v2[keep]])
    return pts, np.log(np.column_stack([lam1[keep], lam2[keep]]))


def _lobe_coords(r: float, z: float):
    """Outer-lobe point, image and Jacobian in coordinates (r, z).

    v2^2 = c B(r) with B = -2 psi / k1 and c = 1 / (1 + e^-z), so the transverse
    term 2 psi (1 - c) stays negative for every z; the image is computed from
    1 - c directly, avoiding the cancellation in 2 psi + k1 v2^2 near u2 = 0.
    """
    psi, k1, k2 = _radial(r)
    b = -2.0 * psi / k1
    db = -2.0 * r * (k1 * k1 - psi * k2) / (k1 * k1)
    c = 1.0 / (1.0 + math.exp(-z)) if z > -700.0 else 0.0
    omc = 1.0 / (1.0 + math.exp(z)) if z < 700.0 else 0.0
    y2 = b * c
    y = math.sqrt(y2)
    if r * r - y2 <= 0.0:
        return None
    v1 = math.sqrt(r * r - y2)
    dy2 = np.array([db * c, b * c * omc])
    dv1 = (np.array([2.0 * r, 0.0]) - dy2) / (2.0 * v1)
    dy = dy2 / (2.0 * y)
    lam = np.array([k1 * v1 * y2, -2.0 * psi * y * omc])
    du1 = np.array([r * k2 * v1 * y2, 0.0]) + k1 * dv1 * y2 + k1 * v1 * dy2
    du2 = np.array([-2.0 * r * k1 * y * omc, 2.0 * psi * y * c * omc]) - 2.0 * psi * dy * omc
    return np.array([v1, -y]), lam, np.array([du1, du2])


def _lobe_newton(u: np.ndarray, v0: np.ndarray, tol: float):
    r = math.hypot(*v0)
    psi, k1, _ = _radial(r)
    c = v0[1] ** 2 / (-2.0 * psi / k1)
    if not 0.0 < c < 1.0:
        return None
    w = np.array([r, math.log(c) - math.log1p(-c)])
    cur = _lobe_coords(*w)
    if cur is None:
        return None
    for _ in range(200):
        v, lam, jac = cur
        if np.linalg.norm(lam - u) <= tol * (1.0 + np.linalg.norm(u)):
            return v
        rn = float(np.linalg.norm((lam - u) / u))
        try:
            step = np.linalg.solve(jac, u - lam)
        except np.linalg.LinAlgError:
            return None
        alpha = 1.0
        while alpha > 1e-14:
            trial = w + alpha * step
            if PI < trial[0] < TAN_FIXED_POINT:
                nxt = _lobe_coords(*trial)
                if nxt is not None and nxt[0][0] > PI and np.linalg.norm((nxt[1] - u) / u) < rn:
                    break
            alpha *= 0.5
        else:
            return None
        w, cur = trial, nxt
    return None


def n32_gradient_map_inverse(u, region: N32Region = N32Region.ABOVE_CURVE, tol: float = 1e-11) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if region in (N32Region.ABOVE_CURVE, N32Region.HALF_BALL):
        if not in_above_curve(u):
            raise OutOfRegion("target is not above the curve u2 = (2/sqrt(pi)) sqrt|u1|")
        tau = star_gradient_map_inverse((u[1], u[0]), tol)
        return np.array([tau[1], tau[0]])
    if region not in (N32Region.BELOW_CURVE, N32Region.OUTER_LOBE):
        raise OutOfRegion(f"unknown region {region}")
    if not in_below_curve(u):
        raise OutOfRegion("target is not below the curve u2 = (2/sqrt(pi)) sqrt(u1)")
    pts, logs = _lobe_grid()
    order = np.argsort(np.sum((logs - np.log(u)) ** 2, axis=1))
    for idx in order[:8]:
        v = _lobe_newton(u, pts[idx], tol)
        if v is not None:
            return v
    raise NewtonFailure("outer-lobe inversion failed from all seeds")


def n32_length_squared(xn: float, theta1: float, theta2: float) -> float:
    """|x|^2 [theta1^2/|theta|^2 + (theta2/sin|theta|)^2] for x = |x| e1."""
    r = math.hypot(theta1, theta2)
    if r == 0.0:
        return xn * xn
    return xn * xn * ((theta1 / r) ** 2 + (theta2 / math.sin(r)) ** 2)


def _parallel_curve_radius(u1: float) -> float:
    """Radius on the zero set of the transverse term where the first image coordinate is u1."""

    def first(r):
        psi, k1, _ = _radial(r)
        v1 = math.sqrt(r * r + 2.0 * psi / k1)
        return -2.0 * psi * v1 - u1

    lo, hi = PI * (1.0 + 1e-12), TAN_FIXED_POINT * (1.0 - 1e-15)
    while first(lo) < 0.0:
        lo = PI + (lo - PI) * 1e-2
        if lo - PI <= 4e-16:
            raise NewtonFailure("parallel-time target too large to bracket")
    return brentq(first, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def n32_frame(x: np.ndarray, t: np.ndarray):
    xn = float(np.linalg.norm(x))
    xhat = x / xn
    t1 = float(t @ xhat)
    perp = t - t1 * xhat
    t2 = float(np.linalg.norm(perp))
    if t2 > 1e-300:
        e2 = perp / t2
    else:
        k = int(np.argmin(np.abs(xhat)))
        e2 = np.eye(3)[k] - xhat[k] * xhat
        e2 /= np.linalg.norm(e2)
    return xn, xhat, e2, t1, t2


#: t counts as parallel to x when its orthogonal part is below this fraction of |t|
PARALLEL_TOL = 1e-13


def n32_distance(x, t) -> DistanceResult:
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if x.shape != (3,) or t.shape != (3,):
        raise DimensionMismatch("N(3,2) points have x, t in R^3")
    tn = float(np.linalg.norm(t))
    xn = float(np.linalg.norm(x))
    if xn == 0.0:
        theta = PI * t / tn if tn > 0 else np.zeros(3)
        return DistanceResult(4.0 * PI * tn, Certificate.EXACT_CLOSURE, theta, False, "closed_form",
                              cut_locus=tn > 0, note="first layer zero")
    if tn == 0.0:
        return DistanceResult(xn * xn, Certificate.EXACT_CLOSURE, np.zeros(3), False, "closed_form",
                              cut_locus=True, note="second layer zero")
    xn, xhat, e2, t1, t2 = n32_frame(x, t)
    s1 = 1.0 if t1 >= 0.0 else -1.0
    u1, u2 = 4.0 * abs(t1) / xn**2, 4.0 * t2 / xn**2
    curve = 2.0 / SQRT_PI * math.sqrt(u1)
    if abs(u2 - curve) <= CURVE_TOL * (1.0 + curve):
        alpha = PI * u2 / 2.0
        return DistanceResult(xn * xn * (1.0 + alpha * alpha), Certificate.EXACT_CLOSURE, s1 * PI * xhat, False,
                              "closed_form", cut_locus=False, note="boundary curve")
    if u2 > curve:
        v = n32_gradient_map_inverse((u1, u2), N32Region.ABOVE_CURVE)
        cert, note = Certificate.EXACT_NONDEGENERATE, "half ball"
    elif u2 > PARALLEL_TOL * u1:
        v = n32_gradient_map_inverse((u1, u2), N32Region.BELOW_CURVE)
        cert, note = Certificate.EXACT_OUTER_CRITICAL, "outer lobe"
    else:
        r = _parallel_curve_radius(u1)
        psi, k1, _ = _radial(r)
        v2sq = -2.0 * psi / k1
        v = np.array([math.sqrt(r * r - v2sq), -math.sqrt(v2sq)])
        theta = s1 * v[0] * xhat + v[1] * e2
        return DistanceResult(n32_length_squared(xn, *v), Certificate.EXACT_OUTER_CRITICAL, theta, False,
                              "closed_form", cut_locus=True, note="parallel limit")
    theta = s1 * v[0] * xhat + v[1] * e2
    return DistanceResult(n32_length_squared(xn, *v), cert, theta, True, "closed_form", cut_locus=False, note=note)


def n32_region_of(x, t) -> str:
    """Which case of the N(3,2) dispatch a point falls in."""
    return n32_distance(x, t).note
