"""Scalar kernels built from s*cot(s).

All functions here derive from the partial-fraction expansion

    s cot s = 1 - 2 s^2 sum_{j>=1} 1 / ((j pi)^2 - s^2).

The power sums ``S_p(r) = sum_j ((j pi)^2 - r^2)^(-p)`` for p = 1, 2, 3 are the
building blocks: the j = 1 pole is kept exact and the regular remainder
``j >= 2`` is summed as a power series in r^2 whose coefficients are
``zeta(2n + 2p) - 1``. Near 0 a plain Taylor series is used and far from the
origin (|r| >= 5.5) closed trigonometric forms take over.

Naming: ``cot_gap(s) = 1 - s cot s``, ``cot_gap_slope`` is its derivative,
``cot_gap_ratio(s) = cot_gap(s) / s^2`` with derivatives ``_d1`` and ``_d2``.
"""

from __future__ import annotations

import enum
import math
from functools import lru_cache
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import brentq
from scipy.special import comb, zeta, zetac

from .errors import DomainError, PoleAtEigenvalue, PoleError

PI = math.pi
# pi - PI as a double; restores ~16 extra bits when measuring distance to the pole
PI_LO = 1.2246467991473532e-16

TAYLOR_RADIUS = 0.1
SERIES_RADIUS = 5.5

_N_TAYLOR = 12
_N_TAIL = 260


def _zeta_minus_one(n) -> np.ndarray:
    """zeta(n) - 1; scipy's zetac flushes to zero for large n, so sum directly there."""
    n = np.asarray(n, dtype=float)
    direct = sum(float(j) ** -np.maximum(n, 2.0) for j in range(2, 8))
    return np.where(n < 50, zetac(np.minimum(n, 50.0)), direct)


def _coefficients(n_terms: int, power: int, regular: bool) -> np.ndarray:
    n = np.arange(n_terms, dtype=float)
    z = _zeta_minus_one(2 * n + 2 * power) if regular else zeta(2 * n + 2 * power)
    return comb(n + power - 1, power - 1) * z / PI ** (2 * power)


_TAYLOR = {p: _coefficients(_N_TAYLOR, p, regular=False) for p in (1, 2, 3)}
_TAIL = {p: _coefficients(_N_TAIL, p, regular=True) for p in (1, 2, 3)}
_TAYLOR_MAT = np.column_stack([_TAYLOR[p] for p in (1, 2, 3)])
_TAIL_MAT = np.column_stack([_TAIL[p] for p in (1, 2, 3)])


def _powers(u: np.ndarray, n: int) -> np.ndarray:
    # every coefficient and every u here is positive, so plain summation is stable
    return np.power.outer(u, np.arange(n, dtype=float))


def _pole_gap(r: np.ndarray) -> np.ndarray:
    """pi^2 - r^2 with the low-order part of pi folded in."""
    a = np.abs(r)
    return ((PI - a) + PI_LO) * (PI + a)


def _closed_sums(r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sin, cos = np.sin(r), np.cos(r)
    f = 1.0 - r * cos / sin
    f1 = r / sin**2 - cos / sin
    f2 = 2.0 * (sin - r * cos) / sin**3
    psi1 = f1 / r**2 - 2.0 * f / r**3
    psi2 = f2 / r**2 - 4.0 * f1 / r**3 + 6.0 * f / r**4
    return f / (2.0 * r**2), psi1 / (4.0 * r), (psi2 - psi1 / r) / (16.0 * r**2)


def power_sums(s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (S_1, S_2, S_3) evaluated at ``s`` (array-friendly).

    Poles at s = k*pi (k >= 1) give non-finite entries; callers decide
    whether that is an error.
    """
    r = np.abs(np.asarray(s, dtype=float))
    out = [np.empty_like(r) for _ in range(3)]
    small = r < TAYLOR_RADIUS
    mid = (~small) & (r < SERIES_RADIUS)
    far = ~(small | mid)
    if np.any(small):
        u = (r[small] / PI) ** 2
        powers = _powers(u, _TAYLOR_MAT.shape[0])
        vals = powers @ _TAYLOR_MAT
        for p in (1, 2, 3):
            out[p - 1][small] = vals[:, p - 1]
    if np.any(mid):
        rm = r[mid]
        u = (rm / PI) ** 2
        gap = _pole_gap(rm)
        vals = _powers(u, _TAIL_MAT.shape[0]) @ _TAIL_MAT
        with np.errstate(divide="ignore"):
            for p in (1, 2, 3):
                out[p - 1][mid] = 1.0 / gap**p + vals[:, p - 1]
    if np.any(far):
        with np.errstate(divide="ignore", invalid="ignore"):
            s1, s2, s3 = _closed_sums(r[far])
        out[0][far], out[1][far], out[2][far] = s1, s2, s3
    return out[0], out[1], out[2]


def _scalar_or_array(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


def cot_gap(s):
    """1 - s cot s (even)."""
    s1, _, _ = power_sums(s)
    r = np.asarray(s, dtype=float)
    return _scalar_or_array(2.0 * r**2 * s1, s)


def cot_gap_slope(s):
    """Derivative of 1 - s cot s; odd, equals (2s - sin 2s) / (2 sin^2 s)."""
    s1, s2, _ = power_sums(s)
    r = np.asarray(s, dtype=float)
    a = np.abs(r)
    return _scalar_or_array(np.sign(r) * (4.0 * a * s1 + 4.0 * a**3 * s2), s)


def cot_gap_slope_d1(s):
    """Second derivative of 1 - s cot s (even)."""
    s1, s2, s3 = power_sums(s)
    r2 = np.asarray(s, dtype=float) ** 2
    return _scalar_or_array(4.0 * s1 + 20.0 * r2 * s2 + 16.0 * r2**2 * s3, s)


def cot_gap_ratio(s):
    """(1 - s cot s) / s^2 (even, 1/3 at the origin)."""
    s1, _, _ = power_sums(s)
    return _scalar_or_array(2.0 * s1, s)


def cot_gap_ratio_d1(s):
    s2 = power_sums(s)[1]
    return _scalar_or_array(4.0 * np.asarray(s, dtype=float) * s2, s)


def cot_gap_ratio_d2(s):
    _, s2, s3 = power_sums(s)
    r2 = np.asarray(s, dtype=float) ** 2
    return _scalar_or_array(4.0 * s2 + 16.0 * r2 * s3, s)


def ratio_d1_over_r(s):
    """psi'(r)/r for psi = cot_gap_ratio; positive wherever finite."""
    return _scalar_or_array(4.0 * power_sums(s)[1], s)


def ratio_d1_over_r_rate(s):
    """r^-1 d/dr (psi'(r)/r)."""
    return _scalar_or_array(16.0 * power_sums(s)[2], s)


def s_cot_s(s):
    # libm reduces arguments exactly, so the direct quotient is accurate up to the poles
    r = np.asarray(s, dtype=float)
    safe = np.where(r == 0.0, 1.0, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(r == 0.0, 1.0, safe * np.cos(safe) / np.sin(safe))
    return _scalar_or_array(val, s)


def s_over_sin(s):
    r = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(r == 0.0, 1.0, r / np.sin(np.where(r == 0.0, 1.0, r)))
    return _scalar_or_array(val, s)


def s_over_sin_sq(s):
    return _scalar_or_array(np.asarray(s_over_sin(s)) ** 2, s)


class KernelName(enum.Enum):
    COT_GAP = "cot_gap"
    COT_GAP_SLOPE = "cot_gap_slope"
    COT_GAP_RATIO = "cot_gap_ratio"
    COT_GAP_RATIO_D1 = "cot_gap_ratio_d1"
    COT_GAP_RATIO_D2 = "cot_gap_ratio_d2"
    S_OVER_SIN = "s_over_sin"
    S_OVER_SIN_SQ = "s_over_sin_sq"
    S_COT_S = "s_cot_s"

    @property
    def even(self) -> bool:
        return self not in (KernelName.COT_GAP_SLOPE, KernelName.COT_GAP_RATIO_D1)

    def __call__(self, s):
        return _KERNELS[self](s)


_KERNELS = {
    KernelName.COT_GAP: cot_gap,
    KernelName.COT_GAP_SLOPE: cot_gap_slope,
    KernelName.COT_GAP_RATIO: cot_gap_ratio,
    KernelName.COT_GAP_RATIO_D1: cot_gap_ratio_d1,
    KernelName.COT_GAP_RATIO_D2: cot_gap_ratio_d2,
    KernelName.S_OVER_SIN: s_over_sin,
    KernelName.S_OVER_SIN_SQ: s_over_sin_sq,
    KernelName.S_COT_S: s_cot_s,
}


def nearest_pole_distance(s: float) -> float:
    """Distance from |s| to the nearest k*pi with k >= 1."""
    a = abs(s)
    k = max(1, round(a / PI))
    return abs((a - k * PI) - k * PI_LO)


def kernel_eval(name: KernelName | str, s: float) -> float:
    """Evaluate a kernel at a real scalar, raising PoleError at true poles."""
    if isinstance(name, str):
        name = KernelName[name.upper()] if name.upper() in KernelName.__members__ else KernelName(name)
    s = float(s)
    if s != 0.0 and nearest_pole_distance(s) <= 4 * np.finfo(float).eps * abs(s):
        raise PoleError(s)
    val = name(s)
    if not math.isfinite(val):
        raise PoleError(s)
    return val


def cot_gap_slope_inverse(y: float) -> float:
    """Inverse of the increasing bijection cot_gap_slope: (-pi, pi) -> R."""
    y = float(y)
    if y == 0.0:
        return 0.0
    sign = 1.0 if y > 0 else -1.0
    y = abs(y)
    if y < 1e-9:
        s = 1.5 * y
        return sign * (s - 0.2 * s**3)
    # near pi the slope behaves like pi / (pi - s)^2
    width = min(1.0, math.sqrt(PI / y))
    hi = PI - 0.5 * width
    while cot_gap_slope(hi) < y:
        width *= 0.5
        hi = PI - 0.5 * width
    s = brentq(lambda v: cot_gap_slope(v) - y, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(2):
        d = cot_gap_slope_d1(s)
        step = (cot_gap_slope(s) - y) / d
        if not math.isfinite(step) or abs(step) > 1e-8 * (1 + s):
            break
        s -= step
    return sign * s


def _tan_fixed_point() -> float:
    lo, hi = PI + 0.5, 1.5 * PI - 0.01
    g = lambda v: math.tan(v) - v
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


#: root of tan s = s in (pi, 3pi/2); psi changes sign there
TAN_FIXED_POINT = _tan_fixed_point()


@dataclass(frozen=True)
class CurvatureTerms:
    """Radial coefficients of the cot-gap ratio outside the ball of radius pi.

    ``k1 = psi'(r)/r``, ``k2 = r^-1 (psi'(r)/r)'`` and the transverse term
    ``k3 = 2 psi(r) + k1 v2^2``.
    """

    k1: float
    k2: float
    k3: float


def curvature_terms(r: float, v2: float) -> CurvatureTerms:
    if not (PI < r < TAN_FIXED_POINT):
        raise DomainError(f"radius {r!r} outside (pi, {TAN_FIXED_POINT})")
    k1 = float(ratio_d1_over_r(r))
    k2 = float(ratio_d1_over_r_rate(r))
    return CurvatureTerms(k1, k2, float(2.0 * cot_gap_ratio(r) + k1 * v2**2))


# ---------------------------------------------------------------------------
# Divided differences of F(s) = s cot s


def _check_poles(lams: np.ndarray) -> None:
    for lam in lams:
        if lam != 0.0 and nearest_pole_distance(lam) <= 8 * np.finfo(float).eps * max(1.0, abs(lam)):
            raise PoleAtEigenvalue(float(lam))


#: poles of s cot s at +-j pi, j <= _POLES, are handled exactly in divided differences
_POLES = 3


def _series_order(rho: float) -> int:
    """Truncation index for sums of h_n(w) sum_{j > _POLES} j^-n, with |w| <= rho < _POLES + 1."""
    ratio = max(rho / (_POLES + 1.0), 1e-3)
    n = 8
    while n < 600 and n * n * ratio**n > 1e-19:
        n += 8
    return n


@lru_cache(maxsize=None)
def _tail_hankel(order: int, n_max: int) -> np.ndarray:
    """Hankel matrix of  -2 sum_{j > _POLES} j^-(n+k) / pi^k  restricted to n+k even."""
    n = np.arange(2 * n_max + 1)
    z = _zeta_minus_one(n + order) - sum(float(j) ** -(n + order) for j in range(2, _POLES + 1))
    c = np.where((n + order) % 2 == 0, -2.0 * z / PI**order, 0.0)
    c[n > n_max] = 0.0
    idx = np.arange(n_max + 1)
    out = c[idx[:, None] + idx[None, :]]
    out.setflags(write=False)
    return out


def scot_divided_differences(lams, order: int = 1):
    """Values and divided differences of s cot s at the given eigenvalues.

    Returns ``(F0, F1)`` or ``(F0, F1, F2)`` where ``F1[a, b]`` is the first
    and ``F2[a, b, c]`` the second divided difference; coincident arguments
    give the corresponding derivatives automatically.
    """
    lams = np.asarray(lams, dtype=float)
    _check_poles(lams)
    f0 = s_cot_s(lams)
    rho = float(np.max(np.abs(lams))) if lams.size else 0.0
    if rho < SERIES_RADIUS:
        f1, f2 = _series_dd(lams, order)
    else:
        f1, f2 = _closed_dd(lams, f0, order)
    return (f0, f1) if order == 1 else (f0, f1, f2)


def _series_dd(lams: np.ndarray, order: int):
    w = lams / PI
    rho = float(np.max(np.abs(w))) if w.size else 0.0
    n_max = _series_order(rho)
    powers = np.power.outer(w, np.arange(n_max + 1))
    poles = []
    for j in range(1, _POLES + 1):
        lo = j * PI_LO
        poles.append((j * PI, 1.0 / ((j * PI - lams) + lo), 1.0 / ((j * PI + lams) + lo)))
    f1 = powers @ _tail_hankel(1, n_max) @ powers.T
    for p, minus, plus in poles:
        f1 -= p * (np.multiply.outer(minus, minus) - np.multiply.outer(plus, plus))
    if order == 1:
        return f1, None
    q = lams.size
    # tail[a, b, c] = sum_{j, k} w_b^j  G[a, j + k]  w_c^k  with G = powers @ Hankel
    left = powers @ _tail_hankel(2, n_max)
    padded = np.concatenate([left, np.zeros_like(left)], axis=1)
    hankel = sliding_window_view(padded, n_max + 1, axis=1)[:, : n_max + 1, :]
    f2 = np.matmul(np.matmul(powers[None, :, :], hankel), powers.T[None, :, :])
    cube = lambda v: v[:, None, None] * v[None, :, None] * v[None, None, :]
    for p, minus, plus in poles:
        f2 -= p * (cube(minus) + cube(plus))
    return f1, f2


def _closed_dd(lams: np.ndarray, f0: np.ndarray, order: int):
    q = lams.size
    gap = 1e-8 * (1.0 + np.max(np.abs(lams)))
    f1 = np.empty((q, q))
    for a in range(q):
        for b in range(q):
            da = lams[a] - lams[b]
            if abs(da) <= gap:
                f1[a, b] = -cot_gap_slope(0.5 * (lams[a] + lams[b]))
            else:
                f1[a, b] = (f0[a] - f0[b]) / da
    if order == 1:
        return f1, None
    f2 = np.empty((q, q, q))
    for a in range(q):
        for b in range(q):
            for c in range(q):
                trip = [a, b, c]
                vals = lams[trip]
                i_lo, i_hi = int(np.argmin(vals)), int(np.argmax(vals))
                if vals[i_hi] - vals[i_lo] <= gap:
                    f2[a, b, c] = -0.5 * cot_gap_slope_d1(np.mean(vals))
                    continue
                lo, hi = trip[i_lo], trip[i_hi]
                mid = trip[3 - i_lo - i_hi] if i_lo != i_hi else trip[i_lo]
                f2[a, b, c] = (f1[lo, mid] - f1[mid, hi]) / (lams[lo] - lams[hi])
    return f1, f2
