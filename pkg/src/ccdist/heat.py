"""Heat kernel by oscillatory quadrature, and small-time distance estimates.

The unnormalized kernel is

    p(x, t) = int_{R^m} V(lam) exp(-phi~((x, t); lam) / 4) dlam,
    V(lam) = det(U / sinh U)^(1/2),  phi~ = <U coth U x, x> - 4 i t.lam,

with U = U(lam) Hermitian. Both factors extend holomorphically to
lam -> i*shift + lam for shifts inside the spectral ball; on the shifted
contour through the saddle (the maximizer of the reference function) the
integrand is a localized bump instead of a wildly oscillating wave. The
integral is computed there by adaptive tensor-product Gauss-Legendre
quadrature for m <= 2.

At scale h the exponent is divided by h, so ``ln p_h`` is returned as
``-phi(shift)/(4h) + ln I(h) - (q/2 + m) ln h`` and nothing underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import BranchTrackingFailure, DimensionMismatch, DomainError, QuadratureFailure, ValidationError
from .groups import Group, Point, operator_norm, spectrum
from .kernels import PI
from .reference import reference_eval

_GAUSS = {n: np.polynomial.legendre.leggauss(n) for n in (8, 12, 16)}


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-300
    max_level: int = 48
    contour_shift: np.ndarray | None = None
    nodes: int = 12
    max_cells: int = 400_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValidationError("quadrature tolerances must be positive")
        if self.nodes not in _GAUSS:
            raise ValidationError(f"nodes must be one of {sorted(_GAUSS)}")
        if self.max_level < 1:
            raise ValidationError("max_level must be positive")


# ---------------------------------------------------------------------------
# scalar factors, even in z


def _z_coth_z(z: np.ndarray) -> np.ndarray:
    w = np.where(z.real < 0, -z, z)
    small = np.abs(w) < 1e-4
    e = np.exp(-2.0 * np.where(small, 1.0, w))
    big = w * (1.0 + e) / (1.0 - e)
    w2 = w * w
    return np.where(small, 1.0 + w2 / 3.0 - w2 * w2 / 45.0, big)


def _z_over_sinh_z(z: np.ndarray) -> np.ndarray:
    w = np.where(z.real < 0, -z, z)
    small = np.abs(w) < 1e-4
    ws = np.where(small, 1.0, w)
    big = 2.0 * ws * np.exp(-ws) / (1.0 - np.exp(-2.0 * ws))
    w2 = w * w
    return np.where(small, 1.0 - w2 / 6.0 + 7.0 * w2 * w2 / 360.0, big)


def v_factor(group: Group, lam) -> float:
    """V at a real parameter: product of sqrt(rho / sinh rho) over the spectrum."""
    lam = group.check_tau(lam)
    ev = spectrum(group, lam).eigenvalues
    return float(np.prod(np.sqrt(_z_over_sinh_z(ev.astype(complex)).real)))


def _complex_matrix(group: Group, shift: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """U(i*shift + lam) for a stack of real lam, shape (N, q, q)."""
    zeta = lam.astype(complex) + 1j * shift[None, :]
    return 1j * np.tensordot(zeta, group.U, axes=1)


def _halve_pairs(mu: np.ndarray) -> np.ndarray:
    """One representative from each +-pair of eigenvalues (rows of mu)."""
    # the spectrum of U at a complex argument is symmetric under mu -> -mu;
    # ranking by a generic linear key puts one member of each pair on top
    key = mu.real * math.cos(0.3) + mu.imag * math.sin(0.3)
    order = np.argsort(-key, axis=-1)
    return np.take_along_axis(mu, order[..., : mu.shape[-1] // 2], axis=-1)


def _v_from_eigenvalues(mu: np.ndarray) -> np.ndarray:
    half = np.prod(_z_over_sinh_z(_halve_pairs(mu)), axis=-1)
    full = np.prod(_z_over_sinh_z(mu), axis=-1)
    bad = np.abs(half * half - full) > 1e-8 * np.maximum(np.abs(full), 1e-300)
    if np.any(bad):
        raise BranchTrackingFailure("eigenvalues of U at a complex argument do not pair up")
    return half


def v_factor_shifted(group: Group, shift, lam, steps: int = 64) -> complex:
    """V(i*shift + lam), continued along the segment from i*shift.

    The square root of det(U / sinh U) is followed step by step from the
    (real, positive) value at the segment start; a phase increment above
    pi/2 per step halves the step, and a jump of more than pi is a failure.
    """
    shift = _check_shift(group, shift)
    lam = group.check_tau(lam)
    s = np.linspace(0.0, 1.0, steps + 1)
    mats = _complex_matrix(group, shift, s[:, None] * lam[None, :])
    dets = np.prod(_z_over_sinh_z(np.linalg.eigvals(mats)), axis=-1)
    phase = np.angle(dets)
    jumps = np.diff(phase)
    jumps = (jumps + PI) % (2 * PI) - PI
    if np.max(np.abs(jumps), initial=0.0) > PI / 2:
        if steps >= 1 << 14:
            raise BranchTrackingFailure("phase of det(U/sinh U) jumps by more than pi")
        return v_factor_shifted(group, shift, lam, 4 * steps)
    total = phase[0] + float(np.sum(jumps))
    return complex(math.sqrt(abs(dets[-1])) * np.exp(0.5j * total))


def _check_shift(group: Group, shift) -> np.ndarray:
    shift = group.check_tau(shift)
    if operator_norm(group, shift) >= PI:
        raise DomainError("contour shift must lie in the open spectral ball")
    return shift


# ---------------------------------------------------------------------------
# integrand


class _Integrand:
    """lam -> V(i s + lam) exp(-(phi~(i s + lam) - phi(s)) / (4h)) on stacks of lam."""

    def __init__(self, group: Group, g: Point, shift: np.ndarray, h: float):
        self.group, self.g, self.shift, self.h = group, g, shift, h
        self.m = group.m
        if group.m == 1:
            # everything commutes: eigenvalues are (lam + i s) rho_a
            spec = spectrum(group, np.ones(1))
            self.rho = spec.eigenvalues
            self.weights = np.abs(spec.coordinates(g.x)) ** 2
        x = g.x
        zero = np.zeros((1, group.m))
        self.base = complex(self._quadratic(zero)[0])
        self.x = x

    def _quadratic_general(self, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mats = _complex_matrix(self.group, self.shift, lam)
        mu, vecs = np.linalg.eig(mats)
        x = self.g.x.astype(complex)
        left = np.einsum("i,nia->na", x, vecs)
        right = np.linalg.solve(vecs, np.broadcast_to(x, (len(lam), len(x)))[..., None])[..., 0]
        quad = np.sum(left * _z_coth_z(mu) * right, axis=-1)
        # ill-conditioned eigenbases: redo those nodes without diagonalizing
        amp = np.linalg.norm(left, axis=-1) * np.linalg.norm(right, axis=-1)
        bad = np.nonzero(amp > 1e6 * max(float(self.g.x @ self.g.x), 1e-300))[0]
        for n in bad:
            quad[n] = self.g.x @ _z_coth_z_matrix(mats[n]) @ self.g.x
        return quad, mu

    def _quadratic(self, lam: np.ndarray) -> np.ndarray:
        if self.m == 1:
            zeta = lam[:, 0] + 1j * self.shift[0]
            return _z_coth_z(zeta[:, None] * self.rho[None, :]) @ self.weights
        return self._quadratic_general(lam)[0]

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        t = self.g.t
        if self.m == 1:
            zeta = lam[:, 0] + 1j * self.shift[0]
            mu = zeta[:, None] * self.rho[None, :]
            quad = _z_coth_z(mu) @ self.weights
        else:
            quad, mu = self._quadratic_general(lam)
        delta = quad - self.base - 4j * (lam @ t)
        with np.errstate(over="ignore", under="ignore"):
            return _v_from_eigenvalues(mu) * np.exp(-delta / (4.0 * self.h))


def _z_coth_z_matrix(a: np.ndarray) -> np.ndarray:
    """A coth A = cosh A (sinh A / A)^-1 from exponentials only."""
    q = a.shape[0]
    eye = np.eye(q)

    def phi1(b):
        aug = np.zeros((2 * q, 2 * q), dtype=complex)
        aug[:q, :q] = b
        aug[:q, q:] = eye
        return expm(aug)[:q, q:]  # (e^B - I) / B

    sinhc = 0.5 * (phi1(a) + phi1(-a))
    cosh = 0.5 * (expm(a) + expm(-a))
    return np.linalg.solve(sinhc.T, cosh.T).T


# ---------------------------------------------------------------------------
# adaptive tensor-product quadrature


def _graded_breaks(width: float, radius: float) -> np.ndarray:
    k = max(1, int(math.ceil(math.log2(radius / width))))
    pos = width * 2.0 ** np.arange(k)
    pos = np.append(pos[pos < radius], radius)
    return np.concatenate([-pos[::-1], [0.0], pos])


class _Cells:
    """Boxes with a Gauss-Legendre value and a one-level-refined value."""

    def __init__(self, f, m: int, n: int):
        self.f, self.m = f, m
        x, w = _GAUSS[n]
        if m == 1:
            self.ref = x[:, None]
            self.w = w
        else:
            gx, gy = np.meshgrid(x, x, indexing="ij")
            self.ref = np.column_stack([gx.ravel(), gy.ravel()])
            self.w = np.outer(w, w).ravel()
        corners = np.array(np.meshgrid(*[[0, 1]] * m, indexing="ij")).reshape(m, -1).T
        self.children = corners  # 2^m offsets in half-widths

    def rule(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Gauss-Legendre values of many boxes at once; lo, hi have shape (B, m)."""
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        pts = mid[:, None, :] + half[:, None, :] * self.ref[None, :, :]
        vals = self.f(pts.reshape(-1, self.m)).reshape(len(lo), -1)
        return (vals @ self.w) * np.prod(half, axis=1)

    def split(self, lo: np.ndarray, hi: np.ndarray):
        half = 0.5 * (hi - lo)
        clo = (lo[:, None, :] + self.children[None, :, :] * half[:, None, :]).reshape(-1, self.m)
        return clo, clo + np.repeat(half, len(self.children), axis=0)


def _integrate(f, breaks: list[np.ndarray], cfg: QuadratureConfig) -> tuple[complex, float]:
    m = len(breaks)
    cells = _Cells(f, m, cfg.nodes)
    grids = np.meshgrid(*[np.arange(len(b) - 1) for b in breaks], indexing="ij")
    idx = np.column_stack([gi.ravel() for gi in grids])
    lo = np.column_stack([breaks[d][idx[:, d]] for d in range(m)])
    hi = np.column_stack([breaks[d][idx[:, d] + 1] for d in range(m)])
    coarse = cells.rule(lo, hi)
    done_lo, done_hi, done_val = [], [], []
    active = (lo, hi, coarse)
    level = 0
    total_cells = len(lo)
    while True:
        lo, hi, coarse = active
        clo, chi = cells.split(lo, hi)
        fine = cells.rule(clo, chi).reshape(len(lo), -1)
        fine_sum = fine.sum(axis=1)
        err = np.abs(fine_sum - coarse)
        done_val_arr = np.concatenate(done_val) if done_val else np.zeros(0, complex)
        estimate = abs(np.sum(done_val_arr) + np.sum(fine_sum))
        target = max(cfg.abs_tol, cfg.rel_tol * estimate)
        # cells are accepted once their error is below their share of the target
        share = target / max(total_cells, 1) * 0.5
        ok = err <= share
        done_lo.append(lo[ok])
        done_hi.append(hi[ok])
        done_val.append(fine_sum[ok])
        if np.all(ok):
            break
        level += 1
        if level > cfg.max_level:
            raise QuadratureFailure(f"no convergence after {cfg.max_level} refinement levels")
        bad = ~ok
        nlo = clo.reshape(len(lo), -1, m)[bad].reshape(-1, m)
        nhi = chi.reshape(len(lo), -1, m)[bad].reshape(-1, m)
        total_cells += len(nlo) - int(bad.sum())
        if total_cells > cfg.max_cells:
            raise QuadratureFailure(f"cell budget {cfg.max_cells} exhausted at level {level}")
        active = (nlo, nhi, fine[bad].ravel())
    all_lo = np.concatenate(done_lo)
    vals = np.concatenate(done_val)
    # canonical order for a reproducible pairwise sum
    order = np.lexsort(all_lo.T[::-1])
    value = complex(np.sum(vals[order]))
    return value, target


# ---------------------------------------------------------------------------
# heat kernel


def default_shift(group: Group, g: Point, h: float) -> np.ndarray:
    """Saddle of the shifted integrand: the maximizer of the reference function.

    Near the boundary of the ball the shift is pulled back to norm
    (1 - kappa) pi with kappa = min(0.01, h / (h + |t|)), so the nearest pole
    of V stays resolvable at the oscillation scale h/|t|.
    """
    from .solver import maximize_phi

    theta = maximize_phi(group, g).theta
    norm = operator_norm(group, theta)
    kappa = min(0.01, h / (h + float(np.linalg.norm(g.t))))
    limit = (1.0 - kappa) * PI
    if norm > limit:
        theta = theta * (limit / norm)
    return theta


def _min_spectral_norm(group: Group) -> tuple[float, float]:
    """min and max of ||U(e)|| over unit vectors e."""
    if group.m == 1:
        v = operator_norm(group, np.ones(1))
        return v, v
    if group.m != 2:
        raise ValidationError("heat kernel quadrature supports m <= 2 only")
    ang = np.linspace(0.0, PI, 721)
    vals = [operator_norm(group, np.array([math.cos(a), math.sin(a)])) for a in ang]
    return 0.95 * min(vals), max(vals)


@dataclass(frozen=True)
class HeatValue:
    log_value: float
    integral: complex
    shift: np.ndarray
    radius: float
    error_target: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value > -745.0 else 0.0


def heat_kernel_log(group: Group, g: Point, h: float, cfg: QuadratureConfig | None = None, radius: float | None = None) -> HeatValue:
    """ln p_h(g) with the constant in front of the kernel set to 1."""
    cfg = cfg or QuadratureConfig()
    if group.m > 2:
        raise ValidationError("heat kernel quadrature supports m <= 2 only")
    if not h > 0:
        raise DomainError("h must be positive")
    if g.x.shape != (group.q,) or g.t.shape != (group.m,):
        raise DimensionMismatch("point does not belong to the group")
    shift = _check_shift(group, cfg.contour_shift) if cfg.contour_shift is not None else default_shift(group, g, h)
    c_min, c_max = _min_spectral_norm(group)
    ev = reference_eval(group, g, shift)
    phi = ev.value
    curv = float(np.max(np.abs(np.linalg.eigvalsh(ev.hessian)), initial=0.0))
    width = 0.5 * math.sqrt(4.0 * h / curv) if curv > 0 else 1.0
    gap = (PI - operator_norm(group, shift)) / c_max
    width = min(width, 0.25 * gap, 1.0)
    if radius is None:
        # |V(i s + lam)| <= V(i s) V(lam) and V(lam) <= 2 c|lam| exp(-c|lam|)
        v0 = abs(_v_from_eigenvalues(np.linalg.eigvals(_complex_matrix(group, shift, np.zeros((1, group.m)))))[0])
        goal = 1e-3 * cfg.rel_tol * width**group.m / max(v0, 1e-300)
        r = 1.0
        while (c_min * r) ** (group.m + 1) * math.exp(-c_min * r) * 8.0 > goal and r < 1e4:
            r *= 1.25
        radius = r / c_min * 1.0
    radius = max(radius, 4.0 * width)
    f = _Integrand(group, g, shift, h)
    breaks = [_graded_breaks(width, radius)] * group.m
    value, target = _integrate(f, breaks, cfg)
    if not value.real > 0:
        raise QuadratureFailure(f"non-positive kernel integral {value!r}")
    if abs(value.imag) > max(100.0 * cfg.rel_tol * value.real, 10.0 * target):
        raise QuadratureFailure(f"imaginary residue {value.imag:.3e} exceeds tolerance")
    log_p = -phi / (4.0 * h) + math.log(value.real) - (0.5 * group.q + group.m) * math.log(h)
    return HeatValue(log_p, value, shift, radius, target)


def heat_kernel(group: Group, g: Point, h: float, cfg: QuadratureConfig | None = None) -> float:
    """p_h(g) = h^(-q/2-m) p(x / sqrt h, t / h); underflows to 0 for tiny h."""
    return heat_kernel_log(group, g, h, cfg).value


@dataclass(frozen=True)
class VaradhanEstimate:
    h: np.ndarray
    values: np.ndarray  # -4 h ln p_h(g)
    limit: float
    coefficients: np.ndarray  # (d^2, a, b) of d^2 + a h ln(1/h) + b h


def varadhan_estimate(group: Group, g: Point, h_list, cfg: QuadratureConfig | None = None) -> VaradhanEstimate:
    """Fit -4h ln p_h(g) = d^2 + a h ln(1/h) + b h and return the intercept."""
    h = np.asarray(h_list, dtype=float)
    if h.ndim != 1 or len(h) < 3:
        raise ValidationError("at least three values of h are needed for the fit")
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise ValidationError("h_list must be strictly decreasing and positive")
    vals = np.array([-4.0 * hk * heat_kernel_log(group, g, float(hk), cfg).log_value for hk in h])
    design = np.column_stack([np.ones_like(h), h * np.log(1.0 / h), h])
    coef = np.linalg.lstsq(design, vals, rcond=None)[0]
    return VaradhanEstimate(h, vals, float(coef[0]), coef)
