"""Normal geodesics from the origin.

A normal geodesic is fixed by a horizontal covector ``zeta0`` and a vertical
parameter ``theta0``. The horizontal velocity rotates as
``zeta(s) = exp(2 s U~(theta0)) zeta0``; the first layer is its closed
antiderivative, the second layer is integrated by adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .errors import BadTheta, PoleError, QuadratureFailure
from .groups import Group, Point, in_regular_set, spectrum
from .kernels import PI, KernelName, nearest_pole_distance
from .reference import critical_t, reference_eval, reference_value, spectral_frame, value_scale
from .groups import apply_fn


@dataclass(frozen=True)
class Covector:
    zeta0: np.ndarray
    theta0: np.ndarray


@dataclass(frozen=True)
class Geodesic:
    samples: list  # (s, Point)
    endpoint: Point
    length: float
    good: bool
    covector: Covector | None = None

    def csv_rows(self) -> list[list[float]]:
        return [[s, *p.x.tolist(), *p.t.tolist()] for s, p in self.samples]


class _Flow:
    """Spectral closed forms for zeta(s) and x(s)."""

    def __init__(self, group: Group, cov: Covector):
        self.group = group
        spec = spectrum(group, cov.theta0)
        self.lam = spec.eigenvalues
        self.basis = spec.basis
        self.zhat = spec.coordinates(np.asarray(cov.zeta0, dtype=float))

    def zeta(self, s: float) -> np.ndarray:
        return (self.basis @ (np.exp(-2j * s * self.lam) * self.zhat)).real

    def x(self, s: float) -> np.ndarray:
        # int_0^s exp(-2 i r lam) dr = exp(-i s lam) sin(s lam) / lam
        factor = np.exp(-1j * s * self.lam) * s * np.sinc(s * self.lam / PI)
        return (self.basis @ (factor * self.zhat)).real

    def t_rate(self, s: float) -> np.ndarray:
        z = self.zeta(s)
        return 0.5 * np.einsum("kij,j,i->k", self.group.U, self.x(s), z)


def exp_map(group: Group, cov: Covector, n_samples: int = 2, tol: float = 1e-11) -> Geodesic:
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    zeta0 = group.check_x(cov.zeta0)
    theta0 = group.check_tau(cov.theta0)
    cov = Covector(zeta0, theta0)
    flow = _Flow(group, cov)
    grid = np.linspace(0.0, 1.0, n_samples)
    t = np.zeros(group.m)
    samples = [(0.0, group.point(np.zeros(group.q), t))]
    # the integrand oscillates at frequencies up to 4 |lambda|; split accordingly
    pieces = max(1, int(math.ceil(4.0 * float(np.max(np.abs(flow.lam), initial=0.0)) / PI)))
    for a, b in zip(grid[:-1], grid[1:]):
        if np.any(zeta0):
            sub = np.linspace(a, b, max(2, int(math.ceil(pieces * (b - a))) + 1))
            for c, d in zip(sub[:-1], sub[1:]):
                val, err = quad_vec(flow.t_rate, c, d, epsabs=tol / (n_samples * pieces), epsrel=0.0, limit=200)
                if not np.all(np.isfinite(val)) or err > 10 * tol:
                    raise QuadratureFailure(f"second-layer quadrature error estimate {err:.3e}")
                t = t + val
        samples.append((float(b), group.point(flow.x(b), t)))
    endpoint = samples[-1][1]
    return Geodesic(samples, endpoint, float(np.linalg.norm(zeta0)), in_regular_set(group, theta0), cov)


def initial_velocity(group: Group, x0, theta0) -> np.ndarray:
    """zeta0 with x-endpoint x0: zeta0 = (U/sin U) exp(-U~) x0 at theta0."""
    x0 = group.check_x(x0)
    theta0 = group.check_tau(theta0)
    if not in_regular_set(group, theta0):
        raise BadTheta("theta0 has an eigenvalue at a nonzero multiple of pi")
    spec = spectrum(group, theta0)
    lam = spec.eigenvalues
    factor = np.exp(1j * lam) / np.sinc(lam / PI)
    return (spec.basis @ (factor * spec.coordinates(x0))).real


def _bands(lam: np.ndarray) -> np.ndarray:
    return np.floor(np.abs(lam) / PI).astype(int)


def _band_frame(group: Group, g: Point, theta: np.ndarray, ref_bands: np.ndarray, margin: float):
    """Spectral frame at theta if it keeps the reference band pattern, else None."""
    frame = spectral_frame(group, g.x, theta)
    lam = frame[0]
    if not np.array_equal(_bands(lam), ref_bands):
        return None
    if not all(abs(v) < PI - margin or nearest_pole_distance(v) > margin for v in lam):
        return None
    return frame


def _solve_critical(group: Group, g: Point, seed: np.ndarray, max_norm: float | None, max_iter: int = 60):
    """Trust-region Newton on the gradient, confined to the seed's band pattern."""
    scale = value_scale(g)
    theta = np.array(seed, dtype=float)
    margin = 1e-8 * (1.0 + float(np.linalg.norm(theta)))
    lam0 = spectrum(group, theta).eigenvalues
    if not all(abs(v) < PI - margin or nearest_pole_distance(v) > margin for v in lam0):
        return None
    bands = _bands(lam0)
    try:
        ev = reference_eval(group, g, theta)
    except PoleError:
        return None
    radius = 0.5 * (1.0 + float(np.linalg.norm(theta)))
    history = []
    for it in range(max_iter):
        res = float(np.linalg.norm(ev.gradient))
        if res <= 1e-11 * (1.0 + scale):
            return theta, ev
        history.append(res)
        # give up on seeds that wander without converging
        if it >= 10 and res > 0.5 * history[it - 10]:
            return None
        try:
            step = -np.linalg.lstsq(ev.hessian, ev.gradient, rcond=1e-14)[0]
        except np.linalg.LinAlgError:
            return None
        norm = float(np.linalg.norm(step))
        if norm > radius:
            step *= radius / norm
        accepted = False
        for _ in range(16):
            trial = theta + step
            if max_norm is None or np.linalg.norm(trial) <= max_norm * 10:
                frame = _band_frame(group, g, trial, bands, margin)
                if frame is not None:
                    try:
                        tev = reference_eval(group, g, trial, frame=frame)
                    except PoleError:
                        tev = None
                    if tev is not None and np.linalg.norm(tev.gradient) < res:
                        theta, ev = trial, tev
                        accepted = True
                        break
            step *= 0.5
        if not accepted:
            return None
        radius = min(2.0 * radius, 4.0 * (1.0 + float(np.linalg.norm(theta))))
    return None


def normal_geodesics_through(group: Group, g: Point, theta_seeds, max_norm: float | None = None, check_endpoint: bool = True):
    """Critical points of the reference function of g reached from the seeds.

    Returns a list of ``(Covector, length_squared, endpoint_residual)``, one
    per distinct critical point on the regular set.
    """
    if not np.any(g.x):
        return []
    found: list = []
    for seed in theta_seeds:
        seed = group.check_tau(seed)
        sol = _solve_critical(group, g, seed, max_norm)
        if sol is None:
            continue
        theta, ev = sol
        if max_norm is not None and float(np.max(np.abs(spectrum(group, theta).eigenvalues))) > max_norm:
            continue
        tol = 1e-8 * (1.0 + float(np.linalg.norm(theta)))
        if any(np.linalg.norm(theta - c.theta0) <= tol for c, _, _ in found):
            continue
        zeta0 = initial_velocity(group, g.x, theta)
        cov = Covector(zeta0, theta)
        residual = float("nan")
        if check_endpoint:
            end = exp_map(group, cov).endpoint
            residual = float(np.linalg.norm(end.x - g.x) + np.linalg.norm(end.t - g.t))
        found.append((cov, float(ev.value), residual))
    return found


def verify_length_identity(group: Group, x, theta) -> tuple[float, float, float]:
    """Compare the reference value at a critical theta with |(U/sin U) x|^2."""
    x = group.check_x(x)
    theta = group.check_tau(theta)
    g = group.point(x, critical_t(group, x, theta))
    lhs = reference_value(group, g, theta)
    y = apply_fn(spectrum(group, theta), KernelName.S_OVER_SIN, x)
    rhs = float(y @ y)
    return lhs, rhs, abs(lhs - rhs)
