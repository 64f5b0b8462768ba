"""Maximization of the reference function over the spectral ball.

The supremum of tau -> value(g; tau) over {||U(tau)|| < pi} bounds the squared
distance from below, with equality at interior maximizers. The maximizer is
found by a log-barrier continuation: each stage maximizes

    value(tau) + s * sum_i log(pi^2 - lambda_i(tau)^2)

by damped Newton, and after each stage a pure Newton polish checks whether an
interior critical point exists. Suprema attained only on the boundary are
reported as limits, extrapolated in the barrier weight s.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NewtonFailure, NonConvergence, PoleError
from .groups import Group, Point, operator_norm
from .kernels import PI, PI_LO
from .reference import (
    ReferenceEval,
    kernel_chain_residual,
    reference_eval,
    reference_value,
    spectral_frame,
    value_scale,
)

BARRIER_WEIGHTS = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10)
MAX_NEWTON_STEPS = 500
INTERIOR_MARGIN = 1e-6


class Location(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"


class Certificate(enum.Enum):
    """How a squared distance is justified.

    EXACT_NONDEGENERATE: interior nondegenerate maximizer (equality with the sup).
    EXACT_CLOSURE: interior degenerate maximizer, or a closed form on the
        closure of the set where maximizers exist.
    EXACT_OUTER_CRITICAL: equals the value at a critical point outside the
        spectral ball, proven minimal by a closed form.
    LOWER_BOUND: only the supremum bound is certified.
    """

    EXACT_NONDEGENERATE = "exact_nondegenerate"
    EXACT_CLOSURE = "exact_closure"
    EXACT_OUTER_CRITICAL = "exact_outer_critical"
    LOWER_BOUND = "lower_bound"

    @property
    def exact(self) -> bool:
        return self is not Certificate.LOWER_BOUND


class PointClass(enum.Enum):
    NONDEGENERATE = "nondegenerate"
    MULTIPLE_MAXIMIZERS = "multiple_maximizers"
    BOUNDARY_SUP = "boundary_sup"


@dataclass(frozen=True)
class MaxResult:
    theta: np.ndarray
    value: float
    location: Location
    nondegenerate: bool
    min_negative_curvature: float
    gradient_norm: float = 0.0
    boundary_distance: float = 0.0
    stage_values: tuple = field(default=())


@dataclass(frozen=True)
class DistanceResult:
    d_squared: float
    certificate: Certificate
    theta: np.ndarray | None
    geodesic_available: bool
    method: str = "solver"
    location: Location | None = None
    note: str = ""
    cut_locus: bool | None = None


# ---------------------------------------------------------------------------
# barrier


def _barrier(lam: np.ndarray, ehat: np.ndarray):
    gap_minus = (PI - lam) + PI_LO
    gap_plus = (PI + lam) + PI_LO
    value = float(np.sum(np.log(gap_minus) + np.log(gap_plus)))
    slope = -1.0 / gap_minus + 1.0 / gap_plus
    grad = np.einsum("a,kaa->k", slope, ehat).real
    dd = -(np.outer(1.0 / gap_minus, 1.0 / gap_minus) + np.outer(1.0 / gap_plus, 1.0 / gap_plus))
    hess = np.einsum("ab,kab,lba->kl", dd, ehat, ehat).real
    return value, grad, 0.5 * (hess + hess.T)


def _ball_gap(group: Group, tau: np.ndarray) -> float:
    return PI - operator_norm(group, tau)


@dataclass
class _Stage:
    tau: np.ndarray
    ev: ReferenceEval
    objective: float
    gradient: np.ndarray
    hessian: np.ndarray
    norm: float


def _stage_eval(group: Group, g: Point, tau: np.ndarray, weight: float) -> tuple[_Stage | None, float]:
    """Objective data at tau (None outside the open ball) and ||U(tau)||."""
    lam = np.linalg.eigvalsh(group.hermitian(tau)) if np.any(tau) else np.zeros(1)
    norm = max(-float(lam[0]), float(lam[-1]))
    if norm >= PI:
        return None, norm
    frame = spectral_frame(group, g.x, tau)
    try:
        ev = reference_eval(group, g, tau, frame=frame)
    except PoleError:
        return None, norm
    if weight == 0.0:
        return _Stage(tau, ev, ev.value, ev.gradient, ev.hessian, norm), norm
    bv, bg, bh = _barrier(frame[0], frame[2])
    obj = ev.value + weight * bv
    return _Stage(tau, ev, obj, ev.gradient + weight * bg, ev.hessian + weight * bh, norm), norm


def _newton_direction(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """Ascent direction for a concave model, with a Levenberg floor."""
    neg = -hess
    w = np.linalg.eigvalsh(neg)
    scale = max(float(np.trace(neg)) / len(grad), 1e-12 * (1.0 + float(np.linalg.norm(grad))))
    shift = max(0.0, -w[0]) + 1e-10 * scale
    step = np.linalg.solve(neg + shift * np.eye(len(grad)), grad)
    if not np.all(np.isfinite(step)):
        raise NewtonFailure("non-finite Newton step")
    return step


def _shrink(alpha: float, cur_norm: float, trial_norm: float) -> float:
    """Next trial length after a rejection.

    The operator norm is convex along the line, so when the trial left the
    ball the chord bound gives a length that is certainly inside.
    """
    if trial_norm >= PI and trial_norm > cur_norm:
        inside = 0.9 * alpha * (PI - cur_norm) / (trial_norm - cur_norm)
        return min(0.5 * alpha, inside)
    return 0.5 * alpha


def _ascend(group: Group, g: Point, tau: np.ndarray, weight: float, tol: float, max_steps: int, polish: bool = False):
    """Damped Newton ascent; returns (stage, converged).

    Far from the optimum steps are damped by an Armijo search on the
    objective. Once the predicted gain drops to rounding level the objective
    can no longer rank iterates, so full steps are accepted on a decrease of
    the gradient norm instead.
    """
    cur, _ = _stage_eval(group, g, tau, weight)
    if cur is None:
        raise NewtonFailure("start point is not inside the spectral ball")
    blocked = 0
    for it in range(max_steps):
        step = _newton_direction(cur.gradient, cur.hessian)
        decrement = float(cur.gradient @ step)
        if decrement <= max(tol, 1e-20 * (1.0 + abs(cur.objective))):
            return cur, True
        if np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(cur.tau)):
            return cur, True
        if decrement <= 1e-10 * (1.0 + abs(cur.objective)):
            trial, _ = _stage_eval(group, g, cur.tau + step, weight)
            if trial is not None and np.linalg.norm(trial.gradient) < np.linalg.norm(cur.gradient):
                cur = trial
                continue
        alpha = 1.0
        accepted = None
        while alpha > 1e-12:
            trial, norm = _stage_eval(group, g, cur.tau + alpha * step, weight)
            if trial is not None and math.isfinite(trial.objective):
                if trial.objective >= cur.objective + 1e-4 * alpha * decrement:
                    accepted = trial
                    break
            alpha = _shrink(alpha, cur.norm, norm)
        if accepted is None:
            return cur, False
        if np.array_equal(accepted.tau, cur.tau):
            return cur, True  # no representable progress left
        blocked = blocked + 1 if alpha < 1e-3 else 0
        if polish and blocked >= 3:
            return accepted, False
        cur = accepted
    if polish:
        return cur, False
    grad_norm = float(np.linalg.norm(cur.gradient))
    raise NonConvergence(max_steps, grad_norm, "barrier Newton did not converge")


def _interior_polish(group: Group, g: Point, tau: np.ndarray, scale: float):
    cur, ok = _ascend(group, g, tau, 0.0, 1e-26 * (1 + scale) ** 2, 60, polish=True)
    grad_norm = float(np.linalg.norm(cur.gradient))
    gap = _ball_gap(group, cur.tau)
    if grad_norm <= 1e-10 * (1.0 + scale) and gap >= INTERIOR_MARGIN:
        return cur
    return None


def _classify_degeneracy(group: Group, g: Point, theta: np.ndarray, hess: np.ndarray) -> tuple[bool, float]:
    neg = -hess
    w, vecs = np.linalg.eigh(neg)
    lam_min = float(w[0])
    trace = float(np.trace(neg))
    if trace <= 0.0 or not np.any(g.x):
        return False, lam_min
    rel = lam_min / (trace / group.m)
    if rel > 1e-4:
        return True, lam_min
    if rel <= 1e-10:
        return False, lam_min
    # borderline: the kernel-chain criterion is exact linear algebra
    v = vecs[:, 0]
    chain = kernel_chain_residual(group, g.x, theta, v) <= 1e-8
    flat = chain and abs(float(g.t @ v)) <= 1e-8 * (1.0 + value_scale(g))
    return not flat, lam_min


def _single_start(group: Group, g: Point, start: np.ndarray) -> MaxResult:
    scale = value_scale(g)
    tau = start
    values = []
    weights = []
    last = None
    for k, w in enumerate(BARRIER_WEIGHTS):
        weight = w * scale
        last, _ = _ascend(group, g, tau, weight, 1e-24 * (1 + scale) ** 2, MAX_NEWTON_STEPS)
        tau = last.tau
        values.append(last.ev.value)
        weights.append(weight)
        polished = _interior_polish(group, g, tau, scale)
        if polished is not None:
            nondeg, lam_min = _classify_degeneracy(group, g, polished.tau, polished.hessian)
            return MaxResult(
                polished.tau.copy(),
                polished.ev.value,
                Location.INTERIOR,
                nondeg,
                lam_min,
                float(np.linalg.norm(polished.gradient)),
                _ball_gap(group, polished.tau),
                tuple(values),
            )
    v1, v2 = values[-2], values[-1]
    s1, s2 = weights[-2], weights[-1]
    extrapolated = v2 + (v2 - v1) * s2 / (s1 - s2)
    value = max(extrapolated, v2)
    ev = last.ev
    lam_min = float(np.linalg.eigvalsh(-ev.hessian)[0])
    return MaxResult(
        tau.copy(),
        value,
        Location.BOUNDARY,
        False,
        lam_min,
        float(np.linalg.norm(ev.gradient)),
        _ball_gap(group, tau),
        tuple(values),
    )


def axis_seeds(group: Group, fraction: float = 0.5) -> list[np.ndarray]:
    seeds = []
    for k in range(group.m):
        for sign in (1.0, -1.0):
            e = np.zeros(group.m)
            e[k] = sign
            seeds.append(fraction * PI * e / operator_norm(group, e))
    return seeds


def maximize_phi(group: Group, g: Point) -> MaxResult:
    """Supremum of the reference function of g over the spectral ball."""
    scale = value_scale(g)
    zero = np.zeros(group.m)
    if scale == 0.0:
        return MaxResult(zero, 0.0, Location.INTERIOR, False, 0.0, 0.0, PI)
    failures = []
    for start in [zero] + axis_seeds(group):
        try:
            return _single_start(group, g, start)
        except (NonConvergence, NewtonFailure, np.linalg.LinAlgError) as exc:
            failures.append(exc)
    last = failures[-1]
    raise NonConvergence(MAX_NEWTON_STEPS, getattr(last, "residual", float("nan")), "all starts failed")


def distance_squared(group: Group, g: Point) -> DistanceResult:
    res = maximize_phi(group, g)
    if res.location is Location.INTERIOR:
        cert = Certificate.EXACT_NONDEGENERATE if res.nondegenerate else Certificate.EXACT_CLOSURE
        return DistanceResult(res.value, cert, res.theta, res.nondegenerate, "solver", res.location)
    return DistanceResult(res.value, Certificate.LOWER_BOUND, res.theta, False, "solver", res.location)


def classify_point(group: Group, g: Point) -> PointClass:
    res = maximize_phi(group, g)
    if res.location is Location.BOUNDARY:
        return PointClass.BOUNDARY_SUP
    return PointClass.NONDEGENERATE if res.nondegenerate else PointClass.MULTIPLE_MAXIMIZERS


@dataclass(frozen=True)
class CriticalInfimum:
    value: float
    theta: np.ndarray | None
    count: int
    candidates: tuple


def critical_point_infimum(group: Group, g: Point, seeds=None, box: float = 3.0) -> CriticalInfimum:
    """Smallest reference value over critical points found in a bounded box.

    Searches critical points of the reference function outside as well as
    inside the spectral ball (on the regular set) by Newton shooting from the
    supplied seeds; the box has radius ``box * pi`` in operator norm.
    """
    from .geodesics import normal_geodesics_through

    if seeds is None:
        seeds = default_critical_seeds(group, g)
    found = normal_geodesics_through(group, g, seeds, max_norm=box * PI, check_endpoint=False)
    if not found:
        return CriticalInfimum(math.inf, None, 0, ())
    best = min(found, key=lambda item: item[1])
    return CriticalInfimum(best[1], best[0].theta0.copy(), len(found), tuple(found))


def default_critical_seeds(group: Group, g: Point, extended: bool = False) -> list[np.ndarray]:
    """Seeds for the critical-point search.

    The ball maximizer pushed outward reaches critical points just past the
    rim; ``extended`` adds axis seeds beyond the ball, which is much slower.
    """
    seeds = []
    try:
        res = maximize_phi(group, g)
        for factor in (1.0, 1.05, 1.1, 1.2, 1.3, 1.4):
            seeds.append(res.theta * factor)
    except NonConvergence:
        pass
    for fraction in (0.5, 1.1, 1.3) if extended else (0.5,):
        seeds.extend(axis_seeds(group, fraction))
    return seeds


def value_at(group: Group, g: Point, tau) -> float:
    return reference_value(group, g, tau)
