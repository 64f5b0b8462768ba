"""Quick property checks behind ``ccdist selftest``.

Each check is small enough that the whole suite runs in a few seconds; the
full suites live in the test directory.
"""

from __future__ import annotations


import numpy as np

from .groups import heisenberg_group, n32_group, star_group
from .kernels import PI, cot_gap_ratio, cot_gap_ratio_d1, cot_gap_ratio_d2, cot_gap_slope, cot_gap_slope_d1


def _kernel_inequalities() -> str | None:
    r = np.linspace(1e-3, PI - 1e-3, 200)
    f1, f2 = cot_gap_slope(r), cot_gap_slope_d1(r)
    psi, psi1, psi2 = cot_gap_ratio(r), cot_gap_ratio_d1(r), cot_gap_ratio_d2(r)
    if not np.all((f2 > f1 / r) & (f1 / r > 2 * psi) & (psi * psi2 > 2 * psi1**2)):
        return "second-order kernel inequality fails on (0, pi)"
    return None


def _heisenberg_value() -> str | None:
    from .closed_form import HTypeSpec, htype_distance
    from .solver import distance_squared

    g = heisenberg_group(2).point([1.0, 0.0], [PI / 8])
    a = distance_squared(heisenberg_group(2), g).d_squared
    b = htype_distance(HTypeSpec(((1.0, 1),), 1), g.x, g.t).d_squared
    if abs(a - PI**2 / 4) > 1e-9 or abs(b - PI**2 / 4) > 1e-9:
        return f"Heisenberg distance {a!r}, {b!r} differs from pi^2/4"
    return None


def _star_value() -> str | None:
    from .closed_form import star_distance

    res = star_distance(2, [0.0, 1.0, 0.0], [0.0, 0.5])
    if abs(res.d_squared - (1 + 2 * PI)) > 1e-9 or not res.cut_locus:
        return f"star cut-locus value {res.d_squared!r}"
    return None


def _n32_boundary() -> str | None:
    from .closed_form import n32_distance

    res = n32_distance([1.0, 0.0, 0.0], [0.25 / PI, 0.5 / PI, 0.0])
    if abs(res.d_squared - 2.0) > 1e-9:
        return f"boundary-curve value {res.d_squared!r}"
    return None


def _round_trip() -> str | None:
    from .geodesics import Covector, exp_map
    from .solver import distance_squared

    group = star_group(2)
    cov = Covector(np.array([0.3, -0.7, 0.5]), np.array([0.9, -1.2]))
    end = exp_map(group, cov).endpoint
    d2 = distance_squared(group, end).d_squared
    if abs(d2 - float(cov.zeta0 @ cov.zeta0)) > 1e-8 * d2:
        return f"round trip gives {d2!r}"
    return None


def _concavity() -> str | None:
    from .reference import reference_eval

    group = n32_group()
    rng = np.random.default_rng(7)
    for _ in range(10):
        g = group.point(rng.normal(size=3), rng.normal(size=3))
        tau = rng.normal(size=3)
        tau *= rng.uniform(0, 0.95) * PI / np.linalg.norm(tau)
        if np.max(np.linalg.eigvalsh(reference_eval(group, g, tau).hessian)) > 1e-9:
            return "Hessian of the reference function is not negative semidefinite"
    return None


def _heat_origin() -> str | None:
    from .heat import heat_kernel

    p = heat_kernel(heisenberg_group(2), heisenberg_group(2).point([0.0, 0.0], [0.0]), 1.0)
    if abs(p - PI**2 / 2) > 1e-8:
        return f"heat kernel at the origin {p!r}"
    return None


CHECKS = {
    "kernel_inequalities": _kernel_inequalities,
    "heisenberg_value": _heisenberg_value,
    "star_cut_locus_value": _star_value,
    "n32_boundary_curve": _n32_boundary,
    "geodesic_round_trip": _round_trip,
    "concavity": _concavity,
    "heat_kernel_origin": _heat_origin,
}


def run_selftest() -> list[dict]:
    out = []
    for name, check in CHECKS.items():
        try:
            problem = check()
        except Exception as exc:  # a crash is a failure, reported not raised
            problem = f"{type(exc).__name__}: {exc}"
        out.append({"name": name, "passed": problem is None, "detail": problem or ""})
    return out
