"""Command-line front end.

Every command prints one JSON document on standard output. Validation
problems exit with status 1, numerical failures with status 2, a failing
self-test with status 3; the error itself goes to standard error as JSON.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, ValidationError
from .groups import Group, Point, group_from_json, heisenberg_group, n32_group, star_group

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_SELFTEST = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# serialization


def _number(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    text = format(v, ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _number(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def parse_vector(text: str) -> np.ndarray:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad vector {text!r}: {exc}") from exc
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ValidationError(f"bad vector {text!r}")
    return np.array(vals)


def parse_vectors(text: str) -> list[np.ndarray]:
    return [parse_vector(part) for part in text.split(";") if part.strip()]


# ---------------------------------------------------------------------------
# groups


@dataclass(frozen=True)
class GroupSpec:
    group: Group
    family: str  # "htype", "star", "n32" or "generic"
    detail: object = None


def load_group(name: str) -> GroupSpec:
    """Resolve ``--group``: an existing JSON file wins over the built-in names."""
    from .closed_form import HTypeSpec, htype_group

    path = Path(name)
    if name.endswith(".json") or path.is_file():
        return GroupSpec(group_from_json(path), "generic")
    kind, _, rest = name.partition(":")
    try:
        if kind == "heisenberg":
            q = int(rest or 2)
            spec = HTypeSpec(((1.0, q // 2),), 1)
            return GroupSpec(heisenberg_group(q), "htype", spec)
        if kind == "htype":
            m_text, _, blocks_text = rest.partition(":")
            blocks = []
            for item in blocks_text.split(","):
                a, _, k = item.partition("x")
                blocks.append((float(a), int(k)))
            spec = HTypeSpec(tuple(sorted(blocks)), int(m_text))
            return GroupSpec(htype_group(spec), "htype", spec)
        if kind == "star":
            n = int(rest)
            return GroupSpec(star_group(n), "star", n)
        if kind == "n32" and not rest:
            return GroupSpec(n32_group(), "n32")
    except ValueError as exc:
        raise ValidationError(f"bad group spec {name!r}: {exc}") from exc
    raise ValidationError(f"unknown group {name!r}")


def _closed_form(spec: GroupSpec, g: Point):
    from .closed_form import htype_distance, n32_distance, star_distance

    if spec.family == "htype":
        return htype_distance(spec.detail, g.x, g.t)
    if spec.family == "star":
        return star_distance(spec.detail, g.x, g.t)
    if spec.family == "n32":
        return n32_distance(g.x, g.t)
    return None


def _distance(spec: GroupSpec, g: Point, generic: bool):
    from .solver import distance_squared

    res = None if generic else _closed_form(spec, g)
    return res if res is not None else distance_squared(spec.group, g)


def _result_json(res) -> dict:
    return {
        "d2": float(res.d_squared),
        "theta": None if res.theta is None else np.asarray(res.theta, dtype=float),
        "certificate": "EXACT" if res.certificate.exact else "LOWER_BOUND",
        "certificate_detail": res.certificate.name,
        "method": res.method,
        "cut_locus": res.cut_locus,
        "note": res.note,
    }


# ---------------------------------------------------------------------------
# commands


def _point(args, spec: GroupSpec) -> Point:
    return spec.group.point(parse_vector(args.x), parse_vector(args.t))


def cmd_dist(args) -> tuple[int, dict]:
    spec = load_group(args.group)
    g = _point(args, spec)
    return EXIT_OK, _result_json(_distance(spec, g, args.generic))


def cmd_geodesic(args) -> tuple[int, list]:
    from .geodesics import normal_geodesics_through
    from .solver import default_critical_seeds

    spec = load_group(args.group)
    g = _point(args, spec)
    seeds = parse_vectors(args.seeds) if args.seeds else default_critical_seeds(spec.group, g)
    found = normal_geodesics_through(spec.group, g, seeds, max_norm=args.max_norm)
    out = [
        {"zeta0": cov.zeta0, "theta0": cov.theta0, "length_squared": value, "endpoint_residual": resid}
        for cov, value, resid in sorted(found, key=lambda item: item[1])
    ]
    return EXIT_OK, out


def cmd_expmap(args) -> tuple[int, dict]:
    from .geodesics import Covector, exp_map

    spec = load_group(args.group)
    tol = args.tol if args.tol is not None else 1e-11
    geo = exp_map(spec.group, Covector(parse_vector(args.zeta), parse_vector(args.theta)), args.samples, tol)
    path = Path(args.csv)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        q, m = spec.group.q, spec.group.m
        writer.writerow(["s"] + [f"x{i + 1}" for i in range(q)] + [f"t{k + 1}" for k in range(m)])
        for row in geo.csv_rows():
            writer.writerow([_number(float(v)) for v in row])
    end = geo.endpoint
    return EXIT_OK, {"csv": str(path), "x": end.x, "t": end.t, "length": geo.length, "good": geo.good}


def cmd_cut_test(args) -> tuple[int, dict]:
    from .solver import classify_point

    spec = load_group(args.group)
    g = _point(args, spec)
    res = None if args.generic else _closed_form(spec, g)
    if res is not None:
        return EXIT_OK, {"cut_locus": res.cut_locus, "d2": float(res.d_squared), "method": "closed_form"}
    cls = classify_point(spec.group, g)
    return EXIT_OK, {"cut_locus": None, "classification": cls.value, "method": "solver"}


def cmd_varadhan(args) -> tuple[int, dict]:
    from .heat import QuadratureConfig, varadhan_estimate

    spec = load_group(args.group)
    g = _point(args, spec)
    cfg = QuadratureConfig(rel_tol=args.tol) if args.tol is not None else QuadratureConfig()
    est = varadhan_estimate(spec.group, g, parse_vector(args.h_list), cfg)
    return EXIT_OK, {"h": est.h, "values": est.values, "limit": est.limit, "coefficients": est.coefficients}


def cmd_selftest(args) -> tuple[int, list]:
    from .selftest import run_selftest

    results = run_selftest()
    code = EXIT_OK if all(r["passed"] for r in results) else EXIT_SELFTEST
    return code, results


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccdist", description="Sub-Riemannian distances on step-two Carnot groups.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, point=True):
        p.add_argument("--group", required=True, help="heisenberg:q, htype:m:a1xk1,..., star:n, n32 or a JSON file")
        if point:
            p.add_argument("--x", required=True, help="first layer, comma separated")
            p.add_argument("--t", required=True, help="second layer, comma separated")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--json", action="store_true", help="JSON output (the default)")

    p = sub.add_parser("dist", help="squared distance with a certificate")
    common(p)
    p.add_argument("--generic", action="store_true", help="use the generic solver even for closed-form families")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("geodesic", help="normal geodesics through a point")
    common(p)
    p.add_argument("--seeds", default=None, help="semicolon separated parameter seeds")
    p.add_argument("--max-norm", type=float, default=None)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("expmap", help="sample a normal geodesic into a CSV file")
    common(p, point=False)
    p.add_argument("--zeta", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--samples", type=int, default=65)
    p.add_argument("--csv", default="geodesic.csv")
    p.set_defaults(func=cmd_expmap)

    p = sub.add_parser("cut-test", help="cut-locus membership")
    common(p)
    p.add_argument("--generic", action="store_true")
    p.set_defaults(func=cmd_cut_test)

    p = sub.add_parser("varadhan", help="small-time heat kernel estimate of the squared distance")
    common(p)
    p.add_argument("--h-list", required=True, help="decreasing positive h values, comma separated")
    p.set_defaults(func=cmd_varadhan)

    p = sub.add_parser("selftest", help="run the built-in property checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def _limit_threads() -> None:
    value = os.environ.get("CCDIST_THREADS")
    if not value:
        return
    try:
        n = int(value)
    except ValueError:
        n = 0
    if n < 1:
        raise ValidationError(f"CCDIST_THREADS must be a positive integer, got {value!r}")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    threadpool_limits(n)


def main(argv=None) -> int:
    try:
        _limit_threads()
        args = build_parser().parse_args(argv)
        code, payload = args.func(args)
    except ValidationError as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL
    print(dumps(payload))
    return code


if __name__ == "__main__":
    sys.exit(main())
