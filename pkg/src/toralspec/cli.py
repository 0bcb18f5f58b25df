"""Command-line front end: one subcommand per experiment, JSON reports on stdout."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import BudgetError, CheckFailedError, ClosingFailedError, ToralSpecError
from .exact import RatMatrix, as_poly
from .measures import HaarCoset, empirical_measure, torus_family, weak_star_distance
from .spectral import bounded_below_set, newton_polygon, unstable_product_check
from .subshift import product_counterexample_report
from .symbolic import SymbolicPoint
from .torus import Subtorus, TorusPoint, as_automorphism, periodic_count, periodic_points
from .tracing import Specification, check_partial_trace, close_orbit, trace_spec, trace_spec_periodic
from .unipotent import SupportDescriptor, interval_permutation, strong_dpm_sequence

CHECK_FAILURES = (CheckFailedError, ClosingFailedError, BudgetError)


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, bool) or v is None or isinstance(v, (int, float, str)):
        return v
    if hasattr(v, "to_text"):
        return v.to_text()
    return str(v)


def check(name, passed, value=None, bound=None) -> dict:
    return {"name": name, "passed": bool(passed), "value": value, "bound": bound}


def _random_point(rng, d: int, digits: int = 6) -> TorusPoint:
    den = 10 ** digits
    return TorusPoint([Fraction(int(rng.integers(den)), den) for _ in range(d)], exact=True)


# ------------------------------------------------------------ commands


def cmd_periodic_points(a):
    A = as_automorphism(a.matrix)
    pts = periodic_points(A, a.n)
    det = abs(periodic_count(A, a.n))
    res = {"count": len(pts), "det": det}
    if a.list_points:
        res["points"] = [p.to_text() for p in pts]
    return res, [check("count_equals_det", len(pts) == det, len(pts), det)], None


def cmd_close_orbit(a):
    A = as_automorphism(a.matrix)
    rng = np.random.default_rng(a.seed)
    x = TorusPoint(a.point) if a.point else _random_point(rng, A.dim)
    r = close_orbit(A, x, a.n, a.eps)
    res = {"x": x.to_text(), "y": r.point.to_text(), "window": r.window, "max_error": float(r.max_error),
           "candidates": r.candidates}
    return res, [check("traces_window", r.max_error < Fraction(repr(a.eps)), float(r.max_error), a.eps)], None


def cmd_trace_spec(a):
    A = as_automorphism(a.matrix)
    if not a.spec:
        raise ValueError("--spec <file> is required")
    spec = Specification.from_text(Path(a.spec).read_text(encoding="utf-8"))
    y = trace_spec_periodic(A, spec, a.n, a.eps) if a.n else trace_spec(A, spec, a.eps)
    rep = check_partial_trace(A, spec, y, a.eps)
    res = {"y": y.to_text(), "fractions": [str(f) for f in rep.fractions]}
    return res, [check("partial_trace", rep.ok, min(float(f) for f in rep.fractions), 1 - a.eps)], None


def cmd_bounded_below(a):
    P = bounded_below_set(as_poly(a.poly), a.c, a.horizon)
    res = {"modulus": P.modulus, "size": len(P.elements), "first": list(P.elements[:20]),
           "max_gap": P.max_gap(), "gap_bound": P.gap_bound, "delta": P.delta}
    checks = [check("gaps_bounded", P.max_gap() <= P.gap_bound, P.max_gap(), P.gap_bound),
              check("delta_positive", P.delta > 0, P.delta, 0)]
    return res, checks, None


def cmd_newton(a):
    f = as_poly(a.poly)
    poly = newton_polygon(f, a.p)
    res = {"vertices": poly.vertices, "slopes": [[str(s), n] for s, n in poly.slopes],
           "root_valuations": [[str(v), n] for v, n in poly.root_valuations]}
    total = sum(n for _, n in poly.slopes)
    return res, [check("lengths_sum_to_degree", total == f.degree, total, f.degree)], None


def cmd_product_formula(a):
    r = unstable_product_check(as_poly(a.poly))
    res = {"ell": r.ell, "primes": r.primes, "finite_product": str(r.finite_product),
           "per_prime": r.per_prime, "archimedean_expanding": r.archimedean_expanding}
    return res, [check("product_equals_ell", r.ok, str(r.finite_product), r.ell)], None


def _descriptor(a) -> SupportDescriptor:
    return SupportDescriptor.from_text(a.descriptor)


def cmd_unipotent_approx(a):
    U = as_automorphism(a.matrix)
    mu = _descriptor(a)
    ns = [int(v) for v in str(a.n).split(",")]
    fam = torus_family(U.dim, a.terms)
    haar = HaarCoset.from_descriptor(U, mu)
    rows = []
    for n in ns:
        s = strong_dpm_sequence(U, mu, [n])
        m = empirical_measure(U, s.points[n], s.c * n)
        dist, err = weak_star_distance(m, haar, fam)
        rows.append({"n": n, "period": s.c * n, "point": s.points[n].to_text(), "distance": dist})
    res = {"c": rows[0]["period"] // ns[0] if rows else None, "curve": rows, "certified_error": fam.tail}
    checks = [check("final_distance", rows[-1]["distance"] < a.tol, rows[-1]["distance"], a.tol)]
    return res, checks, ("unipotent_curve", ["n", "period", "distance"], [[r["n"], r["period"], r["distance"]]
                                                                          for r in rows])


def cmd_interval_perm(a):
    U = as_automorphism(a.matrix)
    mu = _descriptor(a)
    x = SymbolicPoint.parse(a.point)
    m = interval_permutation(U, mu, x, a.K, a.eps)
    bound = (1 - Fraction(repr(a.eps))) * Fraction(m.q, a.K)
    res = {"q": m.q, "K": m.K, "z": m.z.to_text(), "good_count": m.good_count, "good_fraction": float(m.good_fraction),
           "boxes": m.boxes, "max_count_gap": m.max_count_gap}
    return res, [check("interval_inequality", m.ok, m.good_count, float(bound))], None


def cmd_dpm_pipeline(a):
    from .pipeline import dpm_pipeline

    A = as_automorphism(a.matrix)
    Y = Subtorus(a.subtorus, dim=A.dim)
    mu = _descriptor(a)
    x = SymbolicPoint.parse(a.point)
    r = dpm_pipeline(A, Y, mu, x, a.eps, reference_length=a.reference_length)
    res = {"point": r.point.to_text(), "period": r.period, "distance_to_target": r.distance_to_target,
           "certified_error": r.certified_error, "params": r.params, "diagnostics": r.diagnostics}
    periodic = r.point.is_fixed_by(A.power(r.period))
    checks = [check("exactly_periodic", periodic, r.period, None),
              check("distance_bound", r.ok, r.distance_to_target, r.bound + r.certified_error)]
    return res, checks, None


def cmd_subshift(a):
    rep = product_counterexample_report(a.maxpow2, a.maxpow3, a.L)
    rows = [[p, n + 1, v] for p, curve in rep.factor_curves.items() for n, v in enumerate(curve)]
    return rep.to_json(), rep.checks, ("factor_curves", ["p", "n", "distance"], rows)


COMMANDS = {
    "periodic-points": cmd_periodic_points,
    "close-orbit": cmd_close_orbit,
    "trace-spec": cmd_trace_spec,
    "bounded-below": cmd_bounded_below,
    "newton": cmd_newton,
    "product-formula": cmd_product_formula,
    "unipotent-approx": cmd_unipotent_approx,
    "interval-perm": cmd_interval_perm,
    "dpm-pipeline": cmd_dpm_pipeline,
    "subshift": cmd_subshift,
}


# ------------------------------------------------------------ parsing


def read_config(path: str) -> dict:
    """UTF-8 'key = value' lines; '#' starts a comment."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {line!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="directory for CSV curve files")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--config", default=None)

    p = argparse.ArgumentParser(prog="toralspec", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name):
        return sub.add_parser(name, parents=[common])

    sp = add("periodic-points")
    sp.add_argument("--matrix", default="2,1;1,1")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--list-points", action="store_true")

    sp = add("close-orbit")
    sp.add_argument("--matrix", default="2,1;1,1")
    sp.add_argument("--point", default=None)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--eps", type=float, default=0.05)

    sp = add("trace-spec")
    sp.add_argument("--matrix", default="2,1;1,1")
    sp.add_argument("--spec", required=False, default=None, help="specification text file")
    sp.add_argument("--n", type=int, default=0, help="period (0: no periodicity)")
    sp.add_argument("--eps", type=float, default=0.1)

    sp = add("bounded-below")
    sp.add_argument("--poly", default="1,-1,-1,-1,1")
    sp.add_argument("--c", type=int, default=1)
    sp.add_argument("--horizon", type=int, default=10000)

    sp = add("newton")
    sp.add_argument("--poly", required=False, default="1,-3,1")
    sp.add_argument("--p", type=int, default=2)

    sp = add("product-formula")
    sp.add_argument("--poly", default="-1/2,-3/2,1")

    sp = add("unipotent-approx")
    sp.add_argument("--matrix", default="1,1;0,1")
    sp.add_argument("--descriptor", default="a = 0, phi; H = 1;0; m = 1")
    sp.add_argument("--n", default="25,50,100,200")
    sp.add_argument("--terms", type=int, default=64)
    sp.add_argument("--tol", type=float, default=0.05)

    sp = add("interval-perm")
    sp.add_argument("--matrix", default="1,1;0,1")
    sp.add_argument("--descriptor", default="a = 0, phi; H = 1;0; m = 1")
    sp.add_argument("--point", default="sqrt(2), phi")
    sp.add_argument("--K", type=int, default=7)
    sp.add_argument("--eps", type=float, default=0.2)

    sp = add("dpm-pipeline")
    sp.add_argument("--matrix", default="1,0,0;1,2,1;0,1,1")
    sp.add_argument("--subtorus", default="0,0;1,0;0,1")
    sp.add_argument("--descriptor", default="a = sqrt(2)-1; H = ; m = 1")
    sp.add_argument("--point", default="sqrt(2)-1, sqrt(3)-1, sqrt(5)-2")
    sp.add_argument("--eps", type=float, default=0.25)
    sp.add_argument("--reference-length", type=int, default=10**5)

    sp = add("subshift")
    sp.add_argument("--maxpow2", type=int, default=10)
    sp.add_argument("--maxpow3", type=int, default=7)
    sp.add_argument("--L", type=int, default=6)
    return p


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        # string defaults go through each option's type; explicit flags still win
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _emit_csv(table, out: str | None):
    name, header, rows = table
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        fh = open(Path(out) / f"{name}.csv", "w", newline="", encoding="utf-8")
    else:
        fh = sys.stdout
    w = csv.writer(fh)
    w.writerow(header)
    w.writerows(rows)
    if out:
        fh.close()


def run(argv=None) -> tuple[int, dict]:
    t0 = time.perf_counter()
    try:
        args = parse(argv)
    except SystemExit as exc:
        return (2 if exc.code else 0), {}
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out", "format", "config")}
    report = {"command": args.command, "parameters": params}
    code = 0
    table = None
    try:
        results, checks, table = COMMANDS[args.command](args)
        report["results"] = results
        report["checks"] = checks
        code = 0 if all(c["passed"] for c in checks) else 1
    except CHECK_FAILURES as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc), "stage": getattr(exc, "stage", None)}
        code = 1
    except (ToralSpecError, ValueError, OSError) as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc), "stage": getattr(exc, "stage", None)}
        code = 2
    report["wall_time"] = time.perf_counter() - t0
    report = _jsonable(report)
    if table is not None and (args.format == "csv" or args.out):
        _emit_csv(table, args.out)
    return code, report


def main(argv=None) -> int:
    code, report = run(argv)
    if report:
        print(json.dumps(report, sort_keys=True, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
