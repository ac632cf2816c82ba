"""Command-line front end.

Exit codes: 0 success, 1 a check or computation failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import kernels
from .bodycalc import (
    BodySpec, body_support, centroid_body, curvature_image_2d, mixed_volume, polar_body,
    project_i,
)
from .errors import CSpectraError
from .fixlab import IterationConfig, run_sweep
from .grid import ScalarField, build_grid, read_field_csv, write_field_csv
from .harmonics import (
    HarmonicSpectrum, box_eigenvalue, cosine_eigenvalue, omega, radon_eigenvalue,
    synthesize,
)
from .linearized import (
    dx_factor, dx_multiplier, dx_table, dy_factor, dy_multiplier, dy_table,
    finite_difference_derivative, kernel_dimension, solve_resolvent_x,
    solve_resolvent_y, theta_ball_value, theta_fixed_radius, x_map, y_map,
)
from .transforms import cosine_transform, radon_transform

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config schema

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 3}


def _body_variant(kind, props, required):
    return {
        "type": "object",
        "properties": {"kind": {"const": kind}, **props},
        "required": ["kind", *required],
        "additionalProperties": False,
    }


BODY_SCHEMA = {"oneOf": [
    _body_variant("ball", {"r": {"type": "number", "exclusiveMinimum": 0}}, []),
    _body_variant("offset_ball", {"r": {"type": "number", "exclusiveMinimum": 0},
                                  "center": _VEC}, ["r", "center"]),
    _body_variant("ellipsoid", {"semi_axes": _VEC, "rotation": _NUM}, ["semi_axes"]),
    _body_variant("harmonic_perturbation", {
        "base_radius": {"type": "number", "exclusiveMinimum": 0},
        "terms": {"type": "array", "items": {
            "type": "array", "prefixItems": [{"type": "integer", "minimum": 0},
                                             {"type": "integer", "minimum": 0}, _NUM],
            "minItems": 3, "maxItems": 3}},
    }, ["base_radius", "terms"]),
    _body_variant("random_smooth", {
        "seed": {"type": "integer", "minimum": 0},
        "L": {"type": "integer", "minimum": 2},
        "amplitude": {"type": "number", "minimum": 0, "maximum": 0.05},
        "symmetric": {"type": "boolean"},
        "base_radius": {"type": "number", "exclusiveMinimum": 0},
    }, ["seed", "L", "amplitude"]),
]}

RUN_SCHEMA = {
    "type": "object",
    "properties": {
        "map": {"type": "string", "pattern": r"^(pi_sq\([0-9]+\)|theta_sq\([0-9]+\)|pgc_2d)$"},
        "body": BODY_SCHEMA,
        "steps": {"type": "integer", "minimum": 1, "maximum": 10000},
        "normalization": {"enum": ["mean_width", "volume"]},
        "n": {"enum": [2, 3]},
        "resolution": {"type": "integer", "minimum": 4, "maximum": 512},
    },
    "required": ["map", "body"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "runs": {"type": "array", "items": RUN_SCHEMA, "minItems": 1},
        "output_dir": {"type": "string"},
        "description": {"type": "string"},
    },
    "required": ["runs"],
    "additionalProperties": False,
}


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config {path}: {where}: {exc.message}") from exc
    try:
        cfg["runs"] = [IterationConfig.from_dict(r) for r in cfg["runs"]]
    except (ValueError, TypeError) as exc:
        raise UsageError(f"config {path}: {exc}") from exc
    return cfg


# ---------------------------------------------------------------------------
# helpers


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _check(name, measured, target, tol, mode="abs"):
    if mode == "equal":
        ok = measured == target
    elif mode == "max":
        ok = measured <= tol
    else:
        ok = abs(measured - target) <= tol
    return {"name": name, "target": target, "tolerance": tol, "measured": measured,
            "status": "pass" if ok else "fail"}


def _random_field(grid, L, seed, decay=1.0):
    rng = np.random.default_rng(seed)
    spec = HarmonicSpectrum.random(grid.n, L, rng, decay=decay)
    return synthesize(spec * (1.0 / spec.norm()), grid)


def identity2d_errors(count: int, seed: int, amplitude: float, resolution: int,
                      L: int = 12) -> list[float]:
    """Sup gap between Gamma Pi^* K and (1/2) Lambda K over random symmetric bodies."""
    grid = build_grid(2, resolution)
    errs = []
    for j in range(count):
        body = BodySpec.random_smooth(seed + j, L, amplitude, symmetric=True)
        h = body_support(body, grid)
        lhs = centroid_body(polar_body(project_i(h, 1)))
        rhs = curvature_image_2d(h)
        errs.append(float(np.max(np.abs(lhs.values - 0.5 * rhs.values))))
    return errs


def disk_identity(r: float = 1.3, resolution: int = 48):
    grid = build_grid(2, resolution)
    h = body_support(BodySpec.ball(r), grid)
    lhs = centroid_body(polar_body(project_i(h, 1)))
    rhs = curvature_image_2d(h)
    return float(np.mean(lhs.values)), float(np.mean(0.5 * rhs.values))


# ---------------------------------------------------------------------------
# subcommands


def selftest_checks(threads: int = 1, resolution: int = 48) -> list[dict]:
    checks = []
    pi = math.pi
    checks.append(_check("radon_eigenvalue_v23", radon_eigenvalue(3, 2), -0.5, 0.0))
    checks.append(_check("cosine_eigenvalue_w23", cosine_eigenvalue(3, 2), pi / 2, 1e-15))
    checks.append(_check("radon_eigenvalue_v43", radon_eigenvalue(3, 4), 0.375, 0.0))
    checks.append(_check("cosine_eigenvalue_w43", cosine_eigenvalue(3, 4), -pi / 12, 1e-15))

    worst = 0.0
    for n in range(3, 9):
        for k in range(0, 201, 2):
            lhs = box_eigenvalue(n, k) * cosine_eigenvalue(n, k)
            rhs = 2 * (n - 1) * omega(n - 1) * radon_eigenvalue(n, k)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    checks.append(_check("box_cosine_radon_identity", worst, 0.0, 1e-12, "max"))

    grid = build_grid(3, resolution)
    f = _random_field(grid, 12, seed=7)
    rs = radon_transform(f)
    rq = radon_transform(f, backend="quadrature", threads=threads)
    checks.append(_check("radon_backends_L12", float(np.max(np.abs(rs.values - rq.values))),
                         0.0, 1e-6, "max"))
    cs = cosine_transform(f)
    cq = cosine_transform(f, backend="quadrature", threads=threads)
    checks.append(_check("cosine_backends_L12", float(np.max(np.abs(cs.values - cq.values))),
                         0.0, 1e-3, "max"))

    one = body_support(BodySpec.ball(1.0), grid)
    checks.append(_check("pi_2_ball", float(np.max(project_i(one, 2).values)), pi, 1e-8))
    checks.append(_check("theta_ball_value", theta_ball_value(3, 2), 2 / pi ** 3, 1e-8))
    checks.append(_check("theta_fixed_radius", theta_fixed_radius(3, 2),
                         (2 / pi ** 3) ** (1 / 9), 1e-6))

    checks.append(_check("kernel_dim_dx_n4_i2_m4", kernel_dimension(dx_table(4, 2, 4)), 5, 0,
                         "equal"))
    checks.append(_check("kernel_dim_dy_n3_i2", kernel_dimension(dy_table(3, 2)), 9, 0, "equal"))
    checks.append(_check("kernel_dim_dy_n3_i1", kernel_dimension(dy_table(3, 1)), 4, 0, "equal"))

    g = solve_resolvent_x(HarmonicSpectrum.basis(4, 4, 2, 1), 4, 2, 4)
    checks.append(_check("resolvent_x_coefficient", g[2, 1], 6561 / 6305, 1e-12))
    g = solve_resolvent_y(HarmonicSpectrum.basis(3, 6, 4, 1), 3, 2)
    checks.append(_check("resolvent_y_coefficient", g[4, 1], 64 / 63, 1e-12))

    lhs, rhs = disk_identity()
    checks.append(_check("identity2d_disk_lhs", lhs, 0.5 / 1.3 ** 3, 1e-8))
    checks.append(_check("identity2d_disk_rhs", rhs, 0.5 / 1.3 ** 3, 1e-8))
    checks.append(_check("identity2d_disk_rounded", round(lhs, 6), 0.227583, 0.0))

    small = build_grid(3, 24)
    ball = body_support(BodySpec.offset_ball(1.1, [0.03, 0.0, 0.04]), small)
    checks.append(_check("x_map_translated_ball", x_map(ball.field - 1.0, 1, 1).sup(),
                         0.0, 1e-6, "max"))
    checks.append(_check("y_map_translated_ball", y_map(ball.field - 1.0, 1).sup(),
                         0.0, 1e-6, "max"))

    bodies = [body_support(BodySpec.random_smooth(s, 6, 0.05), small) for s in (1, 2, 3)]
    a, b, c = bodies
    vals = [mixed_volume(p) for p in ([a, b, c], [b, c, a], [c, a, b], [b, a, c])]
    checks.append(_check("mixed_volume_symmetry", max(vals) - min(vals), 0.0, 1e-8, "max"))

    Y2 = synthesize(HarmonicSpectrum.basis(3, 2, 2, 1), small)
    rep = finite_difference_derivative("Pi", ScalarField.constant(small, 1.0), Y2,
                                       steps=[1e-3, 1e-4], i=2, k=1)
    checks.append(_check("derivative_pi2_ball", max(rep.rel_errors), 0.0, 1e-5, "max"))
    return checks


def cmd_selftest(args) -> int:
    checks = selftest_checks(threads=args.threads, resolution=args.resolution)
    failed = [c["name"] for c in checks if c["status"] != "pass"]
    report = {"backend": kernels.BACKEND, "resolution": args.resolution, "checks": checks,
              "summary": {"total": len(checks), "failed": failed}}
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["name", "target", "tolerance", "measured", "status"])
            for c in checks:
                w.writerow([c["name"], repr(c["target"]), repr(c["tolerance"]),
                            repr(c["measured"]), c["status"]])
    _emit_json(report, args.out)
    return EXIT_FAIL if failed else EXIT_OK


def _validate_nim(n, i, m, L):
    if n < 3:
        raise UsageError("n must be >= 3")
    if not 1 <= i <= n - 1:
        raise UsageError(f"i must lie in 1..{n - 1}")
    if m < 1:
        raise UsageError("m must be >= 1")
    if L < 0:
        raise UsageError("L must be >= 0")


def cmd_multipliers(args) -> int:
    _validate_nim(args.n, args.i, args.m, args.L)
    rows = []
    for k in range(args.L + 1):
        rows.append([k, dx_multiplier(args.n, args.i, args.m, k), dx_factor(args.n, args.i, args.m, k),
                     dy_multiplier(args.n, args.i, k), dy_factor(args.n, args.i, k)])
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "dx_multiplier", "dx_factor", "dy_multiplier", "dy_factor"])
        for r in rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_transform(args) -> int:
    grid = build_grid(args.n, args.resolution)
    if args.input:
        f = read_field_csv(args.input, grid)
    else:
        f = _random_field(grid, args.L, args.seed)
    op = {"radon": radon_transform, "cosine": cosine_transform}[args.kind]
    if args.kind == "radon" and args.n != 3:
        raise UsageError("the Radon transform needs n=3")
    out = op(f, backend=args.backend, threads=args.threads)
    if args.out:
        write_field_csv(out, args.out)
    if args.compare:
        other = "quadrature" if args.backend == "spectral" else "spectral"
        ref = op(f, backend=other, threads=args.threads)
        gap = float(np.max(np.abs(ref.values - out.values)))
        tol = 1e-6 if args.kind == "radon" else 1e-3
        _emit_json({"kind": args.kind, "backends": [args.backend, other], "sup_gap": gap,
                    "tolerance": tol, "status": "pass" if gap <= tol else "fail"}, None)
        return EXIT_OK if gap <= tol else EXIT_FAIL
    return EXIT_OK


def cmd_derivcheck(args) -> int:
    grid = build_grid(3, args.resolution)
    direction = synthesize(HarmonicSpectrum.basis(3, args.degree, args.degree, args.order), grid)
    base_value = 0.0 if args.map in ("X", "Y") else 1.0
    base = ScalarField.constant(grid, base_value)
    params = {"i": args.i}
    if args.map in ("Pi", "V_Pi"):
        params["k"] = args.k
    if args.map in ("X", "Y"):
        params["m"] = args.m
    rep = finite_difference_derivative(args.map, base, direction, steps=args.steps,
                                       base_label=f"constant {base_value}",
                                       direction_label=f"Y_{args.degree},{args.order}", **params)
    d = rep.to_dict()
    if not args.full:
        d.pop("analytic")
        d.pop("finite_difference")
    _emit_json(d, args.out)
    ok = rep.rel_errors is not None and rep.rel_errors[-1] <= args.tol and rep.quadratic_scaling()
    return EXIT_OK if ok else EXIT_FAIL


def cmd_kernel(args) -> int:
    if args.which == "dx":
        _validate_nim(args.n, args.i, args.m, args.L)
        table = dx_table(args.n, args.i, args.m, args.L)
    else:
        _validate_nim(args.n, args.i, 1, args.L)
        table = dy_table(args.n, args.i, args.L)
    if args.L < 6:
        raise UsageError("L must be >= 6")
    dim = kernel_dimension(table, args.L, args.tol)
    report = {"which": args.which, "n": args.n, "i": args.i, "L": args.L, "tol": args.tol,
              "dimension": dim}
    if args.which == "dx":
        report["m"] = args.m
    if args.expect is not None:
        report["expected"] = args.expect
    _emit_json(report, args.out)
    return EXIT_FAIL if args.expect is not None and args.expect != dim else EXIT_OK


def cmd_resolvent(args) -> int:
    _validate_nim(args.n, args.i, args.m, 0)
    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            h = HarmonicSpectrum.from_json(fh.read())
    else:
        try:
            h = HarmonicSpectrum.basis(args.n, max(args.degree, 2), args.degree, args.order)
        except IndexError as exc:
            raise UsageError(str(exc)) from None
    if args.which == "x":
        g = solve_resolvent_x(h, args.n, args.i, args.m)
    else:
        g = solve_resolvent_y(h, args.n, args.i)
    report = {"which": args.which, "n": args.n, "i": args.i, "solution": g.to_dict()}
    if args.which == "x":
        # unique solvability is proved only for m >= 4 and 1 < i < n-1; the
        # division itself works whenever no multiplier vanishes
        report["m"] = args.m
        report["uniqueness_proved"] = args.m >= 4 and 1 < args.i < args.n - 1
    _emit_json(report, args.out)
    return EXIT_OK


def cmd_iterate(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out_dir or cfg.get("output_dir") or "out"
    manifest = run_sweep(cfg["runs"], out_dir, threads=args.threads)
    bad = [r for r in manifest["runs"] if r["status"] != "ok"]
    for r in bad:
        print(f"run {r['index']} truncated: {r['message']}", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


def cmd_identity2d(args) -> int:
    if not 0 <= args.amplitude <= 0.05:
        raise UsageError("amplitude must lie in [0, 0.05]")
    errs = identity2d_errors(args.count, args.seed, args.amplitude, args.resolution)
    lhs, rhs = disk_identity(1.3, args.resolution)
    worst = max(errs) if errs else 0.0
    exact = 0.5 / 1.3 ** 3
    ok = worst <= args.tol and abs(lhs - exact) <= 1e-8 and abs(rhs - exact) <= 1e-8
    _emit_json({"count": args.count, "seed": args.seed, "amplitude": args.amplitude,
                "max_sup_error": worst, "tolerance": args.tol,
                "disk_r1.3": {"gamma_polar_pi": lhs, "half_curvature_image": rhs},
                "status": "pass" if ok else "fail"}, args.out)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def default_threads() -> int:
    env = os.environ.get("CSPECTRA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"CSPECTRA_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cspectra", description="Spectral convex-geometry toolkit")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: CSPECTRA_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("selftest", help="run the invariant suite")
    s.add_argument("--resolution", type=int, default=48)
    s.add_argument("--out", help="JSON report path (default stdout)")
    s.add_argument("--csv", help="also write the checks as CSV")
    s.set_defaults(func=cmd_selftest)

    s = sub.add_parser("multipliers", help="tabulate derivative multipliers")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--i", type=int, required=True)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--L", type=int, default=8)
    s.add_argument("--out")
    s.set_defaults(func=cmd_multipliers)

    s = sub.add_parser("transform", help="apply a Radon or cosine transform")
    s.add_argument("--kind", choices=["radon", "cosine"], required=True)
    s.add_argument("--backend", choices=["spectral", "quadrature"], default="spectral")
    s.add_argument("--n", type=int, choices=[2, 3], default=3)
    s.add_argument("--resolution", type=int, default=48)
    s.add_argument("--L", type=int, default=12, help="degree of the random test field")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--input", help="field CSV to transform instead of a random field")
    s.add_argument("--out", help="output field CSV")
    s.add_argument("--compare", action="store_true", help="report the gap to the other backend")
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("derivcheck", help="finite-difference check of an analytic derivative")
    s.add_argument("--map", choices=["Q", "Pi", "X", "Y", "V_Pi"], required=True)
    s.add_argument("--i", type=int, default=1)
    s.add_argument("--k", type=int, default=1, help="power of Pi_i")
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--degree", type=int, default=2)
    s.add_argument("--order", type=int, default=1)
    s.add_argument("--steps", type=float, nargs="+", default=[1e-3, 1e-4])
    s.add_argument("--resolution", type=int, default=24)
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--full", action="store_true", help="include analytic and FD fields")
    s.add_argument("--out")
    s.set_defaults(func=cmd_derivcheck)

    s = sub.add_parser("kernel", help="count kernel dimensions of a multiplier table")
    s.add_argument("--which", choices=["dx", "dy"], required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--i", type=int, required=True)
    s.add_argument("--m", type=int, default=4)
    s.add_argument("--L", type=int, default=20)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--expect", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("resolvent", help="solve a diagonal resolvent equation")
    s.add_argument("--which", choices=["x", "y"], required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--i", type=int, required=True)
    s.add_argument("--m", type=int, default=4)
    s.add_argument("--input", help="right-hand side spectrum JSON")
    s.add_argument("--degree", type=int, default=2, help="basis right-hand side degree")
    s.add_argument("--order", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_resolvent)

    s = sub.add_parser("iterate", help="run fixed-point trajectories from a JSON config")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_iterate)

    s = sub.add_parser("identity2d", help="check Gamma Pi^* K = Lambda K / 2 in the plane")
    s.add_argument("--count", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--amplitude", type=float, default=0.05)
    s.add_argument("--resolution", type=int, default=48)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--out")
    s.set_defaults(func=cmd_identity2d)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads is None:
            args.threads = default_threads()
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        with threadpool_limits(limits=1):
            return args.func(args)
    except UsageError as exc:
        print(f"cspectra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CSpectraError as exc:
        print(f"cspectra: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        # anything else raised on argument values is an out-of-range request
        print(f"cspectra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
