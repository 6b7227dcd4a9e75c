"""``nonlocal-bvp`` command line interface.

Exit codes: 0 success, 1 failed verification, 2 configuration or input error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import fem, geometry, pipeline, radial_oracle, sweep
from .config import load_config
from .errors import NonlocalBVPError, NumericError
from .nonlocal_system import fixed_point_residual, reconstruct

log = logging.getLogger("nonlocal_bvp")

LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("NONLOCAL_BVP_LOG", "quiet").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    if level not in LOG_LEVELS:
        log.error("NONLOCAL_BVP_LOG=%s not understood; use quiet, info or debug", level)
    if level == "quiet":
        import warnings
        warnings.simplefilter("ignore")


def _num(v):
    """JSON-safe float (non-finite -> None)."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _dump(obj, out: Path | None, name: str):
    text = json.dumps(obj, indent=2) + "\n"
    sys.stdout.write(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def _classification_dict(ev):
    cls = ev.classification
    s = ev.system
    d = {
        "lambda": ev.lam,
        "engine": ev.engine,
        "det": _num(s.det),
        "C_psi_det": _num(s.det_c_psi),
        "C_phi_det": _num(s.det_c_phi),
        "eps_det": _num(ev.eps_det),
        "classification": cls.tag,
        "B": [_num(v) for v in cls.B] if cls.tag == "Unique" else None,
        "cond": _num(s.cond),
    }
    if cls.tag == "InfinitelyMany":
        d["kernel"] = [_num(v) for v in cls.kernel]
        d["particular"] = [_num(v) for v in cls.particular]
    return d


def _field_rows(basis, u):
    if hasattr(basis, "mesh"):
        nodes = basis.mesh.nodes
        vals = u.values
    else:
        nodes = np.column_stack([u.r, np.zeros_like(u.r)])
        vals = u.u
    for k, ((x, y), v) in enumerate(zip(nodes, vals)):
        yield [k, format(x, ".17g"), format(y, ".17g"), format(v, ".17g")]


def cmd_solve(args, cfg):
    ev = pipeline.evaluate(cfg, args.lam, args.engine)
    report = _classification_dict(ev)
    cls = ev.classification
    coeffs = None
    if cls.tag == "Unique":
        # the field lives on the finest level, so solve that level's system
        coeffs = np.linalg.solve(ev.raw_system.matrix, ev.raw_system.b)
    elif cls.tag == "InfinitelyMany":
        coeffs = cls.kernel
        report["field"] = "kernel direction"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if coeffs is not None:
        u = reconstruct(ev.basis, coeffs)
        if cls.tag == "Unique":
            report["fixed_point_residual"] = _num(fixed_point_residual(u, ev.basis, list(cfg.weights), cfg.b))
        with open(out / "solution.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "x", "y", "value"])
            w.writerows(_field_rows(ev.basis, u))
        report["solution_csv"] = str(out / "solution.csv")
    _dump(report, out, "solve_report.json")
    return 0


def cmd_classify(args, cfg):
    ev = pipeline.evaluate(cfg, args.lam, args.engine)
    _dump(_classification_dict(ev), Path(args.out), "classify.json")
    return 0


def cmd_sweep(args, cfg):
    engine = args.engine or cfg.sweep.engine
    records, brackets = sweep.sweep_lambda(cfg, args.lambda_min, args.lambda_max, args.steps, engine, args.jobs)
    roots = []
    for br in brackets:
        try:
            roots.append(sweep.refine_root(cfg, br, args.tol, engine))
        except NumericError as exc:
            log.warning("bracket %s: %s", br, exc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sweep.write_csv(records, out / "sweep.csv", args.timings)
    sweep.write_json(records, brackets, roots, out / "sweep.json", args.timings)
    with open(out / "roots.csv", "w") as fh:
        fh.write("root\n" + "".join(format(r, ".17g") + "\n" for r in roots))
    for r in roots:
        print(format(r, ".17g"))
    return 0


def cmd_capacity(args, cfg):
    lam = cfg.lam if args.lam is None else args.lam
    mesh = pipeline.mesh_hierarchy(cfg, 1.0 if lam is None else lam, 1)[-1]
    value = fem.capacity_fem(mesh)
    analytic = None
    spec = cfg.domain_spec(1.0 if lam is None else lam)
    if isinstance(spec, geometry.Annulus):
        analytic = geometry.annulus_capacity(spec.inner_radius, spec.outer_radius)
    _dump({
        "fem_value": value,
        "analytic_value": analytic,
        "relative_error": None if analytic is None else abs(value - analytic) / analytic,
        "nodes": mesh.n_nodes,
    }, Path(args.out), "capacity.json")
    return 0


def _parse_c0(text):
    if text is None or text == "critical":
        return radial_oracle.critical_c0()
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--c0 must be a number or 'critical', got {text!r}") from None


def cmd_oracle(args, cfg=None):
    lam = args.lam
    if args.example == 2:
        c0 = _parse_c0(args.c0)
        critical = math.isclose(c0, radial_oracle.critical_c0(), rel_tol=0, abs_tol=1e-15)
        d = {"example": 2, "lambda": lam, "C0": c0, "critical": critical}
        if lam is not None:
            det = radial_oracle.example2_det(lam, c0)
            d["integral"] = radial_oracle.example2_integral(lam, c0)
            d["det"] = det
            if critical:
                d["det_factorized"] = radial_oracle.example2_det_factorized(lam)
            b_inner = args.b_inner
            eps = 1e-9 * (1 + abs(d["integral"]))
            if abs(det) > eps:
                d["classification"] = "Unique"
                d["B_inner"] = b_inner / det
            else:
                d["classification"] = "InfinitelyMany" if b_inner == 0 else "NoSolution"
        if critical:
            d["s0"] = radial_oracle.s0_set(args.k_max)
        _dump(d, Path(args.out) if args.write else None, "oracle.json")
        return 0
    g = 1.0 / (2 * math.pi) if args.g is None else args.g
    lam_star = radial_oracle.alg_eq_root(g)
    d = {"example": 1, "g": g, "lambda_star": lam_star, "lambda": lam}
    if lam is not None:
        res = radial_oracle.example1_classify(args.b_inner, lam, g)
        d["det"] = radial_oracle.example1_det(lam, g)
        d["classification"] = res.regime
        if res.c_star_profile:
            d["profile"] = res.c_star_profile
    _dump(d, Path(args.out) if args.write else None, "oracle.json")
    return 0


def cmd_verify(args, cfg=None):
    from . import acceptance

    results = acceptance.run(only=args.only, jobs=1)
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="nonlocal-bvp", description="Non-local boundary value problem solver")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="problem TOML file")
        sp.add_argument("--out", default="./out", help="output directory (default ./out)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        sp.add_argument("--lambda", dest="lam", type=float, default=None, help="override [domain] lambda")
        sp.add_argument("--engine", choices=("fem", "oracle"), default=None)
        sp.add_argument("--timings", action="store_true", help="record wall times (breaks byte-identical output)")

    for name, fn, helptext in (
        ("solve", cmd_solve, "solve, classify and write the solution field"),
        ("classify", cmd_classify, "classify solvability at one lambda"),
        ("capacity", cmd_capacity, "H1-capacity of a two-component domain"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("sweep", help="sweep lambda and refine roots of the determinant")
    common(sp)
    sp.add_argument("--lambda-min", type=float, default=None)
    sp.add_argument("--lambda-max", type=float, default=None)
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="closed-form evaluations for the two radial examples")
    common(sp, config=False)
    sp.add_argument("--example", type=int, choices=(1, 2), required=True)
    sp.add_argument("--c0", default="critical", help="example 2 weight constant or 'critical'")
    sp.add_argument("--g", type=float, default=None, help="example 1 weight constant (default 1/(2 pi))")
    sp.add_argument("--b-inner", type=float, default=1.0)
    sp.add_argument("--k-max", type=int, default=2)
    sp.add_argument("--write", action="store_true", help="also write oracle.json to --out")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("verify", help="run the acceptance suite")
    sp.add_argument("--only", type=int, action="append", help="criterion number (repeatable)")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("oracle", "verify"):
            return args.func(args)
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except NumericError as exc:
        print(f"nonlocal-bvp: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (NonlocalBVPError, argparse.ArgumentTypeError) as exc:
        print(f"nonlocal-bvp: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"nonlocal-bvp: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
