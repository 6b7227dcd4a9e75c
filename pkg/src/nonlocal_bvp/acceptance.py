"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``nonlocal-bvp verify`` or through ``tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import fem, geometry, pipeline, radial_oracle, sweep
from .config import Discretization, parse_config
from .nonlocal_system import (
    NonlocalSystem,
    build_system,
    check_sufficient_conditions,
    classify,
    decay_envelope,
    fixed_point_residual,
    reconstruct,
)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.title} ({self.seconds:.1f} s)"


class _Checks:
    def __init__(self):
        self.ok = True
        self.details = []

    def check(self, cond, msg):
        cond = bool(cond)
        self.ok &= cond
        self.details.append(("ok   " if cond else "FAIL ") + msg)
        return cond

    def note(self, msg):
        self.details.append("     " + msg)


def _config(name):
    text = resources.files("nonlocal_bvp").joinpath("data").joinpath(name).read_text()
    return parse_config(text, f"package:{name}")


def example2_config(c0="critical", b_inner=1.0, **disc):
    cfg = _config("ex2.toml")
    params = dict(cfg.parameters)
    params["C0"] = radial_oracle.critical_c0() if c0 == "critical" else float(c0)
    weights = (cfg.weights[0], fem.as_expr(radial_oracle.example2_weight(params["C0"])))
    return replace(cfg, parameters=params, weights=weights, b=(0.0, float(b_inner)),
                   discretization=replace(cfg.discretization, **disc))


EXACT_ROOTS = radial_oracle.s0_set(2)[:3]
LITERAL_ROOTS = (4.355893, 7.283185, 10.639079)


def criterion_1(c: _Checks):
    cfg = example2_config()
    t0 = time.perf_counter()
    records, brackets = sweep.sweep_lambda(cfg, 1.5, 12.0, 400, "oracle")
    roots = [sweep.refine_root(cfg, b, 1e-6, "oracle") for b in brackets]
    dt = time.perf_counter() - t0
    c.check(len(brackets) == 3, f"{len(brackets)} sign-change brackets on [1.5, 12] (want 3)")
    for k, exact in enumerate(EXACT_ROOTS):
        if k < len(roots):
            c.check(abs(roots[k] - exact) <= 1e-6,
                    f"root {roots[k]:.9f} vs {exact:.9f}: |d| = {abs(roots[k] - exact):.2e} <= 1e-6")
            c.note(f"(stated rounding {LITERAL_ROOTS[k]} differs from the exact value by "
                   f"{abs(LITERAL_ROOTS[k] - exact):.1e})")
    c.check(dt < 5.0, f"sweep + refinement took {dt:.2f} s < 5 s")


def criterion_2(c: _Checks):
    t0 = time.perf_counter()
    cfg = example2_config()
    c.note(f"fem engine: meshes {cfg.discretization.nr}x{cfg.discretization.ntheta} .. "
           f"{cfg.discretization.finest[0]}x{cfg.discretization.finest[1]} ({cfg.discretization.grading}), "
           f"Romberg over {cfg.discretization.extrapolation} levels")
    for exact in EXACT_ROOTS:
        root = sweep.refine_root(cfg, (exact - 0.1, exact + 0.1), 1e-4, "fem")
        c.check(abs(root - exact) <= 5e-2, f"fem root {root:.6f} vs {exact:.6f}: |d| = {abs(root - exact):.1e} <= 5e-2")
    raw = replace(cfg, discretization=replace(cfg.discretization, extrapolation=1))
    for lam in (3.0, 6.0, 9.0):
        errs = []
        for ref in (1, 2, 3):
            d = replace(raw, discretization=replace(raw.discretization, refinements=ref))
            errs.append(abs(pipeline.evaluate(d, lam, "fem").system.det - radial_oracle.example2_det(lam)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        c.check(orders.min() >= 1.9, f"lambda={lam}: |det_fem - det_oracle| = "
                + ", ".join(f"{e:.2e}" for e in errs) + f" (16x32..64x128), orders {np.round(orders, 3).tolist()} >= 1.9")
    dt = time.perf_counter() - t0
    c.check(dt < 180, f"runtime {dt:.1f} s < 180 s")


def criterion_3(c: _Checks):
    c0 = radial_oracle.critical_c0()
    v = radial_oracle.example2_integral(30.0, c0)
    c.check(abs(v - 1.0) <= 1e-10, f"int g_i phi at lambda=30: |{v!r} - 1| = {abs(v - 1):.1e} <= 1e-10")
    limit = 2 * math.pi * c0 * (2 * math.sin(1) + math.cos(1)) / (5 * math.e)
    c.check(abs(limit - 1.0) <= 1e-15, f"limit 2 pi C0 (2 sin 1 + cos 1)/(5e) = {limit!r}")
    tail = [abs(radial_oracle.example2_integral(lam, c0) - 1) for lam in (10.0, 15.0, 20.0, 25.0, 30.0)]
    c.check(all(a >= b for a, b in zip(tail, tail[1:])), "distance to 1 shrinks along lambda = 10, 15, ..., 30: "
            + ", ".join(f"{t:.1e}" for t in tail))


def criterion_4(c: _Checks):
    g = 1.0 / (2 * math.pi)
    ls = radial_oracle.alg_eq_root(g)
    exact = math.log(2 + math.sqrt(3))
    c.check(abs(ls - exact) <= 1e-9, f"alg_eq_root(1/(2 pi)) = {ls!r}, ln(2+sqrt3) = {exact!r}")
    c.check(abs(radial_oracle.alg_eq_f(ls, g) - 1) <= 1e-12, f"|f(lambda*) - 1| = {abs(radial_oracle.alg_eq_f(ls, g) - 1):.1e}")
    for b, lam, want in ((0.0, ls, "InfinitelyMany"), (1.0, ls, "NoSolution"), (1.0, 2 * ls, "Unique")):
        got = radial_oracle.example1_classify(b, lam, g).regime
        c.check(got == want, f"example1_classify(b_i={b}, lambda={lam:.6f}) = {got} (want {want})")
    cfg = _config("ex1.toml")
    ev = pipeline.evaluate(cfg, ls, "fem")
    d = cfg.discretization
    c.note(f"fem: {d.finest[0]}x{d.finest[1]} finest ({d.grading}), Romberg over {d.extrapolation} levels; "
           f"raw finest-level det = {ev.raw_system.det:.2e}")
    c.check(abs(ev.system.det) <= ev.eps_det, f"fem |det(I-R)| at lambda* = {abs(ev.system.det):.2e} <= eps_det = {ev.eps_det:.2e}")
    c.note(f"fem classification at lambda* with b_i = 0: {ev.classification.tag}")


def criterion_5(c: _Checks):
    co = fem.CoefficientField.build(h="1", a="unit-radial-drift")
    errs = []
    for nr in (16, 32, 64):
        m = geometry.generate_annulus_mesh(1.0, 4.0, nr, 2 * nr)
        B = fem.basis_solutions(m, co, 4.0)
        r = np.hypot(*m.nodes.T)
        errs.append(float(np.abs(B.fields[1].values - radial_oracle.example2_phi(r, 4.0)).max()))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    c.check(errs[-1] <= 2e-3, f"L-inf error at 64x128 (uniform) = {errs[-1]:.2e} <= 2e-3")
    c.check(orders.min() >= 1.9, f"errors {', '.join(f'{e:.2e}' for e in errs)} -> orders {np.round(orders, 3).tolist()} >= 1.9")


def criterion_6(c: _Checks):
    cfg = _config("annulus12.toml")
    d = cfg.discretization
    nr, nt = d.finest
    cap12 = fem.capacity_fem(geometry.generate_annulus_mesh(1, 2, nr, nt))
    cap24 = fem.capacity_fem(geometry.generate_annulus_mesh(2, 4, nr, nt))
    exact = 2 * math.pi / math.log(2)
    c.check(abs(cap12 - exact) / exact <= 0.01, f"cap(annulus(1,2)) = {cap12:.6f} vs {exact:.6f}: rel {abs(cap12 - exact) / exact:.2e}")
    c.check(abs(cap24 - cap12) / cap12 <= 0.01, f"|cap(2,4) - cap(1,2)| / cap(1,2) = {abs(cap24 - cap12) / cap12:.2e}")


def _random_weight(rng):
    """A random smooth weight expression on an annulus around the origin."""
    terms = [f"{rng.uniform(0.2, 1.0)!r}",
             f"{rng.uniform(-1, 1)!r}*cos({int(rng.integers(1, 4))}*x/r)",
             f"{rng.uniform(-1, 1)!r}*sin(r)",
             f"{rng.uniform(-1, 1)!r}*exp(-r)*y/r"]
    return "+".join(terms)


def criterion_7(c: _Checks):
    rng = np.random.default_rng(20240607)
    co = fem.CoefficientField.build(h="1", a="unit-radial-drift")
    bases = {lam: fem.basis_solutions(geometry.generate_annulus_mesh(1.0, lam, 24, 48, "geometric"), co, lam)
             for lam in (2.0, 4.0)}
    small_cases = nonneg_cases = 0
    small_ok = nonneg_ok = True
    for k in range(50):
        lam = 2.0 if k % 2 else 4.0
        basis = bases[lam]
        if k < 25:
            # signed weights, scaled so that sum int |g| is at most 1
            raw = [fem.as_expr(_random_weight(rng)) for _ in range(2)]
            tot = sum(basis.integrate(w, absolute=True) for w in raw)
            s = rng.uniform(0.05, 1.0) / tot
            weights = [fem.as_expr(f"{s!r}*({_expr_str(w)})") for w in raw]
        else:
            # non-negative weights with each integral in (0, 1)
            raw = [fem.as_expr(f"exp({rng.uniform(-1, 1)!r}*x/r)*(1.5+sin({rng.uniform(0, 3)!r}*r))") for _ in range(2)]
            weights = [fem.as_expr(f"{rng.uniform(0.05, 0.999) / basis.integrate(w)!r}*({_expr_str(w)})") for w in raw]
        b = rng.uniform(-1, 1, 2)
        rep = check_sufficient_conditions(weights, basis)
        sys_ = build_system(basis, weights, b)
        cls = classify(sys_)
        if rep.smallness_holds:
            small_cases += 1
            small_ok &= sys_.det > 0
        if rep.nonneg_holds:
            nonneg_cases += 1
            nonneg_ok &= cls.tag != "InfinitelyMany"
    c.check(small_cases >= 20, f"{small_cases} of 50 fields satisfy the smallness condition")
    c.check(small_ok, "every smallness case has det(I-R) > 0")
    c.check(nonneg_cases >= 20, f"{nonneg_cases} of 50 fields satisfy the non-negative condition")
    c.check(nonneg_ok, "no non-negative case is classified InfinitelyMany")


def _expr_str(e):
    from .exprlang import to_string
    return to_string(e)


_RANDOM_PROBLEM = """
[domain]
kind = "annulus"
inner_radius = 1
outer_radius = 2
lambda = {lam!r}

[coefficients]
a_r = "{alpha!r}/r"
h = "{h0!r} + {h1!r}*sin(r)"

[boundary]
b = [{b0!r}, {b1!r}]
g = ["{go!r}*exp(-r/lambda)", "{gi!r}*cos(r/lambda) + {gc!r}"]

[discretization]
nr = 8
ntheta = 16
refinements = 2
extrapolation = 1
n_points = 2049
"""


def criterion_8(c: _Checks):
    rng = np.random.default_rng(8)
    worst = {"oracle": 0.0, "fem": 0.0}
    unique = 0
    for _ in range(20):
        h0 = rng.uniform(1.0, 2.0)
        params = dict(lam=rng.uniform(0.6, 2.5), alpha=rng.uniform(-1, 1), h0=h0, h1=rng.uniform(0, 0.5),
                      b0=rng.uniform(-1, 1), b1=rng.uniform(-1, 1), go=rng.uniform(-0.1, 0.1),
                      gi=rng.uniform(-0.2, 0.2), gc=rng.uniform(-0.1, 0.1))
        cfg = parse_config(_RANDOM_PROBLEM.format(**params), "<random>")
        for engine in ("oracle", "fem"):
            ev = pipeline.evaluate(cfg, None, engine)
            if ev.classification.tag != "Unique":
                c.check(False, f"{engine}: random problem not Unique (det {ev.system.det:.2e})")
                continue
            unique += 1
            u = reconstruct(ev.basis, ev.classification.B)
            res = fixed_point_residual(u, ev.basis, list(cfg.weights), cfg.b) / (1 + np.linalg.norm(cfg.b))
            worst[engine] = max(worst[engine], res)
    c.check(unique == 40, f"{unique}/40 engine runs in the Unique regime")
    c.check(worst["oracle"] <= 1e-9, f"oracle: max residual / (1+|b|) = {worst['oracle']:.2e} <= 1e-9")
    c.check(worst["fem"] <= 1e-6, f"fem: max residual / (1+|b|) = {worst['fem']:.2e} <= 1e-6")


def criterion_9(c: _Checks):
    c0 = 0.5
    cfg = example2_config(c0=c0, b_inner=1.0, extrapolation=1)
    mids, ms = [], []
    for lam in (5.0, 10.0, 20.0):
        ev = pipeline.evaluate(cfg, lam, "fem")
        if not c.check(ev.classification.tag == "Unique", f"lambda={lam}: {ev.classification.tag} (C0 = {c0})"):
            return
        u = reconstruct(ev.basis, ev.classification.B)
        mid = abs(float(fem.evaluate_at(u.mesh, u, [[(1 + lam) / 2, 0.0]])[0]))
        env = decay_envelope(u, cfg.domain_spec(lam), lam, cfg.kappa)
        mids.append(mid)
        ms.append(env.m_star)
        c.note(f"lambda={lam}: |u(midpoint)| = {mid:.3e}, C* = {env.c_star:.4g}, M* = {env.m_star:.4f}, "
               f"max margin = {env.margins.max():.1e}")
        c.check(env.margins.max() <= 1e-9, f"lambda={lam}: envelope majorises all nodes")
    c.check(mids[0] > mids[1] > mids[2], "midpoint |u| decreases over lambda = 5, 10, 20")
    c.check(min(ms) > 0, "fitted M* > 0")
    c.check(max(ms) <= 2 * min(ms), f"M* stable within a factor 2 (ratio {max(ms) / min(ms):.3f})")


def criterion_10(c: _Checks):
    rng = np.random.default_rng(10)
    lams = rng.uniform(1.5, 20.0, 100)
    dev = max(abs(radial_oracle.example2_det(l) - radial_oracle.example2_det_factorized(l)) for l in lams)
    c.check(dev <= 1e-12, f"max |det - factorized| over 100 lambda in (1.5, 20) = {dev:.1e} <= 1e-12")
    c0 = radial_oracle.critical_c0()
    qd = max(abs(radial_oracle.example2_integral(l, c0) - radial_oracle.example2_integral_quadrature(l, c0))
             for l in lams[:10])
    c.check(qd <= 1e-10, f"closed-form integral vs adaptive Simpson (tol 1e-12), 10 lambdas: max diff {qd:.1e} <= 1e-10")


def criterion_11(c: _Checks):
    cfg = _config("multihole.toml")
    lam = cfg.lam
    mesh = pipeline.mesh_hierarchy(cfg, lam, 1)[-1]
    basis = fem.basis_solutions(mesh, cfg.coefficients, lam)
    vals = np.array([f.values for f in basis.fields])
    c.note(f"mesh: {mesh.n_nodes} nodes, {mesh.n_components} boundary components")
    c.check(vals.min() >= -1e-8 and vals.max() <= 1 + 1e-8, f"0 <= phi <= 1+1e-8 (min {vals.min():.2e}, max {vals.max():.17g})")
    c.check(vals.sum(axis=0).max() <= 1 + 1e-8, f"sum phi <= 1+1e-8 (max {vals.sum(axis=0).max():.17g})")
    b = np.array(cfg.b)
    zero = classify(build_system(basis, ["0"] * 3, b))
    c.check(zero.tag == "Unique" and np.allclose(zero.B, b, rtol=0, atol=1e-14), f"zero weights: {zero.tag}, B = {np.asarray(getattr(zero, 'B', []))}")
    sys_ = build_system(basis, list(cfg.weights), b)
    cls = classify(sys_)
    if c.check(cls.tag == "Unique", f"small weights: {cls.tag} (det {sys_.det:.6f})"):
        res = fixed_point_residual(reconstruct(basis, cls.B), basis, list(cfg.weights), b)
        c.check(res <= 1e-6, f"fixed-point residual {res:.1e} <= 1e-6")


CRITERIA = {
    1: ("Example 2 root lattice (oracle sweep)", criterion_1),
    2: ("Example 2 FEM root agreement and det convergence", criterion_2),
    3: ("Example 2 large-lambda limit", criterion_3),
    4: ("Example 1 trichotomy", criterion_4),
    5: ("closed-form basis solution accuracy", criterion_5),
    6: ("annulus capacity and scale invariance", criterion_6),
    7: ("sufficient-condition guarantees (50 random weights)", criterion_7),
    8: ("fixed-point closure (20 random problems)", criterion_8),
    9: ("decay envelope", criterion_9),
    10: ("closed-form determinant identity", criterion_10),
    11: ("three-component problem", criterion_11),
}


def run_one(number: int, echo=True) -> CriterionResult:
    title, fn = CRITERIA[number]
    c = _Checks()
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            fn(c)
        except Exception as exc:  # report, do not hide
            c.check(False, f"raised {type(exc).__name__}: {exc}")
    res = CriterionResult(number, title, c.ok, c.details, time.perf_counter() - t0)
    if echo:
        print(res.line(), flush=True)
        for d in res.details:
            print("    " + d, flush=True)
    return res


def run(only=None, jobs=1):
    return [run_one(n) for n in (only or sorted(CRITERIA))]
