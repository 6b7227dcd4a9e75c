"""TOML problem configuration.

Every value is validated before any solve starts; errors carry the file and
line of the offending key.

Sections: ``[parameters]`` (named constants for expressions, ``"critical"``
allowed), ``[domain]``, ``[coefficients]``, ``[boundary]``,
``[discretization]``, ``[sweep]``, ``[classify]`` and the optional
``[oracle]`` naming a closed-form family (``example = 1`` or ``2``).
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import exprlang
from .errors import ConfigError, NonlocalBVPError
from .exprlang import Expr
from .fem import PRESETS, CoefficientField
from .geometry import Annulus, Disk, ExternalMesh, MultiHole
from .radial_oracle import critical_c0

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENGINES = ("fem", "oracle")
GRADINGS = ("uniform", "geometric")
DOMAIN_KINDS = ("annulus", "multihole", "mesh")


@dataclass(frozen=True)
class Discretization:
    nr: int = 16
    ntheta: int = 32
    grading: str = "uniform"
    refinements: int = 2
    extrapolation: int = 1
    n_points: int = 4097

    @property
    def finest(self):
        return self.nr * 2**self.refinements, self.ntheta * 2**self.refinements


@dataclass(frozen=True)
class SweepSettings:
    lambda_min: float | None = None
    lambda_max: float | None = None
    steps: int = 50
    tol: float = 1e-6
    engine: str = "fem"


@dataclass(frozen=True)
class DomainSettings:
    kind: str
    dilate: bool = True
    dimension: int = 2
    lam: float | None = None
    inner_radius: Expr | None = None
    outer_radius: Expr | None = None
    outer: Disk | None = None
    holes: tuple = ()
    mesh_path: str | None = None


@dataclass(frozen=True)
class ProblemConfig:
    domain: DomainSettings
    coefficients: CoefficientField
    b: tuple
    weights: tuple
    discretization: Discretization = field(default_factory=Discretization)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    eps_det: float | None = None
    kappa: float = 0.01
    parameters: dict = field(default_factory=dict)
    oracle_example: int | None = None
    path: str | None = None

    @property
    def components(self):
        return len(self.b)

    @property
    def lam(self):
        return self.domain.lam

    def radii(self, lam):
        """Annulus radii at ``lam`` (after dilation when enabled)."""
        d = self.domain
        env = {"lambda": lam}
        r1 = exprlang.evaluate(d.inner_radius, env)
        r2 = exprlang.evaluate(d.outer_radius, env)
        if d.dilate:
            r1, r2 = lam * r1, lam * r2
        return r1, r2

    def domain_spec(self, lam):
        d = self.domain
        if d.kind == "annulus":
            r1, r2 = self.radii(lam)
            return Annulus(r1, r2, d.dimension)
        s = lam if d.dilate else 1.0
        if d.kind == "multihole":
            def sc(disk):
                return Disk((s * disk.center[0], s * disk.center[1]), s * disk.radius)
            return MultiHole(sc(d.outer), tuple(sc(h) for h in d.holes))
        return ExternalMesh(d.mesh_path, s)

    def with_lambda(self, lam):
        return replace(self, domain=replace(self.domain, lam=float(lam)))

    @property
    def c0(self):
        return self.parameters.get("C0")

    @property
    def g_const(self):
        return self.parameters.get("g")


# --- loading --------------------------------------------------------------


class _Locator:
    """Maps (section, key) to a line number in the source text."""

    def __init__(self, text):
        self.lines = {}
        section = ""
        for n, line in enumerate(text.splitlines(), start=1):
            s = line.strip()
            m = re.match(r"\[\s*([A-Za-z0-9_.\-]+)\s*\]", s)
            if m:
                section = m.group(1)
                self.lines.setdefault((section, None), n)
                continue
            m = re.match(r"([A-Za-z0-9_\-]+)\s*=", s)
            if m:
                self.lines.setdefault((section, m.group(1)), n)

    def __call__(self, section, key=None):
        return self.lines.get((section, key), self.lines.get((section, None)))


def resolve_mesh_path(path: str, base: Path | None) -> str:
    """``package:NAME`` refers to meshes shipped with the package."""
    if path.startswith("package:"):
        return str(resources.files("nonlocal_bvp").joinpath("data").joinpath(path.split(":", 1)[1]))
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = base / p
    return str(p)


def load_config(path) -> ProblemConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    return parse_config(text, str(path), base=path.parent)


def parse_config(text: str, name: str = "<config>", base: Path | None = None) -> ProblemConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", name, int(m.group(1)) if m else None) from exc
    return _Builder(raw, name, _Locator(text), base).build()


class _Builder:
    def __init__(self, raw, name, loc, base):
        self.raw, self.name, self.loc, self.base = raw, name, loc, base

    def fail(self, section, key, msg):
        raise ConfigError(f"[{section}] {key + ': ' if key else ''}{msg}", self.name, self.loc(section, key))

    def section(self, name, required=False):
        sec = self.raw.get(name)
        if sec is None:
            if required:
                raise ConfigError(f"missing section [{name}]", self.name)
            return {}
        if not isinstance(sec, dict):
            self.fail(name, None, "must be a table")
        return sec

    def number(self, sec, section, key, default=None, kind=float, check=None, what=""):
        v = sec.get(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not isinstance(v, int)):
            self.fail(section, key, f"expected {'an integer' if kind is int else 'a number'}, got {v!r}")
        if check is not None and not check(v):
            self.fail(section, key, f"must be {what}, got {v!r}")
        return kind(v)

    def expr(self, section, key, value):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return exprlang.Const(float(value))
        if not isinstance(value, str):
            self.fail(section, key, f"expected an expression string, got {value!r}")
        try:
            return exprlang.parse(value, self.params)
        except NonlocalBVPError as exc:
            self.fail(section, key, f"{exc}")
        except ValueError as exc:
            self.fail(section, key, str(exc))

    def build(self) -> ProblemConfig:
        known = {"parameters", "domain", "coefficients", "boundary", "discretization", "sweep", "classify", "oracle"}
        for k in self.raw:
            if k not in known:
                raise ConfigError(f"unknown section or key {k!r}", self.name, self.loc(k))
        self.params = self._parameters()
        domain = self._domain()
        coeffs = self._coefficients()
        b, weights = self._boundary(domain)
        disc = self._discretization(domain)
        sweep = self._sweep()
        cl = self.section("classify")
        self._unknown(cl, "classify", {"eps_det", "kappa"})
        eps = self.number(cl, "classify", "eps_det", None, check=lambda v: v > 0, what="positive")
        kappa = self.number(cl, "classify", "kappa", 0.01, check=lambda v: 0 < v < 2, what="in (0, 2)")
        oracle = self._oracle(domain, b, weights)
        cfg = ProblemConfig(domain, coeffs, b, weights, disc, sweep, eps, kappa, dict(self.params), oracle, self.name)
        self._check_lambdas(cfg)
        return cfg

    def _unknown(self, sec, section, allowed):
        for k in sec:
            if k not in allowed:
                self.fail(section, k, f"unknown key (allowed: {', '.join(sorted(allowed))})")

    def _parameters(self):
        out = {}
        sec = self.section("parameters")
        for k, v in sec.items():
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", k):
                self.fail("parameters", k, "invalid parameter name")
            if k in exprlang.VARIABLES or k in exprlang.FUNCTIONS or k in ("pi", "e"):
                self.fail("parameters", k, "name shadows a built-in")
            if v == "critical":
                out[k] = critical_c0()
                continue
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                out[k] = float(v)
                continue
            if not isinstance(v, str):
                self.fail("parameters", k, f"expected a number or expression, got {v!r}")
            try:
                e = exprlang.parse(v, out)
            except (NonlocalBVPError, ValueError) as exc:
                self.fail("parameters", k, str(exc))
            if not exprlang.is_constant(e):
                self.fail("parameters", k, "parameters must be constant expressions")
            try:
                out[k] = exprlang.evaluate(e, {})
            except NonlocalBVPError as exc:
                self.fail("parameters", k, str(exc))
        return out

    def _domain(self) -> DomainSettings:
        s = "domain"
        sec = self.section(s, required=True)
        kind = sec.get("kind")
        if kind not in DOMAIN_KINDS:
            self.fail(s, "kind", f"must be one of {DOMAIN_KINDS}, got {kind!r}")
        common = {"kind", "dilate", "dimension", "lambda"}
        dilate = sec.get("dilate", True)
        if not isinstance(dilate, bool):
            self.fail(s, "dilate", "expected true or false")
        dim = self.number(sec, s, "dimension", 2, int, lambda v: v >= 2, ">= 2")
        lam = self.number(sec, s, "lambda", None, check=lambda v: v > 0 and math.isfinite(v), what="positive")
        if kind == "annulus":
            self._unknown(sec, s, common | {"inner_radius", "outer_radius"})
            for k in ("inner_radius", "outer_radius"):
                if k not in sec:
                    self.fail(s, None, f"annulus needs {k}")
            r1 = self.expr(s, "inner_radius", sec["inner_radius"])
            r2 = self.expr(s, "outer_radius", sec["outer_radius"])
            for k, e in (("inner_radius", r1), ("outer_radius", r2)):
                if e.variables() - {"lambda"}:
                    self.fail(s, k, "radii may depend on lambda only")
            return DomainSettings(kind, dilate, dim, lam, r1, r2)
        if dim != 2:
            self.fail(s, "dimension", "only annuli support dimension > 2 (radial oracle)")
        if kind == "multihole":
            self._unknown(sec, s, common | {"outer", "holes"})

            def disk(v, key):
                if not isinstance(v, dict) or set(v) != {"center", "radius"}:
                    self.fail(s, key, "expected {center = [x, y], radius = R}")
                c = v["center"]
                if not (isinstance(c, list) and len(c) == 2 and all(isinstance(t, (int, float)) for t in c)):
                    self.fail(s, key, "center must be [x, y]")
                try:
                    return Disk(tuple(c), float(v["radius"]))
                except NonlocalBVPError as exc:
                    self.fail(s, key, str(exc))

            outer = disk(sec.get("outer"), "outer")
            holes = sec.get("holes")
            if not isinstance(holes, list) or not holes:
                self.fail(s, "holes", "expected a non-empty list of disks")
            hs = tuple(disk(h, "holes") for h in holes)
            try:
                MultiHole(outer, hs)
            except NonlocalBVPError as exc:
                self.fail(s, "holes", str(exc))
            return DomainSettings(kind, dilate, dim, lam, outer=outer, holes=hs)
        self._unknown(sec, s, common | {"path"})
        p = sec.get("path")
        if not isinstance(p, str):
            self.fail(s, "path", "mesh domain needs a path string")
        full = resolve_mesh_path(p, self.base)
        if not Path(full).is_file():
            self.fail(s, "path", f"mesh file not found: {full}")
        return DomainSettings(kind, dilate, dim, lam, mesh_path=full)

    def _coefficients(self) -> CoefficientField:
        s = "coefficients"
        sec = self.section(s)
        self._unknown(sec, s, {"a", "a_x", "a_y", "a_r", "h"})
        a = sec.get("a", "zero")
        if a not in PRESETS:
            self.fail(s, "a", f"unknown preset {a!r} (choose from {', '.join(PRESETS)})")
        exprs = {k: self.expr(s, k, sec[k]) for k in ("a_x", "a_y", "a_r", "h") if k in sec}
        if ("a_x" in exprs) != ("a_y" in exprs):
            self.fail(s, "a_x" if "a_x" in exprs else "a_y", "give both a_x and a_y")
        if a != "zero" and ({"a_x", "a_r"} & set(exprs)):
            self.fail(s, "a", "preset conflicts with an explicit drift")
        if "a_x" in exprs and "a_r" in exprs:
            self.fail(s, "a_r", "drift given both in Cartesian and radial form")
        a_r = exprs.get("a_r")
        if a == "unit-radial-drift":
            a_r = exprlang.parse("1/r")
        h = exprs.get("h", exprlang.Const(1.0))
        if exprlang.is_constant(h) and exprlang.evaluate(h, {}) <= 0:
            self.fail(s, "h", "h must be positive")
        return CoefficientField(h=h, a_x=exprs.get("a_x"), a_y=exprs.get("a_y"), a_r=a_r)

    def _boundary(self, domain):
        s = "boundary"
        sec = self.section(s, required=True)
        self._unknown(sec, s, {"components", "b", "g"})
        n = self.number(sec, s, "components", None, int, lambda v: v >= 2, ">= 2")
        b = sec.get("b")
        g = sec.get("g")
        if not isinstance(b, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in b):
            self.fail(s, "b", "expected a list of numbers (outer boundary first)")
        if not isinstance(g, list):
            self.fail(s, "g", "expected a list of expressions (outer boundary first)")
        if n is None:
            n = len(b)
        if len(b) != n:
            self.fail(s, "b", f"{len(b)} values for {n} components")
        if len(g) != n:
            self.fail(s, "g", f"{len(g)} weights for {n} components")
        if domain.kind in ("annulus",) and n != 2:
            self.fail(s, "components", "an annulus has 2 boundary components")
        if domain.kind == "multihole" and n != 1 + len(domain.holes):
            self.fail(s, "components", f"domain has {1 + len(domain.holes)} boundary components")
        weights = tuple(self.expr(s, "g", v) for v in g)
        return tuple(float(v) for v in b), weights

    def _discretization(self, domain) -> Discretization:
        s = "discretization"
        sec = self.section(s)
        self._unknown(sec, s, {"nr", "ntheta", "grading", "refinements", "extrapolation", "n_points"})
        d = Discretization()
        nr = self.number(sec, s, "nr", d.nr, int, lambda v: v >= 1, ">= 1")
        nt = self.number(sec, s, "ntheta", d.ntheta, int, lambda v: v >= 3, ">= 3")
        ref = self.number(sec, s, "refinements", d.refinements, int, lambda v: 0 <= v <= 8, "in [0, 8]")
        ext = self.number(sec, s, "extrapolation", d.extrapolation, int, lambda v: v >= 1, ">= 1")
        npts = self.number(sec, s, "n_points", d.n_points, int, lambda v: v >= 16, ">= 16")
        grading = sec.get("grading", d.grading)
        if grading not in GRADINGS:
            self.fail(s, "grading", f"must be one of {GRADINGS}")
        if ext > ref + 1:
            self.fail(s, "extrapolation", f"needs refinements >= extrapolation - 1 = {ext - 1}")
        if (npts - 1) % 2 ** (ext - 1):
            self.fail(s, "n_points", f"n_points - 1 must be divisible by 2^(extrapolation-1) = {2 ** (ext - 1)}")
        return Discretization(nr, nt, grading, ref, ext, npts)

    def _sweep(self) -> SweepSettings:
        s = "sweep"
        sec = self.section(s)
        self._unknown(sec, s, {"lambda_min", "lambda_max", "steps", "tol", "engine"})
        pos = dict(check=lambda v: v > 0, what="positive")
        lo = self.number(sec, s, "lambda_min", None, **pos)
        hi = self.number(sec, s, "lambda_max", None, **pos)
        if lo is not None and hi is not None and not lo < hi:
            self.fail(s, "lambda_max", "must exceed lambda_min")
        steps = self.number(sec, s, "steps", 50, int, lambda v: v >= 2, ">= 2")
        tol = self.number(sec, s, "tol", 1e-6, **pos)
        engine = sec.get("engine", "fem")
        if engine not in ENGINES:
            self.fail(s, "engine", f"must be one of {ENGINES}")
        return SweepSettings(lo, hi, steps, tol, engine)

    def _oracle(self, domain, b, weights):
        s = "oracle"
        sec = self.section(s)
        self._unknown(sec, s, {"example"})
        ex = self.number(sec, s, "example", None, int, lambda v: v in (1, 2), "1 or 2")
        if ex is None:
            return None
        if domain.kind != "annulus" or len(b) != 2:
            self.fail(s, "example", "closed-form examples live on annuli")
        need = "C0" if ex == 2 else "g"
        if need not in self.params:
            self.fail(s, "example", f"example {ex} reads [parameters] {need}")
        w0 = weights[0]
        if not (exprlang.is_constant(w0) and exprlang.evaluate(w0, {}) == 0.0):
            self.fail(s, "example", "the closed forms assume a zero outer weight")
        probe = 3.0
        r1 = exprlang.evaluate(domain.inner_radius, {"lambda": probe})
        r2 = exprlang.evaluate(domain.outer_radius, {"lambda": probe})
        if domain.dilate:
            r1, r2 = probe * r1, probe * r2
        want = (probe, 2 * probe) if ex == 1 else (1.0, probe)
        if not (math.isclose(r1, want[0]) and math.isclose(r2, want[1])):
            self.fail(s, "example", f"example {ex} lives on A({'lambda, 2 lambda' if ex == 1 else '1, lambda'})")
        return ex

    def _check_lambdas(self, cfg: ProblemConfig):
        lams = [v for v in (cfg.lam, cfg.sweep.lambda_min, cfg.sweep.lambda_max) if v is not None]
        for lam in lams:
            key = None
            try:
                if cfg.domain.kind == "annulus":
                    key = "inner_radius"
                    r1, _ = cfg.radii(lam)
                    # the R1 < R2 check is blamed on the outer radius once R1 is positive
                    key = "outer_radius" if r1 > 0 else "inner_radius"
                cfg.domain_spec(lam)
            except NonlocalBVPError as exc:
                self.fail("domain", key, f"invalid at lambda = {lam!r}: {exc}")
            except ArithmeticError as exc:
                self.fail("domain", key, f"radius not evaluable at lambda = {lam!r}: {exc}")
