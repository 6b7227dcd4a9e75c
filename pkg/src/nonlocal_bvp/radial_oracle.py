"""Ground truth for radially symmetric problems.

Two families are available in closed form:

* ``A(lam, 2 lam)`` with drift ``x/|x|^2``, ``h = 1``, constant inner weight
  ``g`` and homogeneous outer data ("Example 1");
* ``A(1, lam)`` with the same operator and inner weight
  ``C0 exp(-r) sin(r) / r`` ("Example 2").

Everything else goes through :func:`radial_solve`, a second-order finite
difference solve of the radial ODE. All functions here are pure.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import solve_banded

from . import exprlang
from .errors import (
    BracketingFailure,
    CoefficientError,
    InvalidLambda,
    InvalidRadii,
    InvalidResolution,
    SingularSystem,
    WeakConvectionWarning,
)

THETA0 = math.asin(2.0 / math.sqrt(5.0))
ROOT_TOL = 1e-9
_S = 2.0 * math.sin(1.0) + math.cos(1.0)


# --------------------------------------------------------------------------
# finite-difference radial solver


def _as_radial_fn(f) -> Callable:
    """Coerce a number, expression (in ``r``) or callable to ``r -> array``."""
    if callable(f) and not isinstance(f, exprlang.Expr):
        return lambda r: np.asarray(f(r), dtype=float) * np.ones_like(r)
    expr = f if isinstance(f, exprlang.Expr) else exprlang.parse(str(f)) if isinstance(f, str) \
        else exprlang.Const(float(f))
    return lambda r: exprlang.evaluate_array(expr, {"x": r, "y": np.zeros_like(r)}) * np.ones_like(r)


def sphere_area(dimension: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (dimension / 2) / math.gamma(dimension / 2)


@dataclass(frozen=True)
class RadialProblem:
    """``-u'' - ((N-1)/r - alpha) u' + (h + k^2/r^2) u = 0`` on ``(r1, r2)``.

    ``alpha`` and ``h`` are functions of ``r`` (numbers, callables or
    expressions in ``r``). The ``k^2/r^2`` term is the angular Fourier mode.
    """

    r1: float
    r2: float
    dimension: int = 2
    alpha: object = 0.0
    h: object = 1.0
    mode: int = 0
    boundary: tuple = (1.0, 0.0)

    def __post_init__(self):
        if not (0 < self.r1 < self.r2):
            raise InvalidRadii(f"need 0 < R1 < R2, got ({self.r1}, {self.r2})")
        if self.dimension < 1:
            raise InvalidResolution("dimension must be positive")
        if self.mode < 0:
            raise InvalidResolution("Fourier mode must be >= 0")
        if self.mode > 0 and self.dimension != 2:
            raise InvalidResolution("Fourier modes are only defined for N = 2")


@dataclass(frozen=True)
class RadialGridFunction:
    r: np.ndarray
    u: np.ndarray
    dimension: int = 2

    def __call__(self, r):
        return np.interp(r, self.r, self.u)

    def integrate(self, weight=1.0, lam=None) -> float:
        """Integral of ``weight * u`` over the N-dimensional annulus (Simpson)."""
        w = _weight_values(weight, self.r, lam)
        jac = sphere_area(self.dimension) * self.r ** (self.dimension - 1)
        return float(simpson(w * self.u * jac, x=self.r))


def _weight_values(weight, r, lam):
    if isinstance(weight, (int, float)):
        return np.full_like(r, float(weight))
    if callable(weight) and not isinstance(weight, exprlang.Expr):
        return np.asarray(weight(r), dtype=float) * np.ones_like(r)
    expr = weight if isinstance(weight, exprlang.Expr) else exprlang.parse(weight)
    env = {"x": r, "y": np.zeros_like(r)}
    if lam is not None:
        env["lambda"] = lam
    return exprlang.evaluate_array(expr, env) * np.ones_like(r)


def radial_solve(p: RadialProblem, n_points: int = 2001) -> RadialGridFunction:
    """Central-difference solution on ``n_points`` uniformly spaced nodes."""
    if n_points < 16:
        raise InvalidResolution(f"n_points must be >= 16, got {n_points}")
    r = np.linspace(p.r1, p.r2, n_points)
    alpha = _as_radial_fn(p.alpha)(r)
    h = _as_radial_fn(p.h)(r)
    if not np.all(h > 0):
        raise CoefficientError(f"h must be positive on [R1, R2]; min is {h.min():.3g}")
    if not np.all(4 * h > alpha**2):
        warnings.warn("weak convection condition 4h > alpha^2 fails on the radial grid",
                      WeakConvectionWarning, stacklevel=2)
    dr = r[1] - r[0]
    ri = r[1:-1]
    drift = (p.dimension - 1) / ri - alpha[1:-1]
    q = h[1:-1] + p.mode**2 / ri**2
    lower = -1.0 / dr**2 + drift / (2 * dr)
    diag = 2.0 / dr**2 + q
    upper = -1.0 / dr**2 - drift / (2 * dr)
    n = len(ri)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    rhs = np.zeros(n)
    u1, u2 = map(float, p.boundary)
    rhs[0] -= lower[0] * u1
    rhs[-1] -= upper[-1] * u2
    try:
        ui = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc

    def residual(v):
        res = diag * v - rhs
        res[1:] += lower[1:] * v[:-1]
        res[:-1] += upper[:-1] * v[1:]
        return res

    norm = np.abs(lower).max() + np.abs(diag).max() + np.abs(upper).max()
    for _ in range(3):
        res = residual(ui)
        scale = norm * np.abs(ui).max() + np.abs(rhs).max()
        if scale == 0 or np.abs(res).max() <= 1e-12 * scale:
            break
        ui = ui - solve_banded((1, 1), ab, res)
    else:
        raise SingularSystem("radial solve did not reach relative residual 1e-12")
    u = np.concatenate([[u1], ui, [u2]])
    if not np.all(np.isfinite(u)):
        raise SingularSystem("non-finite radial solution")
    return RadialGridFunction(r, u, p.dimension)


@dataclass
class RadialBasisSet:
    """Radial basis solutions, tag 0 = outer (1 at R2), tag 1 = inner (1 at R1)."""

    lam: float | None
    fields: list = field(default_factory=list)

    @property
    def n_components(self):
        return len(self.fields)

    def integrate(self, weight, values=None, absolute=False) -> float:
        f = self.fields[0]
        w = _weight_values(weight, f.r, self.lam)
        if absolute:
            w = np.abs(w)
        u = np.ones_like(f.r) if values is None else np.asarray(
            values.u if isinstance(values, RadialGridFunction) else values, dtype=float)
        jac = sphere_area(f.dimension) * f.r ** (f.dimension - 1)
        return float(simpson(w * u * jac, x=f.r))

    def weight_values(self, weight):
        return _weight_values(weight, self.fields[0].r, self.lam)

    def trace(self, values, tag):
        u = values.u if isinstance(values, RadialGridFunction) else np.asarray(values)
        return u[[-1]] if tag == 0 else u[[0]]

    def field(self, values) -> RadialGridFunction:
        f = self.fields[0]
        return RadialGridFunction(f.r, np.asarray(values, dtype=float), f.dimension)


def radial_basis(r1, r2, alpha, h, dimension=2, n_points=2001, lam=None) -> RadialBasisSet:
    fields = [
        radial_solve(RadialProblem(r1, r2, dimension, alpha, h, 0, (0.0, 1.0)), n_points),
        radial_solve(RadialProblem(r1, r2, dimension, alpha, h, 0, (1.0, 0.0)), n_points),
    ]
    return RadialBasisSet(lam, fields)


# --------------------------------------------------------------------------
# quadrature


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12,
                     max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with the usual ``|S2 - S1| <= 15 tol`` test."""

    def simp(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simp(fa, flm, fm, a, m)
        right = simp(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simp(fa, fm, fb, a, b), tol, max_depth)


# --------------------------------------------------------------------------
# Example 1: A(lam, 2 lam), constant inner weight g


@dataclass(frozen=True)
class Example1Result:
    regime: str  # Unique | InfinitelyMany | NoSolution
    lam: float
    lam_star: float
    b_inner: float
    c_star_profile: str | None = None

    @property
    def tag(self):
        return self.regime


def alg_eq_f(lam: float, g: float) -> float:
    """Left-hand side ``f`` of the Example 1 algebraic equation ``f(lam) = 1``."""
    c = 1.0 / (4.0 * g * math.pi)
    return ((1.0 + lam) / 2.0 - c) * math.expm1(2.0 * lam) / lam - 2.0 * math.expm1(lam)


def _alg_eq_scaled(lam: float, g: float) -> float:
    # (f - 1) * lam * exp(-2 lam), overflow-free and with the same sign
    c = 1.0 / (4.0 * g * math.pi)
    em = math.exp(-lam)
    return (lam * (1.0 + em * em) - 4.0 * lam * em - (1.0 - 2.0 * c) * math.expm1(-2.0 * lam)) / 2.0


def alg_eq_root(g: float, lo: float = 1e-8, hi: float = 1e3) -> float:
    """Positive root of ``f(lam) = 1`` by a bracket scan and bisection."""
    if not g > 0:
        raise BracketingFailure(f"no sign change on ({lo}, {hi}); weight g must be positive, got {g}")
    grid = np.geomspace(lo, hi, 400)
    vals = [_alg_eq_scaled(x, g) for x in grid]
    for k in range(len(grid) - 1):
        if vals[k] == 0.0:
            return float(grid[k])
        if vals[k] * vals[k + 1] < 0:
            a, b, fa = float(grid[k]), float(grid[k + 1]), vals[k]
            break
    else:
        raise BracketingFailure(f"no sign change of f - 1 on ({lo}, {hi})")
    while True:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = _alg_eq_scaled(m, g)
        if fm == 0.0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return a if abs(_alg_eq_scaled(a, g)) <= abs(_alg_eq_scaled(b, g)) else b


def example1_phi(r, lam):
    """Inner basis solution on A(lam, 2 lam)."""
    return np.sinh(2 * lam - np.asarray(r)) / np.sinh(lam)


def example1_psi(r, lam):
    """Outer basis solution on A(lam, 2 lam)."""
    return np.sinh(np.asarray(r) - lam) / np.sinh(lam)


def example1_matrix(lam: float, g: float) -> np.ndarray:
    """Interaction matrix in tag order (0 = outer, 1 = inner); the outer weight is zero."""
    s, c = math.sinh(lam), math.cosh(lam)
    r = np.zeros((2, 2))
    r[1, 1] = 2 * math.pi * g * (lam * c - 2 * lam + s) / s
    r[1, 0] = 2 * math.pi * g * (2 * lam * c - s - lam) / s
    return r


def example1_det(lam: float, g: float) -> float:
    return 1.0 - float(example1_matrix(lam, g)[1, 1])


def example1_classify(b_inner: float, lam: float, g: float) -> Example1Result:
    if not (lam > 0 and g > 0):
        raise InvalidLambda(f"need lambda > 0 and g > 0, got ({lam}, {g})")
    lam_star = alg_eq_root(g)
    if abs(lam - lam_star) <= ROOT_TOL * max(1.0, lam_star):
        if b_inner == 0:
            return Example1Result("InfinitelyMany", lam, lam_star, b_inner,
                                  f"c*(exp(r) - exp({4 * lam_star!r} - r))")
        return Example1Result("NoSolution", lam, lam_star, b_inner)
    return Example1Result("Unique", lam, lam_star, b_inner)


# --------------------------------------------------------------------------
# Example 2: A(1, lam), inner weight C0 exp(-r) sin(r) / r


def critical_c0() -> float:
    """The C0 for which the inner integral tends to 1 as lam -> infinity."""
    return 5.0 * math.e / (2.0 * math.pi * _S)


def _check_lam(lam):
    if not lam > 1:
        raise InvalidLambda(f"lambda must exceed 1, got {lam}")


def example2_phi(r, lam):
    """Inner basis solution on A(1, lam)."""
    r = np.asarray(r, dtype=float)
    return (np.exp(-r) - np.exp(-2 * lam + r)) / (math.exp(-1) - math.exp(-2 * lam + 1))


def example2_psi(r, lam):
    """Outer basis solution on A(1, lam)."""
    r = np.asarray(r, dtype=float)
    return (np.exp(r) - np.exp(2 - r)) / (math.exp(lam) - math.exp(2 - lam))


def example2_weight(c0: float) -> str:
    return f"{float(c0)!r}*exp(-r)*sin(r)/r"


def example2_integral(lam: float, c0: float) -> float:
    """Closed form of the inner weight integrated against the inner basis solution."""
    _check_lam(lam)
    e2l = math.exp(-2 * lam)
    bracket = math.exp(-2) * _S / 5 - e2l * (math.cos(1) - math.cos(lam)
                                             + (2 * math.sin(lam) + math.cos(lam)) / 5)
    denom = -math.exp(-1) * math.expm1(2 - 2 * lam)
    return 2 * math.pi * c0 * bracket / denom


def example2_integral_quadrature(lam: float, c0: float, tol: float = 1e-12) -> float:
    """The same integral from its defining radial form by adaptive Simpson."""
    _check_lam(lam)

    def f(r):
        return (math.exp(-r) - math.exp(-2 * lam + r)) * math.exp(-r) * math.sin(r)

    denom = -math.exp(-1) * math.expm1(2 - 2 * lam)
    return 2 * math.pi * c0 * adaptive_simpson(f, 1.0, lam, tol) / denom


def example2_det(lam: float, c0: float | None = None) -> float:
    """``det(I - R)`` for A(1, lam); ``c0=None`` means the critical value."""
    return 1.0 - example2_integral(lam, critical_c0() if c0 is None else c0)


def example2_matrix(lam: float, c0: float | None = None) -> np.ndarray:
    """Interaction matrix in tag order (0 = outer, 1 = inner); the outer weight is zero."""
    c0 = critical_c0() if c0 is None else c0
    r = np.zeros((2, 2))
    r[1, 1] = example2_integral(lam, c0)

    def f(s):
        return (math.exp(s) - math.exp(2 - s)) * math.exp(-s) * math.sin(s)

    r[1, 0] = 2 * math.pi * c0 * adaptive_simpson(f, 1.0, lam, 1e-13) / (math.exp(lam) - math.exp(2 - lam))
    return r


def example2_det_factorized(lam: float) -> float:
    """Product form of the critical-C0 determinant."""
    _check_lam(lam)
    pref = -4 * math.sqrt(5) * math.exp(-2 * lam + 2) / (-math.expm1(-2 * lam + 2) * _S)
    return pref * math.cos((1 + lam - 2 * THETA0) / 2) * math.sin((1 - lam) / 2)


def s0_set(k_max: int) -> list[float]:
    """Zeros ``2 k pi + 1`` and ``(2k - 1) pi + 2 theta0 - 1`` for k = 1..k_max, sorted."""
    out = []
    for k in range(1, k_max + 1):
        out += [2 * k * math.pi + 1, (2 * k - 1) * math.pi + 2 * THETA0 - 1]
    return sorted(out)
