"""Piecewise-linear Galerkin solver for -Lap u + a.grad u + h u = 0.

All element integrals use the three-point mid-edge rule, which is exact for
quadratics. Dirichlet data are imposed by eliminating boundary rows, so
boundary nodal values are exact.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import exprlang
from .errors import (
    CoefficientDomainError,
    CoefficientError,
    DomainError,
    InvariantViolation,
    MaximumPrincipleWarning,
    SingularSystem,
    WeakConvectionWarning,
)
from .exprlang import Expr
from .geometry import Mesh

PRESETS = ("zero", "unit-radial-drift")
RESIDUAL_TOL = 1e-12
MAX_PRINCIPLE_TOL = 1e-8

# barycentric coordinates of the edge midpoints (edges 01, 12, 20)
_MID = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def as_expr(value, parameters=None) -> Expr:
    """Coerce a number, expression string or ``Expr`` (or ``"zero"``) to ``Expr``."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.floating)):
        return exprlang.Const(float(value))
    if value == "zero":
        return exprlang.Const(0.0)
    return exprlang.parse(value, parameters)


@dataclass(frozen=True)
class CoefficientField:
    """Coefficients ``h`` and ``a`` of the operator.

    The drift is either Cartesian (``a_x``, ``a_y``), radial (``a = a_r(x) x/|x|``)
    or absent.
    """

    h: Expr
    a_x: Expr | None = None
    a_y: Expr | None = None
    a_r: Expr | None = None

    def __post_init__(self):
        if (self.a_x is None) != (self.a_y is None):
            raise CoefficientError("give both a_x and a_y, or neither")
        if self.a_r is not None and self.a_x is not None:
            raise CoefficientError("drift given both in Cartesian and radial form")

    @classmethod
    def build(cls, h="1", a="zero", a_x=None, a_y=None, a_r=None, parameters=None):
        """Build from strings; ``a`` takes a preset name."""
        if a not in PRESETS:
            raise CoefficientError(f"unknown drift preset {a!r}; choose from {PRESETS}")
        if a == "unit-radial-drift":
            if a_x is not None or a_r is not None:
                raise CoefficientError("preset drift conflicts with an explicit drift")
            a_r = "1/r"
        return cls(
            h=as_expr(h, parameters),
            a_x=None if a_x is None else as_expr(a_x, parameters),
            a_y=None if a_y is None else as_expr(a_y, parameters),
            a_r=None if a_r is None else as_expr(a_r, parameters),
        )

    @property
    def has_drift(self):
        return self.a_x is not None or self.a_r is not None

    def is_radial(self):
        parts = [self.h] + ([self.a_r] if self.a_r is not None else [])
        return self.a_x is None and all(exprlang.is_radial(p) for p in parts)

    def reaction(self, x, y, lam=None):
        return _eval_field(self.h, x, y, lam)

    def drift(self, x, y, lam=None):
        if self.a_x is not None:
            return _eval_field(self.a_x, x, y, lam), _eval_field(self.a_y, x, y, lam)
        if self.a_r is not None:
            alpha = _eval_field(self.a_r, x, y, lam)
            r = np.hypot(x, y)
            return alpha * x / r, alpha * y / r
        z = np.zeros(np.shape(x))
        return z, z.copy()


def _env(x, y, lam):
    env = {"x": x, "y": y}
    if lam is not None:
        env["lambda"] = lam
    return env


def _eval_field(expr, x, y, lam):
    try:
        return exprlang.evaluate_array(expr, _env(np.asarray(x), np.asarray(y), lam))
    except DomainError as exc:
        raise CoefficientDomainError(f"{exprlang.to_string(expr)}: {exc}") from exc


def eval_weight(weight, x, y, lam=None):
    """Evaluate a weight (Expr, number, expression string or callable)."""
    if callable(weight) and not isinstance(weight, Expr):
        return np.asarray(weight(x, y), dtype=float) * np.ones(np.shape(x))
    return _eval_field(as_expr(weight), x, y, lam)


@dataclass(frozen=True)
class DiscreteField:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise InvariantViolation(f"field has {v.shape} values for {self.mesh.n_nodes} nodes")
        if not np.all(np.isfinite(v)):
            raise InvariantViolation("field has non-finite values")
        object.__setattr__(self, "values", v)


class _ElementData:
    """Per-mesh geometric data shared by assembly and quadrature."""

    def __init__(self, mesh: Mesh):
        p = mesh.nodes[mesh.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        jac = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.area = 0.5 * jac
        g = np.empty((len(p), 3, 2))
        g[:, 1, 0] = d2[:, 1] / jac
        g[:, 1, 1] = -d2[:, 0] / jac
        g[:, 2, 0] = -d1[:, 1] / jac
        g[:, 2, 1] = d1[:, 0] / jac
        g[:, 0] = -g[:, 1] - g[:, 2]
        self.grad = g
        self.qpts = np.einsum("qi,tik->tqk", _MID, p)


def _element_data(mesh: Mesh) -> _ElementData:
    data = mesh.__dict__.get("_fem_cache")
    if data is None:
        data = _ElementData(mesh)
        mesh.__dict__["_fem_cache"] = data
    return data


def check_coefficients(mesh: Mesh, coeffs: CoefficientField, lam=None):
    """Evaluate coefficients at the quadrature points and check their invariants.

    Returns ``(h, a_x, a_y)`` arrays of shape ``(n_triangles, 3)``.
    """
    q = _element_data(mesh).qpts
    x, y = q[..., 0], q[..., 1]
    h = coeffs.reaction(x, y, lam)
    ax, ay = coeffs.drift(x, y, lam)
    if not np.all(h > 0):
        raise CoefficientError(f"h must be positive; min over quadrature points is {h.min():.3g}")
    margin = 4.0 * h - (ax * ax + ay * ay)
    if not np.all(margin > 0):
        warnings.warn(
            f"weak convection condition 4h > |a|^2 fails at {(margin <= 0).sum()} quadrature point(s)",
            WeakConvectionWarning,
            stacklevel=3,
        )
    return h, ax, ay


def assemble(mesh: Mesh, coeffs: CoefficientField | None, lam=None) -> sp.csr_matrix:
    """Global matrix of the bilinear form; ``coeffs=None`` gives the Laplacian."""
    el = _element_data(mesh)
    g = el.grad
    local = el.area[:, None, None] * np.einsum("tik,tjk->tij", g, g)
    if coeffs is not None:
        h, ax, ay = check_coefficients(mesh, coeffs, lam)
        w = el.area / 3.0
        # (a . grad phi_j)(q) phi_i(q)
        adg = ax[:, :, None] * g[:, None, :, 0] + ay[:, :, None] * g[:, None, :, 1]
        local += w[:, None, None] * np.einsum("qi,tqj->tij", _MID, adg)
        local += w[:, None, None] * np.einsum("tq,qi,qj->tij", h, _MID, _MID)
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


class DirichletSolver:
    """Factorises the interior block once; solves for any constant boundary data."""

    def __init__(self, mesh: Mesh, coeffs: CoefficientField | None, lam=None):
        self.mesh = mesh
        self.lam = lam
        self.matrix = assemble(mesh, coeffs, lam)
        self.n_components = mesh.n_components
        self.tag_nodes = [mesh.boundary_nodes(t) for t in range(self.n_components)]
        interior = np.ones(mesh.n_nodes, bool)
        interior[mesh.all_boundary_nodes()] = False
        self.interior = np.flatnonzero(interior)
        self.boundary = np.flatnonzero(~interior)
        a = self.matrix
        self._a_ii = a[self.interior][:, self.interior].tocsc()
        self._a_ib = a[self.interior][:, self.boundary].tocsr()
        self._norm = spla.norm(self._a_ii, np.inf) if self.interior.size else 1.0
        if self.interior.size:
            try:
                self._lu = spla.splu(self._a_ii)
            except RuntimeError as exc:
                raise SingularSystem(str(exc)) from exc

    def solve(self, boundary_values) -> np.ndarray:
        """Nodal solution for constant data ``boundary_values[tag]``."""
        if isinstance(boundary_values, dict):
            vals = [float(boundary_values.get(t, 0.0)) for t in range(self.n_components)]
        else:
            vals = [float(v) for v in boundary_values]
        if len(vals) != self.n_components:
            raise ValueError(f"need {self.n_components} boundary values, got {len(vals)}")
        u = np.zeros(self.mesh.n_nodes)
        for t, v in enumerate(vals):
            u[self.tag_nodes[t]] = v
        if not self.interior.size:
            return u
        rhs = -(self._a_ib @ u[self.boundary])
        ui = self._lu.solve(rhs)
        for _ in range(3):
            res = rhs - self._a_ii @ ui
            scale = self._norm * np.abs(ui).max() + np.abs(rhs).max()
            if scale == 0 or np.abs(res).max() <= RESIDUAL_TOL * scale:
                break
            ui = ui + self._lu.solve(res)
        else:
            raise SingularSystem(f"relative residual {np.abs(res).max() / scale:.2e} above {RESIDUAL_TOL}")
        if not np.all(np.isfinite(ui)):
            raise SingularSystem("non-finite solution")
        u[self.interior] = ui
        return u


def solve_dirichlet(mesh: Mesh, coeffs: CoefficientField, boundary_values, lam=None) -> DiscreteField:
    return DiscreteField(mesh, DirichletSolver(mesh, coeffs, lam).solve(boundary_values))


@dataclass
class BasisSolutionSet:
    """Fields ``phi_eta``: 1 on boundary component ``eta``, 0 on the others."""

    lam: float | None
    mesh: Mesh
    fields: list

    @property
    def n_components(self):
        return len(self.fields)

    def field(self, values) -> DiscreteField:
        return DiscreteField(self.mesh, values)

    def integrate(self, weight, values=None, absolute=False) -> float:
        return integrate_weighted(self.mesh, weight, values, lam=self.lam, absolute=absolute)

    def trace(self, values, tag) -> np.ndarray:
        v = values.values if isinstance(values, DiscreteField) else np.asarray(values)
        return v[self.mesh.boundary_nodes(tag)]

    def weight_values(self, weight):
        q = _element_data(self.mesh).qpts
        return eval_weight(weight, q[..., 0], q[..., 1], self.lam)

    def maximum_principle_violation(self) -> float:
        """Largest excursion of any field, or of their sum, outside [0, 1]."""
        vals = np.array([f.values for f in self.fields])
        return float(max(0.0, -vals.min(), vals.max() - 1.0, vals.sum(axis=0).max() - 1.0))


def basis_solutions(mesh: Mesh, coeffs: CoefficientField, lam=None) -> BasisSolutionSet:
    m1 = mesh.n_components
    if m1 < 2:
        raise InvariantViolation("basis solutions need at least two boundary components")
    solver = DirichletSolver(mesh, coeffs, lam)
    fields = [DiscreteField(mesh, solver.solve(np.eye(m1)[eta])) for eta in range(m1)]
    basis = BasisSolutionSet(lam, mesh, fields)
    excess = basis.maximum_principle_violation()
    if excess > MAX_PRINCIPLE_TOL:
        warnings.warn(f"discrete maximum principle violated by {excess:.3g}", MaximumPrincipleWarning,
                      stacklevel=2)
    return basis


def integrate_weighted(mesh: Mesh, weight, field=None, lam=None, absolute=False) -> float:
    """Mid-edge quadrature of ``weight * u_h``; ``field=None`` integrates the weight."""
    el = _element_data(mesh)
    q = el.qpts
    w = eval_weight(weight, q[..., 0], q[..., 1], lam)
    if absolute:
        w = np.abs(w)
    if field is None:
        uq = 1.0
    else:
        v = field.values if isinstance(field, DiscreteField) else np.asarray(field, dtype=float)
        uq = v[mesh.triangles] @ _MID.T
    return float(np.sum((el.area / 3.0)[:, None] * w * uq))


def dirichlet_energy(mesh: Mesh, values) -> float:
    v = values.values if isinstance(values, DiscreteField) else np.asarray(values)
    return float(v @ (assemble(mesh, None) @ v))


def capacity_fem(mesh: Mesh) -> float:
    """Dirichlet energy of the discrete harmonic function (1 inside, 0 outside)."""
    if mesh.n_components != 2:
        raise InvariantViolation("capacity needs exactly two boundary components")
    solver = DirichletSolver(mesh, None)
    u = solver.solve([0.0, 1.0])
    return float(u @ (solver.matrix @ u))


def romberg(values: Sequence, ratio: float = 2.0, order: int = 2):
    """Richardson-extrapolate a sequence computed at mesh sizes h, h/ratio, ...

    Assumes an error expansion in powers ``h^order, h^(2 order), ...`` and
    returns the last entry of the Romberg table. Entries may be arrays.
    """
    row = [np.asarray(v, dtype=float) for v in values]
    if not row:
        raise ValueError("no values to extrapolate")
    k = 1
    while len(row) > 1:
        f = ratio ** (order * k)
        row = [(f * row[i + 1] - row[i]) / (f - 1.0) for i in range(len(row) - 1)]
        k += 1
    return row[0]


def evaluate_at(mesh: Mesh, values, points) -> np.ndarray:
    """Linear interpolation of nodal ``values`` at ``points`` (shape (k, 2))."""
    v = values.values if isinstance(values, DiscreteField) else np.asarray(values, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p = mesh.nodes[mesh.triangles]
    out = np.empty(len(pts))
    for k, x in enumerate(pts):
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        rel = x - p[:, 0]
        jac = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        l1 = (rel[:, 0] * d2[:, 1] - rel[:, 1] * d2[:, 0]) / jac
        l2 = (d1[:, 0] * rel[:, 1] - d1[:, 1] * rel[:, 0]) / jac
        lam = np.column_stack([1 - l1 - l2, l1, l2])
        inside = np.flatnonzero(lam.min(axis=1) >= -1e-12)
        if inside.size == 0:
            raise InvariantViolation(f"point {tuple(x)} is not covered by the mesh")
        t = inside[0]
        out[k] = lam[t] @ v[mesh.triangles[t]]
    return out
