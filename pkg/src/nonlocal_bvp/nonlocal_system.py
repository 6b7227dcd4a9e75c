"""Reduction of the non-local problem to a small linear system.

A solution is ``u = sum_eta B_eta phi_eta`` where ``phi_eta`` are the basis
solutions (1 on component ``eta``, 0 elsewhere). The boundary conditions
``u|_eta = b_eta + int g_eta u`` become ``(I - R) B = b`` with
``R[i, j] = int g_i phi_j``. Index 0 is the outer boundary and 1..m the inner
ones.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import fem, geometry
from .errors import AllZeroField, DimensionMismatch, InvariantViolation, NonConstantTrace
from .geometry import Mesh

TRACE_TOL = 1e-10
UNIQUE_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Prop1View:
    """Two-component quantities in (inner, outer) order.

    ``r_ii = int g_i phi``, ``r_io = int g_i psi``, ``r_oi = int g_o phi`` and
    ``r_oo = int g_o psi``, where ``phi`` is the inner and ``psi`` the outer
    basis solution.
    """

    r_ii: float
    r_io: float
    r_oi: float
    r_oo: float
    b_i: float
    b_o: float

    @property
    def c_psi(self):
        return np.array([[self.b_i, -self.r_io], [self.b_o, 1.0 - self.r_oo]])

    @property
    def c_phi(self):
        return np.array([[1.0 - self.r_ii, self.b_i], [-self.r_oi, self.b_o]])

    def det_expansion(self):
        return (1.0 - self.r_ii) * (1.0 - self.r_oo) - self.r_io * self.r_oi

    def cramer(self):
        """``(B_inner, B_outer)`` from the determinant ratios."""
        d = self.det_expansion()
        return np.linalg.det(self.c_psi) / d, np.linalg.det(self.c_phi) / d


@dataclass
class NonlocalSystem:
    R: np.ndarray
    b: np.ndarray
    lam: float | None = None
    weights: list | None = None

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        n = self.R.shape[0]
        if self.R.shape != (n, n) or self.b.shape != (n,):
            raise DimensionMismatch(f"R has shape {self.R.shape}, b has shape {self.b.shape}")
        if not np.all(np.isfinite(self.R)):
            raise InvariantViolation("interaction matrix has non-finite entries")

    @property
    def size(self):
        return self.R.shape[0]

    @property
    def matrix(self):
        """``I - R``."""
        return np.eye(self.size) - self.R

    @property
    def det(self) -> float:
        with warnings.catch_warnings():
            # exactly singular I - R is a legitimate input (det = 0)
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(self.matrix, check_finite=False)
        sign = (-1) ** int(np.sum(piv != np.arange(len(piv))))
        return float(sign * np.prod(np.diag(lu)))

    @property
    def cond(self) -> float:
        return float(np.linalg.cond(self.matrix))

    @property
    def norm_inf(self) -> float:
        return float(np.abs(self.R).sum(axis=1).max())

    def default_eps(self) -> float:
        return 1e-9 * (1.0 + self.norm_inf)

    def prop1_view(self) -> Prop1View:
        if self.size != 2:
            raise DimensionMismatch("the (inner, outer) view needs exactly two components")
        r = self.R
        return Prop1View(r_ii=r[1, 1], r_io=r[1, 0], r_oi=r[0, 1], r_oo=r[0, 0], b_i=self.b[1], b_o=self.b[0])

    @property
    def det_c_psi(self):
        return float(np.linalg.det(self.prop1_view().c_psi)) if self.size == 2 else None

    @property
    def det_c_phi(self):
        return float(np.linalg.det(self.prop1_view().c_phi)) if self.size == 2 else None


def _values(f):
    if isinstance(f, fem.DiscreteField):
        return f.values
    if hasattr(f, "u"):
        return f.u
    return np.asarray(f, dtype=float)


def build_system(basis, weights, b, lam=None) -> NonlocalSystem:
    """Integrate every weight against every basis solution.

    ``basis`` is a :class:`fem.BasisSolutionSet` or a radial basis set.
    """
    n = basis.n_components
    if len(weights) != n or len(b) != n:
        raise DimensionMismatch(f"need {n} weights and {n} data values, got {len(weights)} and {len(b)}")
    r = np.array([[basis.integrate(w, basis.fields[j]) for j in range(n)] for w in weights])
    return NonlocalSystem(r, np.asarray(b, dtype=float), lam if lam is not None else basis.lam, list(weights))


# classification results


@dataclass(frozen=True)
class Unique:
    B: np.ndarray
    det: float
    tag: str = field(default="Unique", init=False)


@dataclass(frozen=True)
class InfinitelyMany:
    particular: np.ndarray
    kernel: np.ndarray
    det: float
    tag: str = field(default="InfinitelyMany", init=False)


@dataclass(frozen=True)
class NoSolution:
    det: float
    inconsistency: float
    tag: str = field(default="NoSolution", init=False)


@dataclass(frozen=True)
class Degenerate:
    det: float
    cond: float
    tag: str = field(default="Degenerate", init=False)


def classify(sys: NonlocalSystem, eps_det: float | None = None):
    """Unique if ``|det| > eps_det``; otherwise a rank test on ``[I - R | b]``."""
    eps = sys.default_eps() if eps_det is None else float(eps_det)
    a = sys.matrix
    d = sys.det
    if abs(d) > eps:
        B = sla.lu_solve(sla.lu_factor(a), sys.b)
        res = np.abs(a @ B - sys.b).max()
        if res > UNIQUE_RESIDUAL_TOL * max(np.abs(sys.b).max(), np.finfo(float).tiny):
            B = B + sla.lu_solve(sla.lu_factor(a), sys.b - a @ B)
        return Unique(B, d)

    u, s, vt = np.linalg.svd(a)
    tau = eps * s[0]
    null = s <= tau
    if not null.any():
        return Degenerate(d, sys.cond)
    # singular values above the threshold but within a factor 10 of it are ambiguous
    if np.any((s > tau) & (s <= 10 * tau)):
        return Degenerate(d, sys.cond)
    bnorm = float(np.linalg.norm(sys.b))
    rho = float(np.linalg.norm(u[:, null].T @ sys.b))
    gap = s[~null].min() if (~null).any() else s[0]
    if rho <= 10.0 * tau * bnorm / gap:
        particular = np.linalg.lstsq(a, sys.b, rcond=None)[0]
        kernel = vt[null][0]
        kernel = kernel * np.sign(kernel[np.argmax(np.abs(kernel))])
        return InfinitelyMany(particular, kernel, d)
    if rho > math.sqrt(tau) * bnorm:
        return NoSolution(d, rho)
    return Degenerate(d, sys.cond)


def reconstruct(basis, B):
    """``sum_eta B_eta phi_eta`` as a field on the basis' grid."""
    B = np.asarray(B, dtype=float).ravel()
    if B.shape != (basis.n_components,):
        raise DimensionMismatch(f"{B.size} coefficients for {basis.n_components} basis solutions")
    vals = sum(c * _values(f) for c, f in zip(B, basis.fields))
    return basis.field(vals)


def fixed_point_residual(u, basis, weights, b) -> float:
    """``max_eta | u|_eta - b_eta - int g_eta u |`` using the constant trace on each component."""
    n = basis.n_components
    if len(weights) != n or len(b) != n:
        raise DimensionMismatch(f"need {n} weights and {n} data values")
    worst = 0.0
    for eta in range(n):
        tr = np.asarray(basis.trace(u, eta), dtype=float)
        if tr.size and np.ptp(tr) > TRACE_TOL * max(1.0, np.abs(tr).max()):
            raise NonConstantTrace(f"trace on component {eta} varies by {np.ptp(tr):.3g}")
        val = float(tr.mean())
        worst = max(worst, abs(val - b[eta] - basis.integrate(weights[eta], u)))
    return worst


# sufficient conditions


@dataclass(frozen=True)
class SufficientConditionReport:
    integrals: tuple  # int g_eta per component
    abs_integral: float  # sum_eta int |g_eta|
    nonnegative: bool
    smallness_holds: bool
    nonneg_holds: bool


def check_sufficient_conditions(weights, domain, lam=None) -> SufficientConditionReport:
    """Smallness (``sum int |g| <= 1`` implies det > 0) and non-negative weight conditions.

    ``domain`` is a basis set or a :class:`Mesh`.
    """
    if isinstance(domain, Mesh):
        domain = fem.BasisSolutionSet(lam, domain, [])
    integrals = tuple(domain.integrate(w) for w in weights)
    abs_int = float(sum(domain.integrate(w, absolute=True) for w in weights))
    nonneg = all(np.all(domain.weight_values(w) >= 0) for w in weights)
    return SufficientConditionReport(
        integrals=integrals,
        abs_integral=abs_int,
        nonnegative=bool(nonneg),
        smallness_holds=abs_int <= 1.0,
        nonneg_holds=bool(nonneg and all(v < 1.0 for v in integrals)),
    )


# decay envelope


@dataclass(frozen=True)
class DecayEnvelope:
    kappa: float
    c_star: float
    m_star: float
    margins: np.ndarray
    n_fit: int

    def bound(self, dist, lam):
        return self.c_star * np.exp(-self.m_star * lam ** (-self.kappa / 2) * np.asarray(dist))


def decay_envelope(u, spec, lam: float, kappa: float, cell=None) -> DecayEnvelope:
    """Fit ``|u| <= C* exp(-M* lam^(-kappa/2) dist(x, boundary))``.

    The slope comes from a least-squares line through the per-bin maxima of
    ``log|u|`` (bins of one cell width in ``dist``), using nodes at least one
    cell away from the boundary. ``C*`` is then raised until the envelope
    majorises every node.
    """
    if not 0 < kappa < 2:
        raise ValueError(f"kappa must lie in (0, 2), got {kappa}")
    mesh = u.mesh
    vals = np.abs(u.values)
    if not np.any(vals > 1e-14):
        raise AllZeroField("the field vanishes; the envelope bound is vacuous")
    if spec is None:
        dist = mesh.boundary_distance(mesh.nodes)
    else:
        dist = geometry.dist_to_boundary(spec, mesh.nodes)
    cell = mesh.max_edge_length() if cell is None else cell
    s = lam ** (-kappa / 2) * dist
    ok = vals > 1e-14
    fit = ok & (dist >= cell)
    logu = np.log(np.where(ok, vals, 1.0))
    m_star = float("nan")
    n_fit = 0
    if fit.sum() >= 2:
        bins = np.floor(dist[fit] / cell).astype(int)
        xs, ys = [], []
        for k in np.unique(bins):
            sel = bins == k
            j = np.argmax(logu[fit][sel])
            xs.append(s[fit][sel][j])
            ys.append(logu[fit][sel][j])
        n_fit = len(xs)
        if n_fit >= 2:
            slope = np.polyfit(xs, ys, 1)[0]
            m_star = float(-slope)
    if not np.isfinite(m_star) or m_star <= 0:
        # no decay observed; the bound still holds with M* -> 0
        m_star = max(m_star, 0.0) if np.isfinite(m_star) else 0.0
    log_c = float(np.max(logu[ok] + m_star * s[ok]))
    c_star = math.exp(log_c)
    margins = np.full(len(vals), -np.inf)
    margins[ok] = logu[ok] - (log_c - m_star * s[ok])
    return DecayEnvelope(kappa, c_star, m_star, margins, n_fit)
