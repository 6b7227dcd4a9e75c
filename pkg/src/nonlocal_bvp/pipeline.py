"""Config + lambda -> basis solutions, interaction matrix and classification.

Two engines:

``fem``
    P1 solves on a mesh hierarchy. The last ``extrapolation`` levels are
    combined by Romberg extrapolation in ``h^2`` to give the matrix used for
    the determinant and the classification; the finest level is kept for
    reconstruction and residual checks.
``oracle``
    Closed forms when the config carries ``[oracle] example``, otherwise the
    radial finite-difference solve (annuli with radial data only).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import exprlang, fem, geometry, radial_oracle
from .config import ProblemConfig
from .errors import ConfigError, InvariantViolation, MaximumPrincipleWarning
from .nonlocal_system import NonlocalSystem, classify

log = logging.getLogger(__name__)


@dataclass
class Evaluation:
    lam: float
    engine: str
    system: NonlocalSystem  # best estimate (extrapolated when requested)
    raw_system: NonlocalSystem  # finest level, consistent with ``basis``
    basis: object
    classification: object
    eps_det: float


def mesh_hierarchy(cfg: ProblemConfig, lam: float, levels: int | None = None):
    """Meshes from coarse to fine, ending at the finest configured resolution."""
    d = cfg.discretization
    levels = d.refinements + 1 if levels is None else levels
    spec = cfg.domain_spec(lam)
    if isinstance(spec, geometry.Annulus):
        if spec.dimension != 2:
            raise InvariantViolation("the fem engine is two-dimensional; use the oracle engine")
        out = []
        for k in range(d.refinements + 1 - levels, d.refinements + 1):
            out.append(geometry.generate_annulus_mesh(spec.inner_radius, spec.outer_radius,
                                                      d.nr * 2**k, d.ntheta * 2**k, d.grading))
        return out
    if isinstance(spec, geometry.MultiHole):
        raise ConfigError("multihole domains need a mesh file ([domain] kind = \"mesh\")", cfg.path)
    mesh = geometry.mesh_for_domain(spec)
    meshes = [mesh]
    for _ in range(d.refinements):
        meshes.append(geometry.refine(meshes[-1]))
    return meshes[-levels:]


def _fem_evaluate(cfg: ProblemConfig, lam: float):
    meshes = mesh_hierarchy(cfg, lam, cfg.discretization.extrapolation)
    Rs = []
    basis = None
    for k, mesh in enumerate(meshes):
        with warnings.catch_warnings():
            if k < len(meshes) - 1:
                # coarse levels only feed the extrapolation
                warnings.simplefilter("ignore", MaximumPrincipleWarning)
            basis = fem.basis_solutions(mesh, cfg.coefficients, lam)
        Rs.append([[basis.integrate(w, basis.fields[j]) for j in range(basis.n_components)]
                   for w in cfg.weights])
    raw = NonlocalSystem(np.array(Rs[-1]), np.array(cfg.b), lam, list(cfg.weights))
    best = NonlocalSystem(fem.romberg(Rs), np.array(cfg.b), lam, list(cfg.weights))
    return best, raw, basis


def _radial_fn(expr, lam):
    def f(r):
        return exprlang.evaluate_array(expr, {"x": r, "y": np.zeros_like(r), "lambda": lam})
    return f


def _closed_form_basis(cfg, lam, r1, r2):
    r = np.linspace(r1, r2, cfg.discretization.n_points)
    if cfg.oracle_example == 1:
        inner, outer = radial_oracle.example1_phi(r, lam), radial_oracle.example1_psi(r, lam)
    else:
        inner, outer = radial_oracle.example2_phi(r, r2), radial_oracle.example2_psi(r, r2)
    fields = [radial_oracle.RadialGridFunction(r, outer), radial_oracle.RadialGridFunction(r, inner)]
    return radial_oracle.RadialBasisSet(lam, fields)


def _oracle_evaluate(cfg: ProblemConfig, lam: float):
    spec = cfg.domain_spec(lam)
    if not isinstance(spec, geometry.Annulus):
        raise ConfigError("the oracle engine needs an annulus domain", cfg.path)
    r1, r2 = spec.inner_radius, spec.outer_radius
    b = np.array(cfg.b)
    if cfg.oracle_example == 1:
        sys_ = NonlocalSystem(radial_oracle.example1_matrix(lam, cfg.g_const), b, lam, list(cfg.weights))
        return sys_, sys_, _closed_form_basis(cfg, lam, r1, r2)
    if cfg.oracle_example == 2:
        sys_ = NonlocalSystem(radial_oracle.example2_matrix(r2, cfg.c0), b, lam, list(cfg.weights))
        return sys_, sys_, _closed_form_basis(cfg, lam, r1, r2)
    co = cfg.coefficients
    if co.a_x is not None or not co.is_radial() or not all(exprlang.is_radial(w) for w in cfg.weights):
        raise ConfigError("the oracle engine needs radial coefficients and weights", cfg.path)
    alpha = _radial_fn(co.a_r, lam) if co.a_r is not None else 0.0
    h = _radial_fn(co.h, lam)
    d = cfg.discretization
    Rs = []
    basis = None
    for k in range(d.extrapolation - 1, -1, -1):
        n = (d.n_points - 1) // 2**k + 1
        basis = radial_oracle.radial_basis(r1, r2, alpha, h, spec.dimension, n, lam)
        Rs.append([[basis.integrate(w, basis.fields[j]) for j in range(2)] for w in cfg.weights])
    raw = NonlocalSystem(np.array(Rs[-1]), b, lam, list(cfg.weights))
    return NonlocalSystem(fem.romberg(Rs), b, lam, list(cfg.weights)), raw, basis


def evaluate(cfg: ProblemConfig, lam: float | None = None, engine: str | None = None) -> Evaluation:
    lam = cfg.lam if lam is None else float(lam)
    if lam is None:
        raise ConfigError("no lambda given ([domain] lambda or --lambda)", cfg.path)
    engine = engine or cfg.sweep.engine
    if engine == "fem":
        best, raw, basis = _fem_evaluate(cfg, lam)
    elif engine == "oracle":
        best, raw, basis = _oracle_evaluate(cfg, lam)
    else:
        raise ConfigError(f"unknown engine {engine!r}", cfg.path)
    eps = cfg.eps_det if cfg.eps_det is not None else best.default_eps()
    cls = classify(best, eps)
    log.debug("lambda=%r engine=%s det=%r class=%s", lam, engine, best.det, cls.tag)
    return Evaluation(lam, engine, best, raw, basis, cls, eps)


def det_function(cfg: ProblemConfig, engine: str | None = None):
    """``lam -> det(I - R_lam)`` for root finding."""
    engine = engine or cfg.sweep.engine
    if engine == "oracle" and cfg.oracle_example == 2:
        # only R_ii enters the determinant when the outer weight vanishes
        return lambda lam: radial_oracle.example2_det(cfg.domain_spec(lam).outer_radius, cfg.c0)
    if engine == "oracle" and cfg.oracle_example == 1:
        return lambda lam: radial_oracle.example1_det(lam, cfg.g_const)
    return lambda lam: evaluate(cfg, lam, engine).system.det
