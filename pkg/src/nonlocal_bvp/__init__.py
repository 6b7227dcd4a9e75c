"""Convection-diffusion boundary value problems with integral boundary conditions.

Solvability of ``-Lap u + a.grad u + h u = 0`` with boundary data
``u = b_eta + int g_eta u`` on each boundary component is decided by
``det(I - R)``, where ``R`` collects the weights integrated against the
Dirichlet basis solutions.
"""
from .errors import NonlocalBVPError
from .geometry import Annulus, Disk, ExternalMesh, Mesh, MultiHole, generate_annulus_mesh, read_mesh, write_mesh
from .fem import CoefficientField, DiscreteField, basis_solutions, capacity_fem, integrate_weighted, solve_dirichlet
from .nonlocal_system import (
    NonlocalSystem,
    build_system,
    check_sufficient_conditions,
    classify,
    decay_envelope,
    fixed_point_residual,
    reconstruct,
)

__version__ = "0.1.0"
