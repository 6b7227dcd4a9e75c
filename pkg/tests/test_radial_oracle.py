import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from nonlocal_bvp import radial_oracle as O
from nonlocal_bvp.errors import BracketingFailure, InvalidLambda, InvalidResolution


def test_nonzero_mode_with_zero_data_is_zero():
    for k in (1, 2, 5):
        u = O.radial_solve(O.RadialProblem(1, 2, 2, 0.0, 1.0, k, (0.0, 0.0)), 201)
        assert np.all(u.u == 0)


def test_reduces_to_u_pp_equals_u():
    lam = 3.0
    errs = []
    for n in (101, 201, 401):
        u = O.radial_solve(O.RadialProblem(1, lam, 2, "1/r", 1.0, 0, (1.0, 0.0)), n)
        errs.append(np.abs(u.u - O.example2_phi(u.r, lam)).max())
    assert errs[-1] < 1e-5
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_too_few_points():
    with pytest.raises(InvalidResolution):
        O.radial_solve(O.RadialProblem(1, 2), 10)


def test_integrate_area():
    u = O.RadialGridFunction(np.linspace(1, 2, 101), np.ones(101))
    assert u.integrate(1.0) == pytest.approx(3 * math.pi, rel=1e-13)
    assert u.integrate(1.0) == pytest.approx(O.sphere_area(2) * 1.5, rel=1e-13)


def test_adaptive_simpson():
    assert O.adaptive_simpson(math.sin, 0, math.pi, 1e-12) == pytest.approx(2.0, abs=1e-11)
    assert O.adaptive_simpson(lambda t: math.exp(-t * t), -5, 5) == pytest.approx(math.sqrt(math.pi), abs=1e-10)


# Example 1


def test_alg_eq_root_closed_form():
    g = 1 / (2 * math.pi)
    lam = O.alg_eq_root(g)
    assert lam == pytest.approx(math.log(2 + math.sqrt(3)), abs=1e-12)
    assert abs(O.alg_eq_f(lam, g) - 1) <= 1e-12


@pytest.mark.parametrize("g", [0.1, 0.5, 1.0, 3.0])
def test_alg_eq_root_residual(g):
    lam = O.alg_eq_root(g)
    assert abs(O.alg_eq_f(lam, g) - 1) <= 1e-12 * max(1.0, abs(O.alg_eq_f(lam, g)))


def test_alg_eq_root_needs_positive_g():
    with pytest.raises(BracketingFailure):
        O.alg_eq_root(-1.0)


@pytest.mark.parametrize("g", [0.1, 1 / (2 * math.pi), 1.0])
def test_example1_det_vanishes_at_root(g):
    assert abs(O.example1_det(O.alg_eq_root(g), g)) < 1e-11


@pytest.mark.parametrize("lam", [0.4, 1.3, 2.5, 6.0])
def test_example1_matrix_against_quadrature(lam):
    g = 0.37
    R = O.example1_matrix(lam, g)
    rii = 2 * math.pi * g * quad(lambda r: r * O.example1_phi(r, lam), lam, 2 * lam, epsabs=0, epsrel=1e-13)[0]
    rio = 2 * math.pi * g * quad(lambda r: r * O.example1_psi(r, lam), lam, 2 * lam, epsabs=0, epsrel=1e-13)[0]
    assert R[1, 1] == pytest.approx(rii, rel=1e-11)
    assert R[1, 0] == pytest.approx(rio, rel=1e-11)
    assert np.all(R[0] == 0)


def test_example1_basis_boundary_values():
    lam = 1.7
    assert O.example1_phi(lam, lam) == pytest.approx(1) and O.example1_phi(2 * lam, lam) == 0
    assert O.example1_psi(lam, lam) == 0 and O.example1_psi(2 * lam, lam) == pytest.approx(1)


def test_example1_regimes():
    g = 1 / (2 * math.pi)
    lam_star = O.alg_eq_root(g)
    assert O.example1_classify(0, lam_star, g).regime == "InfinitelyMany"
    assert O.example1_classify(0, lam_star, g).c_star_profile
    assert O.example1_classify(1, lam_star, g).regime == "NoSolution"
    assert O.example1_classify(1, 2 * lam_star, g).regime == "Unique"
    with pytest.raises(InvalidLambda):
        O.example1_classify(1, -1, g)


def test_example1_root_monotone_in_g():
    roots = [O.alg_eq_root(g) for g in (0.1, 0.5, 1.0)]
    assert roots[0] > roots[1] > roots[2]


# Example 2


def test_critical_c0():
    c0 = O.critical_c0()
    assert 2 * math.pi * c0 * (2 * math.sin(1) + math.cos(1)) / (5 * math.e) == pytest.approx(1, abs=1e-15)


@pytest.mark.parametrize("lam", [1.5, 2.0, 4.355890089177974, 7.0, 12.3, 30.0])
def test_example2_integral_against_quadrature(lam):
    c0 = O.critical_c0()
    closed = O.example2_integral(lam, c0)
    simpson = O.example2_integral_quadrature(lam, c0, 1e-12)
    ref = quad(lambda r: (math.exp(-r) - math.exp(-2 * lam + r)) * math.exp(-r) * math.sin(r), 1, lam,
               epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    ref *= 2 * math.pi * c0 / (math.exp(-1) - math.exp(-2 * lam + 1))
    assert closed == pytest.approx(simpson, abs=1e-11)
    assert closed == pytest.approx(ref, abs=1e-11)


def test_example2_limit():
    assert abs(O.example2_integral(30.0, O.critical_c0()) - 1) <= 1e-10
    assert abs(O.example2_det(60.0)) <= 1e-15


@settings(max_examples=80, deadline=None)
@given(st.floats(1.05, 25.0))
def test_factorized_det_matches(lam):
    assert O.example2_det(lam) == pytest.approx(O.example2_det_factorized(lam), abs=1e-14)


def test_s0_set():
    s = O.s0_set(2)
    theta0 = math.asin(2 / math.sqrt(5))
    ref = sorted([math.pi + 2 * theta0 - 1, 2 * math.pi + 1, 3 * math.pi + 2 * theta0 - 1, 4 * math.pi + 1])
    assert s == pytest.approx(ref, abs=1e-15)
    assert s == pytest.approx([4.355890089177974, 7.283185307179586, 10.63907539635756, 13.566370614359172],
                              abs=1e-12)
    for lam in s:
        assert abs(O.example2_det(lam)) < 1e-14


def test_noncritical_det_bounded_away():
    for c0 in (0.5, 0.9, 1.2):
        d = [O.example2_det(lam, c0) for lam in np.linspace(20, 100, 161)]
        assert min(abs(v) for v in d) > 0.02


def test_example2_matrix_against_radial_solver():
    lam = 5.0
    basis = O.radial_basis(1, lam, "1/r", 1.0, n_points=8001, lam=lam)
    w = O.example2_weight(O.critical_c0())
    R = O.example2_matrix(lam)
    assert basis.integrate(w, basis.fields[1]) == pytest.approx(R[1, 1], abs=1e-6)
    assert basis.integrate(w, basis.fields[0]) == pytest.approx(R[1, 0], abs=1e-6)


def test_example2_lambda_domain():
    with pytest.raises(InvalidLambda):
        O.example2_integral(1.0, 1.0)
