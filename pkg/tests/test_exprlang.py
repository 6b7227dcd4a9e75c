import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_bvp import exprlang as E
from nonlocal_bvp.errors import DomainError, ExprSyntaxError, UnboundVariable


def test_parse_drift_component():
    e = E.parse("x/(x^2+y^2)")
    two = E.Const(2.0)
    assert e == E.Div(E.Var("x"), E.Add(E.Pow(E.Var("x"), two), E.Pow(E.Var("y"), two)))


def test_parse_constant():
    assert E.parse("1") == E.Const(1.0)


def test_unbalanced_parenthesis_offset():
    with pytest.raises(ExprSyntaxError) as info:
        E.parse("2*sin(1)+cos(")
    assert info.value.offset == 13


@pytest.mark.parametrize("text", ["", "   ", "1+", "sin 1", "(1", "1)", "max(1)", "foo(2)", "2 3", "1 $ 2"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        E.parse(text)


def test_constant_value():
    assert abs(E.evaluate(E.parse("2*sin(1)+cos(1)"), {}) - (2 * math.sin(1) + math.cos(1))) <= 1e-12
    assert abs(E.evaluate(E.parse("2*sin(1)+cos(1)"), {}) - 2.223244275483933) <= 1e-12


def test_variables_and_identity():
    assert E.evaluate(E.parse("r"), {"r": 3}) == 3
    assert E.evaluate(E.parse("exp(0)"), {}) == 1


def test_precedence_and_associativity():
    assert E.evaluate(E.parse("2^3^2"), {}) == 512
    assert E.evaluate(E.parse("-2^2"), {}) == -4
    assert E.evaluate(E.parse("8/4/2"), {}) == 1
    assert E.evaluate(E.parse("1-2-3"), {}) == -4
    assert E.evaluate(E.parse("2+3*4"), {}) == 14


def test_parameters_and_constants():
    e = E.parse("C0*exp(-r)*sin(r)/r", {"C0": 2.0})
    assert E.is_radial(e) and not E.is_constant(e)
    v = E.evaluate(e, {"r": 1.5})
    assert v == pytest.approx(2.0 * math.exp(-1.5) * math.sin(1.5) / 1.5, rel=1e-15)
    assert E.evaluate(E.parse("pi + e"), {}) == math.pi + math.e
    assert not E.is_radial(E.parse("x*r"))


@pytest.mark.parametrize("text", ["(-2)^0.5", "ln(0)", "sqrt(-1)", "1/0", "arcsin(2)", "exp(1000)"])
def test_domain_errors(text):
    with pytest.raises(DomainError):
        E.evaluate(E.parse(text), {})


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        E.evaluate(E.parse("x + 1"), {})


def test_array_matches_scalar():
    e = E.parse("exp(-r)*sin(x) + max(y, 0.5)")
    x = np.linspace(-1, 1, 7)
    y = np.linspace(0, 2, 7)
    r = np.hypot(x, y)
    arr = E.evaluate_array(e, {"x": x, "y": y, "r": r})
    ref = [E.evaluate(e, {"x": a, "y": b, "r": c}) for a, b, c in zip(x, y, r)]
    assert np.allclose(arr, ref, rtol=1e-15, atol=0)


# random trees for the round trip property

_leaf = st.one_of(
    st.floats(min_value=0, max_value=1e6, allow_nan=False).map(E.Const),
    st.sampled_from(E.VARIABLES).map(E.Var),
)


def _extend(children):
    binops = [E.Add, E.Sub, E.Mul, E.Div, E.Pow]
    return st.one_of(
        st.tuples(st.sampled_from(binops), children, children).map(lambda t: t[0](t[1], t[2])),
        children.map(E.Neg),
        st.tuples(st.sampled_from(E.UNARY_FUNCTIONS), children).map(lambda t: E.Call(t[0], (t[1],))),
        st.tuples(st.sampled_from(E.BINARY_FUNCTIONS), children, children).map(lambda t: E.Call(t[0], (t[1], t[2]))),
    )


trees = st.recursive(_leaf, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_round_trip(tree):
    assert E.parse(E.to_string(tree)) == tree


@settings(max_examples=100, deadline=None)
@given(trees)
def test_printing_is_idempotent(tree):
    s = E.to_string(tree)
    assert E.to_string(E.parse(s)) == s
