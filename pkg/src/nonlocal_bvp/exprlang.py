"""Arithmetic expressions for coefficient fields.

Grammar, lowest to highest precedence::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Variables are ``x``, ``y``, ``r`` and ``lambda``. ``pi`` and ``e`` and any
caller-supplied named parameters are folded into constants at parse time.

    >>> evaluate(parse("2^3^2"), {})
    512.0
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import BindingError, DomainError, ExprSyntaxError, UnboundVariable

VARIABLES = ("x", "y", "r", "lambda")
CONSTANTS = {"pi": math.pi, "e": math.e}
UNARY_FUNCTIONS = ("exp", "sin", "cos", "ln", "sqrt", "abs", "arcsin")
BINARY_FUNCTIONS = ("min", "max")
FUNCTIONS = UNARY_FUNCTIONS + BINARY_FUNCTIONS


class Expr:
    """Base class of expression tree nodes (immutable)."""

    precedence = 5

    def __str__(self):
        return to_string(self)

    def variables(self) -> frozenset:
        return frozenset()


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def variables(self):
        return frozenset({self.name})

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    precedence = 3

    def variables(self):
        return self.operand.variables()


@dataclass(frozen=True)
class BinOp(Expr):
    left: Expr
    right: Expr
    symbol = "?"

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Add(BinOp):
    symbol, precedence = "+", 1


class Sub(BinOp):
    symbol, precedence = "-", 1


class Mul(BinOp):
    symbol, precedence = "*", 2


class Div(BinOp):
    symbol, precedence = "/", 2


class Pow(BinOp):
    symbol, precedence = "^", 4


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple

    def variables(self):
        out = frozenset()
        for a in self.args:
            out |= a.variables()
        return out

    def __repr__(self):
        return f"{self.name}({', '.join(map(repr, self.args))})"


_BINOPS = {"+": Add, "-": Sub, "*": Mul, "/": Div, "^": Pow}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _byte_offset(text, index):
    return len(text[:index].encode("utf-8"))


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}",
                                  _byte_offset(text, bad), text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, n)))
    return tokens


class _Parser:
    def __init__(self, text, parameters):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.parameters = parameters

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            self.fail(f"expected {value!r}")
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = _BINOPS[op](node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = _BINOPS[op](node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return Pow(base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.advance()
            v = float(value)
            if not math.isfinite(v):
                self.fail("numeric literal out of range", tok)
            return Const(v)
        if kind == "name":
            self.advance()
            if value in FUNCTIONS:
                return self.call(value, tok)
            if value in VARIABLES:
                return Var(value)
            if value in self.parameters:
                return Const(float(self.parameters[value]))
            if value in CONSTANTS:
                return Const(CONSTANTS[value])
            self.fail(f"unknown identifier {value!r}", tok)
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("missing operand")
        self.fail(f"unexpected {value!r}")

    def call(self, name, tok):
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity = 2 if name in BINARY_FUNCTIONS else 1
        if len(args) != arity:
            self.fail(f"{name} takes {arity} argument(s), got {len(args)}", tok)
        return Call(name, tuple(args))


def parse(text: str, parameters: Mapping[str, float] | None = None) -> Expr:
    """Parse ``text`` into an expression tree.

    ``parameters`` maps extra names to numbers; they become constants.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0, text if isinstance(text, str) else "")
    params = dict(parameters or {})
    clash = set(params) & (set(VARIABLES) | set(FUNCTIONS))
    if clash:
        raise ValueError(f"parameter names shadow builtins: {sorted(clash)}")
    return _Parser(text, params).parse()


def to_string(node: Expr) -> str:
    """Print with the minimal parentheses that re-parse to the same tree."""
    if isinstance(node, Const):
        s = repr(float(node.value))
        return f"({s})" if node.value < 0 or s.startswith("-") else s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, 3)
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_string(a) for a in node.args)})"
    if isinstance(node, Pow):
        return f"{_wrap(node.left, 5)}^{_wrap(node.right, 3)}"
    if isinstance(node, BinOp):
        p = node.precedence
        return f"{_wrap(node.left, p)} {node.symbol} {_wrap(node.right, p + 1)}"
    raise TypeError(f"not an expression node: {node!r}")


def _wrap(node, min_prec):
    s = to_string(node)
    return s if node.precedence >= min_prec else f"({s})"


# --- evaluation -----------------------------------------------------------

Number = Union[float, np.ndarray]


def _bind(env: Mapping[str, float]):
    env = dict(env)
    unknown = set(env) - set(VARIABLES)
    if unknown:
        raise BindingError(f"unknown variable(s) {sorted(unknown)}")
    if "x" in env and "y" in env:
        r = np.hypot(env["x"], env["y"])
        if "r" in env:
            if not np.allclose(env["r"], r, rtol=1e-12, atol=1e-300):
                raise BindingError("r inconsistent with sqrt(x^2 + y^2)")
        else:
            env["r"] = r
    return env


def evaluate(expr: Expr, env: Mapping[str, float]) -> float:
    """Evaluate ``expr`` at one point. ``r`` is derived from ``x, y`` if unbound."""
    env = _bind({k: float(v) for k, v in env.items()})
    return float(_eval(expr, env, scalar=True))


def evaluate_array(expr: Expr, env: Mapping[str, Number]) -> np.ndarray:
    """Vectorised :func:`evaluate` over broadcastable numpy arrays.

    Raises :class:`DomainError` if any element leaves an operator's domain.
    """
    env = _bind({k: np.asarray(v, dtype=float) for k, v in env.items()})
    shape = np.broadcast_shapes(*(v.shape for v in env.values()))
    out = np.asarray(_eval(expr, env, scalar=False), dtype=float)
    return np.broadcast_to(out, shape).copy()


def _domain(cond, what, scalar):
    if scalar:
        if cond:
            raise DomainError(what)
    elif np.any(cond):
        idx = int(np.flatnonzero(np.ravel(cond))[0])
        raise DomainError(f"{what} (first offending point #{idx})")


def _eval(node, env, scalar):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundVariable(node.name) from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env, scalar)
    if isinstance(node, BinOp):
        a = _eval(node.left, env, scalar)
        b = _eval(node.right, env, scalar)
        if isinstance(node, Add):
            return a + b
        if isinstance(node, Sub):
            return a - b
        if isinstance(node, Mul):
            return a * b
        if isinstance(node, Div):
            _domain(np.equal(b, 0.0), "division by zero", scalar)
            return a / b
        return _power(a, b, scalar)
    if isinstance(node, Call):
        args = [_eval(a, env, scalar) for a in node.args]
        return _call(node.name, args, scalar)
    raise TypeError(f"not an expression node: {node!r}")


def _power(a, b, scalar):
    a_arr, b_arr = np.asarray(a), np.asarray(b)
    nonint = b_arr != np.round(b_arr)
    _domain((a_arr < 0) & nonint, "negative base with non-integer exponent", scalar)
    _domain((a_arr == 0) & (b_arr < 0), "zero to a negative power", scalar)
    with np.errstate(over="ignore"):
        out = np.power(a_arr.astype(float), b_arr)
    _domain(~np.isfinite(out), "non-finite power", scalar)
    return float(out) if scalar else out


def _call(name, args, scalar):
    x = args[0]
    if name == "min":
        return min(x, args[1]) if scalar else np.minimum(x, args[1])
    if name == "max":
        return max(x, args[1]) if scalar else np.maximum(x, args[1])
    if name == "ln":
        _domain(np.less_equal(x, 0.0), "ln of non-positive value", scalar)
        return math.log(x) if scalar else np.log(x)
    if name == "sqrt":
        _domain(np.less(x, 0.0), "sqrt of negative value", scalar)
        return math.sqrt(x) if scalar else np.sqrt(x)
    if name == "arcsin":
        _domain(np.greater(np.abs(x), 1.0), "arcsin outside [-1, 1]", scalar)
        return math.asin(x) if scalar else np.arcsin(x)
    if name == "exp":
        if scalar:
            try:
                return math.exp(x)
            except OverflowError:
                raise DomainError("exp overflow") from None
        with np.errstate(over="ignore"):
            out = np.exp(x)
        _domain(~np.isfinite(out), "exp overflow", scalar)
        return out
    if name == "sin":
        return math.sin(x) if scalar else np.sin(x)
    if name == "cos":
        return math.cos(x) if scalar else np.cos(x)
    if name == "abs":
        return abs(x) if scalar else np.abs(x)
    raise TypeError(f"unknown function {name}")


def is_constant(expr: Expr) -> bool:
    return not expr.variables()


def is_radial(expr: Expr) -> bool:
    """True if ``expr`` depends on position only through ``r``."""
    return not (expr.variables() & {"x", "y"})
