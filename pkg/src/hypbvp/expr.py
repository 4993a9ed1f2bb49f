"""Coefficient expressions in the variables ``x`` and ``t``.

Grammar (highest precedence first)::

    primary := NUMBER | x | t | pi | NAME '(' args ')' | '(' expr ')'
    power   := primary ['^' ['-'] INTEGER]
    unary   := ('-' | '+') unary | power
    term    := unary (('*' | '/') unary)*
    expr    := term (('+' | '-') term)*

Functions: sin, cos, exp, tanh, abs, min, max, bump, dbump.
``bump(s, s0, s1)`` is 1 for s <= s0, 0 for s >= s1 and follows the C1
profile 1 - (3r^2 - 2r^3) in between; ``dbump`` is its derivative in ``s``.

Evaluation accepts floats or numpy arrays and broadcasts.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr", "Num", "Var", "Const", "Neg", "BinOp", "Pow", "Call",
    "ExprError", "ParseError", "EvalError", "DiffError",
    "parse", "evaluate", "diff", "subs", "to_text", "as_expr",
]

VARIABLES = ("x", "t")
CONSTANTS = {"pi": math.pi}
ARITY = {
    "sin": 1, "cos": 1, "exp": 1, "tanh": 1, "abs": 1,
    "min": 2, "max": 2, "bump": 3, "dbump": 3,
}
NONSMOOTH = {"abs", "min", "max", "dbump"}


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message, column, expected=()):
        self.column = column
        self.expected = tuple(expected)
        text = f"column {column}: {message}"
        if self.expected:
            text += " (expected " + ", ".join(self.expected) + ")"
        super().__init__(text)


class EvalError(ExprError):
    pass


class DiffError(ExprError):
    pass


# --------------------------------------------------------------------- AST


class Expr:
    """Immutable expression node."""

    __slots__ = ()

    def __call__(self, x, t):
        return evaluate(self, x, t)

    def __str__(self):
        return to_text(self)

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    @property
    def is_constant(self):
        return not free_variables(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Const(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True, eq=True)
class Call(Expr):
    name: str
    args: tuple


ZERO = Num(0.0)
ONE = Num(1.0)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    return Num(float(value))


def _num(e):
    return e.value if isinstance(e, Num) else None


# Light constant folding keeps derived trees (derivatives, manufactured
# forcings) small enough to evaluate cheaply.
def add(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va + vb)
    if va == 0.0:
        return b
    if vb == 0.0:
        return a
    return BinOp("+", a, b)


def sub(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va - vb)
    if vb == 0.0:
        return a
    if va == 0.0:
        return neg(b)
    return BinOp("-", a, b)


def mul(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va * vb)
    if va == 0.0 or vb == 0.0:
        return ZERO
    if va == 1.0:
        return b
    if vb == 1.0:
        return a
    if va == -1.0:
        return neg(b)
    if vb == -1.0:
        return neg(a)
    return BinOp("*", a, b)


def div(a, b):
    va, vb = _num(a), _num(b)
    if vb == 1.0:
        return a
    if va == 0.0 and vb != 0.0:
        return ZERO
    if va is not None and vb is not None and vb != 0.0:
        return Num(va / vb)
    return BinOp("/", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a, n):
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Num) and not (a.value == 0.0 and n < 0):
        return Num(a.value ** n)
    return Pow(a, n)


def call(name, *args):
    return Call(name, tuple(args))


def free_variables(e) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Num, Const)):
        return set()
    if isinstance(e, Neg):
        return free_variables(e.arg)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Pow):
        return free_variables(e.base)
    if isinstance(e, Call):
        out = set()
        for arg in e.args:
            out |= free_variables(arg)
        return out
    raise TypeError(f"not an expression: {e!r}")


# ------------------------------------------------------------------ parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src):
    tokens = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[bad]!r}", bad + 1)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(("end", "", n + 1))
    return tokens


class _Parser:
    def __init__(self, src):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, col = self.tok
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"unexpected {found}", col, (repr(value),))
        return self.take()

    def parse(self):
        e = self.expr()
        kind, text, col = self.tok
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", col, ("operator", "end of input"))
        return e

    def expr(self):
        e = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            e = BinOp(op, e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.take()[1]
            rhs = self.unary()
            e = BinOp(op, e, rhs)
        return e

    def unary(self):
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.tok[0] == "op" and self.tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.take()
            sign = 1
            if self.tok[0] == "op" and self.tok[1] == "-":
                self.take()
                sign = -1
            kind, text, col = self.tok
            if kind != "num" or not text.isdigit():
                raise ParseError("exponent must be an integer literal", col, ("integer",))
            self.take()
            return Pow(base, sign * int(text))
        return base

    def primary(self):
        kind, text, col = self.tok
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "name":
            self.take()
            if self.tok[0] == "op" and self.tok[1] == "(":
                if text not in ARITY:
                    raise ParseError(f"unknown function {text!r}", col,
                                     sorted(ARITY))
                self.take()
                args = [self.expr()]
                while self.tok[0] == "op" and self.tok[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != ARITY[text]:
                    raise ParseError(
                        f"{text} takes {ARITY[text]} argument(s), got {len(args)}", col)
                return Call(text, tuple(args))
            if text in VARIABLES:
                return Var(text)
            if text in CONSTANTS:
                return Const(text)
            if text in ARITY:
                raise ParseError(f"function {text!r} needs arguments", col, ("'('",))
            raise ParseError(f"unknown identifier {text!r}", col, ("x", "t", "pi"))
        if kind == "op" and text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", col, ("number", "name", "'('"))


def parse(src: str) -> Expr:
    """Parse ``src`` into an expression tree."""
    if not isinstance(src, str) or not src.strip():
        raise ParseError("empty expression", 1)
    return _Parser(src).parse()


# --------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(e: Expr) -> str:
    """Render ``e`` so that ``parse(to_text(e))`` evaluates identically."""
    if isinstance(e, Num):
        text = repr(float(e.value))
        return f"({text})" if e.value < 0 or text.startswith("-") else text
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Pow):
        return f"({to_text(e.base)}^{e.exponent})"
    if isinstance(e, Call):
        return f"{e.name}(" + ", ".join(to_text(a) for a in e.args) + ")"
    raise TypeError(f"not an expression: {e!r}")


# ------------------------------------------------------------- evaluation


def _bump(s, s0, s1):
    width = s1 - s0
    if np.any(width == 0):
        raise EvalError("bump: empty transition interval")
    r = np.clip((s - s0) / width, 0.0, 1.0)
    return 1.0 - r * r * (3.0 - 2.0 * r)


def _dbump(s, s0, s1):
    width = s1 - s0
    if np.any(width == 0):
        raise EvalError("dbump: empty transition interval")
    r = np.clip((s - s0) / width, 0.0, 1.0)
    return -6.0 * r * (1.0 - r) / width


_FUNCS = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh,
    "abs": np.abs, "min": np.minimum, "max": np.maximum,
    "bump": _bump, "dbump": _dbump,
}


def _ev(e, x, t):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        return x if e.name == "x" else t
    if isinstance(e, Const):
        return np.float64(CONSTANTS[e.name])
    if isinstance(e, Neg):
        return -_ev(e.arg, x, t)
    if isinstance(e, BinOp):
        lhs = _ev(e.left, x, t)
        rhs = _ev(e.right, x, t)
        if e.op == "+":
            return lhs + rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "*":
            return lhs * rhs
        if np.any(rhs == 0):
            raise EvalError(f"division by zero in {to_text(e)}")
        return lhs / rhs
    if isinstance(e, Pow):
        base = _ev(e.base, x, t)
        if e.exponent < 0 and np.any(base == 0):
            raise EvalError(f"division by zero in {to_text(e)}")
        return base ** float(e.exponent)
    if isinstance(e, Call):
        args = [_ev(a, x, t) for a in e.args]
        return _FUNCS[e.name](*args)
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, x, t):
    """Evaluate ``e`` at ``(x, t)``; arrays broadcast, scalars give a float."""
    scalar = np.ndim(x) == 0 and np.ndim(t) == 0
    xa = np.asarray(x, dtype=float)
    ta = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        out = _ev(e, xa, ta)
    if not np.all(np.isfinite(out)):
        raise EvalError(f"overflow or invalid value evaluating {to_text(e)}")
    if scalar:
        return float(out)
    return np.broadcast_to(out, np.broadcast_shapes(xa.shape, ta.shape))


# ---------------------------------------------------------- differentiation


def diff(e: Expr, var: str) -> Expr:
    """Symbolic derivative of ``e`` with respect to ``var`` ('x' or 't')."""
    if var not in VARIABLES:
        raise DiffError(f"cannot differentiate with respect to {var!r}")
    return _d(e, var)


def _d(e, v):
    if isinstance(e, (Num, Const)):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Neg):
        return neg(_d(e.arg, v))
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        da, db = _d(a, v), _d(b, v)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        # quotient rule written as da/b - a*db/b^2
        return sub(div(da, b), div(mul(a, db), power(b, 2)))
    if isinstance(e, Pow):
        db = _d(e.base, v)
        return mul(mul(Num(float(e.exponent)), power(e.base, e.exponent - 1)), db)
    if isinstance(e, Call):
        if v not in free_variables(e):
            return ZERO
        name, args = e.name, e.args
        if name in NONSMOOTH:
            raise DiffError(f"{name} is not differentiable")
        u = args[0]
        du = _d(u, v)
        if name == "sin":
            return mul(call("cos", u), du)
        if name == "cos":
            return neg(mul(call("sin", u), du))
        if name == "exp":
            return mul(e, du)
        if name == "tanh":
            return mul(sub(ONE, power(e, 2)), du)
        if name == "bump":
            if v in free_variables(args[1]) | free_variables(args[2]):
                raise DiffError("bump endpoints must not depend on the variable")
            return mul(call("dbump", *args), du)
    raise TypeError(f"not an expression: {e!r}")


def subs(e: Expr, **values) -> Expr:
    """Replace variables ``x``/``t`` by expressions or numbers."""
    repl = {k: as_expr(v) for k, v in values.items()}
    unknown = set(repl) - set(VARIABLES)
    if unknown:
        raise ExprError(f"unknown variable(s) {sorted(unknown)}")
    return _subs(e, repl)


def _subs(e, repl):
    if isinstance(e, Var):
        return repl.get(e.name, e)
    if isinstance(e, (Num, Const)):
        return e
    if isinstance(e, Neg):
        return neg(_subs(e.arg, repl))
    if isinstance(e, BinOp):
        a, b = _subs(e.left, repl), _subs(e.right, repl)
        return {"+": add, "-": sub, "*": mul, "/": div}[e.op](a, b)
    if isinstance(e, Pow):
        return power(_subs(e.base, repl), e.exponent)
    if isinstance(e, Call):
        return Call(e.name, tuple(_subs(a, repl) for a in e.args))
    raise TypeError(f"not an expression: {e!r}")
