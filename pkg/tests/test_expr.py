import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypbvp.expr import (BinOp, Call, Const, DiffError, EvalError, Num, ParseError, Var,
                         diff, evaluate, parse, subs, to_text)


def test_parse_constant_quotient():
    e = parse("2/pi")
    assert e == BinOp("/", Num(2.0), Const("pi"))


def test_parse_nested_call_uses_both_variables():
    e = parse("sin(t - pi/2*x)")
    assert isinstance(e, Call) and e.name == "sin"
    assert evaluate(e, 0.0, 0.0) == 0.0
    assert evaluate(e, 1.0, math.pi / 2) == pytest.approx(0.0, abs=1e-15)


def test_parse_bump_product():
    e = parse("bump(t,-10,-5)*0.1")
    assert isinstance(e, BinOp) and e.op == "*"
    assert evaluate(e, 0.0, -20.0) == pytest.approx(0.1)
    assert evaluate(e, 0.0, 0.0) == 0.0


def test_precedence_and_associativity():
    assert evaluate(parse("8/4/2"), 0, 0) == 1.0
    assert evaluate(parse("1-2-3"), 0, 0) == -4.0
    assert evaluate(parse("-2^2"), 0, 0) == -4.0
    assert evaluate(parse("2*x^2"), 3.0, 0) == 18.0
    assert evaluate(parse("t^-1"), 0, 4.0) == 0.25


@pytest.mark.parametrize("src, column", [("1 +", 4), ("sin(t", 6), ("2 $ 3", 3), (")", 1)])
def test_syntax_errors_carry_column(src, column):
    with pytest.raises(ParseError) as info:
        parse(src)
    assert info.value.column == column
    assert "column" in str(info.value)


def test_unknown_identifier_and_arity():
    with pytest.raises(ParseError, match="unknown"):
        parse("y + 1")
    with pytest.raises(ParseError, match="argument"):
        parse("sin(t, x)")
    with pytest.raises(ParseError):
        parse("")


def test_eval_examples():
    assert evaluate(parse("2/pi"), 0.0, 0.0) == 0.6366197723675814
    assert evaluate(parse("sin(t)"), 0.3, 0.0) == 0.0
    assert evaluate(parse("bump(t,0,1)"), 0.0, 2.0) == 0.0


def test_eval_errors():
    with pytest.raises(EvalError):
        evaluate(parse("1/x"), 0.0, 1.0)
    with pytest.raises(EvalError):
        evaluate(parse("exp(exp(t))"), 0.0, 10.0)


def test_eval_broadcasts():
    x = np.linspace(0, 1, 5)
    t = np.linspace(-1, 1, 3)[:, None]
    out = evaluate(parse("x*t"), x, t)
    assert out.shape == (3, 5)
    assert np.allclose(out, x * t)


def test_bump_profile():
    e = parse("bump(t, 0, 1)")
    ts = np.linspace(-1, 2, 301)
    v = evaluate(e, 0.0, ts)
    assert np.all(np.diff(v) <= 0)
    assert evaluate(e, 0, 0.5) == pytest.approx(0.5)
    assert evaluate(e, 0, 0.25) == pytest.approx(1 - (3 * 0.0625 - 2 * 0.015625))


def test_diff_examples():
    d = diff(parse("t^2"), "t")
    ts = np.linspace(-3, 3, 13)
    assert np.allclose(evaluate(d, 0.0, ts), 2 * ts)
    assert evaluate(diff(parse("sin(t)"), "t"), 0.0, 0.0) == 1.0
    # frozen from a centered difference with h = 1e-5: 2.0000000001
    assert evaluate(diff(parse("exp(x*t)"), "t"), 2.0, 0.0) == pytest.approx(2.0, rel=1e-9)


def test_diff_nonsmooth_rejected():
    for src in ("abs(t)", "min(t, 1)", "max(x, t)"):
        with pytest.raises(DiffError):
            diff(parse(src), "t")
    # independent of the variable: derivative is zero, no error
    assert evaluate(diff(parse("abs(x)"), "t"), 0.3, 0.0) == 0.0


def test_diff_bump_matches_fd():
    e = parse("bump(2*t + x, -1, 1)")
    d = diff(e, "t")
    h = 1e-5
    for t in (-0.7, -0.2, 0.1, 0.4):
        fd = (evaluate(e, 0.1, t + h) - evaluate(e, 0.1, t - h)) / (2 * h)
        assert evaluate(d, 0.1, t) == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_subs():
    e = subs(parse("sin(t - x)"), x=1.0, t=parse("t + 2"))
    assert evaluate(e, 0.0, 0.5) == pytest.approx(math.sin(1.5))


# -------------------------------------------------------- property tests

LEAVES = st.sampled_from(["x", "t", "pi", "0.5", "1.25", "2", "3"])
UNARY = st.sampled_from(["sin", "cos", "exp", "tanh"])


def smooth_exprs(depth=3):
    if depth == 0:
        return LEAVES
    sub = smooth_exprs(depth - 1)
    return st.one_of(
        LEAVES,
        st.tuples(sub, st.sampled_from(["+", "-", "*"]), sub).map(lambda p: f"({p[0]} {p[1]} {p[2]})"),
        st.tuples(UNARY, sub).map(lambda p: f"{p[0]}(0.3*{p[1]})"),
        st.tuples(sub, st.integers(1, 3)).map(lambda p: f"({p[0]})^{p[1]}"),
        st.tuples(sub, sub).map(lambda p: f"({p[0]})/(2 + sin({p[1]}))"),
        st.tuples(sub).map(lambda p: f"bump({p[0]}, -1, 1)"),
    )


POINTS = np.random.default_rng(7).uniform(-1.5, 1.5, size=(100, 2))


@settings(max_examples=60, deadline=None, derandomize=True)
@given(smooth_exprs())
def test_print_parse_round_trip(src):
    e = parse(src)
    again = parse(to_text(e))
    for x, t in POINTS:
        try:
            v = evaluate(e, x, t)
        except EvalError:
            with pytest.raises(EvalError):
                evaluate(again, x, t)
            continue
        assert evaluate(again, x, t) == v


@settings(max_examples=60, deadline=None, derandomize=True)
@given(smooth_exprs(), st.sampled_from(["x", "t"]))
def test_diff_matches_centered_difference(src, var):
    e = parse(src)
    d = diff(e, var)
    h = 1e-5
    for x, t in POINTS[:20]:
        try:
            if var == "x":
                fd = (evaluate(e, x + h, t) - evaluate(e, x - h, t)) / (2 * h)
            else:
                fd = (evaluate(e, x, t + h) - evaluate(e, x, t - h)) / (2 * h)
            exact = evaluate(d, x, t)
        except EvalError:
            continue
        # absolute floor covers round-off of the difference quotient
        assert abs(exact - fd) <= 1e-6 * abs(exact) + 1e-6 * (1 + abs(evaluate(e, x, t)))
