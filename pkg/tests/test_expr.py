from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affinelab import jets as J
from affinelab.expr import (
    BinOp,
    Call,
    Neg,
    Num,
    ParseError,
    Var,
    evaluate,
    num_vars,
    parse,
    parse_surface_expression,
    pretty,
)

CATALOG_EXPRESSIONS = [
    "0.5*(u^2 + v^2)",
    "sqrt(1 - u^2 - v^2)",
    "1/(u*v)",
    "0.5*(u^2+v^2) + 0.1*u^3",
    "exp(u) + v^2 + u*v/3",
    "0.5*(u1^2 + u2^2 + u3^2)",
]


def test_spec_examples():
    assert parse_surface_expression("0.5*(u^2 + v^2)")([1.0, 1.0]) == pytest.approx(1.0)
    assert parse_surface_expression("1/(u*v)")([2.0, 0.5]) == pytest.approx(1.0)
    with pytest.raises(ParseError) as info:
        parse("0.5*(u^2 +")
    assert info.value.position == 10


@pytest.mark.parametrize("text", CATALOG_EXPRESSIONS)
def test_catalog_expressions_parse(text):
    node = parse(text)
    assert parse(pretty(node)) == node


def test_precedence_and_associativity():
    assert parse("1+2*3") == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))
    assert parse("2^3^2") == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert parse("1-2-3") == BinOp("-", BinOp("-", Num(1.0), Num(2.0)), Num(3.0))
    # unary minus binds tighter than ^ in this grammar
    assert parse("-u^2") == BinOp("^", Neg(Var("u")), Num(2.0))
    assert parse("−u") == Neg(Var("u"))
    assert parse("sin(u)") == Call("sin", Var("u"))


def test_evaluate_floats_and_jets():
    f = parse_surface_expression("exp(u) * cos(v) - log(u + 2) / sqrt(v + 1)")
    x0 = [0.3, 0.4]
    want = math.exp(0.3) * math.cos(0.4) - math.log(2.3) / math.sqrt(1.4)
    assert f(x0) == pytest.approx(want)
    assert f(J.variables(x0, 3)).value == pytest.approx(want)
    assert evaluate(parse("2^u"), J.variables([1.0, 0.0], 2)).coeffs[1] == pytest.approx(2 * math.log(2))


def test_num_vars():
    assert num_vars(parse("u + v")) == 2
    assert num_vars(parse("u1 + u3")) == 3
    with pytest.raises(ParseError):
        parse("u1 + u3", n=2)


MALFORMED = [
    ("0.5*(u^2 +", 10),
    ("u +* v", 3),
    ("sqrt(u,v)", 6),
    ("foo(u)", 0),
    ("x+1", 0),
    ("(u", 2),
    ("u)", 1),
    ("2^", 2),
    ("sqrt", 0),
    ("u v", 2),
    ("#", 0),
]


@pytest.mark.parametrize("text,pos", MALFORMED)
def test_malformed_positions(text, pos):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.position == pos
    assert f"offset {pos}" in str(info.value)


def test_division_by_zero_float():
    with pytest.raises(ZeroDivisionError):
        parse_surface_expression("1/(u-u)")([0.2, 0.1])


names = st.sampled_from(["u", "v", "u1", "u2"])
leaves = st.one_of(names.map(Var), st.floats(0, 1e6, allow_nan=False).map(Num))


def _trees(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        children.map(Neg),
        st.tuples(st.sampled_from(["sqrt", "exp", "log", "sin", "cos"]), children).map(lambda t: Call(*t)),
    )


@settings(max_examples=200, deadline=None)
@given(st.recursive(leaves, _trees, max_leaves=12))
def test_pretty_round_trip(tree):
    assert parse(pretty(tree)) == tree
