import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probverify.expr import (
    Add,
    Const,
    ExprSyntaxError,
    Input,
    Max,
    Min,
    Mul,
    Neg,
    Output,
    Prob,
    Relu,
    Sub,
    UndefinedValueError,
    UnknownIdentifierError,
    affine_form,
    eval_inner,
    eval_outer,
    max_index,
    parse_expr,
    to_text,
)


def test_parse_min_of_difference():
    assert parse_expr("min(y1 - y2, -x3)") == Min(Sub(Output(0), Output(1)), Neg(Input(2)))


def test_parse_ratio_outer():
    g = parse_expr("(p1*p4)/(p2*p3) - 0.8", "outer")
    assert isinstance(g, Sub) and g.right == Const(0.8)
    assert max_index(g, Prob) == 3


def test_precedence_and_associativity():
    assert parse_expr("x1 - x2 - x3") == Sub(Sub(Input(0), Input(1)), Input(2))
    assert parse_expr("x1 + x2 * x3") == Add(Input(0), Mul(Input(1), Input(2)))


def test_negative_literal():
    assert parse_expr("-0.85") == Const(-0.85)
    assert parse_expr("-(0.85)") == Neg(Const(0.85))


def test_min_folds_left():
    assert parse_expr("max(x1, x2, x3)") == Max(Max(Input(0), Input(1)), Input(2))


@pytest.mark.parametrize("text", ["relu(q)", "z1", "x0", "p1 + y1"])
def test_unknown_identifiers(text):
    with pytest.raises(UnknownIdentifierError):
        parse_expr(text, "inner")


@pytest.mark.parametrize("text, pos", [("x1 +", 4), ("min(x1)", 0), ("(x1", 3), ("x1 $ 2", 3), ("relu(x1, x2)", 0)])
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr(text)
    assert info.value.pos == pos


def test_kind_restricts_identifiers():
    with pytest.raises(UnknownIdentifierError):
        parse_expr("x1", "outer")
    with pytest.raises(UnknownIdentifierError):
        parse_expr("p1", "inner")


leaves = st.one_of(
    st.builds(Input, st.integers(0, 3)),
    st.builds(Output, st.integers(0, 2)),
    st.builds(Const, st.floats(-100, 100, allow_nan=False).map(lambda v: round(v, 3))),
)


def _exprs():
    return st.recursive(
        leaves,
        lambda sub: st.one_of(
            st.builds(Neg, sub),
            st.builds(Relu, sub),
            st.builds(Add, sub, sub),
            st.builds(Sub, sub, sub),
            st.builds(Mul, sub, sub),
            st.builds(Min, sub, sub),
            st.builds(Max, sub, sub),
        ),
        max_leaves=12,
    )


@given(_exprs())
@settings(max_examples=300)
def test_print_parse_round_trip(e):
    assert parse_expr(to_text(e)) == e


def test_eval_inner_examples():
    f = parse_expr("min(y1 - y2, -x1)", "inner")
    assert eval_inner(f, np.array([0.0]), np.array([1.0, 0.0])) == 0.0
    batch = eval_inner(f, np.array([[0.0], [1.0]]), np.array([[1.0, 0.0], [1.0, 0.0]]))
    np.testing.assert_array_equal(batch, [0.0, -1.0])


def test_eval_inner_constant_broadcasts():
    out = eval_inner(parse_expr("2", "inner"), np.zeros((3, 1)), np.zeros((3, 1)))
    np.testing.assert_array_equal(out, [2.0, 2.0, 2.0])


def test_eval_outer_ratio():
    g = parse_expr("(p1*p4)/(p2*p3) - 0.8", "outer")
    assert eval_outer(g, [0.5] * 4) == pytest.approx(0.2)


def test_division_by_zero_conventions():
    g = parse_expr("p1 / p2", "outer")
    assert eval_outer(g, [0.3, 0.0]) == math.inf
    assert eval_outer(parse_expr("-p1 / p2", "outer"), [0.3, 0.0]) == -math.inf
    with pytest.raises(UndefinedValueError):
        eval_outer(g, [0.0, 0.0])


def test_affine_form_recognises_linear_combinations():
    f = affine_form(parse_expr("2*(y1 - y2) + 0.5*x3 - 1", "inner"))
    assert f.const == -1.0 and f.x_coef == {2: 0.5} and f.y_coef == {0: 2.0, 1: -2.0}
    assert affine_form(parse_expr("min(y1, y2)", "inner")) is None
    assert affine_form(parse_expr("y1 * y2", "inner")) is None
    assert affine_form(parse_expr("y1 / 4", "inner")).y_coef == {0: 0.25}
