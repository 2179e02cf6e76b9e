import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probverify.expr import parse_expr
from probverify.interval import (
    Box,
    Interval,
    IntervalError,
    ia_affine,
    ia_div,
    ia_elementwise,
    ia_mul,
    ia_network,
    ia_propagate,
    ia_recip,
)
from probverify.network import Layer, Network, forward, random_relu_network

finite = st.floats(-1e3, 1e3, allow_nan=False)
moderate = st.floats(-400, 400, allow_nan=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Interval(min(a, b), max(a, b))


def test_rejects_empty_and_nan():
    with pytest.raises(IntervalError):
        Interval(1.0, 0.0)
    with pytest.raises(IntervalError):
        Interval(float("nan"), 1.0)


def test_point_and_width():
    iv = Interval.point(2.5)
    assert iv.lo == iv.hi == 2.5
    assert Interval(-1.0, 3.0).width == 4.0


@given(intervals(), intervals())
def test_mul_matches_endpoint_products(a, b):
    prods = [x * y for x, y in itertools.product((a.lo, a.hi), (b.lo, b.hi))]
    r = ia_mul(a, b)
    assert r.lo == min(prods) and r.hi == max(prods)


@given(intervals(), intervals(), st.floats(0, 1), st.floats(0, 1))
def test_mul_contains_sampled_products(a, b, s, t):
    x = a.lo + s * (a.hi - a.lo)
    y = b.lo + t * (b.hi - b.lo)
    r = ia_mul(a, b)
    assert r.lo - 1e-9 * (1 + abs(r.lo)) <= x * y <= r.hi + 1e-9 * (1 + abs(r.hi))


def test_mul_inf_times_zero_is_zero():
    r = ia_mul(Interval(0.0, 0.0), Interval(1.0, math.inf))
    assert r.lo == 0.0 and r.hi == 0.0


@pytest.mark.parametrize(
    "lo, hi, expect",
    [
        (2.0, 4.0, (0.25, 0.5)),
        (-4.0, -2.0, (-0.5, -0.25)),
        (0.0, 2.0, (0.5, math.inf)),
        (-2.0, 0.0, (-math.inf, -0.5)),
        (-1.0, 1.0, (-math.inf, math.inf)),
        (0.0, 0.0, (-math.inf, math.inf)),
    ],
)
def test_reciprocal_cases(lo, hi, expect):
    r = ia_recip(Interval(lo, hi))
    assert (r.lo, r.hi) == expect


def test_div_by_zero_point_denominator():
    assert (ia_div(Interval(1.0, 2.0), Interval(0.0, 0.0)).lo, ia_div(Interval(1.0, 2.0), Interval(0.0, 0.0)).hi) == (math.inf, math.inf)
    r = ia_div(Interval(-2.0, -1.0), Interval(0.0, 0.0))
    assert (r.lo, r.hi) == (-math.inf, -math.inf)
    r = ia_div(Interval(0.0, 0.0), Interval(0.0, 0.0))
    assert (r.lo, r.hi) == (-math.inf, math.inf)


def test_div_denominator_touching_zero_gives_infinite_upper():
    r = ia_div(Interval(0.25, 0.25), Interval(0.0, 0.5))
    assert r.lo == 0.5 and r.hi == math.inf


def test_div_possible_zero_over_zero_is_whole_line():
    for a, b in (((0.0, 0.0), (0.0, 0.5)), ((-1.0, 1.0), (-0.5, 0.5)), ((0.0, 1.0), (0.0, 0.0))):
        r = ia_div(Interval(*a), Interval(*b))
        assert (r.lo, r.hi) == (-math.inf, math.inf)
    r = ia_div(Interval(0.0, 0.0), Interval(0.5, 1.0))
    assert (r.lo, r.hi) == (0.0, 0.0)


@given(intervals(), intervals(), st.floats(0, 1), st.floats(0, 1))
def test_div_contains_sampled_quotients(a, b, s, t):
    x = a.lo + s * (a.hi - a.lo)
    y = b.lo + t * (b.hi - b.lo)
    if y == 0:
        return
    r = ia_div(a, b)
    q = x / y
    assert r.lo - 1e-9 * (1 + abs(q)) <= q <= r.hi + 1e-9 * (1 + abs(q))


@pytest.mark.parametrize("kind, fn", [("relu", lambda z: max(z, 0.0)), ("tanh", math.tanh), ("sigmoid", lambda z: 1 / (1 + math.exp(-z)))])
@given(a=moderate, b=moderate, s=st.floats(0, 1))
@settings(max_examples=50)
def test_monotone_primitives(kind, fn, a, b, s):
    lo, hi = min(a, b), max(a, b)
    z = lo + s * (hi - lo)
    r = ia_elementwise(kind, Interval(lo, hi))
    assert r.lo - 1e-12 <= fn(z) <= r.hi + 1e-12


def test_elementwise_arity_checked():
    with pytest.raises(IntervalError):
        ia_elementwise("min2", Interval(0.0, 1.0))
    with pytest.raises(IntervalError):
        ia_elementwise("cos", Interval(0.0, 1.0))


def test_affine_known_value():
    r = ia_affine(np.array([[1.0, -2.0]]), np.array([0.5]), Interval(np.array([0.0, 0.0]), np.array([1.0, 1.0])))
    assert r.lo.tolist() == [-1.5] and r.hi.tolist() == [1.5]


def test_affine_dimension_mismatch():
    with pytest.raises(IntervalError):
        ia_affine(np.eye(2), np.zeros(2), Interval(np.zeros(3), np.ones(3)))


def test_affine_batched_equals_rowwise():
    rng = np.random.default_rng(0)
    W, b = rng.normal(size=(3, 4)), rng.normal(size=3)
    lo = rng.normal(size=(5, 4))
    hi = lo + rng.uniform(0, 1, size=(5, 4))
    batched = ia_affine(W, b, Interval(lo, hi))
    for i in range(5):
        row = ia_affine(W, b, Interval(lo[i], hi[i]))
        np.testing.assert_allclose(batched.lo[i], row.lo, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(batched.hi[i], row.hi, rtol=1e-12, atol=1e-12)


def test_box_validation_and_equality():
    with pytest.raises(IntervalError):
        Box(np.array([0.0]), np.array([np.inf]))
    a = Box(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    assert a == Box(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    assert hash(a) == hash(Box(np.array([0.0, 1.0]), np.array([1.0, 2.0])))
    assert a.contains(np.array([0.5, 1.5])) and not a.contains(np.array([1.5, 1.5]))


def test_network_enclosure_contains_samples():
    rng = np.random.default_rng(1)
    for _ in range(20):
        net = random_relu_network(rng, [3, 8, 8, 2])
        lo = rng.normal(size=3)
        hi = lo + rng.uniform(0, 1, 3)
        iv = ia_network(net, Interval(lo, hi))
        xs = rng.uniform(lo, hi, size=(500, 3))
        ys = forward(net, xs)
        assert np.all(ys >= iv.lo - 1e-9) and np.all(ys <= iv.hi + 1e-9)


def test_propagate_identity_affine_exact():
    net = Network((Layer(np.eye(1), np.zeros(1)),))
    r = ia_propagate(parse_expr("x1 - 0.5", "inner"), Box(np.array([0.0]), np.array([1.0])), net)
    assert (r.lo, r.hi) == (-0.5, 0.5)


def test_propagate_shares_subexpressions():
    x = parse_expr("x1", "inner")
    e = x * x
    r = ia_propagate(e, Box(np.array([-1.0]), np.array([2.0])))
    # dependency problem: x*x over [-1,2] encloses [-2,4]
    assert (r.lo, r.hi) == (-2.0, 4.0)


def test_propagate_deep_chain_does_not_recurse():
    e = parse_expr("x1", "inner")
    for _ in range(5000):
        e = e + 1.0
    r = ia_propagate(e, Box(np.array([0.0]), np.array([1.0])))
    assert r.lo == 5000.0 and r.hi == 5001.0


def test_propagate_override_replaces_node():
    e = parse_expr("min(x1, 3)", "inner")
    r = ia_propagate(e, Box(np.array([0.0]), np.array([10.0])), override={id(e.left): Interval(1.0, 2.0)})
    assert (r.lo, r.hi) == (1.0, 2.0)


def test_propagate_errors():
    with pytest.raises(IntervalError):
        ia_propagate(parse_expr("y1", "inner"), Box(np.zeros(1), np.ones(1)))
    with pytest.raises(IntervalError):
        ia_propagate(parse_expr("x3", "inner"), Box(np.zeros(1), np.ones(1)))


def test_propagate_outer_probabilities():
    g = parse_expr("(p1*p4)/(p2*p3) - 0.8", "outer")
    r = ia_propagate(g, probs=Interval(np.full(4, 0.5), np.full(4, 0.5)))
    assert r.lo == pytest.approx(0.2) and r.hi == pytest.approx(0.2)
