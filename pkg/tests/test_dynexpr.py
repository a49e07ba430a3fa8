import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from destab import dynexpr
from destab.errors import DimensionError, ParseError

OSCILLATOR = "dx1 = x2\ndx2 = -x1 - x2 - x2^3 + w1\nr1 = x2\n"


def value(src, x=(), w=()):
    return float(dynexpr.evaluate_expr(dynexpr.parse_expr(src), x, w))


def test_oscillator_field():
    spec = dynexpr.parse(OSCILLATOR)
    assert (spec.state_dim, spec.input_dim, spec.output_dim) == (2, 1, 1)
    dx, r = spec.evaluate([0.0, 0.0], [0.0])
    assert np.all(dx == 0) and np.all(r == 0)
    dx, _ = spec.evaluate([1.0, 1.0], [0.0])
    np.testing.assert_array_equal(dx, [1.0, -3.0])
    dx, _ = spec.evaluate([0.0, 1.0], [2.0])
    np.testing.assert_array_equal(dx, [1.0, 0.0])


def test_zero_field_any_dims():
    spec = dynexpr.parse_field(["0", "0", "0"], ["0"], 3, 2)
    dx, r = spec.evaluate(np.ones(3), np.ones(2))
    assert np.all(dx == 0) and np.all(r == 0)


@pytest.mark.parametrize(
    "src,expected",
    [("2+3*4^2", 50.0), ("-2^2", -4.0), ("2^3^2", 512.0), ("(-2)^2", 4.0), ("8/4/2", 1.0),
     ("1-2-3", -4.0), ("2*-3", -6.0), ("--2", 2.0), ("2^-1", 0.5), ("1.5e1 + .5", 15.5)],
)
def test_precedence(src, expected):
    assert value(src) == expected


def test_functions():
    assert value("sin(0) + cos(0) + tan(0) + exp(0) + log(1) + sqrt(4) + abs(-3) + tanh(0)") == 7.0


def test_incomplete_expression_column():
    with pytest.raises(ParseError) as exc:
        dynexpr.parse_expr("x1 +", 1, 0)
    assert (exc.value.line, exc.value.column) == (1, 5)


@pytest.mark.parametrize(
    "src,fragment,column",
    [("x1 + foo", "unknown identifier", 6), ("x3", "out of range", 1), ("w2", "out of range", 1),
     ("x0", "out of range", 1), ("sin(x1, x2)", "exactly 1 argument", 1), ("exp", "exactly 1 argument", 1),
     ("(x1", r"expected '\)'", 4), ("x1 $ 2", "unexpected character", 4), ("x1 x2", "unexpected", 4)],
)
def test_errors(src, fragment, column):
    with pytest.raises(ParseError, match=fragment) as exc:
        dynexpr.parse_expr(src, 2, 1)
    assert exc.value.column == column


def test_error_lines_in_block():
    with pytest.raises(ParseError) as exc:
        dynexpr.parse("dx1 = x2\ndx2 = -x1 *\nr1 = x2")
    assert exc.value.line == 2 and exc.value.column == 12


def test_depth_limit():
    dynexpr.parse_expr("-" * 60 + "1")
    with pytest.raises(ParseError, match="deeper"):
        dynexpr.parse_expr("-" * 70 + "1")
    with pytest.raises(ParseError, match="deeper"):
        dynexpr.parse_expr("+".join(["1"] * 80))


def test_origin_must_be_equilibrium():
    with pytest.raises(ParseError, match="equilibrium"):
        dynexpr.parse("dx1 = x1 + 1")
    with pytest.raises(ParseError, match="outputs must vanish"):
        dynexpr.parse("dx1 = -x1\nr1 = cos(x1)")


def test_ieee_semantics():
    assert value("1/x1", [0.0]) == math.inf
    assert math.isnan(value("log(x1)", [-1.0]))
    assert value("log(x1)", [0.0]) == -math.inf


def test_dimension_mismatch():
    spec = dynexpr.parse(OSCILLATOR)
    with pytest.raises(DimensionError):
        spec.evaluate([1.0], [0.0])


_names = st.sampled_from(["x1", "x2", "w1", "1", "2.5", "0.125"])


def _exprs():
    return st.recursive(
        _names,
        lambda inner: st.one_of(
            st.tuples(inner, st.sampled_from("+-*/^"), inner).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
            inner.map(lambda e: f"-{e}"),
            st.tuples(st.sampled_from(sorted(dynexpr.FUNCTIONS)), inner).map(lambda t: f"{t[0]}({t[1]})"),
        ),
        max_leaves=12,
    )


@given(_exprs())
@settings(max_examples=300, deadline=None)
def test_pretty_print_round_trip(src):
    tree = dynexpr.parse_expr(src, 2, 1)
    again = dynexpr.parse_expr(dynexpr.to_source(tree), 2, 1)
    assert again == tree


@given(_exprs(), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
@settings(max_examples=200, deadline=None)
def test_evaluation_is_pure(src, vals):
    tree = dynexpr.parse_expr(src, 2, 1)
    a = dynexpr.evaluate_expr(tree, vals[:2], vals[2:])
    b = dynexpr.evaluate_expr(tree, vals[:2], vals[2:])
    assert np.array([a]).tobytes() == np.array([b]).tobytes()


def test_spec_round_trip():
    spec = dynexpr.parse(OSCILLATOR)
    again = dynexpr.parse(spec.to_source())
    assert again.equations == spec.equations and again.outputs == spec.outputs
