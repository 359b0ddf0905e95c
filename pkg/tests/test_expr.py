import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewfatou.expr import (Const, Exp, ExprSyntaxError, IntPow, LogModulusError, Poly, StructuralError,
                            Var, W, Z, derivative, is_overflow, log_modulus, parse_expr)


def test_example_map_value():
    e = parse_expr("z^2 - w*z^3")
    assert e(5.0, 0.00262144) == pytest.approx(24.67232, rel=1e-14)


def test_log_modulus_without_overflow():
    e = parse_expr("exp(z^2)")
    assert not np.isfinite(e(300.0))
    assert float(log_modulus(e, 300.0)) == pytest.approx(90000.0, rel=1e-12)
    assert float(log_modulus(parse_expr("z^3"), 100.0)) == pytest.approx(3 * math.log(100), rel=1e-12)


def test_derivative_vanishes_at_baker_fixed_point():
    e = parse_expr("z + exp(-z) - 1")
    assert abs(complex(derivative(e, Z)(0.0))) == 0.0


def test_missing_w_is_structural_error():
    with pytest.raises(StructuralError):
        parse_expr("z*w")(1.0)


@pytest.mark.parametrize("text,col", [("z^+", 3), ("z + foo", 5), ("z/w", 2), ("(z", 3)])
def test_syntax_errors_carry_column(text, col):
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr(text)
    assert info.value.column == col


def test_grammar_constants_and_poly():
    assert complex(parse_expr("2*pi*i")(0.0)) == pytest.approx(2j * math.pi)
    assert complex(parse_expr("3i")(0.0)) == 3j
    p = parse_expr("poly(1, 2, 3)")
    assert complex(p(2.0)) == 17
    assert parse_expr("polyw(0, 0.5)", Z).uses(W)
    assert parse_expr("poly(0, 0.5)", W).variables == frozenset({W})


def test_sum_overflow_log_modulus_raises():
    e = parse_expr("exp(z) + exp(2*z)")
    with pytest.raises(LogModulusError):
        log_modulus(e, 1000.0)


def test_is_overflow_flag():
    assert bool(is_overflow(parse_expr("exp(z)")(1000.0)))
    assert not bool(is_overflow(parse_expr("exp(z)")(1.0)))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=8), st.floats(-2, 2), st.floats(-2, 2))
def test_poly_matches_numpy(coeffs, x, y):
    z = complex(x, y)
    assert complex(Poly(tuple(coeffs), Z)(z)) == pytest.approx(np.polyval(coeffs[::-1], z), abs=1e-9, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 12))
def test_intpow_real_stays_real(x, n):
    v = IntPow(Var(Z), n)(x)
    assert v.imag == 0.0
    assert v.real == pytest.approx(x ** n, rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_derivative_product_rule(x, y):
    z = complex(x, y)
    e = Var(Z) * Exp(Var(Z)) + Const(2) * Var(Z) ** 3
    d = complex(derivative(e, Z)(z))
    expected = np.exp(z) * (1 + z) + 6 * z * z
    assert d == pytest.approx(expected, rel=1e-12, abs=1e-12)
