import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphmean.jets import (
    Jet,
    JetDomainError,
    jet_apply_elementary,
    jet_constant,
    jet_extract_derivative,
    jet_variable,
)

ORDER = 8

# name -> (mpmath function, domain of base points, exponent)
ELEMENTARY = {
    "sinh": (mpmath.sinh, (-3.0, 3.0), None),
    "cosh": (mpmath.cosh, (-3.0, 3.0), None),
    "tanh": (mpmath.tanh, (-3.0, 3.0), None),
    "coth": (mpmath.coth, (0.05, 3.0), None),
    "sin": (mpmath.sin, (-3.0, 3.0), None),
    "cos": (mpmath.cos, (-3.0, 3.0), None),
    "cot": (mpmath.cot, (0.05, 3.0), None),
    "exp": (mpmath.exp, (-3.0, 3.0), None),
    "log": (mpmath.log, (0.05, 3.0), None),
    "power": (lambda t: t**2.5, (0.05, 3.0), 2.5),
    "inverse_cube": (lambda t: t**-3, (0.05, 3.0), -3.0),
}


def taylor_oracle(func, s0, order):
    with mpmath.workdps(40):
        return [float(c) for c in mpmath.taylor(func, mpmath.mpf(s0), order)]


def elementary(name, x):
    if name == "inverse_cube":
        return jet_apply_elementary("power", x, -3.0)
    p = ELEMENTARY[name][2]
    return jet_apply_elementary(name, x, p) if p is not None else jet_apply_elementary(name, x)


def test_variable_jet():
    x = jet_variable(0.3, 4)
    assert x.base_point == 0.3
    assert x.coeffs.tolist() == [0.3, 1.0, 0.0, 0.0, 0.0]
    assert jet_variable(0.0, 0).coeffs.tolist() == [0.0]


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        jet_variable(0.0, -1)


def test_sinh_at_zero():
    y = jet_apply_elementary("sinh", jet_variable(0.0, 3))
    np.testing.assert_allclose(y.coeffs, [0.0, 1.0, 0.0, 1.0 / 6.0], rtol=0, atol=1e-16)


def test_coth_first_coefficients():
    y = jet_apply_elementary("coth", jet_variable(1.0, 1))
    assert y.coeffs[0] == pytest.approx(1.0 / math.tanh(1.0), rel=1e-15)
    assert y.coeffs[1] == pytest.approx(-1.0 / math.sinh(1.0) ** 2, rel=1e-14)


def test_product_matches_double_angle():
    x = jet_variable(0.4, 6)
    lhs = jet_apply_elementary("sinh", x) * jet_apply_elementary("cosh", x)
    rhs = 0.5 * jet_apply_elementary("sinh", 2.0 * x)
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, rtol=1e-14, atol=1e-15)


def test_extract_derivative():
    y = Jet(0.0, [2.0, 3.0, 5.0])
    assert jet_extract_derivative(y, 2) == 10.0
    assert jet_extract_derivative(y, 0) == 2.0
    with pytest.raises(ValueError):
        jet_extract_derivative(y, 3)
    with pytest.raises(ValueError):
        jet_extract_derivative(y, -1)


def test_coth_and_cot_singular_at_zero():
    x = jet_variable(0.0, 3)
    for name in ("coth", "cot"):
        with pytest.raises(JetDomainError):
            jet_apply_elementary(name, x)


def test_log_and_fractional_power_domain():
    x = jet_variable(-0.5, 3)
    with pytest.raises(JetDomainError):
        jet_apply_elementary("log", x)
    with pytest.raises(JetDomainError):
        jet_apply_elementary("power", x, 0.5)
    with pytest.raises(ValueError):
        jet_apply_elementary("power", x)
    with pytest.raises(ValueError):
        jet_apply_elementary("arcsinh", x)


def test_division_by_zero_constant():
    x = jet_variable(0.0, 3)
    with pytest.raises(ZeroDivisionError):
        jet_constant(1.0, 0.0, 3) / x


def test_mixed_base_points_rejected():
    with pytest.raises(ValueError):
        jet_variable(0.1, 2) + jet_variable(0.2, 2)


def test_integer_power_at_zero():
    y = jet_apply_elementary("power", jet_variable(0.0, 4), 3)
    np.testing.assert_array_equal(y.coeffs, [0.0, 0.0, 0.0, 1.0, 0.0])


@pytest.mark.parametrize("name", sorted(ELEMENTARY))
@settings(max_examples=100, deadline=None)
@given(u=st.floats(0.0, 1.0))
def test_elementary_against_high_precision(name, u):
    func, (lo, hi), _ = ELEMENTARY[name]
    s0 = lo + (hi - lo) * u
    got = elementary(name, jet_variable(s0, ORDER)).coeffs
    ref = np.array(taylor_oracle(func, s0, ORDER))
    # relative per coefficient, floored at the largest coefficient times 1e-3
    scale = np.maximum(np.abs(ref), 1e-3 * np.max(np.abs(ref)))
    assert np.max(np.abs(got - ref) / scale) <= 1e-12


coeff_lists = st.lists(st.floats(-2.0, 2.0), min_size=ORDER + 1, max_size=ORDER + 1)


@settings(max_examples=100, deadline=None)
@given(a=coeff_lists, b=coeff_lists, c=coeff_lists)
def test_ring_axioms(a, b, c):
    x, y, z = (Jet(0.5, v) for v in (a, b, c))
    # floating distributivity holds up to rounding of the convolution sums
    scale = 1 + np.max(np.convolve(np.abs(a) + np.abs(b), np.abs(c))[: ORDER + 1])
    np.testing.assert_allclose(((x + y) * z).coeffs, (x * z + y * z).coeffs, rtol=0, atol=1e-14 * scale)
    np.testing.assert_allclose((x * y).coeffs, (y * x).coeffs, rtol=0, atol=1e-14 * scale)
    np.testing.assert_array_equal((x + y).coeffs, (y + x).coeffs)


@settings(max_examples=100, deadline=None)
@given(a=coeff_lists, b=coeff_lists)
def test_leibniz_rule(a, b):
    f, g = Jet(0.2, a), Jet(0.2, b)
    h = f * g
    for k in range(ORDER + 1):
        rhs = sum(
            math.comb(k, j) * jet_extract_derivative(f, j) * jet_extract_derivative(g, k - j) for j in range(k + 1)
        )
        mag = sum(
            math.comb(k, j) * abs(jet_extract_derivative(f, j) * jet_extract_derivative(g, k - j))
            for j in range(k + 1)
        )
        assert abs(jet_extract_derivative(h, k) - rhs) <= 1e-13 * (1 + mag)


@settings(max_examples=50, deadline=None)
@given(s0=st.floats(0.1, 2.5))
def test_division_inverts_multiplication(s0):
    x = jet_variable(s0, ORDER)
    f = jet_apply_elementary("cosh", x)
    g = jet_apply_elementary("exp", x)
    np.testing.assert_allclose(((f * g) / g).coeffs, f.coeffs, rtol=1e-13, atol=1e-14)
