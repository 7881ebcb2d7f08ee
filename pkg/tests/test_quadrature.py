import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracconv.quadrature import (
    QuadratureError,
    endpoint_corrected_weights,
    gauss_kronrod,
    graded_breakpoints,
    half_line_integral,
    symmetric_grid_integral,
    trapezoid_weights,
)


def test_exponential_on_unit_interval():
    res = gauss_kronrod(np.exp, [0.0, 1.0])
    assert abs(res.value[0] - (math.e - 1)) < 1e-14


def test_vector_valued_integrand():
    ks = np.arange(1, 6)
    res = gauss_kronrod(lambda x: np.cos(np.multiply.outer(ks, x)), [0.0, 1.0, 2.0],
                        n_components=ks.size)
    assert np.allclose(res.value, np.sin(2 * ks) / ks, atol=1e-13, rtol=0)


def test_graded_breakpoints_absorb_sqrt_singularity():
    bp = graded_breakpoints(1.0, 0.25)
    assert bp[0] == 0.0 and bp[-1] == 1.0 and np.all(np.diff(bp) > 0)
    res = gauss_kronrod(np.sqrt, bp, atol=1e-13)
    assert abs(res.value[0] - 2 / 3) < 1e-12


def test_panel_budget_exhaustion_raises():
    with pytest.raises(QuadratureError) as info:
        gauss_kronrod(lambda x: np.sign(x - 1 / 3), [0.0, 1.0], atol=1e-300, max_panels=50)
    assert info.value.error_estimate > 0


def test_graded_breakpoints_reject_empty_span():
    with pytest.raises(ValueError):
        graded_breakpoints(0.0, 0.1)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=23), st.floats(0.1, 3.0))
def test_kronrod_is_exact_for_low_degree_polynomials(coeffs, b):
    p = np.polynomial.Polynomial(coeffs)
    exact = p.integ()(b) - p.integ()(0.0)
    res = gauss_kronrod(p, [0.0, b])
    scale = np.polynomial.Polynomial(np.abs(coeffs)).integ()(b) + 1.0
    assert abs(res.value[0] - exact) <= 1e-12 * scale


def test_trapezoid_weights_sum_to_length():
    w = trapezoid_weights(11, 0.1)
    assert math.isclose(w.sum(), 1.0, rel_tol=0, abs_tol=1e-15)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4), st.integers(8, 60))
def test_endpoint_rule_exact_for_cubics(coeffs, n):
    h = 2.0 / (n - 1)
    x = h * np.arange(n)
    p = np.polynomial.Polynomial(coeffs)
    exact = p.integ()(x[-1]) - p.integ()(0.0)
    approx = half_line_integral(p(x), h)
    assert abs(approx - exact) <= 1e-12 * (1 + np.sum(np.abs(coeffs)) * 16)


def test_endpoint_rule_needs_eight_nodes():
    with pytest.raises(ValueError):
        endpoint_corrected_weights(7, 0.1)


def test_symmetric_rule_handles_kink_at_origin():
    x = np.linspace(-3, 3, 601)
    f = np.exp(-np.abs(x))
    assert abs(symmetric_grid_integral(f, x[1] - x[0]) - 2 * (1 - math.exp(-3))) < 1e-9
    # plain trapezoid sees the kink as an O(h^2) error
    assert abs(trapezoid_weights(x.size, x[1] - x[0]) @ f - 2 * (1 - math.exp(-3))) > 1e-6
