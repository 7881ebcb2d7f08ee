import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from fracconv import hsnorm as hs
from fracconv import noise as nz
from fracconv.kernel import KernelGrid
from fracconv.quadrature import trapezoid_weights

GRID = KernelGrid(10, 201)
V = hs.WeightFunction()


def _row_matrix(kern, u):
    """Dense matrix of the windowed products P_R(x - z) u(z)."""
    n = kern.grid.n_points
    r = (kern.masses.size - 1) // 2
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    off = i - j + r
    inside = (off >= 0) & (off <= 2 * r)
    return np.where(inside, kern.masses[np.clip(off, 0, 2 * r)], 0.0) * u[None, :]


def test_weight_function_masses():
    for text in ("exp", "poly:1.5", "poly:3"):
        v = hs.WeightFunction.parse(text)
        ref, _ = integrate.quad(lambda x: float(v(np.array([x]))[0]), -np.inf, np.inf, limit=200)
        assert v.total_mass == pytest.approx(ref, rel=1e-9)
        assert v.label() == text
    with pytest.raises(ValueError):
        hs.WeightFunction.parse("poly:0.4")
    with pytest.raises(ValueError):
        hs.WeightFunction.parse("gauss")


def test_weight_is_c1_at_one():
    x = np.array([1 - 1e-7, 1.0, 1 + 1e-7])
    y = V(x)
    assert np.allclose(y, math.exp(-1), atol=1e-6)
    assert (y[1] - y[0]) / 1e-7 == pytest.approx((y[2] - y[1]) / 1e-7, abs=1e-5)
    assert np.all(V(np.linspace(-1, 1, 101)) >= math.exp(-1))


def test_truncation_limits():
    full = hs.truncate_kernel(1.5, 1.0, GRID.half_width, GRID)
    assert full.tail_mass < 1e-12
    tiny = hs.truncate_kernel(1.5, 1.0, 1e-3, GRID)
    assert tiny.truncated_mass < 1e-2
    k = hs.truncate_kernel(1.5, 1.0, 5.0, GRID)
    assert np.all(k.values()[np.abs(k.grid.nodes) > 5.0 + k.grid.spacing] == 0)


def test_apply_operator():
    k = hs.truncate_kernel(1.5, 1.0, 2.0, GRID)
    one = np.ones(GRID.n_points)
    out = hs.apply_operator(k, one, one)
    assert np.allclose(out[50:151], k.truncated_mass, atol=1e-14)
    u = np.exp(-GRID.nodes ** 2)
    eta = np.cos(GRID.nodes)
    assert np.allclose(hs.apply_operator(k, 2 * u, eta), 2 * hs.apply_operator(k, u, eta))
    assert np.all(hs.apply_operator(k, u, np.zeros_like(u)) == 0)
    direct = _row_matrix(k, u) @ eta
    assert np.allclose(hs.apply_operator(k, u, eta), direct, atol=1e-14)


def test_convolution_bound():
    k = hs.truncate_kernel(1.5, 1.0, 2.0, GRID)
    rng = np.random.default_rng(0)
    for _ in range(20):
        psi = rng.standard_normal() * np.exp(-(GRID.nodes - rng.uniform(-5, 5)) ** 2 * rng.uniform(0.2, 3))
        assert hs.check_convolution_bound(k, psi, V).holds
    zero = hs.check_convolution_bound(k, np.zeros(GRID.n_points), V)
    assert zero.holds and zero.lhs == 0


def test_atom_reduction():
    k = hs.truncate_kernel(1.5, 1.0, 5.0, GRID)
    one = np.ones(GRID.n_points)
    m = _row_matrix(k, one).sum(axis=1)
    w = trapezoid_weights(GRID.n_points, GRID.spacing)
    exact = float(np.sum(w * V(GRID.nodes) * m ** 2))
    got = hs.hs_norm_sq(k, one, nz.SpectralMeasure.unit_atom(), V).hs_sq
    assert got == pytest.approx(exact, rel=1e-13)


def test_lebesgue_parseval():
    k = hs.truncate_kernel(1.2, 0.5, 4.0, GRID)
    u = 1 + 0.5 * np.sin(GRID.nodes)
    rows = _row_matrix(k, u)
    w = trapezoid_weights(GRID.n_points, GRID.spacing)
    exact = 2 * math.pi / GRID.spacing * float(np.sum(w * V(GRID.nodes) * np.sum(rows ** 2, axis=1)))
    got = hs.hs_norm_sq(k, u, nz.SpectralMeasure.lebesgue(), V).hs_sq
    assert got == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("name", ["atom", "gaussian", "lebesgue", "cosine"])
def test_basis_sum_equals_double_integral(name):
    mu = {"atom": nz.SpectralMeasure.unit_atom(), "gaussian": nz.SpectralMeasure.gaussian(),
          "lebesgue": nz.SpectralMeasure.lebesgue(), "cosine": nz.SpectralMeasure.cosine(1.0)}[name]
    k = hs.truncate_kernel(1.5, 1.0, 3.0, GRID)
    u = np.exp(-0.1 * GRID.nodes ** 2) + 0.2
    a = hs.hs_norm_sq(k, u, mu, V).hs_sq
    b = hs.hs_norm_sq_basis(k, u, mu, V)
    assert abs(a - b) <= 1e-10 * a


def test_zero_integrand_and_warnings():
    k = hs.truncate_kernel(1.5, 1.0, 3.0, GRID)
    assert hs.hs_norm_sq(k, np.zeros(GRID.n_points), nz.SpectralMeasure.gaussian(), V).hs_sq == 0
    rep = hs.hs_norm_sq(k, np.ones(GRID.n_points), nz.SpectralMeasure.from_callable(lambda x: 1 + x * x), V)
    assert rep.warnings


@given(st.floats(-5.0, 5.0).filter(lambda c: abs(c) > 1e-3))
def test_quadratic_homogeneity(c):
    k = hs.truncate_kernel(1.5, 1.0, 3.0, GRID)
    u = 1 + 0.3 * np.cos(GRID.nodes)
    mu = nz.SpectralMeasure.gaussian()
    base = hs.hs_norm_sq(k, u, mu, V).hs_sq
    assert hs.hs_norm_sq(k, c * u, mu, V).hs_sq == pytest.approx(c * c * base, rel=1e-12)


@given(st.floats(0.0, 5.0))
def test_monotone_under_origin_atom(kappa):
    k = hs.truncate_kernel(1.5, 1.0, 3.0, GRID)
    u = 1 + 0.3 * np.cos(GRID.nodes)
    mu = nz.SpectralMeasure.gaussian()
    assert (hs.hs_norm_sq(k, u, mu.with_origin_atom(kappa), V).hs_sq
            >= hs.hs_norm_sq(k, u, mu, V).hs_sq * (1 - 1e-14))


def test_scaling_measure_and_weight_leaves_ratio_invariant():
    mu = nz.SpectralMeasure.gaussian()
    a = hs.unit_integrand_bound_scan(1.5, 5.0, mu, V, GRID, times=(0.5, 1.0))
    b = hs.unit_integrand_bound_scan(1.5, 5.0, mu.scaled(2.0), V, GRID, times=(0.5, 1.0))
    c = hs.unit_integrand_bound_scan(1.5, 5.0, mu, hs.WeightFunction(scale=2.0), GRID, times=(0.5, 1.0))
    assert np.allclose(a.ratios, b.ratios, rtol=1e-12) and np.allclose(a.ratios, c.ratios, rtol=1e-12)
    assert np.allclose(b.lhs, 2 * np.array(a.lhs), rtol=1e-12)


def test_weighted_scan_and_comparison_inequality():
    u = 1.0 + np.exp(-0.2 * GRID.nodes ** 2)
    mu = nz.SpectralMeasure.gaussian()
    a = hs.weighted_bound_scan(1.5, 1.0, (1, 2, 4, 8), u, mu, V, GRID)
    b = hs.weighted_bound_scan(1.5, 1.0, (1, 2, 4, 8), 3 * u, mu, V, GRID)
    assert a.comparison_holds and b.comparison_holds
    for ra, rb in zip(a.reports, b.reports):
        assert rb.hs_sq == pytest.approx(9 * ra.hs_sq, rel=1e-12)
        assert rb.bound_ratio == pytest.approx(ra.bound_ratio, rel=1e-12)
    one = hs.weighted_bound_scan(1.5, 1.0, (4, 6, 8), np.ones(GRID.n_points), mu, V, GRID)
    ratios = [r.bound_ratio for r in one.reports]
    assert ratios[0] > ratios[1] > ratios[2]


def test_time_integral_converges_and_grows_with_t():
    mu = nz.SpectralMeasure.unit_atom()
    a = hs.time_integrated_hs(1.5, 1.0, 5.0, mu, V, GRID)
    b = hs.time_integrated_hs(1.5, 0.5, 5.0, mu, V, GRID)
    assert a.converged and a.rel_change < 0.01 and 0 < b.value <= a.value
    leb = hs.time_integrated_hs(1.5, 1.0, 5.0, nz.SpectralMeasure.lebesgue(), V, GRID)
    assert math.isfinite(leb.value) and leb.converged


def test_stabilization_schedule():
    one = np.ones(GRID.n_points)
    mu = nz.SpectralMeasure.gaussian()
    st_ = hs.hs_stabilization(1.5, 1.0, one, mu, V, GRID, (1, 2, 4, 6, 8, 10))
    assert st_.R_tilde <= 8 and st_.within_bound
    vals = [r.hs_sq for r in st_.reports]
    assert all(b >= a * (1 - 1e-13) for a, b in zip(vals, vals[1:]))
    single = hs.hs_stabilization(1.5, 1.0, one, mu, V, GRID, (GRID.half_width,))
    assert single.M_tilde == 0 and single.R_tilde == GRID.half_width
    with pytest.raises(hs.StabilizationError):
        hs.hs_stabilization(1.5, 1.0, one, mu, V, GRID, (0.5, 1.0), tol=1e-12)
    with pytest.raises(ValueError):
        hs.hs_stabilization(1.5, 1.0, one, mu, V, GRID, (2.0, 1.0))
