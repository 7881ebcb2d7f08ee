import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize
from scipy.stats import levy_stable

from fracconv import kernel as kn


def _stable_reference(alpha):
    """The kernel at t = 1 as a maximally skewed stable law (external oracle)."""
    return levy_stable(2.0 / alpha, -1.0, scale=(-math.cos(math.pi / alpha)) ** (alpha / 2))


def test_order_domain():
    with pytest.raises(kn.UnsupportedOrderError):
        kn.FractionalOrder(2.5)
    with pytest.raises(kn.UnsupportedOrderError):
        kn.FractionalOrder(0.9)
    o = kn.FractionalOrder(1.5)
    assert math.isclose(o.delta, 4 / 3) and not o.is_heat and not o.is_wave
    assert kn.FractionalOrder(1).is_heat and kn.FractionalOrder(2).is_wave


def test_grid_nodes():
    g = kn.KernelGrid(2.0, 5)
    assert np.allclose(g.nodes, [-2, -1, 0, 1, 2]) and g.has_origin and g.spacing == 1.0
    assert not kn.KernelGrid(2.0, 4).has_origin


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_density_matches_stable_law(alpha):
    x = np.linspace(-8.0, kn.light_tail_cap(alpha), 41)
    ref = _stable_reference(alpha).pdf(x)
    assert np.max(np.abs(kn.density(alpha, 1.0, x) - ref)) < 1e-10


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_value_at_origin_closed_form(alpha):
    theta = math.pi * (alpha - 1) / 2
    exact = math.cos(theta) * math.gamma(1 + alpha / 2) / math.pi
    assert math.isclose(kn.density(alpha, 1.0, np.array([0.0]))[0], exact, rel_tol=1e-12)


def test_heat_case_is_gaussian():
    x = np.linspace(-6, 6, 49)
    for t in (0.5, 2.0):
        exact = np.exp(-x * x / (4 * t)) / math.sqrt(4 * math.pi * t)
        assert np.max(np.abs(kn.density(1.0, t, x) - exact)) < 1e-14
        assert np.max(np.abs(kn.density(1.0, t, x, method="quadrature") - exact)) < 1e-10


@given(st.floats(1.1, 1.9), st.floats(0.25, 4.0), st.floats(-4.0, 3.0))
def test_self_similarity(alpha, t, x):
    direct = kn.density(alpha, t, np.array([x]))[0]
    s = t ** (-alpha / 2)
    scaled = s * kn.density(alpha, 1.0, np.array([x * s]))[0]
    assert abs(direct - scaled) <= 1e-10


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_cdfs_match_stable_law(alpha):
    ref = _stable_reference(alpha)
    y = np.array([0.3, 1.0, 2.0])
    assert np.allclose(kn.positive_cdf(alpha, 1.0, y), ref.cdf(y) - ref.cdf(0.0), atol=1e-9, rtol=0)
    assert np.allclose(kn.negative_cdf(alpha, 1.0, y), ref.cdf(0.0) - ref.cdf(-y), atol=1e-9, rtol=0)
    assert math.isclose(kn.window_mass(alpha, 1.0, 10.0), ref.cdf(10.0) - ref.cdf(-10.0), abs_tol=1e-9)


@pytest.mark.parametrize("alpha", [1.1, 1.5, 1.9])
def test_positive_half_carries_alpha_over_two(alpha):
    cap = kn.light_tail_cap(alpha)
    ref = _stable_reference(alpha)
    assert math.isclose(ref.cdf(cap) - ref.cdf(0.0), alpha / 2, abs_tol=1e-9)
    assert kn.density(alpha, 1.0, np.array([cap]))[0] < kn.RESOLUTION_FLOOR


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_peak_constant_matches_optimizer(alpha):
    r = optimize.minimize_scalar(lambda y: -kn.density(alpha, 1.0, np.array([y]))[0],
                                 bounds=(0.05, kn.light_tail_cap(alpha)), method="bounded",
                                 options={"xatol": 1e-10})
    assert abs(kn.estimate_peak_constant(alpha) - r.x) < 1e-7


def test_peak_constant_zero_for_heat():
    assert kn.estimate_peak_constant(1.0) == 0.0


def test_kernel_evaluation_mass_and_positivity():
    ev = kn.kernel(1.5, 1.0, kn.KernelGrid(40, 4001))
    assert abs(ev.mass - 1.0) < 1e-6
    assert ev.negativity_count == 0
    assert np.array_equal(ev.symmetrized, ev.symmetrized[::-1])


def test_kernel_direct_agrees_with_scaled():
    g = kn.KernelGrid(20, 401)
    assert np.max(np.abs(kn.kernel_direct(1.5, 4.0, g).values - kn.kernel(1.5, 4.0, g).values)) < 1e-10


def test_wave_order_rejected_by_kernel():
    with pytest.raises(kn.UnsupportedOrderError):
        kn.kernel(2.0, 1.0, kn.KernelGrid(5, 11))


def test_cell_masses_conserve_mass():
    masses = kn.cell_masses(1.5, 1.0, 0.05, 100)
    assert masses.size == 201 and math.isclose(masses.sum(), 1.0, abs_tol=1e-12)
    trunc = kn.cell_masses(1.5, 1.0, 0.05, 100, truncation=2.0)
    exact = 2 * kn.positive_cdf(1.5, 1.0, np.array([2.0]))[0] / 1.5
    assert math.isclose(trunc.sum(), exact, abs_tol=1e-9)
    assert np.all(trunc[np.abs(np.arange(-100, 101) * 0.05) > 2.0 + 0.025] == 0)


def test_cell_masses_density_form():
    masses = kn.cell_masses(1.5, 1.0, 0.05, 400, form="density")
    assert math.isclose(masses.sum(), kn.window_mass(1.5, 1.0, 20.025), abs_tol=1e-9)
    with pytest.raises(ValueError):
        kn.cell_masses(1.5, 1.0, 0.05, 10, form="other")


@pytest.mark.parametrize("alpha", [1.3, 1.5, 1.7])
def test_transform_routes_agree(alpha):
    x = np.linspace(-10, 10, 81)
    ref = kn.density(alpha, 1.0, x)
    assert np.max(np.abs(kn.symmetrized_via_transform(alpha, x) - kn.density(alpha, 1.0, np.abs(x)) / alpha)) < 1e-6
    assert np.max(np.abs(kn.exponential_part_inverse(alpha, x, branch="b") - ref)) < 1e-5


def test_properties_report():
    order = kn.FractionalOrder(1.5)
    c = kn.estimate_peak_constant(order)
    grid = kn.KernelGrid.from_spacing(1.05 * kn.light_tail_cap(order), c / 40)
    rep = kn.kernel_properties(order, 1.0, grid)
    assert rep.min_location == 0.0 and rep.monotone and rep.negativity_count == 0
    assert abs(rep.max_locations[1] - c) <= grid.spacing
    assert rep.max_locations[0] == -rep.max_locations[1]


def test_properties_refuse_coarse_grid_and_heat():
    with pytest.raises(kn.ResolutionError):
        kn.kernel_properties(1.5, 1.0, kn.KernelGrid(10, 21))
    with pytest.raises(kn.UnsupportedOrderError):
        kn.kernel_properties(1.0, 1.0, kn.KernelGrid(10, 2001))


def test_tail_fit_heat_constants():
    fit = kn.fit_tail(1.0)
    assert fit.power == 0 and fit.exponent == 2
    assert abs(fit.decay_rate / 0.25 - 1) < 0.02
    assert abs(fit.prefactor * 2 * math.sqrt(math.pi) - 1) < 0.02


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_tail_fit_bounds_tail_mass(alpha):
    fit = kn.fit_tail(alpha)
    assert fit.residual < 0.1
    assert fit.exponent == pytest.approx(2 / (2 - alpha))
    for r in (0.6 * kn.light_tail_cap(alpha), fit.fit_range[0], fit.fit_range[1]):
        # alpha/2 - M(r) is only accurate to ~1e-16 absolute
        exact = (alpha / 2 - kn.positive_cdf(alpha, 1.0, np.array([r]))[0]) * 2 / alpha
        assert exact - 1e-15 <= fit.tail_mass(r) <= 1.1 * exact + 1e-15
    # scaling in t: the radius is measured in reduced units
    assert fit.tail_mass(2.0, t=4.0) == pytest.approx(fit.tail_mass(2.0 * 4.0 ** (-alpha / 2)))


def test_solve_heat_converges_to_second_order():
    errs = []
    for n in (1001, 2001):
        g = kn.KernelGrid(20, n)
        x = g.nodes
        u = kn.solve_deterministic(1.0, np.exp(-x * x), 0.25, g)
        errs.append(np.max(np.abs(u - np.exp(-x * x / 2) / math.sqrt(2))))
    assert errs[1] < 5e-5 and errs[0] / errs[1] > 3.5


def test_solve_wave_shift_and_constants():
    g = kn.KernelGrid(10, 1001)
    x = g.nodes
    f = np.exp(-x * x)
    u = kn.solve_deterministic(2.0, f, 30 * g.spacing, g)
    expect = 0.5 * (np.concatenate([f[30:], np.zeros(30)]) + np.concatenate([np.zeros(30), f[:-30]]))
    assert np.max(np.abs(u - expect)) < 1e-14
    # constants are preserved away from the edges
    v = kn.solve_deterministic(1.5, np.ones(g.n_points), 0.5, g)
    assert np.max(np.abs(v[400:601] - 1)) < 1e-12
    assert np.array_equal(kn.solve_deterministic(1.5, f, 0.0, g), f)
