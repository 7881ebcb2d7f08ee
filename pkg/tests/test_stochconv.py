import math

import numpy as np
import pytest

from fracconv import hsnorm as hs
from fracconv import noise as nz
from fracconv import stochconv as sc
from fracconv.kernel import KernelGrid

GRID = KernelGrid(8, 128)
ATOM = nz.SpectralMeasure.unit_atom()
GAUSS = nz.SpectralMeasure.gaussian()


def test_time_mesh_is_graded_toward_t():
    m = sc.time_mesh(1.0, 16)
    assert m[0] == 0 and m[-1] == 1.0 and np.all(np.diff(m) > 0)
    assert np.diff(m)[-1] == pytest.approx(1 / 256)
    assert np.all(np.diff(np.diff(m)) < 0)


def test_process_spec_validation():
    with pytest.raises(ValueError):
        sc.ProcessSpec(kind="weird")
    with pytest.raises(ValueError):
        sc.ProcessSpec(kind="deterministic-profile")
    with pytest.raises(ValueError):
        sc.ProcessSpec(b="lipschitz-table", table=((1, 0), (0, 1)))
    spec = sc.ProcessSpec(kind="deterministic-profile", profile=np.linspace(-1, 1, GRID.n_points),
                          b="lipschitz-table", table=((-1, 0, 1), (0, 2, 2)))
    assert spec.lipschitz_constant == 2.0
    g = spec.integrand(GRID)
    assert g[0] == 0 and g[-1] == 2
    with pytest.raises(ValueError):
        spec.integrand(KernelGrid(8, 64))


MIXED = nz.SpectralMeasure(nz.GaussianDensity(0.5, 2.0), ((0.7, 0.3), (-0.7, 0.3), (0.0, 0.2)))


@pytest.mark.parametrize("mu", [GAUSS, MIXED], ids=["gaussian", "mixed"])
def test_reproducible_and_thread_independent(monkeypatch, mu):
    args = (1.5, 3.0, 1.0, sc.ProcessSpec(), mu, GRID, 8, 40, 17)
    monkeypatch.setenv("FRACCONV_THREADS", "1")
    a = sc.simulate_convolution(*args, chunk=7)
    monkeypatch.setenv("FRACCONV_THREADS", "3")
    b = sc.simulate_convolution(*args, chunk=16)
    assert np.array_equal(a.fields, b.fields) and np.array_equal(a.norms, b.norms)
    assert len(a) == 40 and a[3].seed == 3 and np.array_equal(a[3].field, a.fields[3])


def test_norms_match_fields():
    v = hs.WeightFunction()
    b = sc.simulate_convolution(1.5, 3.0, 1.0, sc.ProcessSpec(), GAUSS, GRID, 8, 5, 1, v=v)
    for i in range(5):
        assert b.norms[i] == pytest.approx(hs.l2v_norm_sq(b.fields[i], v, GRID), rel=1e-12)


def test_doubling_coefficient_doubles_fields():
    spec = sc.ProcessSpec(kind="deterministic-profile", profile=1 + 0.5 * np.sin(GRID.nodes), b="identity")
    a = sc.simulate_convolution(1.5, 3.0, 1.0, spec, GAUSS, GRID, 8, 10, 4)
    b = sc.simulate_convolution(1.5, 3.0, 1.0, spec.scaled(2.0), GAUSS, GRID, 8, 10, 4)
    assert np.array_equal(b.fields, 2 * a.fields)
    assert np.allclose(b.norms, 4 * a.norms, rtol=1e-14)


def test_mean_zero():
    b = sc.simulate_convolution(1.5, 3.0, 1.0, sc.ProcessSpec(), GAUSS, GRID, 8, 2000, 8)
    z = b.fields.mean(axis=0) / (b.fields.std(axis=0, ddof=1) / math.sqrt(2000))
    assert np.max(np.abs(z)) < 4.5


def test_second_moment_needs_thirty_samples():
    with pytest.raises(nz.StatisticsError):
        sc.second_moment_estimate(np.ones(29))
    est = sc.second_moment_estimate(np.arange(30.0))
    assert est["mean"] == pytest.approx(14.5)


def test_discrete_expectation_scales_with_measure():
    v = hs.WeightFunction()
    a = sc.discrete_second_moment(1.5, 3.0, 1.0, sc.ProcessSpec(), GAUSS, GRID, 16, v)
    b = sc.discrete_second_moment(1.5, 3.0, 1.0, sc.ProcessSpec(), GAUSS.scaled(2.5), GRID, 16, v)
    assert b == pytest.approx(2.5 * a, rel=1e-12)


@pytest.mark.parametrize("mu", [ATOM, GAUSS], ids=["atom", "gaussian"])
def test_isometry_small(mu):
    rep = sc.ito_isometry_check(1.5, 3.0, 1.0, sc.ProcessSpec(), mu, GRID, 32, 2000, 2024)
    assert abs(rep.z_score) < 3
    # the graded mesh puts the estimator's own expectation close to the time integral
    assert rep.discrete_expectation == pytest.approx(rep.quadrature_value, rel=0.02)


def test_surrogate_radius():
    kw = dict(n_time_steps=8, n_paths=30, base_seed=0)
    tight = sc.untruncated_surrogate(1.5, 1.0, sc.ProcessSpec(), GAUSS, GRID, 1e-6, **kw)
    loose = sc.untruncated_surrogate(1.5, 1.0, sc.ProcessSpec(), GAUSS, GRID, 1e-2, **kw)
    assert tight.R_used <= 8 and loose.R_used <= tight.R_used
    assert tight.batch.R == tight.R_used


def test_truncation_insensitivity():
    grid = KernelGrid(16, 256)
    kw = dict(n_time_steps=16, n_paths=400, base_seed=6)
    sur = sc.untruncated_surrogate(1.5, 1.0, sc.ProcessSpec(), GAUSS, grid, 1e-6, **kw)
    wide = sc.simulate_convolution(1.5, 2 * sur.R_used, 1.0, sc.ProcessSpec(), GAUSS, grid,
                                   kw["n_time_steps"], kw["n_paths"], kw["base_seed"])
    diff = wide.norms - sur.batch.norms
    # common random numbers: the paired difference is tiny compared with its spread
    assert abs(diff.mean()) <= 3 * diff.std(ddof=1) / math.sqrt(diff.size) + 1e-12
