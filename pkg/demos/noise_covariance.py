"""Sampling spatially homogeneous noise and reading back its covariance.

Run: python3 demos/noise_covariance.py
"""

import numpy as np

from fracconv import noise as nz
from fracconv.kernel import KernelGrid

grid = KernelGrid(20.0, 401)
measures = {
    "unit atom (constant field)": nz.SpectralMeasure.unit_atom(),
    "atoms at +-1 (cosine)": nz.SpectralMeasure.cosine(1.0),
    "gaussian density": nz.SpectralMeasure.gaussian(),
}

dt = 0.5
for name, mu in measures.items():
    sample = nz.sample_wiener_increment(mu, grid, dt, seed=1, n_samples=4000)
    est = nz.estimate_covariance(sample, 40)
    exact = dt * nz.covariance_from_spectral(mu, est.lags).values
    z = (est.gamma_hat - exact) / est.stderr
    print(f"{name}: lag 0 {est.gamma_hat[0]:.4f} (exact {exact[0]:.4f}), "
          f"lag 2 {est.gamma_hat[20]:.4f} (exact {exact[20]:.4f}), max |z| {np.max(np.abs(z)):.2f}")

# Which measures give a well defined stochastic convolution?  The integral of
# mu(dx) / (1 + x^2) must be finite; the mollified-positivity probe agrees.
print()
for name, mu in [("lebesgue", nz.SpectralMeasure.lebesgue()),
                 ("1 + x^2", nz.SpectralMeasure.from_callable(lambda x: 1 + x * x)),
                 ("|x|", nz.SpectralMeasure.from_callable(np.abs))]:
    res = nz.positivity_check(mu)
    value = res.integrability.value
    print(f"{name:9s} integral {value:10.4g}  finite: {res.integrability.holds}  probe: {res.probe_holds}")
