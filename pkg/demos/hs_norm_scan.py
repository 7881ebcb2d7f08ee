"""Hilbert-Schmidt norms of the truncated convolution operator.

Run: python3 demos/hs_norm_scan.py
"""

import numpy as np

from fracconv import hsnorm as hs
from fracconv import noise as nz
from fracconv.kernel import KernelGrid

grid = KernelGrid(16.0, 801)
v = hs.WeightFunction()
one = np.ones(grid.n_points)

# Two independent routes give the same number: per-row Fourier energy and the
# sum over an orthonormal basis of the noise's reproducing kernel space.
mu = nz.SpectralMeasure.gaussian()
k = hs.truncate_kernel(1.5, 1.0, 5.0, grid)
a = hs.hs_norm_sq(k, one, mu, v).hs_sq
b = hs.hs_norm_sq_basis(k, one, mu, v)
print(f"double integral {a:.12f}   basis sum {b:.12f}   relative gap {abs(a - b) / a:.1e}")

# The norm saturates as the truncation radius grows; the light tail of the
# kernel makes the increments vanish super-exponentially.
st = hs.hs_stabilization(1.5, 1.0, one, mu, v, grid, (1, 2, 3, 4, 5, 6, 8, 12, 16))
for r in st.reports:
    print(f"R = {r.R:5.1f}   |K_R|^2 = {r.hs_sq:.10f}")
print(f"stable from R = {st.R_tilde}; largest later increment {st.M_tilde:.1e} "
      f"(tail bound {st.increment_bound:.1e})")

# With white noise (Lebesgue) the norm with u = 1 grows like t^(-alpha/2) at
# small t, so it is not bounded uniformly in t; its time integral is finite.
scan = hs.unit_integrand_bound_scan(1.5, 5.0, nz.SpectralMeasure.lebesgue(), v, grid)
print("\nwhite noise, ratio to (int v)(int mu/(1+x^2)) over t:",
      ", ".join(f"{t:g}: {r:.3f}" for t, r in zip(scan.times, scan.ratios)))
ti = hs.time_integrated_hs(1.5, 1.0, 5.0, nz.SpectralMeasure.lebesgue(), v, grid)
print(f"time integral over [0, 1]: {ti.value:.6f} (change under mesh doubling {ti.rel_change:.1e})")
