"""How the kernel moves from a heat bump to a pair of travelling waves.

Run: python3 demos/kernel_shapes.py
"""

import numpy as np

from fracconv import kernel as kn

grid = kn.KernelGrid(20.0, 4001)

print("alpha   c_alpha   peak at t=1   mass     light-tail cap   tail fit residual")
for alpha in (1.0, 1.1, 1.3, 1.5, 1.7, 1.9):
    ev = kn.kernel(alpha, 1.0, grid)
    c = kn.estimate_peak_constant(alpha)
    # the symmetrised kernel peaks at +-c t^(alpha/2); at alpha = 1 it peaks at 0
    peak = grid.nodes[np.argmax(ev.symmetrized)]
    fit = kn.fit_tail(alpha)
    print(f"{alpha:4.1f}   {c:7.4f}   {abs(peak):9.4f}   {ev.mass:.8f}   {kn.light_tail_cap(alpha):8.3f}"
          f"        {fit.residual:.2e}")

# Self-similarity: the kernel at time t is the t = 1 kernel stretched by t^(alpha/2).
alpha = 1.5
c = kn.estimate_peak_constant(alpha)
print("\npeak location of alpha = 1.5 as time grows (predicted c t^(3/4))")
for t in (0.25, 1.0, 4.0):
    ev = kn.kernel(alpha, t, grid)
    x_star = abs(grid.nodes[np.argmax(ev.symmetrized)])
    print(f"t = {t:4.2f}   observed {x_star:.3f}   predicted {c * t ** 0.75:.3f}")

# The deterministic solution spreads like heat at alpha = 1 and travels at alpha = 2.
x = grid.nodes
g = np.exp(-4 * x * x)
print("\nsolution at t = 2 from a narrow bump: value at x = 0 and x = 2")
for alpha in (1.0, 1.5, 1.9, 2.0):
    u = kn.solve_deterministic(alpha, g, 2.0, grid)
    print(f"alpha = {alpha:3.1f}   u(0) = {u[2000]:.4f}   u(2) = {np.interp(2.0, x, u):.4f}")
