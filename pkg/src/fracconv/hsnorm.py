"""Truncated convolution operators and their Hilbert-Schmidt norms.

The operator ``K_R(t, u) eta = P^R(t) * (u eta)`` maps the reproducing kernel
space of the noise into ``L^2_v``.  Its squared Hilbert-Schmidt norm is
computed two ways:

* ``hs_norm_sq``: for each grid point ``x`` the windowed product
  ``z -> P^R(t)(x - z) u(z)`` is Fourier transformed and integrated against
  ``mu``, then integrated against ``v(x) dx``;
* ``hs_norm_sq_basis``: ``sum_k |K_R(t, u) f_k|^2`` over an orthonormal basis.

Both use the same discrete spectrum and the same kernel cell masses, so they
agree to rounding error.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special

from .kernel import (
    FractionalOrder,
    KernelGrid,
    cell_masses,
    fit_tail,
    kernel,
)
from .noise import DiscreteSpectrum, basis_fields, integrability_check
from .quadrature import trapezoid_weights

__all__ = [
    "WeightFunction",
    "TruncatedKernel",
    "HsReport",
    "BoundCheck",
    "BoundScan",
    "WeightedScan",
    "TimeIntegral",
    "Stabilization",
    "StabilizationError",
    "weight_constant",
    "truncate_kernel",
    "apply_operator",
    "l2v_norm_sq",
    "check_convolution_bound",
    "hs_norm_sq",
    "hs_norm_sq_basis",
    "unit_integrand_bound_scan",
    "weighted_bound_scan",
    "time_integrated_hs",
    "hs_stabilization",
]


class StabilizationError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Weight
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightFunction:
    """Even positive weight ``v``.

    ``exponential``: ``e^-|x|`` for ``|x| >= 1`` and ``e^-1 (3 - x^2) / 2``
    inside, which matches value and slope at ``|x| = 1`` and stays ``>= e^-1``.
    ``polynomial``: ``(1 + x^2)^-rho`` with ``rho > 1/2``.
    """

    kind: str = "exponential"
    rho: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "polynomial"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "polynomial" and not self.rho > 0.5:
            raise ValueError("polynomial weight needs rho > 1/2")
        if not self.scale > 0:
            raise ValueError("weight scale must be positive")

    @classmethod
    def parse(cls, text):
        """``"exp"`` or ``"poly:RHO"``."""
        if text in ("exp", "exponential"):
            return cls("exponential")
        if text.startswith("poly:"):
            return cls("polynomial", float(text[5:]))
        raise ValueError(f"weight must be 'exp' or 'poly:RHO', got {text!r}")

    def __call__(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        if self.kind == "polynomial":
            return self.scale * (1.0 + a * a) ** (-self.rho)
        inner = math.exp(-1.0) * (1.5 - 0.5 * a * a)
        return self.scale * np.where(a >= 1.0, np.exp(-a), inner)

    @property
    def total_mass(self):
        """``int v dx`` over the whole line."""
        if self.kind == "polynomial":
            r = self.rho
            return self.scale * math.sqrt(math.pi) * math.exp(math.lgamma(r - 0.5) - math.lgamma(r))
        return self.scale * 14.0 / (3.0 * math.e)

    def label(self):
        return "exp" if self.kind == "exponential" else f"poly:{self.rho:g}"


def _grid_weights(grid):
    return trapezoid_weights(grid.n_points, grid.spacing)


def l2v_norm_sq(f, v, grid):
    """Trapezoid approximation of ``int f^2 v dx`` (last axis is space).

    Each row is reduced on its own (no BLAS blocking), so a row's value does
    not depend on how many rows are passed together.
    """
    f = np.asarray(f, dtype=float)
    w = _grid_weights(grid) * v(grid.nodes)
    return np.sum(f * f * w, axis=-1)


def weight_constant(v, R, grid, shifts=None):
    """Smallest ``C`` with ``v(x - z) <= C e^R v(x)`` over grid ``x`` and shifts ``z``.

    Shifts default to the grid multiples within the kernel support
    (``|z| <= R + h/2``) together with a uniform subgrid of ``[-R, R]``.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    h = grid.spacing
    if shifts is None:
        r = int(math.ceil(R / h - 0.5))
        shifts = np.union1d(h * np.arange(-r, r + 1), np.linspace(-R, R, 2 * r + 1))
    x = grid.nodes
    vx = v(x)
    best = 0.0
    for lo in range(0, shifts.size, 256):
        z = shifts[lo:lo + 256]
        ratio = v(np.subtract.outer(x, z)) / vx[:, None]
        best = max(best, float(ratio.max()))
    return best / math.exp(R)


# --------------------------------------------------------------------------
# Truncated kernel and the operator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedKernel:
    """Kernel restricted to ``[-R, R]`` as cell masses at offsets ``m h``."""

    order: FractionalOrder
    t: float
    R: float
    grid: KernelGrid
    masses: np.ndarray = field(repr=False)
    form: str = "fundamental"

    @property
    def radius(self):
        return (self.masses.size - 1) // 2

    @property
    def truncated_mass(self):
        return float(np.sum(self.masses))

    @property
    def tail_mass(self):
        """Kernel mass outside ``[-R, R]``."""
        # the cells cover exactly [-R, R] and the kernel has unit mass
        return float(max(0.0, 1.0 - np.sum(self.masses)))

    def values(self):
        """Point values of the kernel on the grid, zero for ``|x| > R``."""
        ev = kernel(self.order, self.t, self.grid)
        vals = np.array(ev.symmetrized if self.form == "fundamental" or self.order.is_heat
                        else ev.values)
        vals[np.abs(self.grid.nodes) > self.R] = 0.0
        vals[(vals < 0) & (vals > -1e-9)] = 0.0
        return vals


def truncate_kernel(order, t, R, grid, form="fundamental"):
    """Cell masses of the kernel on ``[-R, R]`` (cells clipped at ``+-R``)."""
    order = order if isinstance(order, FractionalOrder) else FractionalOrder(order)
    if order.is_wave:
        raise ValueError("alpha = 2 has no kernel density")
    if not R > 0:
        raise ValueError("R must be positive")
    if R > grid.half_width * (1 + 1e-12):
        raise ValueError(f"R = {R} exceeds the grid half-width {grid.half_width}")
    if not t > 0:
        raise ValueError("t must be positive")
    h = grid.spacing
    r = int(math.ceil(R / h - 0.5 - 1e-12))
    masses = np.array(cell_masses(order, t, h, r, R, form))
    masses.setflags(write=False)
    return TruncatedKernel(order, float(t), float(R), grid, masses, form)


def apply_operator(kern, u, eta):
    """``K_R(t, u) eta = P^R(t) * (u eta)`` on the grid (zero outside it)."""
    u = np.asarray(u, dtype=float)
    eta = np.asarray(eta, dtype=float)
    n = kern.grid.n_points
    if u.shape[-1] != n or eta.shape[-1] != n:
        raise ValueError("u and eta must be sampled on the kernel grid")
    prod = u * eta
    r = kern.radius
    k = kern.masses if prod.ndim == 1 else kern.masses[None, :]
    full = signal.fftconvolve(prod, k, mode="full", axes=-1)
    return full[..., r:r + n]


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    weight_constant: float
    holds: bool


def check_convolution_bound(kern, psi, v):
    """Check ``|P^R(t) * psi|_{L^2_v} <= C_v e^R |psi|_{L^2_v}`` on the grid."""
    grid = kern.grid
    psi = np.asarray(psi, dtype=float)
    conv = apply_operator(kern, np.ones(grid.n_points), psi)
    lhs = math.sqrt(max(float(l2v_norm_sq(conv, v, grid)), 0.0))
    c_v = weight_constant(v, kern.R, grid)
    rhs = c_v * math.exp(kern.R) * math.sqrt(max(float(l2v_norm_sq(psi, v, grid)), 0.0))
    return BoundCheck(lhs, rhs, c_v, bool(lhs <= rhs * (1 + 1e-12)))


# --------------------------------------------------------------------------
# Hilbert-Schmidt norms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HsReport:
    hs_sq: float
    R: float
    t: float
    u_norm_sq: float
    bound_ratio: float
    warnings: tuple = ()

    def as_dict(self):
        return {"hs_sq": self.hs_sq, "R": self.R, "t": self.t, "u_norm_sq": self.u_norm_sq,
                "bound_ratio": self.bound_ratio, "warnings": list(self.warnings)}


def _spectrum_for(mu, grid):
    if isinstance(mu, DiscreteSpectrum):
        return mu, ()
    warnings = ()
    if not integrability_check(mu).holds:
        warnings = ("spectral measure fails the integrability condition; "
                    "the norm diverges under refinement",)
    return DiscreteSpectrum.from_measure(mu, grid), warnings


def _row_spectral_energy(masses, u, spectrum, rows_per_block=None):
    """``S_i = sum_k w_k |sum_j k_{i-j} u_j exp(-i xi_k x_j)|^2`` for every row ``i``."""
    grid = spectrum.grid
    n = grid.n_points
    r = (masses.size - 1) // 2
    n_fft = 2 * (n - 1)
    m = spectrum.n_lattice
    w_lat = spectrum.weights[:m]
    atom_xi = spectrum.frequencies[m:]
    atom_w = spectrum.weights[m:]
    atom_phase = np.exp(-1j * np.multiply.outer(grid.nodes, atom_xi)) if atom_xi.size else None
    if rows_per_block is None:
        rows_per_block = max(1, 2_000_000 // n_fft)
    out = np.empty(n)
    j = np.arange(n)
    for lo in range(0, n, rows_per_block):
        i = np.arange(lo, min(lo + rows_per_block, n))
        off = i[:, None] - j[None, :] + r
        inside = (off >= 0) & (off <= 2 * r)
        b = np.where(inside, masses[np.clip(off, 0, 2 * r)], 0.0) * u[None, :]
        s = np.zeros(i.size)
        if m:
            f = np.fft.fft(b, n=n_fft, axis=1)[:, :m]
            s += (f.real ** 2 + f.imag ** 2) @ w_lat
        if atom_phase is not None:
            g = b @ atom_phase
            s += (g.real ** 2 + g.imag ** 2) @ atom_w
        out[i] = s
    return out


def _hs_core(kern, u, spectrum, v):
    grid = kern.grid
    rows = _row_spectral_energy(kern.masses, u, spectrum)
    return float(np.sum(_grid_weights(grid) * v(grid.nodes) * rows))


def hs_norm_sq(kern, u, mu, v):
    """Squared Hilbert-Schmidt norm of ``K_R(t, u)`` from the double integral.

    ``mu`` may be a :class:`SpectralMeasure` (discretised on the kernel grid)
    or an already discretised :class:`DiscreteSpectrum`.
    """
    grid = kern.grid
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_points,):
        raise ValueError("u must be sampled on the kernel grid")
    spectrum, warnings = _spectrum_for(mu, grid)
    hs = _hs_core(kern, u, spectrum, v)
    u2 = float(l2v_norm_sq(u, v, grid))
    ratio = hs / (math.exp(kern.R) * u2) if u2 > 0 else math.nan
    return HsReport(hs, kern.R, kern.t, u2, ratio, warnings)


def hs_norm_sq_basis(kern, u, mu, v, block=256):
    """``sum_k |K_R(t, u) f_k|^2_{L^2_v}`` over the orthonormal basis of the noise space."""
    grid = kern.grid
    u = np.asarray(u, dtype=float)
    spectrum, _ = _spectrum_for(mu, grid)
    fields = basis_fields(spectrum, grid.nodes)
    total = 0.0
    for lo in range(0, fields.shape[0], block):
        ke = apply_operator(kern, u[None, :], fields[lo:lo + block])
        total += float(np.sum(l2v_norm_sq(ke, v, grid)))
    return total


# --------------------------------------------------------------------------
# Bounds
# --------------------------------------------------------------------------

DEFAULT_TIMES = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class BoundScan:
    times: tuple
    lhs: tuple
    rhs_factor: float
    ratios: tuple
    variation: float
    bounded: bool

    def as_dict(self):
        return {"times": list(self.times), "lhs": list(self.lhs), "rhs_factor": self.rhs_factor,
                "ratios": list(self.ratios), "variation": self.variation, "bounded": self.bounded}


def unit_integrand_bound_scan(order, R, mu, v, grid, times=DEFAULT_TIMES, form="fundamental",
                              max_variation=10.0):
    """Ratio of ``|K_R(t, 1)|_HS^2`` to ``(int v)(int mu/(1 + y^2))`` over a time scan.

    The ratio is the measured constant of the unit-integrand estimate;
    ``bounded`` asks that it vary by less than ``max_variation`` over the scan.
    """
    integ = integrability_check(mu)
    rhs = v.total_mass * integ.value
    spectrum, _ = _spectrum_for(mu, grid)
    one = np.ones(grid.n_points)
    lhs = []
    for t in times:
        kern = truncate_kernel(order, t, R, grid, form)
        lhs.append(_hs_core(kern, one, spectrum, v))
    ratios = [x / rhs for x in lhs]
    variation = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    return BoundScan(tuple(times), tuple(lhs), rhs, tuple(ratios), variation,
                     bool(integ.holds and variation < max_variation))


@dataclass(frozen=True)
class WeightedScan:
    reports: tuple
    max_ratio: float
    comparison_lhs: tuple
    comparison_rhs: tuple
    comparison_constant: tuple
    comparison_holds: bool

    def as_dict(self):
        return {"reports": [r.as_dict() for r in self.reports], "max_ratio": self.max_ratio,
                "comparison_lhs": list(self.comparison_lhs), "comparison_rhs": list(self.comparison_rhs),
                "comparison_constant": list(self.comparison_constant),
                "comparison_holds": self.comparison_holds}


def weighted_bound_scan(order, t, radii, u, mu, v, grid, form="fundamental"):
    """``hs_sq / (e^R |u|^2_{L^2_v})`` for each ``R`` and the comparison with ``u = 1``.

    For ``u >= 1`` the comparison checks
    ``|K(t,1)|^2 <= |K(t,u)|^2 + C e^R |u|^2`` with ``C`` the measured ratio
    of the ``u = 1`` operator at the same ``R``.  When ``u`` is not ``>= 1``
    the comparison is skipped and reported as holding vacuously.
    """
    u = np.asarray(u, dtype=float)
    spectrum, warnings = _spectrum_for(mu, grid)
    one = np.ones(grid.n_points)
    u2 = float(l2v_norm_sq(u, v, grid))
    one2 = float(l2v_norm_sq(one, v, grid))
    reports, c_lhs, c_rhs, c_const = [], [], [], []
    geq_one = bool(np.all(u >= 1.0))
    holds = True
    for R in radii:
        kern = truncate_kernel(order, t, R, grid, form)
        hs_u = _hs_core(kern, u, spectrum, v)
        reports.append(HsReport(hs_u, float(R), float(t), u2,
                                hs_u / (math.exp(R) * u2) if u2 > 0 else math.nan, warnings))
        if geq_one:
            hs_1 = _hs_core(kern, one, spectrum, v)
            const = hs_1 / (math.exp(R) * one2)
            rhs = hs_u + const * math.exp(R) * u2
            c_lhs.append(hs_1)
            c_rhs.append(rhs)
            c_const.append(const)
            holds = holds and hs_1 <= rhs * (1 + 1e-12)
    ratios = [r.bound_ratio for r in reports if not math.isnan(r.bound_ratio)]
    return WeightedScan(tuple(reports), max(ratios) if ratios else math.nan,
                        tuple(c_lhs), tuple(c_rhs), tuple(c_const), bool(holds))


# --------------------------------------------------------------------------
# Time integral
# --------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)


@dataclass(frozen=True)
class TimeIntegral:
    value: float
    coarse: float
    rel_change: float
    converged: bool
    n_steps: int

    def as_dict(self):
        return {"value": self.value, "coarse": self.coarse, "rel_change": self.rel_change,
                "converged": self.converged, "n_steps": self.n_steps}


def _graded_integral(func, t, n_steps, power=2.0):
    s = t * (np.arange(n_steps + 1) / n_steps) ** power
    total = 0.0
    for a, b in zip(s[:-1], s[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for x, w in zip(_GL_NODES, _GL_WEIGHTS):
            total += half * w * func(mid + half * x)
    return total


def time_integrated_hs(order, t, R, mu, v, grid, n_steps=32, u=None, form="fundamental",
                       rel_tol=0.01):
    """``int_0^t |K_R(s, u)|_HS^2 ds`` on the mesh ``s_j = t (j/n)^2``.

    Three-point Gauss-Legendre on every panel; the value at ``2 n_steps``
    is returned with its relative change from ``n_steps``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    u = np.ones(grid.n_points) if u is None else np.asarray(u, dtype=float)
    spectrum, _ = _spectrum_for(mu, grid)

    def integrand(s):
        return _hs_core(truncate_kernel(order, s, R, grid, form), u, spectrum, v)

    coarse = _graded_integral(integrand, t, n_steps)
    fine = _graded_integral(integrand, t, 2 * n_steps)
    scale = max(abs(fine), abs(coarse))
    rel = abs(fine - coarse) / scale if scale > 0 else 0.0
    return TimeIntegral(fine, coarse, rel, bool(rel < rel_tol), 2 * n_steps)


# --------------------------------------------------------------------------
# Stabilisation in R
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Stabilization:
    reports: tuple
    R_tilde: float
    M_tilde: float
    tail_mass: float
    increment_bound: float
    within_bound: bool

    def as_dict(self):
        return {"reports": [r.as_dict() for r in self.reports], "R_tilde": self.R_tilde,
                "M_tilde": self.M_tilde, "tail_mass": self.tail_mass,
                "increment_bound": self.increment_bound, "within_bound": self.within_bound}


def _kernel_tail_mass(order, R, t):
    if order.is_heat:
        # (1/alpha) P(t, |x|) is N(0, 2t)
        return float(special.erfc(R / (2 * math.sqrt(t))))
    return fit_tail(order).tail_mass(R, t)


def hs_stabilization(order, t, u, mu, v, grid, radii, tol=1e-6, form="fundamental"):
    """Smallest scheduled ``R~`` after which ``hs_sq(R)`` moves by less than ``tol`` (relative).

    ``M_tilde`` is the largest measured increment beyond ``R~``.  It is
    compared with ``2 M_u M_eta tail(R~) sqrt(int v) max_R |K_R|_HS`` where
    ``M_u = max|u|``, ``M_eta^2 = sup_x sum_k f_k(x)^2`` (the total discrete
    spectral mass) and ``tail`` is the kernel mass outside ``[-R~, R~]`` from
    the fitted light-tail asymptote; a round-off allowance of
    ``1e-13 max hs_sq`` is added.
    """
    order = order if isinstance(order, FractionalOrder) else FractionalOrder(order)
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii[:-1], radii[1:])) or not radii:
        raise ValueError("R schedule must be non-empty and increasing")
    u = np.asarray(u, dtype=float)
    spectrum, warnings = _spectrum_for(mu, grid)
    u2 = float(l2v_norm_sq(u, v, grid))
    reports = []
    for R in radii:
        kern = truncate_kernel(order, t, R, grid, form)
        hs = _hs_core(kern, u, spectrum, v)
        reports.append(HsReport(hs, R, float(t), u2,
                                hs / (math.exp(R) * u2) if u2 > 0 else math.nan, warnings))
    hs_vals = np.array([r.hs_sq for r in reports])
    scale = max(float(np.max(np.abs(hs_vals))), 1e-300)
    r_tilde = None
    # the last entry is stable vacuously; it only counts for a singleton schedule
    candidates = range(len(radii) - 1) if len(radii) > 1 else range(1)
    for k in candidates:
        if np.all(np.abs(hs_vals[k:] - hs_vals[k]) < tol * scale):
            r_tilde = k
            break
    if r_tilde is None:
        raise StabilizationError("no stabilisation within the schedule; extend it to larger R")
    m_tilde = float(np.max(np.abs(hs_vals[r_tilde:] - hs_vals[r_tilde])))
    tail = _kernel_tail_mass(order, radii[r_tilde], t)
    v_mass = float(np.sum(_grid_weights(grid) * v(grid.nodes)))
    bound = (2.0 * float(np.max(np.abs(u))) * tail * math.sqrt(spectrum.total_weight * v_mass)
             * math.sqrt(scale) + 1e-13 * scale)
    return Stabilization(tuple(reports), radii[r_tilde], m_tilde, tail, bound,
                         bool(m_tilde <= 1.1 * bound))
