"""Fundamental solution of the heat/wave interpolating Volterra equation.

For ``1 <= alpha <= 2`` the equation

    u(t, x) = g(x) + 1/Gamma(alpha) int_0^t (t - s)**(alpha - 1) u_xx(s, x) ds

has fundamental solution ``(1/alpha) P(t, |x|)`` where ``P(t, .)`` is the
density with characteristic function

    q(t, xi) = exp(-t |xi|**delta * exp(-i pi gamma sgn(xi) / 2)),
    delta = 2 / alpha,  gamma = 2 - 2 / alpha.

``P`` is a totally skewed stable law of index ``delta``: the positive side
has a super-exponentially light tail and carries mass ``alpha / 2``, the
negative side has a power tail of order ``|x|**(-1 - delta)``.

Fourier convention (project-wide): ``F[f](xi) = int f(x) exp(-i x xi) dx`` and
``F^-1[g](x) = (2 pi)^-1 int g(xi) exp(+i x xi) dxi``.  With it the density is
``P(x) = F^-1[q](-x)`` and ``F^-1[exp(b_alpha)] = P``.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, signal, special

from .quadrature import (
    gauss_kronrod,
    graded_breakpoints,
    half_line_integral,
    symmetric_grid_integral,
)

__all__ = [
    "FractionalOrder",
    "KernelGrid",
    "KernelEvaluation",
    "KernelReport",
    "TailAsymptote",
    "ResolutionError",
    "UnsupportedOrderError",
    "TOL_NEG",
    "density",
    "reduced_kernel",
    "kernel",
    "kernel_direct",
    "positive_cdf",
    "negative_cdf",
    "window_mass",
    "symmetric_cell_masses",
    "cell_masses",
    "KERNEL_FORMS",
    "reflected_part_transform",
    "symmetrized_via_transform",
    "exponential_part_inverse",
    "kernel_properties",
    "estimate_peak_constant",
    "fit_tail",
    "solve_deterministic",
]

TOL_NEG = 1e-9
# Values of P below this are not resolved by double precision quadrature.
RESOLUTION_FLOOR = 1e-15
_LOG_CUTOFF = 37.0  # exp(-37) ~ 1e-16
_MONOTONE_SLACK = 1e-13


class UnsupportedOrderError(ValueError):
    pass


class ResolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class FractionalOrder:
    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (1.0 <= a <= 2.0) or not math.isfinite(a):
            raise UnsupportedOrderError(f"alpha must lie in [1, 2], got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def delta(self):
        return 2.0 / self.alpha

    @property
    def gamma(self):
        return 2.0 - 2.0 / self.alpha

    @property
    def envelope_rate(self):
        """``cos(pi gamma / 2)``: decay rate of ``|q(1, xi)|``."""
        return math.cos(math.pi * self.gamma / 2)

    @property
    def phase_rate(self):
        return math.sin(math.pi * self.gamma / 2)

    @property
    def rotation(self):
        # Along xi = r exp(i*rotation) the integrand of the density becomes
        # exp(-t r**delta) times a damped exponential.
        return math.pi * (self.alpha - 1.0) / 2

    @property
    def is_heat(self):
        return self.alpha == 1.0

    @property
    def is_wave(self):
        return self.alpha == 2.0


@dataclass(frozen=True)
class KernelGrid:
    half_width: float
    n_points: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if int(self.n_points) < 2:
            raise ValueError("n_points must be at least 2")
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def spacing(self):
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def nodes(self):
        x = np.linspace(-self.half_width, self.half_width, self.n_points)
        # exact symmetry, exact zero at the centre
        return 0.5 * (x - x[::-1])

    @property
    def has_origin(self):
        return self.n_points % 2 == 1

    @classmethod
    def from_spacing(cls, half_width, spacing):
        n = 2 * int(round(half_width / spacing)) + 1
        return cls(spacing * (n - 1) / 2, n)


def _as_order(order):
    return order if isinstance(order, FractionalOrder) else FractionalOrder(order)


def _check_time(t):
    if not t > 0:
        raise ValueError(f"time must be positive, got {t!r}")


# --------------------------------------------------------------------------
# Fourier quadrature for P(t, x)
# --------------------------------------------------------------------------

def _heat(t, x):
    return np.exp(-x * x / (4 * t)) / np.sqrt(4 * np.pi * t)


def _frequency_cutoff(order, t):
    return (_LOG_CUTOFF / (t * order.envelope_rate)) ** (1.0 / order.delta)


def _direct_density(order, t, x, atol):
    """(1/pi) int_0^Xi exp(-t c xi^d) cos(t s xi^d - x xi) dxi, any real x."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    d, c, s = order.delta, order.envelope_rate, order.phase_rate
    cutoff = _frequency_cutoff(order, t)
    omega = np.max(np.abs(x)) + t * s * d * cutoff ** (d - 1.0) + 1.0

    def f(xi):
        xd = xi ** d
        return np.exp(-t * c * xd) * np.cos(t * s * xd - np.multiply.outer(x, xi))

    res = gauss_kronrod(f, graded_breakpoints(cutoff, 1.0 / omega), atol=atol * np.pi,
                        n_components=x.size)
    return res.value / np.pi


def _rotated_density(order, t, x, atol):
    """Density for x <= 0 along the rotated contour xi = r exp(i theta).

    (1/pi) int_0^inf exp(-t r^d - y r sin th) cos(th + y r cos th) dr, y = -x.
    """
    y = -np.asarray(x, dtype=float)
    if y.size == 0:
        return y.copy()
    d, th = order.delta, order.rotation
    sin_t, cos_t = math.sin(th), math.cos(th)
    r_max = (_LOG_CUTOFF / t) ** (1.0 / d)
    omega = np.max(y) + 1.0

    def f(r):
        yr = np.multiply.outer(y, r)
        return np.exp(-t * r ** d - yr * sin_t) * np.cos(th + yr * cos_t)

    res = gauss_kronrod(f, graded_breakpoints(r_max, 1.0 / omega), atol=atol * np.pi,
                        n_components=y.size)
    return res.value / np.pi


@functools.lru_cache(maxsize=64)
def _light_tail_cap(alpha):
    """Reduced abscissa beyond which P(1, x) < RESOLUTION_FLOOR."""
    order = FractionalOrder(alpha)
    step = 0.02
    upper = 4.0
    while True:
        xs = np.arange(0.0, upper + step / 2, step)
        p = _direct_density(order, 1.0, xs, atol=1e-15)
        peak = int(np.argmax(p))
        below = np.nonzero(p[peak:] < RESOLUTION_FLOOR)[0]
        if below.size:
            return float(xs[peak + below[0]])
        if upper > 200:
            raise ResolutionError("light tail not resolved below 200")
        upper *= 2


def light_tail_cap(order, t=1.0):
    order = _as_order(order)
    if order.is_heat:
        # Gaussian N(0, 2t): exp(-x^2/4t) < 1e-16
        return 2.0 * math.sqrt(_LOG_CUTOFF * t)
    return _light_tail_cap(order.alpha) * t ** (order.alpha / 2)


def density(order, t, x, atol=1e-14, method="auto"):
    """``P(t, x)`` by quadrature of the Fourier integral at time ``t``.

    No self-similarity is used.  Positive abscissae beyond the light-tail
    cap (where ``P < 1e-15``) are returned as exactly zero.  At ``alpha = 1``
    the Gaussian closed form is used unless ``method="quadrature"``.
    """
    order = _as_order(order)
    _check_time(t)
    x = np.asarray(x, dtype=float)
    if method not in ("auto", "quadrature"):
        raise ValueError("method must be 'auto' or 'quadrature'")
    if order.is_wave:
        raise UnsupportedOrderError("alpha = 2 has no density; use solve_deterministic")
    if order.is_heat:
        if method == "quadrature":
            return _direct_density(order, t, x.ravel(), atol).reshape(x.shape)
        return _heat(t, x)
    out = np.zeros_like(x)
    flat = x.ravel()
    res = out.ravel()
    neg = flat <= 0
    cap = light_tail_cap(order, t)
    pos = (flat > 0) & (flat <= cap)
    if neg.any():
        res[neg] = _rotated_density(order, t, flat[neg], atol)
    if pos.any():
        res[pos] = _direct_density(order, t, flat[pos], atol)
    return res.reshape(x.shape)


def _positive_cdf_direct(order, t, y, atol):
    """int_0^y P(t, s) ds for y >= 0 via the characteristic function."""
    y = np.asarray(y, dtype=float)
    d, c, s = order.delta, order.envelope_rate, order.phase_rate
    cutoff = _frequency_cutoff(order, t)
    omega = np.max(y) + t * s * d * cutoff ** (d - 1.0) + 1.0

    def f(xi):
        xd = xi ** d
        env = np.exp(-t * c * xd)
        ph = t * s * xd
        yx = np.multiply.outer(y, xi)
        return env * (np.cos(ph) * np.sin(yx) + np.sin(ph) * (1.0 - np.cos(yx))) / xi

    res = gauss_kronrod(f, graded_breakpoints(cutoff, 1.0 / omega), atol=atol * np.pi,
                        n_components=y.size)
    return res.value / np.pi


def positive_cdf(order, t, y, atol=1e-14):
    """``int_0^y P(t, s) ds`` for ``y >= 0``; tends to ``alpha / 2``."""
    order = _as_order(order)
    _check_time(t)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("positive_cdf needs y >= 0")
    if order.is_heat:
        return 0.5 * special.erf(y / (2 * np.sqrt(t)))
    cap = light_tail_cap(order, t)
    yc = np.minimum(y, cap)
    return _positive_cdf_direct(order, t, yc.ravel(), atol).reshape(y.shape)


def negative_cdf(order, t, y, atol=1e-14):
    """``int_{-y}^0 P(t, s) ds`` for ``y >= 0``; tends to ``1 - alpha / 2``.

    Uses (1/pi) int_0^inf exp(-t r^d) exp(-y r sin th) sin(y r cos th) / r dr.
    """
    order = _as_order(order)
    _check_time(t)
    y = np.asarray(y, dtype=float)
    if order.is_heat:
        return 0.5 * special.erf(y / (2 * np.sqrt(t)))
    d, th = order.delta, order.rotation
    sin_t, cos_t = math.sin(th), math.cos(th)
    flat = y.ravel()
    r_max = (_LOG_CUTOFF / t) ** (1.0 / d)

    def f(r):
        yr = np.multiply.outer(flat, r)
        return np.exp(-t * r ** d - yr * sin_t) * np.sin(yr * cos_t) / r

    omega = np.max(flat) + 1.0
    res = gauss_kronrod(f, graded_breakpoints(r_max, 1.0 / omega), atol=atol * np.pi,
                        n_components=flat.size)
    return (res.value / np.pi).reshape(y.shape)


def window_mass(order, t, half_width):
    """Exact mass of ``P(t, .)`` on ``[-L, L]`` from the characteristic function."""
    order = _as_order(order)
    return float(positive_cdf(order, t, np.array([half_width]))[0]
                 + negative_cdf(order, t, np.array([half_width]))[0])


# --------------------------------------------------------------------------
# Kernel evaluations on grids
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelEvaluation:
    order: FractionalOrder
    t: float
    grid: KernelGrid
    values: np.ndarray = field(repr=False)
    symmetrized: np.ndarray = field(repr=False)
    resolved_extent: float = np.inf

    def __post_init__(self):
        self.values.setflags(write=False)
        self.symmetrized.setflags(write=False)

    @property
    def mass(self):
        """Mass of the fundamental solution ``(1/alpha) P(t, |x|)`` on the grid.

        Each half-line uses an endpoint-corrected trapezoid rule because the
        symmetrised profile has a derivative jump at the origin.
        """
        return symmetric_grid_integral(self.symmetrized, self.grid.spacing)

    @property
    def window_mass(self):
        """Quadrature of ``P(t, x)`` itself over ``[-L, L]``."""
        return half_line_integral(self.values, self.grid.spacing)

    @property
    def negativity_count(self):
        return int(np.count_nonzero(self.values < -TOL_NEG)
                   + np.count_nonzero(self.symmetrized < -TOL_NEG))

    def clamped_symmetrized(self):
        s = np.array(self.symmetrized)
        s[(s < 0) & (s > -TOL_NEG)] = 0.0
        return s


def _evaluation(order, t, grid, values, symmetrized):
    extent = np.inf if order.is_heat else light_tail_cap(order, t)
    return KernelEvaluation(order, float(t), grid, values, symmetrized, extent)


def _symmetrize(order, grid, reduced_positive):
    """(1/alpha) P(|x|) from values of P at |x| via a callable."""
    x = grid.nodes
    return reduced_positive(np.abs(x)) / order.alpha


def reduced_kernel(order, grid):
    """Evaluate ``P(1, x)`` and ``(1/alpha) P(1, |x|)`` on ``grid``."""
    order = _as_order(order)
    if order.is_wave:
        raise UnsupportedOrderError("alpha = 2 is handled by solve_deterministic")
    x = grid.nodes
    values = density(order, 1.0, x)
    # P(|x|) reuses the positive half of the same evaluation when possible
    if grid.has_origin:
        c = grid.n_points // 2
        half = values[c:]
        sym = np.concatenate([half[:0:-1], half]) / order.alpha
    else:
        sym = density(order, 1.0, np.abs(x)) / order.alpha
    return _evaluation(order, 1.0, grid, values, sym)


def kernel(order, t, grid):
    """``P(t, x) = t^(-alpha/2) P(1, x t^(-alpha/2))`` on ``grid``.

    Self-similarity is applied exactly; the reduced density is evaluated by
    quadrature at the scaled abscissae.
    """
    order = _as_order(order)
    _check_time(t)
    if order.is_wave:
        raise UnsupportedOrderError("alpha = 2 is handled by solve_deterministic")
    x = grid.nodes
    scale = t ** (-order.alpha / 2)
    values = scale * density(order, 1.0, x * scale)
    if grid.has_origin:
        c = grid.n_points // 2
        half = values[c:]
        sym = np.concatenate([half[:0:-1], half]) / order.alpha
    else:
        sym = scale * density(order, 1.0, np.abs(x) * scale) / order.alpha
    return _evaluation(order, t, grid, values, sym)


def kernel_direct(order, t, grid):
    """Like :func:`kernel` but integrating ``q(t, .)`` directly, no scaling."""
    order = _as_order(order)
    _check_time(t)
    x = grid.nodes
    values = density(order, t, x)
    sym = density(order, t, np.abs(x)) / order.alpha
    return _evaluation(order, t, grid, values, sym)


@functools.lru_cache(maxsize=64)
def _cdf_table(alpha):
    """Hermite interpolant of M(y) = int_0^y P(1, s) ds on [0, cap]."""
    order = FractionalOrder(alpha)
    cap = light_tail_cap(order)
    y = np.linspace(0.0, cap, 4097)
    p = density(order, 1.0, y)
    m = _positive_cdf_direct(order, 1.0, y, atol=1e-15)
    return cap, interpolate.CubicHermiteSpline(y, m, p)


def _reduced_positive_cdf(order, y):
    """M(y) at reduced abscissae y >= 0, saturating at alpha/2."""
    if order.is_heat:
        return 0.5 * special.erf(y / 2.0)
    cap, spline = _cdf_table(order.alpha)
    out = np.full(y.shape, order.alpha / 2)
    inside = y < cap
    out[inside] = spline(y[inside])
    return out


def symmetric_cell_masses(order, t, spacing, radius, truncation=np.inf):
    """Mass of ``(1/alpha) P(t, |y|)`` in cells ``[(m - 1/2)h, (m + 1/2)h]``.

    Cells are indexed by ``m = -radius .. radius`` and intersected with
    ``[-truncation, truncation]``.  The result discretises the kernel as a
    measure, so it stays well defined when ``t`` is small enough that the
    kernel is narrower than one cell.
    """
    order = _as_order(order)
    _check_time(t)
    m = np.arange(-radius, radius + 1)
    lo = np.maximum((m - 0.5) * spacing, -truncation)
    hi = np.minimum((m + 0.5) * spacing, truncation)
    lo = np.minimum(lo, hi)
    scale = t ** (-order.alpha / 2)

    def signed_cdf(y):
        return np.sign(y) * _reduced_positive_cdf(order, np.abs(y) * scale)

    masses = (signed_cdf(hi) - signed_cdf(lo)) / order.alpha
    masses[(masses < 0) & (masses > -TOL_NEG)] = 0.0
    return masses


KERNEL_FORMS = ("fundamental", "density")


@functools.lru_cache(maxsize=256)
def _density_cell_masses(alpha, t, spacing, radius, truncation):
    order = FractionalOrder(alpha)
    m = np.arange(-radius, radius + 1)
    lo = np.maximum((m - 0.5) * spacing, -truncation)
    hi = np.minimum((m + 0.5) * spacing, truncation)
    lo = np.minimum(lo, hi)
    edges = np.union1d(lo, hi)
    scale = t ** (-order.alpha / 2)
    cdf = np.empty(edges.shape)
    pos = edges >= 0
    cdf[pos] = _reduced_positive_cdf(order, edges[pos] * scale)
    if np.any(~pos):
        cdf[~pos] = -negative_cdf(order, t, -edges[~pos])
    masses = np.interp(hi, edges, cdf) - np.interp(lo, edges, cdf)
    masses[(masses < 0) & (masses > -TOL_NEG)] = 0.0
    masses.setflags(write=False)
    return masses


def cell_masses(order, t, spacing, radius, truncation=np.inf, form="fundamental"):
    """Cell masses of the convolution kernel in the chosen normalisation.

    ``form="fundamental"`` (default) is ``(1/alpha) P(t, |y|)``, the fundamental
    solution of the deterministic problem; ``form="density"`` is ``P(t, y)``
    itself, with its heavy tail on the negative side.
    """
    order = _as_order(order)
    if form == "fundamental" or order.is_heat:
        return symmetric_cell_masses(order, t, spacing, radius, truncation)
    if form != "density":
        raise ValueError(f"kernel form must be one of {KERNEL_FORMS}, got {form!r}")
    return _density_cell_masses(order.alpha, float(t), float(spacing), int(radius), float(truncation))


# --------------------------------------------------------------------------
# The symmetrised kernel through its Fourier transform
# --------------------------------------------------------------------------

def _f_integrand_pieces(alpha, x):
    # integrand after t = s**(1/alpha): x^2 exp(-s^(1/alpha)) / |s + x^2 e^{i alpha pi}|^2
    x2 = x * x
    ca, sa = math.cos(alpha * math.pi), math.sin(alpha * math.pi)

    def g(s):
        return x2 * math.exp(-s ** (1.0 / alpha)) / (s * s + 2 * x2 * s * ca + x2 * x2)

    centre = max(0.0, -x2 * ca)
    width = x2 * abs(sa)
    decay = _LOG_CUTOFF ** alpha
    pts = sorted({0.0, centre, centre + width, centre + 10 * width, decay})
    pts = [p for p in pts if p <= max(decay, centre + 10 * width)]
    return g, pts


def reflected_part_transform(order, xi):
    """The non-exponential part of the transform of the symmetrised kernel.

    Evaluates

        sin(alpha pi)/pi int_0^inf xi^2 t^(alpha-1) e^(-t)
            / (t^(2 alpha) + 2 xi^2 t^alpha cos(alpha pi) + xi^4) dt

    (``1 - 2/alpha`` at ``xi = 0``), which is the Fourier transform of
    ``-(1/alpha) P(-|x|)``.  The substitution ``t = s**(1/alpha)`` removes the
    ``t**(alpha - 1)`` factor.
    """
    order = _as_order(order)
    a = order.alpha
    if not 1.0 < a < 2.0:
        raise UnsupportedOrderError("needs 1 < alpha < 2")
    xi = np.abs(np.asarray(xi, dtype=float))
    out = np.empty(xi.shape)
    pref = math.sin(a * math.pi) / (a * math.pi)
    for idx, x in np.ndenumerate(xi):
        if x == 0.0:
            out[idx] = 1.0 - 2.0 / a
            continue
        g, pts = _f_integrand_pieces(a, float(x))
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            val, err = integrate.quad(g, lo, hi, epsabs=1e-15, epsrel=1e-12, limit=200)
            total += val
        val, err = integrate.quad(g, pts[-1], np.inf, epsabs=1e-15, epsrel=1e-12, limit=200)
        total += val
        out[idx] = pref * total
    return out


def _exponential_part(order, xi):
    """exp(a(xi)) + exp(b(xi)) = 2 Re exp(|xi|^d e^{i pi/alpha}), real and even."""
    xd = np.abs(xi) ** order.delta
    ang = math.pi / order.alpha
    return 2.0 * np.exp(xd * math.cos(ang)) * np.cos(xd * math.sin(ang))


def _transform_cutoff(order):
    # exp(|xi|^d cos(pi/alpha)) < 1e-16
    return (_LOG_CUTOFF / abs(math.cos(math.pi / order.alpha))) ** (1.0 / order.delta)


def symmetrized_via_transform(order, x, spacing=0.05, cutoff=None):
    """``(1/alpha) P(1, |x|)`` as the inverse transform of its closed form.

    The transform ``(1/alpha)(exp a + exp b) + f`` is sampled on a uniform
    frequency grid and inverted by a trapezoid cosine sum.  Beyond the cutoff
    only ``f`` survives; its leading term ``sin(alpha pi) Gamma(alpha) /
    (pi xi^2)`` is inverted analytically through the sine integral.
    """
    order = _as_order(order)
    if not 1.0 < order.alpha < 2.0:
        raise UnsupportedOrderError("needs 1 < alpha < 2")
    x = np.abs(np.asarray(x, dtype=float))
    period = 2 * math.pi / spacing
    if np.max(x) + light_tail_cap(order) >= period - np.max(x):
        raise ValueError("frequency spacing too coarse for the requested spatial extent")
    if cutoff is None:
        cutoff = max(_transform_cutoff(order), 100.0)
    n = int(math.ceil(cutoff / spacing))
    cutoff = n * spacing
    xi = spacing * np.arange(n + 1)
    values = _exponential_part(order, xi) / order.alpha + reflected_part_transform(order, xi)
    w = np.full(n + 1, spacing)
    w[0] = w[-1] = 0.5 * spacing
    out = np.empty(x.shape)
    flat = x.ravel()
    block = max(1, 4_000_000 // xi.size)
    res = out.ravel()
    for i in range(0, flat.size, block):
        res[i:i + block] = np.cos(np.multiply.outer(flat[i:i + block], xi)) @ (w * values)
    coeff = math.sin(order.alpha * math.pi) * math.gamma(order.alpha) / math.pi
    si, _ = special.sici(flat * cutoff)
    tail = coeff * (np.cos(flat * cutoff) / cutoff - flat * (math.pi / 2 - si))
    return ((res + tail) / math.pi).reshape(x.shape)


def exponential_part_inverse(order, x, branch="b", spacing=0.02, cutoff=None):
    """Inverse transform of ``exp(b_alpha)`` (gives ``P(x)``) or ``exp(a_alpha)``."""
    order = _as_order(order)
    if not 1.0 < order.alpha < 2.0:
        raise UnsupportedOrderError("needs 1 < alpha < 2")
    x = np.asarray(x, dtype=float)
    if cutoff is None:
        cutoff = _transform_cutoff(order)
    n = int(math.ceil(cutoff / spacing))
    xi = spacing * np.arange(n + 1)
    xd = xi ** order.delta
    ang = math.pi / order.alpha
    # exp(b(xi)) for xi >= 0; the xi < 0 half is its conjugate
    sign = -1.0 if branch == "b" else 1.0
    if branch not in ("a", "b"):
        raise ValueError("branch must be 'a' or 'b'")
    env = np.exp(xd * math.cos(ang))
    ph = sign * xd * math.sin(ang)
    w = np.full(n + 1, spacing)
    w[0] = w[-1] = 0.5 * spacing
    arg = np.multiply.outer(x.ravel(), xi)
    # (1/pi) int_0^inf Re[e^{i ph} e^{i x xi}] dxi
    res = (np.cos(ph + arg) * (w * env)).sum(axis=1) / math.pi
    return res.reshape(x.shape)


# --------------------------------------------------------------------------
# Shape properties
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelReport:
    alpha: float
    t: float
    mass: float
    min_location: float
    max_locations: tuple
    negativity_count: int
    vanishing_count: int
    monotone: bool
    resolved_extent: float

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "t": self.t,
            "mass": self.mass,
            "min_location": self.min_location,
            "max_locations": list(self.max_locations),
            "negativity_count": self.negativity_count,
            "vanishing_count": self.vanishing_count,
            "monotone": self.monotone,
            "resolved_extent": self.resolved_extent,
        }


def kernel_properties(order, t, grid, evaluation=None):
    """Locate the extrema of ``(1/alpha) P(t, |x|)`` and check its shape.

    Positivity and monotonicity are checked on nodes with
    ``|x| <= resolved_extent``; beyond it the true values are below what
    double precision quadrature can represent.
    """
    order = _as_order(order)
    if not 1.0 < order.alpha < 2.0:
        raise UnsupportedOrderError("extrema law needs 1 < alpha < 2")
    if not grid.has_origin:
        raise ValueError("grid must contain the origin")
    ev = evaluation if evaluation is not None else kernel(order, t, grid)
    x = grid.nodes
    h = grid.spacing
    sym = ev.symmetrized
    c = grid.n_points // 2
    pos = sym[c:]
    k = int(np.argmax(pos))
    x_star = float(x[c + k])
    if k == 0 or x_star < 20 * h:
        raise ResolutionError(f"maximum at {x_star:.4g} not resolved by spacing {h:.3g}")
    if k == pos.size - 1:
        raise ResolutionError("maximum at the grid edge; enlarge the grid")
    inner = sym[c - k:c + k + 1]
    min_loc = float(x[c - k + int(np.argmin(inner))])
    resolved = np.abs(x) <= ev.resolved_extent
    vanishing = int(np.count_nonzero(resolved & (sym <= 0.0)))
    neg = int(np.count_nonzero(sym < -TOL_NEG))
    # monotone increasing on [0, x*], non-increasing on [x*, extent]
    rising = np.all(np.diff(pos[:k + 1]) > 0)
    tail = pos[k:][np.abs(x[c + k:]) <= ev.resolved_extent]
    # non-increasing up to quadrature noise
    falling = np.all(np.diff(tail) <= _MONOTONE_SLACK)
    symmetric = np.array_equal(sym, sym[::-1])
    return KernelReport(
        alpha=order.alpha,
        t=float(t),
        mass=ev.mass,
        min_location=min_loc,
        max_locations=(-x_star, x_star),
        negativity_count=neg,
        vanishing_count=vanishing,
        monotone=bool(rising and falling and symmetric),
        resolved_extent=float(ev.resolved_extent),
    )


def estimate_peak_constant(order, tol=1e-10):
    """Location ``c`` of the maximum of ``P(1, |x|)``; maxima sit at ``c t^(alpha/2)``.

    A coarse scan brackets the maximum, successive local grids zoom in and a
    parabola through the three best nodes gives the final estimate.
    """
    order = _as_order(order)
    if order.is_heat:
        return 0.0
    if not 1.0 < order.alpha < 2.0:
        raise UnsupportedOrderError("needs 1 <= alpha < 2")
    cap = light_tail_cap(order)
    xs = np.linspace(0.0, cap, 801)
    p = density(order, 1.0, xs)
    k = int(np.argmax(p))
    if k == 0:
        raise ResolutionError("profile too flat to locate the maximum")
    h = xs[1] - xs[0]
    centre = xs[k]
    for _ in range(4):
        local = centre + h * np.linspace(-1, 1, 41)
        local = local[local > 0]
        pl = density(order, 1.0, local)
        j = int(np.clip(np.argmax(pl), 1, local.size - 2))
        centre = local[j]
        h = local[1] - local[0]
    y0, y1, y2 = pl[j - 1], pl[j], pl[j + 1]
    denom = y0 - 2 * y1 + y2
    if denom >= 0 or (y1 - density(order, 1.0, np.array([0.0]))[0]) < tol:
        raise ResolutionError("profile too flat to locate the maximum")
    return float(centre + 0.5 * h * (y0 - y2) / denom)


# --------------------------------------------------------------------------
# Light-tail asymptote
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TailAsymptote:
    """``P(1, x) ~ prefactor * x**power * exp(-decay_rate * x**exponent)``."""

    order: FractionalOrder
    decay_rate: float
    prefactor: float
    fit_range: tuple
    residual: float
    max_ratio: float

    @property
    def power(self):
        a = self.order.alpha
        return (a - 1.0) / (2.0 - a)

    @property
    def exponent(self):
        return 2.0 / (2.0 - self.order.alpha)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.prefactor * x ** self.power * np.exp(-self.decay_rate * x ** self.exponent)

    def tail_mass(self, radius, t=1.0):
        """Bound on the mass of ``(1/alpha) P(t, |x|)`` outside ``[-radius, radius]``.

        Integrates the asymptote in closed form (incomplete gamma function)
        and inflates it by the largest data/model ratio seen on the fit range.
        The asymptote is only trusted from the start of the fit range on;
        the mass between ``radius`` and that point is added exactly.
        """
        a = self.order.alpha
        z0 = radius * t ** (-a / 2)
        start = self.fit_range[0]
        p, q, A = self.power, self.exponent, self.decay_rate
        k = (p + 1.0) / q
        zc = max(z0, start)
        integral = (self.prefactor / q) * A ** (-k) * special.gamma(k) * special.gammaincc(k, A * zc ** q)
        bound = max(1.0, self.max_ratio) * integral
        if z0 < start:
            m = positive_cdf(self.order, 1.0, np.array([z0, start]))
            bound += float(m[1] - m[0])
        return float((2.0 / a) * bound)


def fit_tail(order, evaluation=None, floor=1e-12):
    """Least-squares fit of ``log P(1, x)`` to the light-tail asymptote.

    The fit uses the outer 20 % of ``[0, x_res]`` where ``x_res`` is the last
    positive node with ``P >= floor``; ``log B`` and ``A`` enter linearly.
    Without an evaluation a grid reaching ``P = floor`` is built.
    """
    order = _as_order(order)
    if order.is_wave:
        raise UnsupportedOrderError("alpha = 2 has no tail")
    if evaluation is None:
        if order.is_heat:
            extent = 2.0 * math.sqrt(-math.log(floor * 2 * math.sqrt(math.pi)))
        else:
            extent = light_tail_cap(order)
        grid = KernelGrid(extent, 4001)
        evaluation = reduced_kernel(order, grid)
    if evaluation.t != 1.0:
        raise ValueError("tail fit needs an evaluation at t = 1")
    x = evaluation.grid.nodes
    p = evaluation.values
    peak = x[np.argmax(np.where(x >= 0, p, -np.inf))]
    ok = (x >= peak) & (p >= floor)
    if not ok.any():
        raise ResolutionError("no resolved tail nodes")
    x_res = float(np.max(x[ok]))
    sel = (x >= 0.8 * x_res) & (x <= x_res) & (p > 0)
    if np.count_nonzero(sel) < 5:
        raise ResolutionError("too few nodes in the fit range; refine the grid")
    xs, ps = x[sel], p[sel]
    power = (order.alpha - 1.0) / (2.0 - order.alpha)
    expo = 2.0 / (2.0 - order.alpha)
    rhs = np.log(ps) - power * np.log(xs)
    design = np.column_stack([np.ones_like(xs), -xs ** expo])
    coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    log_b, a_rate = coef
    resid = float(np.max(np.abs(design @ coef - rhs)))
    fit = TailAsymptote(order, float(a_rate), float(math.exp(log_b)), (0.8 * x_res, x_res),
                        resid, 1.0)
    ratio = float(np.max(ps / fit(xs)))
    fit = TailAsymptote(order, fit.decay_rate, fit.prefactor, fit.fit_range, resid, ratio)
    if not (a_rate > 0 and resid < 0.1):
        raise ResolutionError(
            f"asymptotic regime not reached (A={a_rate:.3g}, residual={resid:.3g}); use a larger grid")
    return fit


# --------------------------------------------------------------------------
# Deterministic problem
# --------------------------------------------------------------------------

def solve_deterministic(order, g, t, grid):
    """Solution at time ``t`` of the Volterra problem with initial datum ``g``.

    For ``alpha < 2`` this convolves ``g`` (zero outside the grid) with the
    cell masses of ``(1/alpha) P(t, |y|)``; for ``alpha = 2`` it returns
    ``(g(x + t) + g(x - t)) / 2`` with linear interpolation.
    """
    order = _as_order(order)
    g = np.asarray(g, dtype=float)
    if g.shape != (grid.n_points,):
        raise ValueError("g must be sampled on the grid")
    if not np.all(np.isfinite(g)):
        raise ValueError("g must be finite")
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return g.copy()
    x = grid.nodes
    if order.is_wave:
        return 0.5 * (np.interp(x + t, x, g, left=0.0, right=0.0)
                      + np.interp(x - t, x, g, left=0.0, right=0.0))
    h = grid.spacing
    radius = grid.n_points - 1
    weights = symmetric_cell_masses(order, t, h, radius)
    full = signal.fftconvolve(g, weights, mode="full")
    return full[radius:radius + grid.n_points]
