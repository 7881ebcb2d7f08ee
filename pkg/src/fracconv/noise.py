"""Spatially homogeneous Wiener noise described by its spectral measure.

A spectral measure ``mu`` is a symmetric nonnegative measure on the line; the
space correlation of the noise is ``Gamma(x) = int cos(x xi) mu(d xi)``.  Here
``mu`` is an even density plus finitely many symmetric atoms.

Every grid computation (field synthesis, Hilbert-Schmidt norms) goes through
one discretisation of ``mu``, :class:`DiscreteSpectrum`, so that the sampler and
the norm see exactly the same measure.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .kernel import KernelGrid
from .quadrature import gauss_kronrod, graded_breakpoints

__all__ = [
    "GaussianDensity",
    "ConstantDensity",
    "TableDensity",
    "SpectralMeasure",
    "DiscreteSpectrum",
    "SpaceCorrelation",
    "FieldSample",
    "CovarianceEstimate",
    "IntegrabilityResult",
    "PositivityResult",
    "RkhsElement",
    "NoiseRefusedError",
    "BasisError",
    "StatisticsError",
    "integrability_check",
    "positivity_check",
    "covariance_from_spectral",
    "sample_wiener_increment",
    "synthesize_fields",
    "estimate_covariance",
    "rkhs_norm",
    "rkhs_basis",
    "basis_fields",
    "measure_from_dict",
    "thread_count",
]


class NoiseRefusedError(ValueError):
    """The measure violates the integrability condition; no field exists."""


class BasisError(ValueError):
    pass


class StatisticsError(ValueError):
    pass


def thread_count():
    """Worker cap from ``FRACCONV_THREADS`` (default 1)."""
    raw = os.environ.get("FRACCONV_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"FRACCONV_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


# --------------------------------------------------------------------------
# Densities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianDensity:
    """``mass * exp(-xi^2 / (2 scale^2)) / (sqrt(2 pi) scale)``; Gamma = mass exp(-scale^2 x^2 / 2)."""

    mass: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.mass >= 0 and self.scale > 0):
            raise ValueError("gaussian density needs mass >= 0 and scale > 0")

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        s = self.scale
        return self.mass * np.exp(-0.5 * (xi / s) ** 2) / (math.sqrt(2 * math.pi) * s)

    @property
    def support(self):
        # beyond 10 scales the density is below e^-50 of its peak
        return 10.0 * self.scale

    def correlation(self, x):
        x = np.asarray(x, dtype=float)
        return self.mass * np.exp(-0.5 * (self.scale * x) ** 2)

    def scaled(self, c):
        return GaussianDensity(self.mass * c, self.scale)

    def as_dict(self):
        return {"kind": "gaussian", "mass": self.mass, "scale": self.scale}


@dataclass(frozen=True)
class ConstantDensity:
    """``value`` everywhere; ``value = 1`` is Lebesgue measure (white noise)."""

    value: float = 1.0

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("constant density must be nonnegative")

    def __call__(self, xi):
        return np.full(np.shape(xi), float(self.value))

    support = math.inf

    def correlation(self, x):
        if self.value == 0:
            return np.zeros(np.shape(x))
        raise ValueError("a constant density has no pointwise correlation function")

    def scaled(self, c):
        return ConstantDensity(self.value * c)

    def as_dict(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class TableDensity:
    """Piecewise-linear density through ``(xi, values)`` for ``xi >= 0``, mirrored, zero beyond."""

    xi: tuple
    values: tuple

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if xi.ndim != 1 or xi.shape != vals.shape or xi.size < 2:
            raise ValueError("table density needs matching 1-D xi and values of length >= 2")
        if xi[0] != 0 or np.any(np.diff(xi) <= 0):
            raise ValueError("table xi must start at 0 and increase")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("table density must be finite and nonnegative")
        object.__setattr__(self, "xi", tuple(xi.tolist()))
        object.__setattr__(self, "values", tuple(vals.tolist()))

    def __call__(self, xi):
        a = np.abs(np.asarray(xi, dtype=float))
        return np.interp(a, self.xi, self.values, right=0.0)

    @property
    def support(self):
        return self.xi[-1]

    def correlation(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        for idx, xv in np.ndenumerate(x):
            total = 0.0
            for lo, hi in zip(self.xi[:-1], self.xi[1:]):
                val, _ = integrate.quad(lambda s: self(s) * math.cos(xv * s), lo, hi,
                                        epsabs=1e-14, epsrel=1e-12, limit=200)
                total += val
            out[idx] = 2.0 * total
        return out

    def scaled(self, c):
        return TableDensity(self.xi, tuple(c * v for v in self.values))

    def as_dict(self):
        return {"kind": "table", "xi": list(self.xi), "values": list(self.values)}


@dataclass(frozen=True)
class _CallableDensity:
    func: object
    name: str = "callable"
    support: float = math.inf

    def __call__(self, xi):
        return np.asarray(self.func(np.asarray(xi, dtype=float)), dtype=float)

    def correlation(self, x):
        raise ValueError("no correlation function registered for a callable density")

    def scaled(self, c):
        f = self.func
        return _CallableDensity(lambda xi: c * f(xi), self.name, self.support)

    def as_dict(self):
        return {"kind": self.name}


# --------------------------------------------------------------------------
# Measures
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralMeasure:
    """Even density (or ``None``) plus atoms ``((location, mass), ...)``.

    Atoms must be closed under negation with equal masses; an atom at the
    origin stands alone.
    """

    density: object = None
    atoms: tuple = ()

    def __post_init__(self):
        atoms = tuple((float(a), float(m)) for a, m in self.atoms)
        for loc, mass in atoms:
            if not (mass > 0 and math.isfinite(mass) and math.isfinite(loc)):
                raise ValueError(f"atom ({loc}, {mass}) must have finite location and positive mass")
        book = {}
        for loc, mass in atoms:
            book[loc] = book.get(loc, 0.0) + mass
        for loc, mass in book.items():
            partner = book.get(-loc)
            if partner is None or not math.isclose(partner, mass, rel_tol=1e-12):
                raise ValueError(f"atoms are not symmetric: no partner of equal mass for {loc}")
        object.__setattr__(self, "atoms", tuple(sorted(book.items())))
        if self.density is not None and not callable(self.density):
            raise TypeError("density must be callable or None")

    @classmethod
    def from_callable(cls, func, atoms=(), name="callable", support=math.inf):
        return cls(_CallableDensity(func, name, support), atoms)

    @classmethod
    def lebesgue(cls):
        return cls(ConstantDensity(1.0))

    @classmethod
    def unit_atom(cls):
        return cls(None, ((0.0, 1.0),))

    @classmethod
    def gaussian(cls, mass=1.0, scale=1.0):
        return cls(GaussianDensity(mass, scale))

    @classmethod
    def cosine(cls, frequency=1.0, mass=1.0):
        """Atoms at +-frequency with mass/2 each: Gamma = mass cos(frequency x)."""
        return cls(None, ((frequency, mass / 2), (-frequency, mass / 2)))

    def scaled(self, c):
        dens = None if self.density is None else self.density.scaled(c)
        return SpectralMeasure(dens, tuple((a, c * m) for a, m in self.atoms))

    def with_origin_atom(self, kappa):
        """``mu + kappa * delta_0``."""
        if kappa == 0:
            return self
        return SpectralMeasure(self.density, self.atoms + ((0.0, float(kappa)),))

    @property
    def is_zero(self):
        return not self.atoms and (self.density is None or
                                   (isinstance(self.density, ConstantDensity) and self.density.value == 0))

    def atom_sum(self, func):
        return sum(m * func(a) for a, m in self.atoms)

    def discretize(self, grid, cutoff=None):
        return DiscreteSpectrum.from_measure(self, grid, cutoff)

    def as_dict(self):
        return {
            "density": None if self.density is None else self.density.as_dict(),
            "atoms": [[a, m] for a, m in self.atoms],
        }


def measure_from_dict(data):
    """Build a measure from ``{"density": {...} | null, "atoms": [[loc, mass], ...]}``."""
    if not isinstance(data, dict):
        raise ValueError("measure definition must be a JSON object")
    unknown = set(data) - {"density", "atoms", "schema"}
    if unknown:
        raise ValueError(f"unknown measure keys: {sorted(unknown)}")
    dens = data.get("density")
    density = None
    if dens is not None:
        dens = dict(dens)
        kind = dens.pop("kind", None)
        params = dens.pop("params", {})
        params = {**params, **dens}
        try:
            if kind == "gaussian":
                density = GaussianDensity(**params)
            elif kind == "constant":
                density = ConstantDensity(**params)
            elif kind == "table":
                density = TableDensity(tuple(params["xi"]), tuple(params["values"]))
                if set(params) - {"xi", "values"}:
                    raise TypeError("unexpected table keys")
            else:
                raise ValueError(f"unknown density kind {kind!r}")
        except (TypeError, KeyError) as exc:
            raise ValueError(f"bad parameters for density kind {kind!r}: {exc}") from None
    atoms = tuple(tuple(a) for a in data.get("atoms", []))
    if any(len(a) != 2 for a in atoms):
        raise ValueError("atoms must be [location, mass] pairs")
    return SpectralMeasure(density, atoms)


# --------------------------------------------------------------------------
# Discretisation shared by the sampler and the Hilbert-Schmidt norm
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteSpectrum:
    """A finite symmetric measure ``sum_k weight_k (delta_{xi_k} + delta_{-xi_k})/2``.

    ``frequencies`` are ``>= 0``.  ``weights`` hold the total mass of the pair
    ``{xi, -xi}`` (or of the origin), so ``Gamma(x) = sum_k weight_k cos(xi_k x)``.
    The first ``n_lattice`` entries are the lattice ``p * spacing`` used for
    FFT synthesis on the grid; the remaining entries are atoms kept exact.
    """

    frequencies: np.ndarray
    weights: np.ndarray
    n_lattice: int
    spacing: float
    grid: KernelGrid

    @classmethod
    def from_measure(cls, mu, grid, cutoff=None):
        L, h, n = grid.half_width, grid.spacing, grid.n_points
        # lattice spacing pi/(2L): the synthesised field has period 4L, twice the window
        dxi = math.pi / (2 * L)
        nyquist = math.pi / h
        freqs, weights = [], []
        n_lat = 0
        if mu.density is not None:
            top = min(nyquist, mu.density.support if cutoff is None else min(cutoff, nyquist))
            m = min(n - 1, int(math.ceil(top / dxi - 1e-9)))
            xi = dxi * np.arange(m + 1)
            dens = mu.density(xi)
            if np.any(dens < 0) or not np.all(np.isfinite(dens)):
                raise ValueError("spectral density must be finite and nonnegative")
            w = 2.0 * dxi * dens
            w[0] *= 0.5
            w[-1] *= 0.5
            freqs.append(xi)
            weights.append(w)
            n_lat = m + 1
        atom_f, atom_w = [], []
        for loc, mass in mu.atoms:
            if loc > 0:
                atom_f.append(loc)
                atom_w.append(2.0 * mass)
            elif loc == 0:
                atom_f.append(0.0)
                atom_w.append(mass)
        freqs.append(np.array(atom_f, dtype=float))
        weights.append(np.array(atom_w, dtype=float))
        f = np.concatenate(freqs)
        w = np.concatenate(weights)
        f.setflags(write=False)
        w.setflags(write=False)
        return cls(f, w, n_lat, dxi, grid)

    @property
    def total_weight(self):
        """``mu_disc(R) = sup_x sum_k eta_k(x)^2`` over the real basis."""
        return float(np.sum(self.weights))

    def covariance(self, lags):
        lags = np.asarray(lags, dtype=float)
        return np.cos(np.multiply.outer(lags, self.frequencies)) @ self.weights

    def integrability_value(self):
        return float(np.sum(self.weights / (1.0 + self.frequencies ** 2)))

    def support_size(self):
        """Number of real basis functions: one per origin point, two per pair."""
        pos = self.weights > 0
        zero = self.frequencies == 0
        return int(np.count_nonzero(pos & zero) + 2 * np.count_nonzero(pos & ~zero))


@dataclass(frozen=True)
class SpaceCorrelation:
    lags: np.ndarray
    values: np.ndarray
    kappa_shift: float = 0.0


def covariance_from_spectral(mu, lags):
    """``Gamma(x) = int cos(x xi) mu(d xi)`` (density part in closed form or by quadrature)."""
    lags = np.asarray(lags, dtype=float)
    vals = np.zeros(lags.shape)
    if mu.density is not None:
        vals = vals + mu.density.correlation(lags)
    for loc, mass in mu.atoms:
        vals = vals + mass * np.cos(loc * lags)
    return SpaceCorrelation(lags, vals)


# --------------------------------------------------------------------------
# Integrability and positivity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegrabilityResult:
    value: float
    holds: bool
    history: tuple = ()


def _weighted_density_integral(density, cutoff):
    """2 int_0^X density(xi) / (1 + xi^2) d xi."""
    top = min(cutoff, density.support)
    if top <= 0:
        return 0.0
    if isinstance(density, TableDensity):
        pts = [p for p in density.xi if p < top] + [top]
    else:
        pts = list(np.linspace(0.0, top, 9))
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(lambda s: float(density(np.array(s))) / (1.0 + s * s), lo, hi,
                                epsabs=1e-13, epsrel=1e-12, limit=400)
        total += val
    return 2.0 * total


def integrability_check(mu, start=16.0, max_doublings=16, rel_change=0.01):
    """Evaluate ``int mu(d xi) / (1 + xi^2)`` and decide whether it is finite.

    The density part is integrated on ``[-X, X]`` for ``X`` doubling from
    ``start``.  Successive cutoffs are combined by the extrapolation
    ``2 V(2X) - V(X)``, exact for a density with a constant tail.  The value
    is declared finite once the extrapolated value changes by less than
    ``rel_change``; otherwise ``holds`` is false and the last partial sum
    is returned.
    """
    atoms = mu.atom_sum(lambda a: 1.0 / (1.0 + a * a))
    if mu.density is None:
        return IntegrabilityResult(float(atoms), True, ())
    X = start
    prev = _weighted_density_integral(mu.density, X)
    history = [(X, prev)]
    prev_extrap = None
    for _ in range(max_doublings):
        X *= 2
        cur = _weighted_density_integral(mu.density, X)
        history.append((X, cur))
        extrap = 2.0 * cur - prev if math.isinf(mu.density.support) else cur
        if prev_extrap is not None:
            scale = max(abs(extrap), abs(prev_extrap), 1e-300)
            if abs(extrap - prev_extrap) < rel_change * scale and abs(cur - prev) < 0.5 * scale:
                return IntegrabilityResult(float(extrap + atoms), True, tuple(history))
        prev, prev_extrap = cur, extrap
    return IntegrabilityResult(float(prev + atoms), False, tuple(history))


@dataclass(frozen=True)
class PositivityResult:
    holds: bool
    kappa: float
    method: str
    inconclusive: bool
    integrability: IntegrabilityResult
    probe_holds: bool
    probe_kappa: float
    min_transform: dict = field(default_factory=dict)


def _mollified_transform(mu, n_moll, x):
    """``int exp(-xi^2/N) cos(x xi) mu(d xi)`` on abscissae ``x``."""
    out = np.zeros(x.shape)
    if mu.density is not None:
        top = min(math.sqrt(_GAUSS_LOG_CUTOFF * n_moll), mu.density.support)
        width = 1.0 / (np.max(np.abs(x)) + 1.0)
        bp = graded_breakpoints(top, width, grading_levels=1)
        if isinstance(mu.density, TableDensity):
            bp = np.union1d(bp, [p for p in mu.density.xi if p < top])

        def f(xi):
            return mu.density(xi) * np.exp(-xi * xi / n_moll) * np.cos(np.multiply.outer(x, xi))

        out += 2.0 * gauss_kronrod(f, bp, atol=1e-10, n_components=x.size).value
    for loc, mass in mu.atoms:
        out += mass * math.exp(-loc * loc / n_moll) * np.cos(loc * x)
    return out


_GAUSS_LOG_CUTOFF = 40.0


def positivity_check(mu, schedule=(1, 4, 16, 64), kappas=(0.0, 1.0, 10.0), x_max=20.0,
                     n_x=801, tol=1e-9):
    """Decide whether ``Gamma + kappa * Lebesgue`` is a nonnegative measure.

    The decision follows the integrability condition (the two are
    equivalent).  As an independent probe, the transform of
    ``exp(-xi^2/N)(mu + kappa delta_0)`` is evaluated on ``[-x_max, x_max]``
    for every ``N`` in ``schedule``; the probe succeeds with the first
    ``kappa`` that keeps all transforms ``>= -tol``.  Disagreement between
    the two paths is reported as inconclusive.
    """
    integ = integrability_check(mu)
    x = np.linspace(0.0, x_max, n_x)
    minima = {int(n): float(np.min(_mollified_transform(mu, float(n), x))) for n in schedule}
    probe_kappa = math.nan
    for k in kappas:
        if all(m + k >= -tol * max(1.0, abs(m)) for m in minima.values()):
            probe_kappa = float(k)
            break
    probe_holds = not math.isnan(probe_kappa)
    agree = probe_holds == integ.holds
    return PositivityResult(
        holds=integ.holds,
        kappa=probe_kappa if probe_holds else math.nan,
        method="integrability" if agree else "inconclusive",
        inconclusive=not agree,
        integrability=integ,
        probe_holds=probe_holds,
        probe_kappa=probe_kappa,
        min_transform=minima,
    )


# --------------------------------------------------------------------------
# Field synthesis
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldSample:
    increments: np.ndarray
    dt: float
    seed: int
    grid: KernelGrid = None


def _stream(seed, index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def _draw_coefficients(spectrum, rng, n_rows):
    k = spectrum.frequencies.size
    return rng.standard_normal((n_rows, 2, k))


def synthesize_fields(spectrum, coeffs):
    """Fields ``sum_k sqrt(w_k)(A_k cos(xi_k x) + B_k sin(xi_k x))`` on the grid.

    ``coeffs`` has shape ``(..., 2, K)`` holding ``A`` and ``B``.  Lattice
    frequencies are summed with one FFT of length ``2(n - 1)``; atoms are
    summed directly.
    """
    grid = spectrum.grid
    n = grid.n_points
    x = grid.nodes
    lead = coeffs.shape[:-2]
    a, b = coeffs[..., 0, :], coeffs[..., 1, :]
    sw = np.sqrt(spectrum.weights)
    out = np.zeros(lead + (n,))
    m = spectrum.n_lattice
    if m:
        n_fft = 2 * (n - 1)
        xi = spectrum.frequencies[:m]
        c = sw[:m] * (a[..., :m] - 1j * b[..., :m]) * np.exp(-1j * xi * grid.half_width)
        spec = np.zeros(lead + (n_fft,), dtype=complex)
        spec[..., :m] = c
        out += (n_fft * np.fft.ifft(spec, axis=-1)[..., :n]).real
    if spectrum.frequencies.size > m:
        xi = spectrum.frequencies[m:]
        ph = np.multiply.outer(x, xi)
        out += (a[..., m:] * sw[m:]) @ np.cos(ph).T + (b[..., m:] * sw[m:]) @ np.sin(ph).T
    return out


def _refuse_if_divergent(mu):
    res = integrability_check(mu)
    if not res.holds:
        raise NoiseRefusedError(
            f"spectral measure fails int mu/(1+xi^2) < inf (partial value {res.value:.4g})")
    return res


def sample_wiener_increment(mu, grid, dt, seed, n_samples=1, spectrum=None):
    """Independent increments ``W(t + dt) - W(t)`` on the grid.

    Row ``i`` is drawn from the stream ``SeedSequence([seed, i])``, so any
    subset of rows is reproducible on its own and the result does not depend
    on ``FRACCONV_THREADS``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    _refuse_if_divergent(mu)
    if spectrum is None:
        spectrum = DiscreteSpectrum.from_measure(mu, grid)
    rows = np.empty((n_samples, grid.n_points))

    def work(lo_hi):
        lo, hi = lo_hi
        coeffs = np.stack([_draw_coefficients(spectrum, _stream(seed, i), 1)[0]
                           for i in range(lo, hi)])
        rows[lo:hi] = math.sqrt(dt) * synthesize_fields(spectrum, coeffs)

    blocks = [(lo, min(lo + 256, n_samples)) for lo in range(0, n_samples, 256)]
    workers = min(thread_count(), len(blocks)) or 1
    if workers == 1:
        for blk in blocks:
            work(blk)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(work, blocks))
    return FieldSample(rows, float(dt), int(seed), grid)


@dataclass(frozen=True)
class CovarianceEstimate:
    lags: np.ndarray
    gamma_hat: np.ndarray
    stderr: np.ndarray
    n_samples: int


def estimate_covariance(samples, max_lag_index=None):
    """Covariance by lag, averaged over position pairs, with standard errors.

    Fields are mean zero by construction, so ``E[X(x) X(x + k h)]`` is
    estimated without centring (unbiased).  Each sample contributes one
    position-average per lag; the standard error is that of the mean of
    these i.i.d. per-sample values.
    """
    x = np.asarray(samples.increments, dtype=float)
    s, n = x.shape
    if s < 2:
        raise StatisticsError("need at least 2 samples")
    if max_lag_index is None:
        max_lag_index = (n - 1) // 4
    k = np.arange(max_lag_index + 1)
    per = np.empty((s, k.size))
    for j in k:
        per[:, j] = np.mean(x[:, :n - j] * x[:, j:], axis=1)
    mean = per.mean(axis=0)
    err = per.std(axis=0, ddof=1) / math.sqrt(s)
    h = samples.grid.spacing if samples.grid is not None else 1.0
    return CovarianceEstimate(k * h, mean, err, s)


# --------------------------------------------------------------------------
# Reproducing kernel Hilbert space
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RkhsElement:
    """``u`` on the points of a discrete spectrum.

    ``positive`` holds ``u(xi_k)`` for ``xi_k >= 0``; by hermitian symmetry
    ``u(-xi_k) = conj(u(xi_k))``, and ``u`` is real at the origin.
    """

    spectrum: DiscreteSpectrum
    positive: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.positive, dtype=complex)
        if u.shape != self.spectrum.frequencies.shape:
            raise ValueError("coefficients must match the spectrum support")
        zero = self.spectrum.frequencies == 0
        if np.any(np.abs(u[zero].imag) > 1e-12 * (1 + np.abs(u[zero]))):
            raise ValueError("hermitian symmetry requires a real value at the origin")
        object.__setattr__(self, "positive", u)

    def inner(self, other):
        """``int conj(u) w dmu`` over the symmetric support (real)."""
        # the pair {xi, -xi} contributes w/2 (conj(u)v + u conj(v)) = w Re(conj(u) v)
        return float(np.sum(self.spectrum.weights * (np.conj(self.positive) * other.positive).real))

    def field(self, x):
        """``F(u mu)(x) = int exp(-i x xi) u(xi) mu(d xi)`` (real)."""
        x = np.asarray(x, dtype=float)
        ph = np.multiply.outer(x, self.spectrum.frequencies)
        u = self.positive
        # pair: (w/2)(u e^{-i x xi} + conj(u) e^{+i x xi}) = w Re(u e^{-i x xi})
        return (np.cos(ph) * u.real + np.sin(ph) * u.imag) @ self.spectrum.weights


def rkhs_norm(u, mu=None):
    """Norm of ``u`` in ``L^2(mu)``, equal to the RKHS norm of ``F(u mu)``.

    ``u`` is either an :class:`RkhsElement` (discrete measure) or a callable
    ``u(xi)`` together with ``mu``; the callable must satisfy
    ``u(-xi) = conj(u(xi))``.
    """
    if isinstance(u, RkhsElement):
        return math.sqrt(max(u.inner(u), 0.0))
    if mu is None:
        raise ValueError("a callable element needs its measure")
    total = mu.atom_sum(lambda a: abs(complex(u(a))) ** 2)
    if mu.density is not None:
        top = mu.density.support
        if isinstance(mu.density, TableDensity):
            pts = list(mu.density.xi)
        else:
            pts = [0.0, top] if math.isfinite(top) else [0.0, math.inf]
        g = lambda s: float(mu.density(np.array(s))) * (abs(complex(u(s))) ** 2 + abs(complex(u(-s))) ** 2)
        for lo, hi in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(g, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)
            total += val
    return math.sqrt(total)


def rkhs_basis(spectrum, n):
    """First ``n`` elements of a real-field orthonormal basis.

    The origin contributes ``1/sqrt(w)``; every pair ``{xi, -xi}`` contributes
    the real element ``1/sqrt(w)`` and the imaginary element ``i/sqrt(w)``,
    whose fields are ``sqrt(w) cos(xi x)`` and ``sqrt(w) sin(xi x)``.
    """
    if n > spectrum.support_size():
        raise BasisError(f"requested {n} basis elements but the support carries {spectrum.support_size()}")
    out = []
    k = spectrum.frequencies.size
    for j in range(k):
        if len(out) >= n:
            break
        w = spectrum.weights[j]
        if w <= 0:
            continue
        e = np.zeros(k, dtype=complex)
        e[j] = 1.0 / math.sqrt(w)
        out.append(RkhsElement(spectrum, e))
        if spectrum.frequencies[j] != 0 and len(out) < n:
            out.append(RkhsElement(spectrum, 1j * e))
    return out


def basis_fields(spectrum, x):
    """Fields of :func:`rkhs_basis` elements (same order) sampled at ``x``.

    Row ``k`` is ``sqrt(w) cos(xi x)`` or ``sqrt(w) sin(xi x)``; computed in
    bulk instead of element by element.
    """
    x = np.asarray(x, dtype=float)
    rows = []
    for xi, w in zip(spectrum.frequencies, spectrum.weights):
        if w <= 0:
            continue
        sw = math.sqrt(w)
        rows.append(sw * np.cos(xi * x))
        if xi != 0:
            rows.append(sw * np.sin(xi * x))
    if not rows:
        return np.zeros((0, x.size))
    return np.array(rows)
