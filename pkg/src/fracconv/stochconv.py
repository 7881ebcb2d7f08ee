"""Monte Carlo for the truncated stochastic convolution.

``I(t) = int_0^t P^R(t - s) * (b(u(s)) dW(s))`` is approximated by the
left-point (Ito) sum over the mesh ``s_j = t (1 - (1 - j/n)^2)``, which is
finest next to ``s = t`` where the kernel ``P^R(t - s)`` concentrates.  The
smallest lag used is ``t / n^2``; the kernel is never evaluated at lag 0.

For a deterministic integrand the second moment of ``I`` in ``L^2_v`` equals
the time integral of the squared Hilbert-Schmidt norm (Ito isometry), which
:func:`ito_isometry_check` compares against :func:`hsnorm.time_integrated_hs`.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .hsnorm import (
    WeightFunction,
    _hs_core,
    hs_stabilization,
    l2v_norm_sq,
    time_integrated_hs,
    truncate_kernel,
)
from .kernel import FractionalOrder
from .noise import (
    DiscreteSpectrum,
    StatisticsError,
    _refuse_if_divergent,
    _stream,
    synthesize_fields,
    thread_count,
)

__all__ = [
    "ProcessSpec",
    "ConvolutionSample",
    "ConvolutionBatch",
    "IsometryReport",
    "SurrogateResult",
    "time_mesh",
    "simulate_convolution",
    "second_moment_estimate",
    "ito_isometry_check",
    "untruncated_surrogate",
    "DEFAULT_RADII",
]

DEFAULT_RADII = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0)


@dataclass(frozen=True)
class ProcessSpec:
    """Integrand ``b(u)`` of the stochastic convolution.

    ``kind``: ``"constant-one"`` (``u = 1``), ``"deterministic-profile"`` or
    ``"frozen-sample"`` (``u`` is the given array, constant in time).
    ``b``: ``"one"``, ``"identity"`` or ``"lipschitz-table"`` (piecewise
    linear through ``table = (xs, ys)``, constant beyond the ends).
    ``amplitude`` multiplies ``b``.
    """

    kind: str = "constant-one"
    profile: tuple = None
    b: str = "one"
    table: tuple = None
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant-one", "deterministic-profile", "frozen-sample"):
            raise ValueError(f"unknown process kind {self.kind!r}")
        if self.b not in ("one", "identity", "lipschitz-table"):
            raise ValueError(f"unknown coefficient {self.b!r}")
        if self.kind != "constant-one":
            if self.profile is None:
                raise ValueError(f"kind {self.kind!r} needs a profile")
            prof = np.asarray(self.profile, dtype=float)
            if prof.ndim != 1 or not np.all(np.isfinite(prof)):
                raise ValueError("profile must be a finite 1-D array")
            object.__setattr__(self, "profile", tuple(prof.tolist()))
        if self.b == "lipschitz-table":
            if self.table is None:
                raise ValueError("lipschitz-table needs table = (xs, ys)")
            xs, ys = (np.asarray(a, dtype=float) for a in self.table)
            if xs.shape != ys.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
                raise ValueError("table xs must increase and match ys")
            object.__setattr__(self, "table", (tuple(xs.tolist()), tuple(ys.tolist())))

    @property
    def lipschitz_constant(self):
        if self.b == "one":
            return 0.0
        if self.b == "identity":
            return abs(self.amplitude)
        xs, ys = (np.asarray(a) for a in self.table)
        return abs(self.amplitude) * float(np.max(np.abs(np.diff(ys) / np.diff(xs))))

    def state(self, grid):
        if self.kind == "constant-one":
            return np.ones(grid.n_points)
        prof = np.asarray(self.profile)
        if prof.size != grid.n_points:
            raise ValueError("profile length does not match the grid")
        return prof

    def integrand(self, grid):
        """``b(u(x))`` on the grid."""
        u = self.state(grid)
        if self.b == "one":
            g = np.ones_like(u)
        elif self.b == "identity":
            g = np.array(u, dtype=float)
        else:
            xs, ys = self.table
            g = np.interp(u, xs, ys)
        return self.amplitude * g

    def scaled(self, c):
        return ProcessSpec(self.kind, self.profile, self.b, self.table, self.amplitude * c)


@dataclass(frozen=True)
class ConvolutionSample:
    field: np.ndarray
    l2v_norm_sq: float
    seed: int


@dataclass(frozen=True)
class ConvolutionBatch:
    """All paths of one simulation; indexing yields :class:`ConvolutionSample`."""

    fields: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    base_seed: int
    mesh: np.ndarray = field(repr=False)
    R: float
    t: float

    def __len__(self):
        return self.norms.size

    def __getitem__(self, i):
        f = None if self.fields is None else self.fields[i]
        return ConvolutionSample(f, float(self.norms[i]), int(i))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def time_mesh(t, n_steps, power=2.0):
    """``s_j = t (1 - (1 - j/n)^p)``, ``j = 0..n``."""
    j = np.arange(n_steps + 1) / n_steps
    s = t * (1.0 - (1.0 - j) ** power)
    s[-1] = t
    return s


def _step_kernels(order, R, t, mesh, grid, form):
    lags = t - mesh[:-1]
    return [truncate_kernel(order, lag, R, grid, form) for lag in lags]


def simulate_convolution(order, R, t, spec, mu, grid, n_time_steps, n_paths, base_seed,
                         v=None, form="fundamental", keep_fields=True, chunk=128):
    """Sample ``I^R(t)`` on the grid for ``n_paths`` independent paths.

    Path ``p`` draws all its noise from ``SeedSequence([base_seed, p])``;
    the result is bit-identical for any ``FRACCONV_THREADS``.  ``v`` (default
    the exponential weight) is used for the per-path ``L^2_v`` norms.
    """
    order = order if isinstance(order, FractionalOrder) else FractionalOrder(order)
    if n_time_steps < 4:
        raise ValueError("need at least 4 time steps")
    if not t > 0:
        raise ValueError("t must be positive")
    if n_paths < 1:
        raise ValueError("need at least one path")
    v = WeightFunction() if v is None else v
    _refuse_if_divergent(mu)
    spectrum = mu if isinstance(mu, DiscreteSpectrum) else DiscreteSpectrum.from_measure(mu, grid)
    mesh = time_mesh(t, n_time_steps)
    dt = np.diff(mesh)
    if np.any(t - mesh[:-1] <= 0):
        raise ValueError("kernel lag zero in the time mesh")
    kernels = _step_kernels(order, R, t, mesh, grid, form)
    g = spec.integrand(grid)
    n = grid.n_points
    r = kernels[0].radius
    n_conv = sfft.next_fast_len(n + 2 * r, real=True)
    kern_hat = np.stack([sfft.rfft(k.masses, n_conv) for k in kernels])
    k_freq = spectrum.frequencies.size
    fields = np.empty((n_paths, n)) if keep_fields else None
    norms = np.empty(n_paths)
    weights = np.sqrt(dt)[:, None] * g[None, :]

    def work(lo_hi):
        lo, hi = lo_hi
        coeffs = np.empty((hi - lo, n_time_steps, 2, k_freq))
        for p in range(lo, hi):
            coeffs[p - lo] = _stream(base_seed, p).standard_normal((n_time_steps, 2, k_freq))
        incr = synthesize_fields(spectrum, coeffs) * weights[None, :, :]
        spec_hat = sfft.rfft(incr, n_conv, axis=-1)
        acc = np.zeros((hi - lo, spec_hat.shape[-1]), dtype=complex)
        for j in range(n_time_steps):
            acc += spec_hat[:, j, :] * kern_hat[j]
        out = sfft.irfft(acc, n_conv, axis=-1)[:, r:r + n]
        if fields is not None:
            fields[lo:hi] = out
        norms[lo:hi] = l2v_norm_sq(out, v, grid)

    blocks = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
    workers = min(thread_count(), len(blocks))
    if workers <= 1:
        for blk in blocks:
            work(blk)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(work, blocks))
    return ConvolutionBatch(fields, norms, int(base_seed), mesh, float(R), float(t))


def second_moment_estimate(samples):
    """Mean and standard error of the per-path ``L^2_v`` norms (at least 30 paths)."""
    norms = samples.norms if isinstance(samples, ConvolutionBatch) else np.asarray(
        [s.l2v_norm_sq if isinstance(s, ConvolutionSample) else s for s in samples], dtype=float)
    if norms.size < 30:
        raise StatisticsError("need at least 30 samples for a second-moment estimate")
    mean = float(np.mean(norms))
    stderr = float(np.std(norms, ddof=1) / math.sqrt(norms.size))
    return {"mean": mean, "stderr": stderr}


@dataclass(frozen=True)
class IsometryReport:
    mc_mean: float
    mc_stderr: float
    quadrature_value: float
    z_score: float
    discrete_expectation: float
    quadrature_rel_change: float

    def as_dict(self):
        return {"mc_mean": self.mc_mean, "mc_stderr": self.mc_stderr,
                "quadrature_value": self.quadrature_value, "z_score": self.z_score,
                "discrete_expectation": self.discrete_expectation,
                "quadrature_rel_change": self.quadrature_rel_change}


def _z(mean, stderr, target):
    if stderr > 0:
        return (mean - target) / stderr
    return 0.0 if math.isclose(mean, target, rel_tol=1e-12, abs_tol=1e-300) else math.inf


def discrete_second_moment(order, R, t, spec, mu, grid, n_time_steps, v, form="fundamental"):
    """Exact expectation of the Monte Carlo estimator: ``sum_j dt_j |K_R(t - s_j, g)|_HS^2``."""
    spectrum = mu if isinstance(mu, DiscreteSpectrum) else DiscreteSpectrum.from_measure(mu, grid)
    mesh = time_mesh(t, n_time_steps)
    g = spec.integrand(grid)
    kernels = _step_kernels(order, R, t, mesh, grid, form)
    return float(sum(d * _hs_core(k, g, spectrum, v) for d, k in zip(np.diff(mesh), kernels)))


def ito_isometry_check(order, R, t, spec, mu, grid, n_time_steps, n_paths, base_seed, v=None,
                       form="fundamental", quadrature_steps=32):
    """Monte Carlo ``E|I^R(t)|^2_{L^2_v}`` against ``int_0^t |K_R(s, b(u))|_HS^2 ds``."""
    v = WeightFunction() if v is None else v
    batch = simulate_convolution(order, R, t, spec, mu, grid, n_time_steps, n_paths, base_seed,
                                 v=v, form=form, keep_fields=False)
    est = second_moment_estimate(batch)
    g = spec.integrand(grid)
    quad = time_integrated_hs(order, t, R, mu, v, grid, n_steps=quadrature_steps, u=g, form=form)
    disc = discrete_second_moment(order, R, t, spec, mu, grid, n_time_steps, v, form)
    return IsometryReport(est["mean"], est["stderr"], float(quad.value),
                          float(_z(est["mean"], est["stderr"], quad.value)), disc, quad.rel_change)


@dataclass(frozen=True)
class SurrogateResult:
    R_used: float
    stabilization: object
    batch: ConvolutionBatch


def untruncated_surrogate(order, t, spec, mu, grid, tol, n_time_steps, n_paths, base_seed,
                          v=None, radii=None, form="fundamental"):
    """Pick ``R`` where the Hilbert-Schmidt norm has stabilised, then simulate.

    Beyond ``R_used`` the squared norm changes by less than ``tol`` (relative)
    over the schedule, which stands in for the untruncated convolution.
    """
    v = WeightFunction() if v is None else v
    if radii is None:
        radii = [r for r in DEFAULT_RADII if r <= grid.half_width]
    stab = hs_stabilization(order, t, spec.integrand(grid), mu, v, grid, radii, tol=tol, form=form)
    batch = simulate_convolution(order, stab.R_tilde, t, spec, mu, grid, n_time_steps, n_paths,
                                 base_seed, v=v, form=form)
    return SurrogateResult(stab.R_tilde, stab, batch)
