"""Command-line interface: ``fracconv <subcommand> ...``.

Every subcommand builds an :class:`ExperimentConfig`, validates it and runs
it through :func:`run_experiment`, which writes CSV/JSON outputs and a
``manifest.json``.  Exit status: 0 ok, 2 invalid configuration, 3 numerical
failure or failing acceptance criteria.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import acceptance
from . import hsnorm as hs
from . import kernel as kn
from . import noise as nz
from . import stochconv as sc
from .config import ConfigError, ExperimentConfig, RunManifest, load_config
from .quadrature import QuadratureError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

NUMERIC_ERRORS = (kn.ResolutionError, kn.UnsupportedOrderError, QuadratureError,
                  hs.StabilizationError, nz.NoiseRefusedError, nz.StatisticsError, nz.BasisError,
                  FloatingPointError, ArithmeticError, ValueError, RuntimeError)


class CriteriaFailed(RuntimeError):
    """Raised when acceptance criteria ran but did not all pass."""


def _jsonable(obj):
    return acceptance._jsonable(obj)


class _Writer:
    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def csv(self, name, columns, header):
        data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
        np.savetxt(self.path(name), data, fmt="%.17g", delimiter=",", header=",".join(header),
                   comments="")
        self.files.append(name)

    def json(self, name, obj):
        text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
        with open(self.path(name), "w") as fh:
            fh.write(text + "\n")
        if name not in self.files:
            self.files.append(name)


def resolve_measure(value):
    """Measure from a builtin name, an inline definition or a JSON file."""
    if isinstance(value, dict):
        return nz.measure_from_dict(value)
    named = acceptance.standard_measures()
    if value in named:
        return named[value]
    with open(value) as fh:
        return nz.measure_from_dict(json.load(fh))


def resolve_process(value):
    if value is None:
        return sc.ProcessSpec()
    if isinstance(value, str):
        with open(value) as fh:
            value = json.load(fh)
    return sc.ProcessSpec(**value)


def initial_profile(p, grid):
    x = grid.nodes
    if p["initial"] == "gaussian":
        return np.exp(-(x / p["width"]) ** 2)
    if p["initial"] == "box":
        return (np.abs(x) <= p["width"]).astype(float)
    g = np.loadtxt(p["initial"], delimiter=",", ndmin=1)
    if g.shape != (grid.n_points,):
        raise ConfigError(f"initial profile has {g.size} values, grid has {grid.n_points}")
    return g


def _u_profile(p, grid):
    if p["u"] == "one":
        return np.ones(grid.n_points)
    u = np.loadtxt(p["u"], delimiter=",", ndmin=1)
    if u.shape != (grid.n_points,):
        raise ConfigError(f"u profile has {u.size} values, grid has {grid.n_points}")
    return u


# ---------------------------------------------------------------- operations

def op_kernel(cfg, out, timings):
    p = cfg.parameters
    grid = kn.KernelGrid(p["L"], p["n"])
    t0 = time.perf_counter()
    ev = kn.kernel(p["alpha"], p["t"], grid)
    timings["kernel"] = time.perf_counter() - t0
    out.csv("kernel.csv", [grid.nodes, ev.values, ev.symmetrized], ["x", "P_alpha", "symmetrized"])
    report = {"alpha": p["alpha"], "t": p["t"], "mass": ev.mass, "window_mass": ev.window_mass}
    t0 = time.perf_counter()
    if p["alpha"] > 1.0:
        props = kn.kernel_properties(p["alpha"], p["t"], grid, evaluation=ev)
        report.update(min_location=props.min_location, max_locations=props.max_locations,
                      negativity_count=props.negativity_count,
                      vanishing_count=props.vanishing_count, monotone=props.monotone,
                      resolved_extent=props.resolved_extent,
                      c_alpha=kn.estimate_peak_constant(p["alpha"]))
    else:
        # Gaussian: single maximum at the origin
        report.update(min_location=None, max_locations=[0.0, 0.0], c_alpha=0.0,
                      negativity_count=ev.negativity_count)
    fit = kn.fit_tail(p["alpha"])
    report["tail_fit"] = {"A": fit.decay_rate, "B": fit.prefactor, "residual": fit.residual,
                          "power": fit.power, "exponent": fit.exponent,
                          "fit_range": fit.fit_range}
    timings["properties"] = time.perf_counter() - t0
    out.json("kernel_report.json", report)


def op_solve(cfg, out, timings):
    p = cfg.parameters
    grid = kn.KernelGrid(p["L"], p["n"])
    g = initial_profile(p, grid)
    t0 = time.perf_counter()
    u = kn.solve_deterministic(p["alpha"], g, p["t"], grid)
    timings["solve"] = time.perf_counter() - t0
    out.csv("solution.csv", [grid.nodes, g, u], ["x", "g", "u"])


def op_noise(cfg, out, timings):
    p = cfg.parameters
    mu = resolve_measure(p["measure"])
    grid = kn.KernelGrid(p["L"], p["n"])
    t0 = time.perf_counter()
    sample = nz.sample_wiener_increment(mu, grid, p["dt"], cfg.seed, n_samples=p["samples"])
    timings["sample"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    est = nz.estimate_covariance(sample, p["max_lag"])
    gamma = p["dt"] * nz.covariance_from_spectral(mu, est.lags).values
    timings["covariance"] = time.perf_counter() - t0
    out.csv("covariance.csv", [est.lags, gamma, est.gamma_hat, est.stderr],
            ["lag", "gamma", "gamma_hat", "stderr"])
    pos = nz.positivity_check(mu)
    out.json("noise_report.json", {
        "measure": mu.as_dict(), "dt": p["dt"], "samples": p["samples"], "seed": cfg.seed,
        "integrability": {"value": pos.integrability.value, "holds": pos.integrability.holds},
        "positivity": {"holds": pos.holds, "kappa": pos.kappa, "method": pos.method,
                       "probe_holds": pos.probe_holds, "probe_kappa": pos.probe_kappa},
        "max_abs_z": float(np.max(np.abs((est.gamma_hat - gamma) / est.stderr)))
        if np.all(est.stderr > 0) else None,
    })


def op_hsnorm(cfg, out, timings):
    p = cfg.parameters
    mu = resolve_measure(p["measure"])
    v = hs.WeightFunction.parse(p["weight"])
    grid = kn.KernelGrid(p["L"], p["n"])
    u = _u_profile(p, grid)
    radii = sorted(p["R"])
    t0 = time.perf_counter()
    reports = [hs.hs_norm_sq(hs.truncate_kernel(p["alpha"], p["t"], R, grid, p["form"]), u, mu, v)
               for R in radii]
    timings["hs_norm"] = time.perf_counter() - t0
    result = {"alpha": p["alpha"], "t": p["t"], "weight": v.label(),
              "reports": [r.as_dict() for r in reports]}
    t0 = time.perf_counter()
    try:
        st = hs.hs_stabilization(p["alpha"], p["t"], u, mu, v, grid, radii, tol=p["tol"], form=p["form"])
        result.update(R_tilde=st.R_tilde, M_tilde=st.M_tilde, increment_bound=st.increment_bound,
                      within_bound=st.within_bound)
    except hs.StabilizationError as exc:
        result.update(R_tilde=None, stabilization_error=str(exc))
    timings["stabilization"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    ti = hs.time_integrated_hs(p["alpha"], p["t"], radii[-1], mu, v, grid,
                               n_steps=p["time_steps"], u=u, form=p["form"])
    timings["time_integral"] = time.perf_counter() - t0
    result["time_integral"] = ti.value
    result["convergence"] = ti.as_dict()
    out.csv("hsnorm.csv", [radii, [r.hs_sq for r in reports], [r.bound_ratio for r in reports]],
            ["R", "hs_sq", "bound_ratio"])
    out.json("hsnorm_report.json", result)


def op_convolve(cfg, out, timings):
    p = cfg.parameters
    mu = resolve_measure(p["measure"])
    spec = resolve_process(p["spec"])
    v = hs.WeightFunction.parse(p["weight"])
    grid = kn.KernelGrid(p["L"], p["n"])
    extra = {}
    t0 = time.perf_counter()
    if p["auto_R"] is not None:
        sur = sc.untruncated_surrogate(p["alpha"], p["t"], spec, mu, grid, p["auto_R"], p["steps"],
                                       p["paths"], cfg.seed, v=v, form=p["form"])
        R, batch = sur.R_used, sur.batch
        extra["stabilization"] = sur.stabilization.as_dict()
    else:
        R = p["R"]
        batch = sc.simulate_convolution(p["alpha"], R, p["t"], spec, mu, grid, p["steps"],
                                        p["paths"], cfg.seed, v=v, form=p["form"], keep_fields=False)
    timings["simulate"] = time.perf_counter() - t0
    out.csv("samples.csv", [np.arange(batch.norms.size), batch.norms], ["path_id", "l2v_norm_sq"])
    t0 = time.perf_counter()
    est = sc.second_moment_estimate(batch)
    ti = hs.time_integrated_hs(p["alpha"], p["t"], R, mu, v, grid, n_steps=p["quadrature_steps"],
                               u=spec.integrand(grid), form=p["form"])
    disc = sc.discrete_second_moment(p["alpha"], R, p["t"], spec, mu, grid, p["steps"], v, p["form"])
    timings["isometry"] = time.perf_counter() - t0
    report = sc.IsometryReport(est["mean"], est["stderr"], ti.value,
                               sc._z(est["mean"], est["stderr"], ti.value), disc, ti.rel_change)
    out.json("isometry.json", {"R": R, "seed": cfg.seed, **report.as_dict(), **extra})


def op_acceptance(cfg, out, timings):
    p = cfg.parameters
    number = p["criterion"]
    if number not in acceptance.CRITERIA:
        raise ConfigError(f"unknown criterion {number}")
    res = acceptance.run_criterion(number, **p["overrides"])
    timings[f"criterion_{number}"] = res.runtime
    print(res.line(), flush=True)
    out.json(f"criterion_{number:02d}.json", res.as_dict())
    if not res.passed:
        raise CriteriaFailed(res.line())


OPERATIONS = {"kernel": op_kernel, "solve": op_solve, "noise": op_noise, "hsnorm": op_hsnorm,
              "convolve": op_convolve, "acceptance": op_acceptance}


# ---------------------------------------------------------------- orchestration

def run_experiment(config):
    """Validate and run one config; always returns a manifest (written to disk when possible)."""
    start = time.perf_counter()
    try:
        cfg = config.validated()
    except ConfigError as exc:
        return _failed(config, EXIT_CONFIG, exc, start)
    out = _Writer(cfg.output_dir)
    timings = {}
    manifest = RunManifest(cfg, timings=timings, outputs=out.files)
    try:
        OPERATIONS[cfg.subcommand](cfg, out, timings)
    except ConfigError as exc:
        _error(out, manifest, EXIT_CONFIG, exc)
    except CriteriaFailed as exc:
        manifest.status, manifest.exit_code = "failed", EXIT_NUMERIC
        manifest.error = {"error_type": "CriteriaFailed", "message": str(exc),
                          "exit_code": EXIT_NUMERIC}
        out.json("error.json", manifest.error)
    except NUMERIC_ERRORS as exc:
        _error(out, manifest, EXIT_NUMERIC, exc)
    manifest.wall_clock = time.perf_counter() - start
    out.json("manifest.json", manifest.to_dict())
    out.files.remove("manifest.json")
    return manifest


def _error(out, manifest, code, exc):
    manifest.status, manifest.exit_code = "error", code
    manifest.error = {"error_type": type(exc).__name__, "message": str(exc), "exit_code": code}
    out.json("error.json", manifest.error)


def _failed(config, code, exc, start):
    manifest = RunManifest(config, status="error", exit_code=code,
                           wall_clock=time.perf_counter() - start,
                           error={"error_type": type(exc).__name__, "message": str(exc),
                                  "exit_code": code})
    out_dir = config.output_dir if isinstance(config.output_dir, str) and config.output_dir else None
    if out_dir is not None:
        try:
            out = _Writer(out_dir)
            out.json("error.json", manifest.error)
            manifest.outputs = out.files
        except OSError:
            pass
    return manifest


def _suite_order(path):
    try:
        cfg = load_config(path)
        if cfg.subcommand == "acceptance":
            return (0, int(cfg.parameters.get("criterion", 0)), os.path.basename(path))
    except (ConfigError, TypeError, ValueError):
        pass
    return (1, 0, os.path.basename(path))


def reproduce_all(suite, output_dir):
    """Run every config in ``suite`` (criteria in numeric order); failures do not stop the run."""
    if not os.path.isdir(suite):
        raise ConfigError(f"suite directory not found: {suite}")
    start = time.perf_counter()
    paths = sorted((os.path.join(suite, f) for f in os.listdir(suite) if f.endswith(".json")),
                   key=_suite_order)
    os.makedirs(output_dir, exist_ok=True)
    members, timings = [], {}
    for path in paths:
        stem = os.path.splitext(os.path.basename(path))[0]
        member_dir = os.path.join(output_dir, stem)
        try:
            cfg = load_config(path)
            cfg = ExperimentConfig(cfg.subcommand, cfg.parameters, member_dir, cfg.seed)
            m = run_experiment(cfg)
            code, status = m.exit_code, m.status
            timings[stem] = m.wall_clock
        except ConfigError as exc:
            code, status = EXIT_CONFIG, f"error: {exc}"
            print(f"FAIL {stem}: {exc}", flush=True)
        members.append({"config": os.path.basename(path), "exit_code": code, "status": status,
                        "output_dir": member_dir})
    passed = all(m["exit_code"] == EXIT_OK for m in members)
    code = EXIT_OK if passed else (EXIT_NUMERIC if all(m["exit_code"] != EXIT_CONFIG for m in members)
                                   else EXIT_CONFIG)
    suite_cfg = ExperimentConfig("reproduce-all", {"suite": os.path.abspath(suite)}, output_dir, 0)
    manifest = RunManifest(suite_cfg, status="ok" if passed else "failed", exit_code=code,
                           wall_clock=time.perf_counter() - start, timings=timings,
                           outputs=["summary.json"])
    summary = {"passed": passed, "n_members": len(members),
               "n_failed": sum(m["exit_code"] != EXIT_OK for m in members), "members": members}
    with open(os.path.join(output_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    with open(os.path.join(output_dir, "manifest.json"), "w") as fh:
        json.dump(_jsonable(manifest.to_dict()), fh, indent=2)
    print(f"{len(members) - summary['n_failed']}/{len(members)} passed", flush=True)
    return manifest


# ---------------------------------------------------------------- argparse

def _parser():
    ap = argparse.ArgumentParser(prog="fracconv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"fracconv {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, default_out):
        p.add_argument("--out", default=default_out, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config-out", help="also write the validated config JSON here")

    k = sub.add_parser("kernel", help="evaluate the kernel and report its properties")
    k.add_argument("--alpha", type=float, required=True)
    k.add_argument("--t", type=float)
    k.add_argument("--L", type=float)
    k.add_argument("--n", type=int)
    common(k, "fracconv-out/kernel")

    s = sub.add_parser("solve", help="deterministic solution for an initial profile")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--t", type=float)
    s.add_argument("--L", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--initial", help="gaussian, box, or a CSV file of grid values")
    s.add_argument("--width", type=float)
    common(s, "fracconv-out/solve")

    nse = sub.add_parser("noise", help="sample noise increments and estimate their covariance")
    nse.add_argument("--measure", required=True, help="measure name or JSON file")
    nse.add_argument("--L", type=float)
    nse.add_argument("--n", type=int)
    nse.add_argument("--dt", type=float)
    nse.add_argument("--samples", type=int)
    nse.add_argument("--max-lag", dest="max_lag", type=int)
    common(nse, "fracconv-out/noise")

    h = sub.add_parser("hsnorm", help="Hilbert-Schmidt norms over a radius schedule")
    h.add_argument("--alpha", type=float, required=True)
    h.add_argument("--t", type=float)
    h.add_argument("--R", type=float, action="append", required=True)
    h.add_argument("--measure", required=True)
    h.add_argument("--weight", help="exp or poly:RHO")
    h.add_argument("--u", help="one, or a CSV file of grid values")
    h.add_argument("--L", type=float)
    h.add_argument("--n", type=int)
    h.add_argument("--time-steps", dest="time_steps", type=int)
    h.add_argument("--tol", type=float)
    h.add_argument("--form", choices=("fundamental", "density"))
    common(h, "fracconv-out/hsnorm")

    c = sub.add_parser("convolve", help="Monte Carlo stochastic convolution with isometry check")
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--t", type=float)
    grp = c.add_mutually_exclusive_group(required=True)
    grp.add_argument("--R", type=float)
    grp.add_argument("--auto-R", dest="auto_R", type=float, metavar="TOL")
    c.add_argument("--steps", type=int)
    c.add_argument("--paths", type=int)
    c.add_argument("--measure", required=True)
    c.add_argument("--spec", help="process spec JSON file")
    c.add_argument("--weight")
    c.add_argument("--L", type=float)
    c.add_argument("--n", type=int)
    c.add_argument("--form", choices=("fundamental", "density"))
    common(c, "fracconv-out/convolve")

    r = sub.add_parser("run", help="run one experiment config (or replay a manifest)")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="override the output directory")

    ra = sub.add_parser("reproduce-all", help="run an acceptance suite directory")
    ra.add_argument("--suite", default="acceptance")
    ra.add_argument("--out", default="fracconv-out/acceptance")
    return ap


_NON_PARAMS = {"command", "out", "seed", "config_out"}


def config_from_args(args):
    params = {k: v for k, v in vars(args).items() if k not in _NON_PARAMS and v is not None}
    return ExperimentConfig(args.command, params, args.out, args.seed)


def main(argv=None):
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "reproduce-all":
            return reproduce_all(args.suite, args.out).exit_code
        if args.command == "run":
            cfg = load_config(args.config)
            if args.out:
                cfg = ExperimentConfig(cfg.subcommand, cfg.parameters, args.out, cfg.seed)
        else:
            cfg = config_from_args(args)
            if args.config_out:
                with open(args.config_out, "w") as fh:
                    json.dump(cfg.to_dict(), fh, indent=2)
    except ConfigError as exc:
        print(f"fracconv: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = run_experiment(cfg)
    if manifest.exit_code != EXIT_OK:
        kind = "config error" if manifest.exit_code == EXIT_CONFIG else manifest.status
        print(f"fracconv: {kind}: {manifest.error['message']}", file=sys.stderr)
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
