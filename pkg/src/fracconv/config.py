"""Experiment configuration and run manifests.

A config is a JSON object
``{"schema": "fracconv.experiment/1", "subcommand": ..., "parameters": {...},
"output_dir": ..., "seed": ...}``.  Unknown keys are rejected and every
parameter is checked against its documented domain before anything runs.
"""

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

from . import __version__

SCHEMA = "fracconv.experiment/1"
MANIFEST_SCHEMA = "fracconv.manifest/1"
MEASURE_NAMES = ("lebesgue", "atom", "gaussian", "cosine", "mixed", "table", "quadratic", "linear")

__all__ = ["ConfigError", "ExperimentConfig", "RunManifest", "SCHEMA", "MANIFEST_SCHEMA",
           "PARAMETERS", "load_config", "canonical_json"]


class ConfigError(ValueError):
    """Invalid configuration; maps to exit status 2."""


def _float(name, lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    def check(value):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        x = float(value)
        if not math.isfinite(x):
            raise ConfigError(f"{name} must be finite")
        if x < lo or x > hi or (lo_open and x == lo) or (hi_open and x == hi):
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            raise ConfigError(f"{name} = {x:g} outside the domain {lb}{lo:g}, {hi:g}{rb}")
        return x
    return check


def _int(name, lo=None):
    def check(value):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        if lo is not None and value < lo:
            raise ConfigError(f"{name} must be >= {lo}, got {value}")
        return int(value)
    return check


def _floats(name, **kw):
    item = _float(name, **kw)

    def check(value):
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(f"{name} must be a non-empty list of numbers")
        return [item(v) for v in value]
    return check


def _choice(name, options):
    def check(value):
        if value not in options:
            raise ConfigError(f"{name} must be one of {list(options)}, got {value!r}")
        return value
    return check


def _weight(value):
    from .hsnorm import WeightFunction
    try:
        WeightFunction.parse(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"weight: {exc}") from None
    return value


def _measure(value):
    """A named measure, an inline definition or a path to a JSON definition."""
    if isinstance(value, dict):
        from .noise import measure_from_dict
        try:
            measure_from_dict(value)
        except ValueError as exc:
            raise ConfigError(f"measure: {exc}") from None
        return value
    if not isinstance(value, str):
        raise ConfigError("measure must be a name, a file path or an inline definition")
    if value in MEASURE_NAMES:
        return value
    if not os.path.isfile(value):
        raise ConfigError(f"measure file not found: {value}")
    return value


def _existing_file_or(name, keywords):
    def check(value):
        if value in keywords:
            return value
        if not isinstance(value, str) or not os.path.isfile(value):
            raise ConfigError(f"{name} must be one of {list(keywords)} or an existing file, got {value!r}")
        return value
    return check


def _process(value):
    if value is None:
        return None
    if isinstance(value, str):
        if not os.path.isfile(value):
            raise ConfigError(f"spec file not found: {value}")
        return value
    if not isinstance(value, dict):
        raise ConfigError("spec must be a file path or an inline definition")
    unknown = set(value) - {"kind", "profile", "b", "table", "amplitude"}
    if unknown:
        raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
    return value


def _overrides(value):
    if not isinstance(value, dict):
        raise ConfigError("overrides must be an object")
    return value


_ALPHA_OPEN = _float("alpha", 1.0, 2.0, hi_open=True)
_ALPHA_CLOSED = _float("alpha", 1.0, 2.0)
_POS = {k: _float(k, 0.0, lo_open=True) for k in ("t", "L", "dt", "tol")}

# name -> (validator, default); the default "required" marks mandatory keys
PARAMETERS = {
    "kernel": {
        "alpha": (_ALPHA_OPEN, "required"), "t": (_POS["t"], 1.0), "L": (_POS["L"], 40.0),
        "n": (_int("n", 3), 4001),
    },
    "solve": {
        "alpha": (_ALPHA_CLOSED, "required"), "t": (_float("t", 0.0), 1.0), "L": (_POS["L"], 40.0),
        "n": (_int("n", 3), 4001),
        "initial": (_existing_file_or("initial", ("gaussian", "box")), "gaussian"),
        "width": (_float("width", 0.0, lo_open=True), 1.0),
    },
    "noise": {
        "measure": (_measure, "required"), "L": (_POS["L"], 20.0), "n": (_int("n", 3), 401),
        "dt": (_POS["dt"], 1.0), "samples": (_int("samples", 2), 1000),
        "max_lag": (_int("max_lag", 0), None),
    },
    "hsnorm": {
        "alpha": (_ALPHA_OPEN, "required"), "t": (_POS["t"], 1.0),
        "R": (_floats("R", lo=0.0, lo_open=True), "required"), "measure": (_measure, "required"),
        "weight": (_weight, "exp"), "u": (_existing_file_or("u", ("one",)), "one"),
        "L": (_POS["L"], 20.0), "n": (_int("n", 3), 1024),
        "time_steps": (_int("time_steps", 1), 32), "tol": (_POS["tol"], 1e-6),
        "form": (_choice("form", ("fundamental", "density")), "fundamental"),
    },
    "convolve": {
        "alpha": (_ALPHA_OPEN, "required"), "t": (_POS["t"], 1.0),
        "R": (_float("R", 0.0, lo_open=True), None), "auto_R": (_float("auto_R", 0.0, lo_open=True), None),
        "steps": (_int("steps", 1), 64), "paths": (_int("paths", 30), 1000),
        "measure": (_measure, "required"), "spec": (_process, None), "weight": (_weight, "exp"),
        "L": (_POS["L"], 16.0), "n": (_int("n", 3), 512),
        "form": (_choice("form", ("fundamental", "density")), "fundamental"),
        "quadrature_steps": (_int("quadrature_steps", 1), 32),
    },
    "acceptance": {
        "criterion": (_int("criterion", 1), "required"), "overrides": (_overrides, {}),
    },
}


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass
class ExperimentConfig:
    subcommand: str
    parameters: dict = field(default_factory=dict)
    output_dir: str = "fracconv-out"
    seed: int = 0

    def validated(self):
        """Return a copy with defaults filled in; raise :class:`ConfigError` on any problem."""
        if self.subcommand not in PARAMETERS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise ConfigError("output_dir must be a non-empty path")
        if not isinstance(self.parameters, dict):
            raise ConfigError("parameters must be an object")
        table = PARAMETERS[self.subcommand]
        unknown = set(self.parameters) - set(table)
        if unknown:
            raise ConfigError(f"unknown parameters for {self.subcommand}: {sorted(unknown)}")
        params = {}
        for name, (check, default) in table.items():
            if name in self.parameters and self.parameters[name] is not None:
                params[name] = check(self.parameters[name])
            elif default == "required":
                raise ConfigError(f"missing required parameter {name!r} for {self.subcommand}")
            else:
                params[name] = default
        if self.subcommand == "convolve" and (params["R"] is None) == (params["auto_R"] is None):
            raise ConfigError("convolve needs exactly one of R and auto_R")
        if self.subcommand == "convolve" and params["R"] is not None and params["R"] > params["L"]:
            raise ConfigError("R must not exceed the grid half-width L")
        return ExperimentConfig(self.subcommand, params, self.output_dir, self.seed)

    def to_dict(self):
        return {"schema": SCHEMA, "subcommand": self.subcommand, "parameters": self.parameters,
                "output_dir": self.output_dir, "seed": self.seed}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("schema") == MANIFEST_SCHEMA:
            return cls.from_dict(data.get("config"))
        if data.get("schema") != SCHEMA:
            raise ConfigError(f"schema must be {SCHEMA!r}, got {data.get('schema')!r}")
        unknown = set(data) - {"schema", "subcommand", "parameters", "output_dir", "seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "subcommand" not in data:
            raise ConfigError("config needs a subcommand")
        return cls(data["subcommand"], data.get("parameters", {}),
                   data.get("output_dir", "fracconv-out"), data.get("seed", 0))

    def hash(self):
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


@dataclass
class RunManifest:
    config: ExperimentConfig
    status: str = "ok"
    exit_code: int = 0
    wall_clock: float = 0.0
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    version: str = __version__
    error: dict = None

    def to_dict(self):
        return {"schema": MANIFEST_SCHEMA, "config": self.config.to_dict(),
                "config_hash": self.config.hash(), "version": self.version,
                "status": self.status, "exit_code": self.exit_code,
                "wall_clock": self.wall_clock, "timings": self.timings,
                "outputs": list(self.outputs), "error": self.error}
