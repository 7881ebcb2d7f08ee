import json
import os

import numpy as np
import pytest

from fracconv import cli
from fracconv import hsnorm as hs
from fracconv import kernel as kn
from fracconv import noise as nz
from fracconv import stochconv as sc
from fracconv.config import ConfigError, ExperimentConfig, load_config

SUITE = os.path.join(os.path.dirname(__file__), os.pardir, "acceptance")


def _read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def _json(path):
    with open(path) as fh:
        return json.load(fh)


def test_kernel_happy_path_matches_library(tmp_path):
    out = tmp_path / "k"
    code = cli.main(["kernel", "--alpha", "1.5", "--t", "1", "--L", "20", "--n", "2001", "--out", str(out)])
    assert code == 0
    header, data = _read_csv(out / "kernel.csv")
    assert header == ["x", "P_alpha", "symmetrized"]
    ev = kn.kernel(1.5, 1.0, kn.KernelGrid(20, 2001))
    assert np.array_equal(data[:, 1], ev.values) and np.array_equal(data[:, 2], ev.symmetrized)
    rep = _json(out / "kernel_report.json")
    for key in ("alpha", "t", "mass", "min_location", "max_locations", "c_alpha", "tail_fit"):
        assert key in rep
    assert set(rep["tail_fit"]) >= {"A", "B", "residual"}
    man = _json(out / "manifest.json")
    assert man["exit_code"] == 0 and sorted(man["outputs"]) == ["kernel.csv", "kernel_report.json"]
    assert len(man["config_hash"]) == 64


def test_invalid_alpha_exits_with_config_status(tmp_path, capsys):
    out = tmp_path / "bad"
    assert cli.main(["kernel", "--alpha", "2.5", "--out", str(out)]) == 2
    err = _json(out / "error.json")
    assert err["exit_code"] == 2 and "alpha" in err["message"]
    assert "alpha" in capsys.readouterr().err


def test_numerical_failure_exits_with_status_three(tmp_path):
    out = tmp_path / "coarse"
    assert cli.main(["kernel", "--alpha", "1.5", "--L", "10", "--n", "21", "--out", str(out)]) == 3
    err = _json(out / "error.json")
    assert err["error_type"] == "ResolutionError"
    # partial results are kept and listed
    assert "kernel.csv" in _json(out / "manifest.json")["outputs"]


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema": "fracconv.experiment/1", "subcommand": "kernel", "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema": "other/1", "subcommand": "kernel"})
    with pytest.raises(ConfigError):
        ExperimentConfig("kernel", {"alpha": 1.5, "extra": 2}).validated()
    with pytest.raises(ConfigError):
        ExperimentConfig("kernel", {}).validated()
    with pytest.raises(ConfigError):
        ExperimentConfig("kernel", {"alpha": 1.5, "n": 10.5}).validated()
    with pytest.raises(ConfigError):
        ExperimentConfig("convolve", {"alpha": 1.5, "measure": "atom"}).validated()
    with pytest.raises(ConfigError):
        ExperimentConfig("noise", {"measure": "missing-file.json"}).validated()


def test_config_round_trip_and_stable_hash():
    cfg = ExperimentConfig("hsnorm", {"alpha": 1.5, "R": [1.0, 2.0], "measure": "gaussian"}, "o", 3).validated()
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg and again.hash() == cfg.hash()
    other = ExperimentConfig("hsnorm", {"alpha": 1.5, "R": [1.0, 2.0], "measure": "atom"}, "o", 3).validated()
    assert other.hash() != cfg.hash()


def test_hsnorm_matches_library(tmp_path):
    mfile = tmp_path / "lebesgue.json"
    mfile.write_text(json.dumps({"density": {"kind": "constant", "value": 1.0}, "atoms": []}))
    out = tmp_path / "h"
    code = cli.main(["hsnorm", "--alpha", "1.5", "--measure", str(mfile), "--R", "1", "--R", "2", "--R", "4",
                     "--L", "10", "--n", "256", "--time-steps", "8", "--out", str(out)])
    assert code == 0
    rep = _json(out / "hsnorm_report.json")
    grid = kn.KernelGrid(10, 256)
    lib = [hs.hs_norm_sq(hs.truncate_kernel(1.5, 1.0, R, grid), np.ones(256),
                         nz.SpectralMeasure.lebesgue(), hs.WeightFunction()).hs_sq for R in (1, 2, 4)]
    assert [r["hs_sq"] for r in rep["reports"]] == lib
    assert {"R_tilde", "time_integral", "convergence"} <= set(rep)


def test_noise_replay_is_bit_exact(tmp_path):
    out = tmp_path / "n"
    assert cli.main(["noise", "--measure", "gaussian", "--samples", "50", "--n", "101", "--L", "10",
                     "--seed", "4", "--out", str(out)]) == 0
    header, _ = _read_csv(out / "covariance.csv")
    assert header == ["lag", "gamma", "gamma_hat", "stderr"]
    assert cli.main(["run", "--config", str(out / "manifest.json"), "--out", str(tmp_path / "n2")]) == 0
    assert (out / "covariance.csv").read_bytes() == (tmp_path / "n2" / "covariance.csv").read_bytes()


def test_convolve_matches_library(tmp_path):
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps({"kind": "constant-one", "b": "one", "amplitude": 2.0}))
    out = tmp_path / "c"
    code = cli.main(["convolve", "--alpha", "1.5", "--R", "3", "--steps", "8", "--paths", "40",
                     "--measure", "atom", "--spec", str(spec_file), "--L", "8", "--n", "64",
                     "--seed", "9", "--out", str(out)])
    assert code == 0
    _, data = _read_csv(out / "samples.csv")
    lib = sc.simulate_convolution(1.5, 3.0, 1.0, sc.ProcessSpec(amplitude=2.0), nz.SpectralMeasure.unit_atom(),
                                  kn.KernelGrid(8, 64), 8, 40, 9, keep_fields=False)
    assert np.array_equal(data[:, 1], lib.norms)
    assert {"mc_mean", "mc_stderr", "quadrature_value", "z_score"} <= set(_json(out / "isometry.json"))


def test_solve_subcommand(tmp_path):
    out = tmp_path / "s"
    assert cli.main(["solve", "--alpha", "2", "--t", "1", "--L", "10", "--n", "201", "--out", str(out)]) == 0
    header, data = _read_csv(out / "solution.csv")
    assert header == ["x", "g", "u"]
    x = data[:, 0]
    assert np.allclose(data[:, 2], 0.5 * (np.exp(-(x + 1) ** 2) + np.exp(-(x - 1) ** 2)), atol=1e-14)


def _criterion_config(path, number, overrides):
    path.write_text(json.dumps({"schema": "fracconv.experiment/1", "subcommand": "acceptance",
                                "parameters": {"criterion": number, "overrides": overrides}}))


def test_reproduce_all_empty_suite(tmp_path):
    suite = tmp_path / "suite"
    suite.mkdir()
    assert cli.main(["reproduce-all", "--suite", str(suite), "--out", str(tmp_path / "o")]) == 0
    assert _json(tmp_path / "o" / "summary.json")["n_members"] == 0


def test_reproduce_all_isolates_failures(tmp_path):
    suite = tmp_path / "suite"
    suite.mkdir()
    small = {"alphas": [1.5], "L": 10.0, "n": 201}
    _criterion_config(suite / "b_fail.json", 3, {**small, "tol": 0.0})
    _criterion_config(suite / "a_pass.json", 3, small)
    code = cli.main(["reproduce-all", "--suite", str(suite), "--out", str(tmp_path / "o")])
    summary = _json(tmp_path / "o" / "summary.json")
    assert code == 3 and summary["n_members"] == 2 and summary["n_failed"] == 1
    status = {m["config"]: m["exit_code"] for m in summary["members"]}
    assert status == {"a_pass.json": 0, "b_fail.json": 3}


def test_shipped_suite_configs_validate():
    files = sorted(f for f in os.listdir(SUITE) if f.endswith(".json"))
    assert len(files) == 12
    numbers = []
    for f in files:
        cfg = load_config(os.path.join(SUITE, f)).validated()
        numbers.append(cfg.parameters["criterion"])
    assert sorted(numbers) == list(range(1, 13))


def test_version_flag(capsys):
    assert cli.main(["--version"]) == 0
    assert "fracconv" in capsys.readouterr().out
