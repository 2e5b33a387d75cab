import json

import numpy as np
import pytest

from phasetnn import cli
from phasetnn.base import NumericalError
from phasetnn.config import load_presets

SMALL_APPROX = {
    "schema_version": 1,
    "kind": "approx",
    "method": "cptnn",
    "problem": "sin_exp",
    "n_train": 201,
    "n_test": 300,
    "n_frequencies": 5,
    "frequency_range": [0.0, 2.0],
    "m_sub": 10,
    "include_constant": True,
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL_APPROX))
    return str(path)


def test_run_writes_reports(tmp_path, small_config, single_worker, capsys):
    out = tmp_path / "out"
    assert cli.main(["approx", "--config", small_config, "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("relative_l2 = ")
    assert (out / "pointwise.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["kind"] == "approx"
    assert report["config"]["workers"] is None


def test_seed_override(tmp_path, small_config):
    out = tmp_path / "out"
    cli.main(["approx", "--config", small_config, "--seed", "4", "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["seed"] == 4


config_error_data = [
    (["solve-pde", "--preset", "approx-f1-cptnn"], "not 'solve-pde'"),
    (["approx"], "--config, --preset"),
    (["approx", "--preset", "no-such-preset"], "unknown preset"),
    (["approx", "--config", "missing.json"], "cannot read"),
]


@pytest.mark.parametrize("argv, message", config_error_data)
def test_configuration_errors(argv, message, capsys):
    assert cli.main(argv) == cli.EXIT_CONFIG
    assert message in capsys.readouterr().err


def test_numerical_failure(monkeypatch, small_config, tmp_path, capsys):
    def fail(config, out_dir):
        raise NumericalError("least-squares system contains non-finite entries")

    monkeypatch.setattr(cli, "run_experiment", fail)
    argv = ["approx", "--config", small_config, "--out", str(tmp_path)]
    assert cli.main(argv) == cli.EXIT_NUMERICAL
    assert "non-finite" in capsys.readouterr().err


foreign_numerical_errors = [
    np.linalg.LinAlgError("SVD did not converge"),
    FloatingPointError("overflow encountered in multiply"),
    ZeroDivisionError("float division by zero"),
]


@pytest.mark.parametrize("error", foreign_numerical_errors)
def test_foreign_numerical_failure(error, monkeypatch, small_config, tmp_path, capsys):
    def fail(config, out_dir):
        raise error

    monkeypatch.setattr(cli, "run_experiment", fail)
    argv = ["approx", "--config", small_config, "--out", str(tmp_path)]
    assert cli.main(argv) == cli.EXIT_NUMERICAL
    assert type(error).__name__ in capsys.readouterr().err


def test_list_presets(capsys):
    assert cli.main(["list-presets"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == len(load_presets())
    assert "approx-f1-cptnn\tapprox\tf1" in lines


def test_list_presets_by_kind(capsys):
    assert cli.main(["list-presets", "--kind", "solve-pde"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines
    assert all(line.split("\t")[1] == "solve-pde" for line in lines)


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        cli.main(["train"])
