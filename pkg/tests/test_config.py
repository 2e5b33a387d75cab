import json

import numpy as np
import pytest

from phasetnn.base import ConfigError
from phasetnn.config import (
    KINDS,
    ExperimentConfig,
    load_config,
    load_presets,
    preset,
    read_config_data,
)
from phasetnn.pptnn import PptnnConfig


@pytest.fixture
def config_file(tmp_path):
    def write(data):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(data))
        return str(path)

    return write


@pytest.mark.parametrize("name", sorted(load_presets()))
def test_presets_validate(name):
    config = preset(name)
    assert config.kind in KINDS
    assert config.seed == 0


def test_defaults():
    config = ExperimentConfig()
    assert config.kind == "approx"
    assert config.method == "cptnn"
    assert config.n_test == 8000
    assert config.frequency_range == (0.0, 20.0)


invalid_config_data = [
    ({"kind": "train"}, "kind"),
    ({"method": "mlp"}, "method"),
    ({"extension": "mirror"}, "extension"),
    ({"n_train": 0}, "n_train"),
    ({"m_sub": 1.5}, "m_sub"),
    ({"seed": -1}, "seed"),
    ({"frequency_range": [0.0]}, "frequency_range"),
    ({"kind": "filter-bench", "method": "rfm"}, "filter-bench"),
    ({"gamma_sweep": [1.0, -2.0]}, "gamma"),
    ({"r_max": 0.0}, "r_max"),
]


@pytest.mark.parametrize("data, message", invalid_config_data)
def test_invalid_config(data, message):
    with pytest.raises(ConfigError, match=message):
        ExperimentConfig.from_dict(data)


def test_unknown_keys():
    with pytest.raises(ConfigError, match="unknown configuration keys: colour, size"):
        ExperimentConfig.from_dict({"size": 1, "colour": "red"})


def test_round_trip_through_dict():
    config = preset("approx-f1-cptnn")
    assert ExperimentConfig.from_dict(config.to_dict()) == config
    assert config.to_dict()["frequency_range"] == [0.0, 20.0]


def test_sources_are_layered(config_file):
    path = config_file({"schema_version": 1, "m_sub": 7, "seed": 3})
    config = load_config(path, "approx-f1-cptnn", seed=9, workers=None)
    assert config.problem == "f1"
    assert config.m_sub == 7
    assert config.seed == 9
    assert config.workers is None


def test_read_config_data_drops_schema_version(config_file):
    path = config_file({"schema_version": 1, "kind": "solve-pde"})
    assert read_config_data(path) == {"kind": "solve-pde"}


config_file_error_data = [
    ("[1, 2]", "JSON object"),
    ("{", "not valid JSON"),
]


@pytest.mark.parametrize("text, message", config_file_error_data)
def test_bad_config_file(tmp_path, text, message):
    path = tmp_path / "config.json"
    path.write_text(text)
    with pytest.raises(ConfigError, match=message):
        load_config(str(path))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.json"))


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset("approx-f9-cptnn")


def test_pptnn_config_slice():
    config = preset("approx-f1-pptnn")
    sliced = config.pptnn_config()
    assert isinstance(sliced, PptnnConfig)
    assert sliced.half_count == 25
    assert sliced.m_sub == 100
    assert sliced.threshold == 1e-14
    assert config.pptnn_config(m_sub=10, gamma=4.0).m_sub == 10
    assert config.pptnn_config(m_sub=10, gamma=4.0).gamma == 4.0
    assert sliced.shapes == (2.0, 4.0, 8.0)
    assert sliced.rank_tol == np.finfo(float).eps
    assert config.pptnn_config(gamma=4.0).shapes == (4.0,)


def test_per_axis_band_settings():
    config = ExperimentConfig(method="pptnn", delta_k=[2.0, 1.0], half_count=[20, 40])
    assert config.delta_k == (2.0, 1.0)
    sliced = config.pptnn_config(dim=2)
    assert sliced.frequency_grid().half_count == (20, 40)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict()))) == config
    with pytest.raises(ConfigError, match="one value per axis"):
        config.pptnn_config(dim=1)
