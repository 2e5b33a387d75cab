import json

import numpy as np
import pytest

from phasetnn.base import ConfigError
from phasetnn.cptnn import CptnnModel, build_cptnn_basis, eval_cptnn, fit_function
from phasetnn.pptnn import PptnnConfig, eval_pptnn, fit_pptnn_1d, fit_pptnn_2d
from phasetnn.problems import CircularInterface, make_benchmark
from phasetnn.serialization import dump_model, load_model


@pytest.fixture(scope="module")
def pptnn_model():
    f = make_benchmark("sin_exp")
    x = np.linspace(-1, 1, 501)
    config = PptnnConfig(half_count=4, m_sub=15, threshold=1e-8, seed=3)
    return fit_pptnn_1d(x, f(x), config, function=f)


def test_pptnn_round_trip(tmp_path, pptnn_model):
    path = tmp_path / "model.npz"
    dump_model(pptnn_model, path)
    loaded = load_model(path)
    assert loaded.config == pptnn_model.config
    assert loaded.retained_bands == pptnn_model.retained_bands
    assert loaded.skipped == pptnn_model.skipped
    x = np.linspace(-1, 1, 97)
    for a, b in zip(eval_pptnn(loaded, x), eval_pptnn(pptnn_model, x)):
        np.testing.assert_array_equal(a, b)


def test_pptnn_2d_round_trip(tmp_path):
    def f(points):
        return np.sin(points[:, 0]) + points[:, 1]

    axis = np.linspace(-1, 1, 11)
    points = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    config = PptnnConfig(
        dim=2, half_count=1, m_sub=10, n_quadrature=201, half_width=4.0
    )
    model = fit_pptnn_2d(points, f(points), config, function=f)
    path = tmp_path / "model2d.npz"
    dump_model(model, path)
    loaded = load_model(path)
    assert loaded.retained_bands == model.retained_bands
    assert all(isinstance(band, tuple) for band in loaded.retained_bands)
    np.testing.assert_array_equal(
        eval_pptnn(loaded, points)[0], eval_pptnn(model, points)[0]
    )


def test_cptnn_round_trip(tmp_path):
    basis = build_cptnn_basis(
        [0.0, 1.0, 2.5], m_sub=6, seed=2, include_constant=True, domain=((-2.0,), (2.0,))
    )
    x = np.linspace(-2, 2, 80)
    model = fit_function(basis, x, np.cos(x))
    path = tmp_path / "cptnn.npz"
    dump_model(model, path)
    loaded = load_model(path)
    assert loaded.basis.domain == ((-2.0,), (2.0,))
    assert loaded.report.effective_rank == model.report.effective_rank
    assert loaded.report.shape == model.report.shape
    np.testing.assert_array_equal(eval_cptnn(loaded, x), eval_cptnn(model, x))
    np.testing.assert_array_equal(
        eval_cptnn(loaded, x, (0, 2)), eval_cptnn(model, x, (0, 2))
    )


def test_two_block_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    inner = build_cptnn_basis([[0.0, 0.0], [1.0, 1.0]], m_sub=4, seed=0)
    outer = build_cptnn_basis([[0.0, 0.0], [2.0, 0.0]], m_sub=4, seed=1)
    geometry = CircularInterface(center=(1.0, 1.0), radius=0.5)
    model = CptnnModel(
        basis=inner,
        coefficients=rng.standard_normal(inner.n_columns),
        secondary=(outer, rng.standard_normal(outer.n_columns)),
        membership=geometry.inside,
    )
    path = tmp_path / "interface.npz"
    dump_model(model, path)
    loaded = load_model(path)
    points = rng.uniform(0, 2, (50, 2))
    np.testing.assert_array_equal(eval_cptnn(loaded, points), eval_cptnn(model, points))
    assert loaded.report is None


def test_two_block_needs_circular_membership(tmp_path):
    basis = build_cptnn_basis([[0.0, 0.0]], m_sub=2)
    model = CptnnModel(
        basis=basis,
        coefficients=np.zeros(basis.n_columns),
        secondary=(basis, np.zeros(basis.n_columns)),
        membership=lambda points: points[:, 0] < 1,
    )
    with pytest.raises(ConfigError, match="circular"):
        dump_model(model, tmp_path / "model.npz")


def test_dump_unknown_object(tmp_path):
    with pytest.raises(ConfigError, match="cannot serialise"):
        dump_model(object(), tmp_path / "model.npz")


def _write_archive(path, **arrays):
    with open(path, "wb") as f:
        np.savez(f, **arrays)
    return path


bad_archive_data = [
    ({"coefficients": np.zeros(3)}, "not a model archive"),
    ({"header": np.array(json.dumps({"kind": "cptnn"}))}, "format version"),
    (
        {"header": np.array(json.dumps({"kind": "mlp", "format_version": 1}))},
        "unknown model kind",
    ),
]


@pytest.mark.parametrize("arrays, message", bad_archive_data)
def test_load_bad_archive(tmp_path, arrays, message):
    path = _write_archive(tmp_path / "bad.npz", **arrays)
    with pytest.raises(ConfigError, match=message):
        load_model(path)
