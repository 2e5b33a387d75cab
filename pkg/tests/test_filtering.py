import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasetnn.base import ConfigError
from phasetnn.core import trapezoid_grid
from phasetnn.filtering import (
    BandFilter1D,
    SeparableBandFilter2D,
    band_index,
    check_sampled_quadrature,
    extend_explicit,
    extend_raw,
    extend_sampled,
    filter_reconstruct,
    frequency_grid,
    kernel_eval,
    pou_eval,
    rms,
    shifted_component_data,
)
from phasetnn.problems import make_benchmark


@pytest.fixture(scope="module")
def quad():
    return trapezoid_grid(5001, 5.0)


@pytest.fixture(scope="module")
def grid():
    return frequency_grid(2.0, 40)


@pytest.fixture(scope="module")
def samples():
    return np.linspace(-1, 1, 1001)


def _reconstruction_error(aux, grid, x, quad, exact):
    band_filter = BandFilter1D(aux, grid, x, quad)
    components = [band_filter.component(band) for band in grid.bands()]
    real, imag = filter_reconstruct(components, len(x))
    return np.linalg.norm(real - exact) / np.linalg.norm(exact), imag


def test_frequency_grid():
    grid = frequency_grid(2.0, 3)
    assert grid.dim == 1
    assert grid.bands() == [-3, -2, -1, 0, 1, 2, 3]
    np.testing.assert_array_equal(grid.centers(), [-6, -4, -2, 0, 2, 4, 6])
    assert repr(grid) == "FrequencyGrid(delta_k=(2.0,), K=(3,))"


def test_frequency_grid_2d():
    grid = frequency_grid((1.0, 2.0), (1, 2), dim=2)
    assert len(grid.bands()) == 3 * 5
    assert grid.bands()[0] == (-1, -2)
    np.testing.assert_array_equal(grid.kappa((1, -2)), [1.0, -4.0])


@pytest.mark.parametrize(
    "delta_k, half_count", [(0.0, 3), (-1.0, 3), (1.0, -1)]
)
def test_frequency_grid_invalid(delta_k, half_count):
    with pytest.raises(ConfigError):
        frequency_grid(delta_k, half_count)


band_data = [
    (0.0, 0),
    (0.99, 0),
    (1.0, 1),
    (-1.0, 0),
    (-1.01, -1),
    (6.0, 3),
    (7.0, 3),
    (7.01, None),
    (-7.0, -3),
    (-7.01, None),
]


@pytest.mark.parametrize("k, expected", band_data)
def test_band_index(k, expected):
    assert band_index(frequency_grid(2.0, 3), k) == expected


@given(k=st.floats(-7.0, 7.0, allow_nan=False))
def test_partition_of_unity(k):
    values = pou_eval(frequency_grid(2.0, 3), k)
    assert values.sum() == 1.0
    assert set(np.unique(values)) <= {0.0, 1.0}


def test_pou_outside_grid_is_zero():
    assert pou_eval(frequency_grid(2.0, 3), 100.0).sum() == 0.0


def test_kernel_eval():
    grid = frequency_grid(2.0, 5)
    value = kernel_eval(grid, 2, 0.3)
    expected = 2 * np.exp(2j * np.pi * 4 * 0.3) * np.sin(np.pi * 0.6) / (np.pi * 0.6)
    assert value.real == pytest.approx(expected.real, abs=1e-14)
    assert value.imag == pytest.approx(expected.imag, abs=1e-14)


def test_trapezoid_integrates_cosine(quad):
    total = np.sum(quad.weights * np.cos(quad.nodes))
    assert total == pytest.approx(2 * np.sin(5.0), abs=1e-10)


def test_extend_explicit_matches_inside_and_decays():
    aux = extend_explicit(np.cos, decay_order=6)
    x = np.linspace(-1, 1, 11)
    np.testing.assert_array_equal(aux(x), np.cos(x))
    assert aux(1.5) == pytest.approx(np.cos(1.5) * np.exp(-10 * 0.5**6))
    assert abs(aux(np.array([4.0]))[0]) < 1e-300


def test_extend_explicit_2d_single_exponent():
    aux = extend_explicit(lambda p: np.ones(len(p)), decay_order=2, dim=2)
    value = aux(np.array([[1.5, -1.2]]))[0]
    assert value == pytest.approx(np.exp(-10 * (0.25 + 0.04)))


def test_extend_sampled_taylor_and_decay(samples):
    aux = extend_sampled(samples, samples**2, decay_order=3)
    assert aux(np.array([1.2]))[0] == pytest.approx(1.44 * np.exp(-0.08), abs=1e-8)
    np.testing.assert_allclose(aux.endpoint_derivatives[1.0], [1, 2, 2], atol=1e-8)
    np.testing.assert_allclose(aux.endpoint_derivatives[-1.0], [1, -2, 2], atol=1e-8)


def test_extend_sampled_reproduces_samples(samples):
    values = np.sin(3 * samples)
    aux = extend_sampled(samples, values)
    np.testing.assert_array_equal(aux(samples), values)


def test_extend_sampled_requires_full_interval():
    x = np.linspace(-0.5, 1, 50)
    with pytest.raises(ConfigError, match="cover"):
        extend_sampled(x, x)


def test_extend_raw_truncates():
    aux = extend_raw(function=np.exp)
    np.testing.assert_array_equal(aux(np.array([-1.5, 0.0, 1.5])), [0.0, 1.0, 0.0])
    with pytest.raises(ConfigError):
        extend_raw()
    with pytest.raises(ConfigError):
        extend_raw(function=np.exp, samples=(np.zeros(3), np.zeros(3)))


def test_check_sampled_quadrature(quad, samples):
    check_sampled_quadrature(samples, quad)
    with pytest.raises(ConfigError, match="coincide"):
        check_sampled_quadrature(np.linspace(-1, 1, 1000), quad)


def test_rms():
    assert rms([3.0, -3.0]) == 3.0
    with pytest.raises(ConfigError):
        rms([])


def test_hermitian_pairing(grid, quad, samples):
    aux = extend_explicit(make_benchmark("sin_exp"))
    band_filter = BandFilter1D(aux, grid, samples, quad)
    for band in (1, 7, 40):
        np.testing.assert_allclose(
            band_filter.values(-band), np.conj(band_filter.values(band)), atol=1e-13
        )


def test_shifted_component_data(grid, quad, samples):
    aux = extend_explicit(np.cos)
    component = shifted_component_data(aux, grid, 0, samples, quad)
    assert component.band == 0
    assert component.values.shape == samples.shape
    assert component.rms_imag < 1e-13
    assert component.rms_real > 0.1


@pytest.mark.parametrize("frequency", [6.0, 6.02, 9.99])
def test_band_limited_cosine_shifts_to_constant(frequency, grid, quad, samples):
    band = round(frequency / 2.0)
    aux = extend_explicit(lambda x: np.cos(2 * np.pi * frequency * x))
    values = BandFilter1D(aux, grid, samples, quad).values(band)
    assert rms(np.abs(np.diff(values))) <= 1e-3 * rms(np.abs(values))


@pytest.mark.parametrize("target", ["x3", "exp100", "sin2pi", "sin_exp", "f1", "f2"])
def test_explicit_reconstruction(target, grid, quad, samples):
    f = make_benchmark(target)
    error, imag = _reconstruction_error(
        extend_explicit(f), grid, samples, quad, f(samples)
    )
    assert error <= 1e-12
    assert np.max(imag) <= 1e-12 * np.max(np.abs(f(samples)))


sampled_tolerances = [
    ("x3", 1e-12),
    ("exp100", 1e-12),
    ("sin2pi", 1e-12),
    ("sin_exp", 1e-12),
    ("f1", 1e-5),
    ("f2", 1e-5),
]


@pytest.mark.parametrize("target, tolerance", sampled_tolerances)
def test_sampled_reconstruction(target, tolerance, grid, quad, samples):
    f = make_benchmark(target)
    values = f(samples)
    check_sampled_quadrature(samples, quad)
    error, _ = _reconstruction_error(
        extend_sampled(samples, values), grid, samples, quad, values
    )
    assert error <= tolerance


def test_sampled_narrow_stencil_beats_wide(grid, quad, samples):
    f = make_benchmark("f2")
    values = f(samples)
    narrow, _ = _reconstruction_error(
        extend_sampled(samples, values), grid, samples, quad, values
    )
    wide, _ = _reconstruction_error(
        extend_sampled(samples, values, n_stencil=12), grid, samples, quad, values
    )
    assert narrow < wide


def test_raw_extension_is_worse(grid, quad, samples):
    f = make_benchmark("sin_exp")
    values = f(samples)
    raw, _ = _reconstruction_error(extend_raw(function=f), grid, samples, quad, values)
    explicit, _ = _reconstruction_error(extend_explicit(f), grid, samples, quad, values)
    assert raw > 1e3 * explicit


def test_empty_reconstruction():
    assert filter_reconstruct([]) == (0.0, 0.0)
    real, imag = filter_reconstruct([], 4)
    np.testing.assert_array_equal(real, np.zeros(4))


def test_separable_matches_outer_product_of_1d_bands():
    def g(x):
        return np.cos(3 * x) + x

    def h(x):
        return np.exp(-x)

    quad = trapezoid_grid(801, 4.0)
    axis = np.linspace(-1, 1, 11)
    grid_2d = frequency_grid(2.0, 3, dim=2)
    grid_1d = frequency_grid(2.0, 3)
    points = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)

    aux = extend_explicit(lambda p: g(p[:, 0]) * h(p[:, 1]), dim=2)
    filter_2d = SeparableBandFilter2D(aux, grid_2d, points, (quad, quad))
    filter_g = BandFilter1D(extend_explicit(g), grid_1d, axis, quad)
    filter_h = BandFilter1D(extend_explicit(h), grid_1d, axis, quad)

    for band in [(0, 0), (1, -2), (-3, 3)]:
        expected = np.outer(filter_g.values(band[0]), filter_h.values(band[1]))
        np.testing.assert_allclose(
            filter_2d.values(band), expected.ravel(), atol=1e-12
        )


def test_separable_requires_2d():
    aux = extend_explicit(np.cos)
    with pytest.raises(ConfigError):
        SeparableBandFilter2D(
            aux, frequency_grid(2.0, 1), np.zeros((2, 2)), (None, None)
        )
