import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given
from hypothesis import strategies as st

from phasetnn.base import ConfigError, NumericalError
from phasetnn.core import (
    MinNormSolver,
    bessel_j0,
    bessel_j0_dd,
    bessel_j1,
    equispaced,
    lstsq_min_norm,
    ppr_endpoint_derivatives,
    sinc,
    tensor_grid,
    trapezoid_grid,
)

sinc_data = [
    (0.0, 1.0),
    (1.0, 0.0),
    (-2.0, 0.0),
    (0.5, 2 / math.pi),
    (-0.5, 2 / math.pi),
]


@pytest.mark.parametrize("x, expected", sinc_data)
def test_sinc(x, expected):
    assert sinc(x) == pytest.approx(expected, abs=1e-16)


def test_sinc_array():
    values = sinc(np.array([0.0, 1.0, 2.0]))
    assert isinstance(values, np.ndarray)
    np.testing.assert_allclose(values, [1, 0, 0], atol=1e-16)


def test_trapezoid_grid():
    quad = trapezoid_grid(5001, 5.0)
    assert len(quad) == 5001
    assert quad.spacing == pytest.approx(0.002)
    assert quad.nodes[0] == -5.0 and quad.nodes[-1] == 5.0
    assert quad.weights[0] == quad.weights[-1] == pytest.approx(0.001)
    assert quad.weights.sum() == pytest.approx(10.0)


@pytest.mark.parametrize("n, c", [(1, 5.0), (10, 0.0), (10, -1.0)])
def test_trapezoid_grid_invalid(n, c):
    with pytest.raises(ConfigError):
        trapezoid_grid(n, c)


def _integral(integrand):
    return scipy.integrate.quad(integrand, 0, math.pi, limit=500)[0] / math.pi


def _j0_integral(x):
    return _integral(lambda t: math.cos(x * math.sin(t)))


def _j1_integral(x):
    return _integral(lambda t: math.cos(t - x * math.sin(t)))


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.404825557695773, 17.5, 99.0, 250.0])
def test_bessel_against_integral_representation(x):
    assert bessel_j0(x) == pytest.approx(_j0_integral(x), abs=1e-12)
    assert bessel_j1(x) == pytest.approx(_j1_integral(x), abs=1e-12)


def test_bessel_j0_second_derivative():
    x = np.array([0.0, 0.5, 3.0, 40.0])
    h = 1e-4
    fd = (bessel_j0(x + h) - 2 * bessel_j0(x) + bessel_j0(x - h)) / h**2
    np.testing.assert_allclose(bessel_j0_dd(x), fd, atol=1e-6)
    assert bessel_j0_dd(0.0) == -0.5


def test_bessel_ode_residual(rng):
    # x^2 J0'' + x J0' + x^2 J0 = 0 with J0' = -J1.
    x = rng.uniform(0, 10, 1000)
    residual = x**2 * bessel_j0_dd(x) - x * bessel_j1(x) + x**2 * bessel_j0(x)
    assert np.max(np.abs(residual)) <= 4.5e-13


@given(
    data=st.data(),
    q=st.integers(2, 8),
    z=st.sampled_from([-1.0, 1.0]),
)
def test_ppr_exact_on_polynomials(data, q, z):
    # Stencil: all 2Q equispaced samples of [-1, 1].
    coefficients = data.draw(
        st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=q)
    )
    poly = np.polynomial.Polynomial(coefficients)
    x = np.linspace(-1, 1, 2 * q)
    derivatives = ppr_endpoint_derivatives(x, poly(x), z, q)
    expected = [poly.deriv(k)(z) if k else poly(z) for k in range(q)]
    np.testing.assert_allclose(derivatives, expected, rtol=0, atol=1e-9)


@pytest.mark.parametrize("q", range(2, 9))
def test_ppr_interpolating_stencil(q):
    poly = np.polynomial.Polynomial(np.linspace(1, -1, q))
    x = np.linspace(-1, 1, 4 * q)
    derivatives = ppr_endpoint_derivatives(x, poly(x), 1.0, q, n_stencil=q)
    expected = [poly.deriv(k)(1.0) if k else poly(1.0) for k in range(q)]
    np.testing.assert_allclose(derivatives, expected, rtol=1e-6, atol=1e-9)


ppr_tolerances = [1e-6, 1e-6, 1e-5, 1e-4, 1e-3, 5e-2]


@pytest.mark.parametrize("z", [-1.0, 1.0])
def test_ppr_sin(z):
    x = np.linspace(-1, 1, 1001)
    derivatives = ppr_endpoint_derivatives(x, np.sin(x), z, 6)
    exact = [np.sin(z), np.cos(z), -np.sin(z), -np.cos(z), np.sin(z), np.cos(z)]
    for q, (value, expected, tol) in enumerate(zip(derivatives, exact, ppr_tolerances)):
        assert value == pytest.approx(expected, abs=tol), q


def test_ppr_invalid():
    x = np.linspace(-1, 1, 10)
    with pytest.raises(ConfigError):
        ppr_endpoint_derivatives(x, x, 1.0, 0)
    with pytest.raises(ConfigError, match="duplicate"):
        ppr_endpoint_derivatives(np.r_[x, x[:1]], np.r_[x, x[:1]], 1.0, 3)
    with pytest.raises(ConfigError):
        ppr_endpoint_derivatives(x[:2], x[:2], 1.0, 3)


def test_lstsq_min_norm_full_rank(rng):
    matrix = rng.standard_normal((50, 10))
    truth = rng.standard_normal(10)
    report = lstsq_min_norm(matrix, matrix @ truth)
    np.testing.assert_allclose(report.coefficients, truth, atol=1e-12)
    assert report.effective_rank == 10
    assert report.shape == (50, 10)
    assert report.residual_norm < 1e-12


def test_lstsq_min_norm_rank_deficient(rng):
    base = rng.standard_normal((30, 3))
    matrix = np.hstack([base, base[:, :1]])
    rhs = rng.standard_normal(30)
    report = lstsq_min_norm(matrix, rhs)
    assert report.effective_rank == 3
    expected = np.linalg.pinv(matrix) @ rhs
    np.testing.assert_allclose(report.coefficients, expected, atol=1e-10)
    # The minimum-norm solution splits weight evenly over duplicated columns.
    assert report.coefficients[0] == pytest.approx(report.coefficients[3])


@given(seed=st.integers(0, 2**16), rows=st.integers(5, 40), cols=st.integers(1, 5))
def test_lstsq_residual_orthogonal_to_range(seed, rows, cols):
    generator = np.random.default_rng(seed)
    matrix = generator.standard_normal((rows, cols))
    rhs = generator.standard_normal(rows)
    report = lstsq_min_norm(matrix, rhs)
    residual = matrix @ report.coefficients - rhs
    assert np.max(np.abs(matrix.T @ residual)) < 1e-9 * (1 + np.abs(rhs).sum())


def test_lstsq_invalid():
    with pytest.raises(ConfigError):
        lstsq_min_norm(np.ones((3, 2)), np.ones(4))
    with pytest.raises(NumericalError):
        lstsq_min_norm(np.array([[1.0, np.nan]]), np.ones(1))


def test_min_norm_solver_matches_lstsq(rng):
    matrix = rng.standard_normal((40, 12))
    solver = MinNormSolver(matrix)
    for _ in range(3):
        rhs = rng.standard_normal(40)
        report = solver.solve(rhs)
        expected = lstsq_min_norm(matrix, rhs)
        np.testing.assert_allclose(report.coefficients, expected.coefficients, atol=1e-12)
        assert report.residual_norm == pytest.approx(expected.residual_norm)
    assert solver.effective_rank == 12


def test_min_norm_solver_invalid_rhs():
    solver = MinNormSolver(np.eye(3))
    with pytest.raises(ConfigError):
        solver.solve(np.ones(2))
    with pytest.raises(NumericalError):
        solver.solve(np.array([1.0, np.inf, 0.0]))


def test_equispaced():
    np.testing.assert_allclose(equispaced(-1, 1, 3), [-1, 0, 1])
    np.testing.assert_allclose(equispaced(0, 1, 3, interior=True), [0.25, 0.5, 0.75])
    np.testing.assert_allclose(equispaced(0, 2, 1), [1.0])
    with pytest.raises(ConfigError):
        equispaced(0, 1, 0)


def test_tensor_grid_last_axis_fastest():
    points = tensor_grid(np.array([0.0, 1.0]), np.array([10.0, 20.0, 30.0]))
    assert points.shape == (6, 2)
    np.testing.assert_array_equal(points[:3, 0], [0, 0, 0])
    np.testing.assert_array_equal(points[:3, 1], [10, 20, 30])
