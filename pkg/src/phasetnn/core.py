"""Shared numerical kernels.

Everything here is a pure function of its inputs and safe to call from
several threads at once.
"""

import attr
import numpy as np
import scipy.linalg
import scipy.special
from numpy.polynomial import Legendre
from represent import ReprHelperMixin

from .base import ConfigError, NumericalError


def sinc(x):
    """Normalised sinc, ``sin(pi x) / (pi x)`` with ``sinc(0) = 1``."""
    result = np.sinc(x)
    return float(result) if np.ndim(result) == 0 else result


@attr.s(frozen=True, repr=False, eq=False)
class QuadratureGrid(ReprHelperMixin):
    """Composite trapezoidal rule on ``[-C, C]``."""

    nodes = attr.ib()
    weights = attr.ib()
    spacing = attr.ib()
    half_width = attr.ib()

    def __len__(self):
        return len(self.nodes)

    def _repr_helper_(self, r):
        r.keyword_with_value("n", len(self.nodes))
        r.keyword_from_attr("half_width")
        r.keyword_from_attr("spacing")


def trapezoid_grid(n_nodes, half_width):
    """Equispaced trapezoidal quadrature on ``[-half_width, half_width]``.

    Parameters:
        n_nodes: Number of nodes ``N_s``, including both endpoints.
        half_width: The integration half width ``C``.
    """
    if n_nodes < 2:
        raise ConfigError(f"trapezoid_grid needs at least 2 nodes, got {n_nodes}")
    if not half_width > 0:
        raise ConfigError(f"half_width must be positive, got {half_width}")

    spacing = 2.0 * half_width / (n_nodes - 1)
    nodes = np.linspace(-half_width, half_width, n_nodes)
    weights = np.full(n_nodes, spacing)
    weights[0] = weights[-1] = spacing / 2
    return QuadratureGrid(
        nodes=nodes, weights=weights, spacing=spacing, half_width=float(half_width)
    )


def bessel_j0(x):
    """Bessel function of the first kind of order zero."""
    return scipy.special.j0(x)


def bessel_j1(x):
    """Bessel function of the first kind of order one."""
    return scipy.special.j1(x)


def bessel_j0_dd(x):
    """Second derivative of :func:`bessel_j0`.

    Uses ``J0''(x) = -J0(x) + J1(x) / x`` with the limit ``-1/2`` at zero.
    """
    x = np.asarray(x, dtype=float)
    zero = x == 0
    safe = np.where(zero, 1.0, x)
    result = np.where(zero, -0.5, -scipy.special.j0(x) + scipy.special.j1(x) / safe)
    return float(result) if result.ndim == 0 else result


def ppr_endpoint_derivatives(x, values, z, n_derivatives, n_stencil=None):
    """Recover ``f(z), f'(z), ..., f^(Q-1)(z)`` from samples.

    A degree ``Q - 1`` least-squares polynomial is fitted on the ``n_stencil``
    samples nearest to ``z`` (``2Q`` by default, fewer if the sample set is
    smaller). The fit is done in the Legendre basis on the stencil mapped to
    ``[-1, 1]``; derivatives are taken from that series at ``z``.

    Parameters:
        x: Sample abscissae.
        values: Sample values, same length as ``x``.
        z: Point at which derivatives are recovered.
        n_derivatives: ``Q``, the number of derivatives (order 0 included).
        n_stencil: Stencil size, at least ``Q``.

    Returns:
        Array of length ``Q``.
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    q = int(n_derivatives)
    if q < 1:
        raise ConfigError(f"n_derivatives must be at least 1, got {n_derivatives}")
    if x.shape != values.shape or x.ndim != 1:
        raise ConfigError("x and values must be 1D arrays of equal length")
    if len(np.unique(x)) != len(x):
        raise ConfigError("duplicate abscissae in PPR samples")

    wanted = 2 * q if n_stencil is None else int(n_stencil)
    n_stencil = min(wanted, len(x))
    if n_stencil < q:
        raise ConfigError(
            f"PPR needs at least {q} stencil points, only {n_stencil} available"
        )

    nearest = np.argsort(np.abs(x - z), kind="stable")[:n_stencil]
    offsets = x[nearest] - z
    if n_stencil == 1:
        return values[nearest].copy()

    series = Legendre.fit(offsets, values[nearest], q - 1)
    return np.array([series.deriv(k)(0.0) if k else series(0.0) for k in range(q)])


@attr.s(frozen=True, repr=False, eq=False)
class LstsqReport(ReprHelperMixin):
    """Solution and diagnostics of a dense least-squares solve."""

    coefficients = attr.ib()
    residual_norm = attr.ib()
    effective_rank = attr.ib()
    singular_value_ratio = attr.ib()
    shape = attr.ib()

    def _repr_helper_(self, r):
        r.keyword_from_attr("shape")
        r.keyword_from_attr("residual_norm")
        r.keyword_from_attr("effective_rank")
        r.keyword_from_attr("singular_value_ratio")


def default_rank_tol(n_rows, n_cols):
    return np.finfo(float).eps * max(n_rows, n_cols)


def lstsq_min_norm(matrix, rhs, rank_tol=None, overwrite=False):
    """Minimum-norm least-squares solution of ``matrix @ x ~= rhs``.

    Singular values below ``rank_tol * sigma_max`` are truncated (SVD based,
    LAPACK ``gelsd``).

    Parameters:
        matrix: Real ``N x M`` array.
        rhs: Real vector of length ``N``.
        rank_tol: Relative singular value cutoff. Defaults to machine epsilon
            times ``max(N, M)``.
        overwrite: Allow LAPACK to destroy ``matrix`` to save memory. The
            residual is then not recomputed against the original matrix.

    Raises:
        phasetnn.base.NumericalError: Non-finite entries.
    """
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if matrix.ndim != 2 or min(matrix.shape) < 1:
        raise ConfigError(f"matrix must be a non-empty 2D array, got {matrix.shape}")
    if rhs.shape != (matrix.shape[0],):
        raise ConfigError(
            f"rhs shape {rhs.shape} does not match matrix rows {matrix.shape[0]}"
        )
    if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(rhs))):
        raise NumericalError("least-squares system contains non-finite entries")

    n_rows, n_cols = matrix.shape
    if rank_tol is None:
        rank_tol = default_rank_tol(n_rows, n_cols)

    solution, _, rank, singular = scipy.linalg.lstsq(
        matrix,
        rhs,
        cond=rank_tol,
        lapack_driver="gelsd",
        check_finite=False,
        overwrite_a=overwrite,
    )

    if overwrite:
        residual_norm = float("nan")
    else:
        residual_norm = float(np.linalg.norm(matrix @ solution - rhs))
    if rank > 0 and singular[0] > 0:
        ratio = float(singular[rank - 1] / singular[0])
    else:
        ratio = 0.0

    return LstsqReport(
        coefficients=solution,
        residual_norm=residual_norm,
        effective_rank=int(rank),
        singular_value_ratio=ratio,
        shape=(n_rows, n_cols),
    )


class MinNormSolver:
    """Truncated SVD of a fixed matrix for repeated least-squares solves.

    Each :meth:`solve` costs two matrix-vector products, which is what
    fixed-point iterations with a constant system matrix need.
    """

    def __init__(self, matrix, rank_tol=None):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or min(matrix.shape) < 1:
            raise ConfigError(f"matrix must be a non-empty 2D array, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise NumericalError("least-squares system contains non-finite entries")
        self.matrix = matrix
        self.shape = matrix.shape
        if rank_tol is None:
            rank_tol = default_rank_tol(*matrix.shape)
        u, s, vt = scipy.linalg.svd(matrix, full_matrices=False, check_finite=False)
        rank = int(np.count_nonzero(s > rank_tol * s[0])) if s[0] > 0 else 0
        self.effective_rank = rank
        self.singular_value_ratio = float(s[rank - 1] / s[0]) if rank else 0.0
        self._u = u[:, :rank]
        self._s = s[:rank]
        self._vt = vt[:rank]

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.shape[0],):
            raise ConfigError(
                f"rhs shape {rhs.shape} does not match matrix rows {self.shape[0]}"
            )
        if not np.all(np.isfinite(rhs)):
            raise NumericalError("least-squares right-hand side is not finite")
        solution = self._vt.T @ ((self._u.T @ rhs) / self._s)
        return LstsqReport(
            coefficients=solution,
            residual_norm=float(np.linalg.norm(self.matrix @ solution - rhs)),
            effective_rank=self.effective_rank,
            singular_value_ratio=self.singular_value_ratio,
            shape=self.shape,
        )


def equispaced(lower, upper, n_points, interior=False):
    """``n_points`` equispaced values on ``[lower, upper]``.

    With ``interior=True`` the endpoints are excluded and the points are the
    interior nodes of an ``n_points + 2`` grid.
    """
    if n_points < 1:
        raise ConfigError(f"n_points must be positive, got {n_points}")
    if interior:
        return np.linspace(lower, upper, n_points + 2)[1:-1]
    if n_points == 1:
        return np.array([(lower + upper) / 2])
    return np.linspace(lower, upper, n_points)


def tensor_grid(*axes):
    """Cartesian product of 1D ``axes`` as an ``(N, d)`` point array.

    The last axis varies fastest.
    """
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)
