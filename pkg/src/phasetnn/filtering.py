"""Frequency-band decomposition by sinc-kernel convolution.

A target ``f`` on ``[-1, 1]^d`` is extended to an auxiliary function ``F`` that
decays rapidly outside the box, convolved with the inverse transform of each
partition-of-unity band filter (a modulated sinc) by the trapezoidal rule on
``[-C, C]^d``, and phase shifted to baseband.
"""
import attr
import numpy as np
from represent import ReprHelperMixin

from .base import ConfigError, logger
from .core import ppr_endpoint_derivatives, sinc

DECAY_COEFFICIENT = 10.0
DEFAULT_DECAY_ORDER = 6

EXTENSION_MODES = ("explicit", "sampled", "raw")


def _per_axis(value, dim, name):
    values = tuple(np.atleast_1d(value).tolist())
    if len(values) == 1:
        values = values * dim
    if len(values) != dim:
        raise ConfigError(f"{name} needs one value per axis, got {value!r}")
    return values


@attr.s(frozen=True, repr=False)
class FrequencyGrid(ReprHelperMixin):
    """Band centres ``kappa_j = j * delta_k`` for ``j`` in ``-K..K`` per axis."""

    delta_k = attr.ib(converter=tuple)
    half_count = attr.ib(converter=tuple)

    def __attrs_post_init__(self):
        if len(self.delta_k) != len(self.half_count) or len(self.delta_k) not in (1, 2):
            raise ConfigError("FrequencyGrid supports 1 or 2 axes")
        if any(not dk > 0 for dk in self.delta_k):
            raise ConfigError(f"delta_k must be positive, got {self.delta_k}")
        if any(int(k) != k or k < 0 for k in self.half_count):
            raise ConfigError(f"K must be a non-negative integer, got {self.half_count}")

    @property
    def dim(self):
        return len(self.delta_k)

    def indices(self, axis=0):
        k = int(self.half_count[axis])
        return np.arange(-k, k + 1)

    def centers(self, axis=0):
        return self.indices(axis) * self.delta_k[axis]

    def bands(self):
        """All band indices: ints in 1D, ``(j1, j2)`` tuples in 2D."""
        if self.dim == 1:
            return [int(j) for j in self.indices(0)]
        return [(int(j1), int(j2)) for j1 in self.indices(0) for j2 in self.indices(1)]

    def kappa(self, band):
        """Centre frequency vector of ``band``."""
        band = np.atleast_1d(band)
        return np.array([j * dk for j, dk in zip(band, self.delta_k)], dtype=float)

    def _repr_helper_(self, r):
        r.keyword_from_attr("delta_k")
        r.keyword_with_value("K", self.half_count)


def frequency_grid(delta_k, half_count, dim=1):
    """Build a :class:`FrequencyGrid`, broadcasting scalars over ``dim`` axes."""
    return FrequencyGrid(
        delta_k=_per_axis(delta_k, dim, "delta_k"),
        half_count=tuple(int(k) for k in _per_axis(half_count, dim, "K")),
    )


def band_index(grid, k, axis=0):
    """Index of the band owning frequency ``k``, or ``None`` if uncovered.

    Bands own ``[kappa_j - dk/2, kappa_j + dk/2)`` except the topmost band,
    which also owns its upper edge.
    """
    dk = grid.delta_k[axis]
    top = int(grid.half_count[axis])
    j = int(np.floor(k / dk + 0.5))
    if j == top + 1 and k == (top + 0.5) * dk:
        j = top
    if -top <= j <= top:
        return j
    return None


def pou_eval(grid, k):
    """Partition-of-unity values ``phi_j(k)`` for every band of a 1D grid."""
    if grid.dim != 1:
        raise ConfigError("pou_eval needs a 1D frequency grid")
    top = int(grid.half_count[0])
    values = np.zeros(2 * top + 1)
    j = band_index(grid, k)
    if j is not None:
        values[j + top] = 1.0
    return values


def kernel_eval(grid, band, x):
    """Band kernel ``dk * exp(2 pi i kappa_j x) * sinc(dk x)`` in 1D."""
    if grid.dim != 1:
        raise ConfigError("kernel_eval needs a 1D frequency grid")
    dk = grid.delta_k[0]
    kappa = band * dk
    x = np.asarray(x, dtype=float)
    return dk * np.exp(2j * np.pi * kappa * x) * sinc(dk * x)


@attr.s(frozen=True, repr=False, eq=False)
class AuxiliaryFunction(ReprHelperMixin):
    """Extension ``F`` of a target known on ``[-1, 1]^d``.

    Call it with an array of points (``(N,)`` in 1D, ``(N, 2)`` in 2D).
    """

    mode = attr.ib(validator=attr.validators.in_(EXTENSION_MODES))
    decay_order = attr.ib()
    dim = attr.ib()
    evaluator = attr.ib()
    endpoint_derivatives = attr.ib(default=None)

    def __call__(self, points):
        return self.evaluator(np.asarray(points, dtype=float))

    def _repr_helper_(self, r):
        r.keyword_from_attr("mode")
        r.keyword_from_attr("decay_order")
        r.keyword_from_attr("dim")


def _outside_distance(x):
    return np.maximum(np.abs(x) - 1.0, 0.0)


def decay_factor(distance, decay_order):
    """``exp(-10 * distance**Q)``."""
    return np.exp(-DECAY_COEFFICIENT * distance**decay_order)


def extend_explicit(function, decay_order=DEFAULT_DECAY_ORDER, dim=1):
    """Extension of a target with a closed form valid everywhere.

    ``F = f`` inside the box and ``f`` times a decay factor in the distance to
    the box outside it. In 2D the per-axis distances enter one exponent.
    """
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}")

    def evaluate(points):
        if dim == 1:
            return function(points) * decay_factor(_outside_distance(points), decay_order)
        exponent = sum(
            _outside_distance(points[:, axis]) ** decay_order for axis in range(2)
        )
        return function(points) * np.exp(-DECAY_COEFFICIENT * exponent)

    return AuxiliaryFunction(
        mode="explicit", decay_order=decay_order, dim=dim, evaluator=evaluate
    )


def _check_samples(x, values, minimum):
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != values.shape:
        raise ConfigError("samples must be two 1D arrays of equal length")
    if len(x) < minimum:
        raise ConfigError(f"need at least {minimum} samples, got {len(x)}")
    order = np.argsort(x, kind="stable")
    x, values = x[order], values[order]
    tol = 1e-12
    if x[0] > -1 + tol or x[-1] < 1 - tol:
        raise ConfigError("samples must cover [-1, 1] including both endpoints")
    return x, values


def extend_sampled(x, values, decay_order=DEFAULT_DECAY_ORDER, n_stencil=None):
    """Extension of sampled data on ``[-1, 1]``.

    Outside the interval ``F`` is the degree ``Q - 1`` Taylor polynomial at the
    nearer endpoint, with derivatives recovered by
    :func:`~phasetnn.core.ppr_endpoint_derivatives`, times the decay factor.
    The recovery stencil defaults to the ``Q + 1`` samples nearest each
    endpoint.
    Inside, ``F`` interpolates the samples linearly, so it reproduces them
    exactly at the sample abscissae.
    """
    x, values = _check_samples(x, values, 2 * decay_order)
    if n_stencil is None:
        n_stencil = decay_order + 1
    q = np.arange(decay_order)
    factorials = np.cumprod(np.concatenate([[1.0], q[1:]]))
    derivatives = {
        z: ppr_endpoint_derivatives(x, values, z, decay_order, n_stencil)
        for z in (-1.0, 1.0)
    }
    taylor = {z: derivatives[z] / factorials for z in derivatives}
    logger.debug(
        "PPR endpoint derivatives: left={}, right={}",
        derivatives[-1.0],
        derivatives[1.0],
    )

    def evaluate(points):
        points = np.asarray(points, dtype=float)
        result = np.interp(points, x, values)
        for z, side in ((-1.0, points < -1.0), (1.0, points > 1.0)):
            if np.any(side):
                h = points[side] - z
                poly = np.polynomial.polynomial.polyval(h, taylor[z])
                result[side] = poly * decay_factor(np.abs(h), decay_order)
        return result

    return AuxiliaryFunction(
        mode="sampled",
        decay_order=decay_order,
        dim=1,
        evaluator=evaluate,
        endpoint_derivatives=derivatives,
    )


def extend_raw(function=None, samples=None):
    """Truncation of the target to zero outside ``[-1, 1]``.

    This is the unextended baseline filter; it is only meant for comparison.
    """
    if (function is None) == (samples is None):
        raise ConfigError("extend_raw needs exactly one of function or samples")
    if samples is not None:
        x, values = _check_samples(*samples, minimum=2)

        def inside(points):
            return np.interp(points, x, values)
    else:
        inside = function

    def evaluate(points):
        points = np.asarray(points, dtype=float)
        return np.where(np.abs(points) <= 1.0, inside(points), 0.0)

    return AuxiliaryFunction(mode="raw", decay_order=0, dim=1, evaluator=evaluate)


def check_sampled_quadrature(sample_x, quad, tol=1e-9):
    """Require every quadrature node in ``[-1, 1]`` to be a sample abscissa."""
    sample_x = np.sort(np.asarray(sample_x, dtype=float))
    inside = quad.nodes[np.abs(quad.nodes) <= 1.0 + tol]
    pos = np.clip(np.searchsorted(sample_x, inside), 1, len(sample_x) - 1)
    nearest = np.minimum(
        np.abs(sample_x[pos] - inside), np.abs(sample_x[pos - 1] - inside)
    )
    if np.any(nearest > tol * max(1.0, quad.half_width)):
        raise ConfigError(
            "quadrature nodes inside [-1, 1] must coincide with sample abscissae "
            f"(spacing {quad.spacing:g}); choose N_s and C accordingly"
        )


@attr.s(frozen=True, repr=False, eq=False)
class ShiftedComponentData(ReprHelperMixin):
    """Phase-shifted band component sampled at evaluation points."""

    band = attr.ib()
    kappa = attr.ib()
    points = attr.ib()
    values = attr.ib()
    rms_real = attr.ib()
    rms_imag = attr.ib()

    @classmethod
    def from_values(cls, band, kappa, points, values):
        values = np.asarray(values, dtype=complex)
        if len(values) != len(points):
            raise ConfigError("one value per evaluation point is required")
        return cls(
            band=band,
            kappa=np.asarray(kappa, dtype=float),
            points=points,
            values=values,
            rms_real=rms(values.real),
            rms_imag=rms(values.imag),
        )

    def _repr_helper_(self, r):
        r.keyword_from_attr("band")
        r.keyword_with_value("n_points", len(self.values))
        r.keyword_from_attr("rms_real")
        r.keyword_from_attr("rms_imag")


def rms(values):
    """Root mean square of a non-empty vector."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ConfigError("rms of an empty vector is undefined")
    return float(np.sqrt(np.mean(values * values)))


class BandFilter1D:
    """Shifted band data for one auxiliary function at fixed points.

    The sinc matrix ``sinc(dk (x_xi - x_s))`` does not depend on the band, so
    it is built once and every band costs one matrix-vector product.
    """

    def __init__(self, aux, grid, points, quad):
        if grid.dim != 1 or aux.dim != 1:
            raise ConfigError("BandFilter1D needs a 1D grid and auxiliary function")
        self.grid = grid
        self.points = np.asarray(points, dtype=float).ravel()
        self.quad = quad
        self.delta_k = grid.delta_k[0]
        self._weighted = aux(quad.nodes) * quad.weights
        self._sinc = np.sinc(self.delta_k * (self.points[:, None] - quad.nodes[None, :]))

    def values(self, band):
        kappa = band * self.delta_k
        phase = 2 * np.pi * kappa * self.quad.nodes
        real = self._sinc @ (self._weighted * np.cos(phase))
        imag = self._sinc @ (self._weighted * -np.sin(phase))
        return self.delta_k * (real + 1j * imag)

    def component(self, band):
        return ShiftedComponentData.from_values(
            band, self.grid.kappa(band), self.points, self.values(band)
        )


def shifted_component_data(aux, grid, band, points, quad):
    """Phase-shifted training data of one band in 1D.

    ``e^{-2 pi i kappa_j x} sum_s phi_j^v(x - x_s) F(x_s) w_s`` at each point.
    """
    return BandFilter1D(aux, grid, points, quad).component(band)


class SeparableBandFilter2D:
    """Shifted band data in 2D using the tensor-product kernel.

    The double quadrature sum factorises into a contraction over the second
    axis followed by one over the first. Points are reduced to their unique
    coordinates per axis, so tensor grids of evaluation points cost
    ``O(U1 * Ns1 * U2)`` per band after an ``O(Ns1 * Ns2 * U2)`` step shared by
    every band with the same ``j2``.
    """

    def __init__(self, aux, grid, points, quads):
        if grid.dim != 2 or aux.dim != 2:
            raise ConfigError("SeparableBandFilter2D needs a 2D grid and function")
        self.grid = grid
        self.points = np.asarray(points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ConfigError("2D evaluation points must have shape (N, 2)")
        self.quads = tuple(quads)
        if len(self.quads) != 2:
            raise ConfigError("one quadrature grid per axis is required")

        q1, q2 = self.quads
        mesh = np.stack(np.meshgrid(q1.nodes, q2.nodes, indexing="ij"), axis=-1)
        self._field = aux(mesh.reshape(-1, 2)).reshape(len(q1), len(q2))

        self._unique = []
        self._inverse = []
        self._sinc = []
        for axis, quad in enumerate(self.quads):
            unique, inverse = np.unique(self.points[:, axis], return_inverse=True)
            self._unique.append(unique)
            self._inverse.append(inverse.ravel())
            dk = grid.delta_k[axis]
            self._sinc.append(np.sinc(dk * (unique[:, None] - quad.nodes[None, :])))

    def _phase(self, axis, band_axis):
        quad = self.quads[axis]
        kappa = band_axis * self.grid.delta_k[axis]
        return quad.weights * np.exp(-2j * np.pi * kappa * quad.nodes)

    def column(self, j2):
        """Half contraction over the second axis for band column ``j2``."""
        return self._field @ (self._phase(1, j2)[:, None] * self._sinc[1].T)

    def values(self, band, column=None):
        j1, j2 = band
        if column is None:
            column = self.column(j2)
        grid_values = (self._sinc[0] * self._phase(0, j1)) @ column
        scale = self.grid.delta_k[0] * self.grid.delta_k[1]
        return scale * grid_values[self._inverse[0], self._inverse[1]]

    def component(self, band, column=None):
        return ShiftedComponentData.from_values(
            tuple(band), self.grid.kappa(band), self.points, self.values(band, column)
        )


def shifted_component_data_2d(aux, grid, band, points, quads):
    """Phase-shifted training data of one band in 2D (separable evaluation)."""
    return SeparableBandFilter2D(aux, grid, points, quads).component(band)


def filter_reconstruct(components, n_points=None):
    """Sum of unshifted components ``sum_j e^{2 pi i kappa_j . x} values_j``.

    All components must share evaluation points.

    Returns:
        ``(real part, |imaginary part|)`` over the shared points. With no
        components, zeros of length ``n_points`` (or scalars if not given).
    """
    components = list(components)
    if not components:
        if n_points is None:
            return 0.0, 0.0
        return np.zeros(n_points), np.zeros(n_points)

    points = np.asarray(components[0].points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    total = np.zeros(len(points), dtype=complex)
    for component in components:
        phase = 2 * np.pi * (points @ np.atleast_1d(component.kappa))
        total += np.exp(1j * phase) * component.values
    return total.real, np.abs(total.imag)
