"""Transferable neural feature space.

A feature is the ridge function ``tanh(gamma_m * (a_m . x + r_m))`` with a unit
direction ``a_m``, an offset ``r_m`` and a shape parameter ``gamma_m``. Only
the output coefficients of a feature space are ever fitted.
"""
import attr
import numpy as np
from represent import ReprHelperMixin

from .base import ConfigError, generators

DEFAULT_GAMMA = 2.0


def _as_points(points, dim):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1 and dim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[1] != dim:
        raise ConfigError(
            f"expected points of dimension {dim}, got array of shape {points.shape}"
        )
    return points


@attr.s(frozen=True, repr=False, eq=False)
class FeatureBasis(ReprHelperMixin):
    """Fixed random tanh ridge features.

    Parameters:
        directions: ``(M, d)`` unit vectors ``a_m``.
        offsets: ``(M,)`` offsets ``r_m``.
        shapes: ``(M,)`` shape parameters ``gamma_m``.
        include_constant: Prepend the constant feature ``1``.
        seed: Seed the parameters were drawn from, or ``None``.
        domain: Optional ``(lower, upper)`` box. When set, points are mapped
            affinely onto ``[-1, 1]^d`` before evaluation.
        raw_weights: Hidden weights as drawn, for bases built from weights.
        raw_biases: Hidden biases as drawn.
    """

    directions = attr.ib(converter=np.asarray)
    offsets = attr.ib(converter=np.asarray)
    shapes = attr.ib(converter=np.asarray)
    include_constant = attr.ib(default=True)
    seed = attr.ib(default=None)
    domain = attr.ib(default=None)
    raw_weights = attr.ib(default=None)
    raw_biases = attr.ib(default=None)

    def __attrs_post_init__(self):
        if self.directions.ndim != 2:
            raise ConfigError("directions must be an (M, d) array")
        m = self.directions.shape[0]
        if self.offsets.shape != (m,) or self.shapes.shape != (m,):
            raise ConfigError("offsets and shapes must have one entry per direction")

    @classmethod
    def from_weights(cls, weights, biases, include_constant=True, seed=None):
        """Build a basis from hidden weights ``w_m`` and biases ``b_m``.

        Uses ``a = w / |w|``, ``r = b / |w|``, ``gamma = |w|``.
        """
        weights = np.asarray(weights, dtype=float)
        biases = np.asarray(biases, dtype=float)
        if weights.ndim == 1:
            weights = weights[:, None]
        shapes = np.linalg.norm(weights, axis=1)
        if np.any(shapes == 0):
            raise ConfigError("hidden weights must be non-zero")
        return cls(
            directions=weights / shapes[:, None],
            offsets=biases / shapes,
            shapes=shapes,
            include_constant=include_constant,
            seed=seed,
            raw_weights=weights,
            raw_biases=biases,
        )

    @property
    def n_features(self):
        return self.directions.shape[0]

    @property
    def dim(self):
        return self.directions.shape[1]

    @property
    def n_columns(self):
        return self.n_features + int(self.include_constant)

    @property
    def weights(self):
        if self.raw_weights is not None:
            return self.raw_weights
        return self.shapes[:, None] * self.directions

    @property
    def biases(self):
        if self.raw_biases is not None:
            return self.raw_biases
        return self.shapes * self.offsets

    def _scale(self):
        """Per-axis chain-rule factor of the optional domain map."""
        if self.domain is None:
            return np.ones(self.dim)
        lower, upper = (np.asarray(b, dtype=float) for b in self.domain)
        return 2.0 / (upper - lower)

    def _map(self, points):
        if self.domain is None:
            return points
        lower = np.asarray(self.domain[0], dtype=float)
        return (points - lower) * self._scale() - 1.0

    def activations(self, points):
        """``tanh`` of the ridge arguments, shape ``(N, M)``."""
        points = self._map(_as_points(points, self.dim))
        return np.tanh(self.shapes * (points @ self.directions.T + self.offsets))

    def _repr_helper_(self, r):
        r.keyword_with_value("n_features", self.n_features)
        r.keyword_with_value("dim", self.dim)
        r.keyword_from_attr("include_constant")
        r.keyword_from_attr("seed")


def sample_feature_basis(
    n_features, dim, gamma=DEFAULT_GAMMA, seed=0, include_constant=True, stream=()
):
    """Draw a feature basis.

    Directions are normalised standard Gaussian vectors, offsets are uniform on
    ``[0, 1]`` and every shape parameter equals ``gamma``. Directions and
    offsets come from separate Philox substreams of ``(seed, *stream)``.

    Parameters:
        n_features: Number of tanh features ``M``.
        dim: Input dimension ``d``.
        gamma: Shape parameter shared by all features.
        seed: Master seed.
        include_constant: Prepend the constant feature.
        stream: Extra integers selecting an independent substream, e.g. a
            band index.
    """
    if n_features < 1:
        raise ConfigError(f"n_features must be at least 1, got {n_features}")
    if dim < 1:
        raise ConfigError(f"dim must be at least 1, got {dim}")
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")

    direction_rng, offset_rng = generators(seed, *stream, count=2)
    gauss = direction_rng.standard_normal((n_features, dim))
    directions = gauss / np.linalg.norm(gauss, axis=1, keepdims=True)
    offsets = offset_rng.uniform(0.0, 1.0, n_features)
    return FeatureBasis(
        directions=directions,
        offsets=offsets,
        shapes=np.full(n_features, float(gamma)),
        include_constant=include_constant,
        seed=seed,
    )


def rfm_baseline_basis(n_features, dim, r_max, seed=0, include_constant=True):
    """Random feature method initialisation.

    Hidden weights and biases are uniform on ``[-r_max, r_max]`` and stored
    through the ``(a, r, gamma)`` parameterization.
    """
    if not r_max > 0:
        raise ConfigError(f"r_max must be positive, got {r_max}")
    if n_features < 1 or dim < 1:
        raise ConfigError("n_features and dim must be at least 1")

    weight_rng, bias_rng = generators(seed, count=2)
    weights = weight_rng.uniform(-r_max, r_max, (n_features, dim))
    biases = bias_rng.uniform(-r_max, r_max, n_features)
    return FeatureBasis.from_weights(
        weights, biases, include_constant=include_constant, seed=seed
    )


def feature_matrix(basis, points):
    """Evaluate every feature at ``points``.

    Returns:
        ``(N, n_columns)`` array; column 0 is all ones when the basis includes
        the constant feature.
    """
    t = basis.activations(points)
    if basis.include_constant:
        return np.hstack([np.ones((t.shape[0], 1)), t])
    return t


def feature_derivatives(basis, points, axis, order):
    """First or second partial derivative of every feature along ``axis``."""
    if not 0 <= axis < basis.dim:
        raise ConfigError(f"axis {axis} out of range for dimension {basis.dim}")
    if order not in (1, 2):
        raise ConfigError(f"order must be 1 or 2, got {order}")

    t = basis.activations(points)
    slope = basis.shapes * basis.directions[:, axis] * basis._scale()[axis]
    sech2 = 1.0 - t * t
    if order == 1:
        values = slope * sech2
    else:
        values = -2.0 * slope**2 * t * sech2
    if basis.include_constant:
        return np.hstack([np.zeros((t.shape[0], 1)), values])
    return values
