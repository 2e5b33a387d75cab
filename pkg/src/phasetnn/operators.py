"""Linear differential, boundary and nonlinear operator descriptions.

Operators only describe coefficient fields. The collocation assembly in
:mod:`phasetnn.cptnn` turns them into matrix rows, and :func:`apply_fd` applies
them to closed-form functions by finite differences.
"""
import attr
import numpy as np
from represent import ReprHelperMixin

from .base import ConfigError

DEFAULT_FD_STEP = 3e-5

# Fourth-order central stencils on offsets -2h..2h.
_FD_STENCILS = {
    1: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, 1),
    2: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2),
}


def evaluate_field(field, points):
    """Evaluate a coefficient field (callable or constant) at ``(N, d)`` points."""
    if callable(field):
        return np.broadcast_to(np.asarray(field(points), dtype=float), (len(points),))
    return np.full(len(points), float(field))


@attr.s(frozen=True, repr=False, eq=False)
class LinearOperator(ReprHelperMixin):
    """``L[u] = c0 u + sum_i c1_i d_i u + sum_i c2_i d_i^2 u``.

    Parameters:
        dim: Spatial dimension.
        value: Field ``c0`` or ``None``.
        first: Mapping of axis to field ``c1_i``.
        second: Mapping of axis to field ``c2_i``.
    """

    dim = attr.ib()
    value = attr.ib(default=None)
    first = attr.ib(factory=dict, converter=dict)
    second = attr.ib(factory=dict, converter=dict)

    def __attrs_post_init__(self):
        for axis in list(self.first) + list(self.second):
            if not 0 <= axis < self.dim:
                raise ConfigError(f"axis {axis} out of range for dimension {self.dim}")
        if self.value is None and not self.first and not self.second:
            raise ConfigError("a linear operator needs at least one coefficient field")

    def terms(self):
        """``(field, derivative)`` pairs, ``derivative`` being ``None`` or
        ``(axis, order)``."""
        if self.value is not None:
            yield self.value, None
        for axis, field in sorted(self.first.items()):
            yield field, (axis, 1)
        for axis, field in sorted(self.second.items()):
            yield field, (axis, 2)

    def apply(self, evaluate, points):
        """Apply to a function given as ``evaluate(points, derivative)``."""
        total = np.zeros(len(points))
        for field, derivative in self.terms():
            total += evaluate_field(field, points) * evaluate(points, derivative)
        return total

    def _repr_helper_(self, r):
        r.keyword_from_attr("dim")
        r.keyword_with_value("value", self.value is not None)
        r.keyword_with_value("first", sorted(self.first))
        r.keyword_with_value("second", sorted(self.second))


def identity(dim=1):
    """``L[u] = u``."""
    return LinearOperator(dim=dim, value=1.0)


def laplacian(dim, coefficient=1.0, value=None):
    """``coefficient * sum_i d_i^2 u (+ value * u)``."""
    return LinearOperator(
        dim=dim, value=value, second={axis: coefficient for axis in range(dim)}
    )


@attr.s(frozen=True, repr=False, eq=False)
class BoundaryOperator(ReprHelperMixin):
    """Boundary operator: the trace of ``u`` or a directional derivative."""

    kind = attr.ib(validator=attr.validators.in_(("value", "derivative")))
    direction = attr.ib(
        default=None, converter=attr.converters.optional(lambda d: np.asarray(d, float))
    )

    def __attrs_post_init__(self):
        if self.kind == "derivative" and self.direction is None:
            raise ConfigError("a derivative boundary operator needs a direction")

    def terms(self):
        if self.kind == "value":
            yield 1.0, None
            return
        for axis, component in enumerate(self.direction):
            if component != 0:
                yield float(component), (axis, 1)

    def apply(self, evaluate, points):
        total = np.zeros(len(points))
        for weight, derivative in self.terms():
            total += weight * evaluate(points, derivative)
        return total

    def _repr_helper_(self, r):
        r.keyword_from_attr("kind")
        if self.direction is not None:
            r.keyword_with_value("direction", self.direction.tolist())


def dirichlet():
    """``B[u] = u``."""
    return BoundaryOperator("value")


def directional_derivative(direction):
    """``B[u] = direction . grad u``."""
    return BoundaryOperator("derivative", direction)


@attr.s(frozen=True)
class NonlinearTerm:
    """Pointwise nonlinearity ``N(u, x)``, added to the linear operator."""

    function = attr.ib()

    def __call__(self, u, points):
        return np.asarray(self.function(u, points), dtype=float)


def finite_difference(function, points, axis, order, h=DEFAULT_FD_STEP):
    """Fourth-order central difference of ``function`` along ``axis``."""
    if order not in _FD_STENCILS:
        raise ConfigError(f"order must be 1 or 2, got {order}")
    points = np.asarray(points, dtype=float)
    weights, power = _FD_STENCILS[order]
    total = np.zeros(len(points))
    for offset, weight in zip(range(-2, 3), weights):
        if weight == 0:
            continue
        shifted = points.copy()
        shifted[:, axis] += offset * h
        total += weight * function(shifted)
    return total / h**power


def apply_fd(operator, function, points, h=DEFAULT_FD_STEP):
    """Apply a linear or boundary operator to a closed-form function."""

    def evaluate(at, derivative):
        if derivative is None:
            return function(at)
        axis, order = derivative
        return finite_difference(function, at, axis, order, h)

    return operator.apply(evaluate, np.asarray(points, dtype=float))
