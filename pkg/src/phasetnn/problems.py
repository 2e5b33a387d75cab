"""Benchmark target functions and manufactured PDE problems.

Exact solutions, source terms and boundary or interface data are closed forms.
:func:`consistency_error` checks every problem against finite differences of
its exact solution.
"""
import math

import attr
import numpy as np
from represent import ReprHelperMixin

from .base import ConfigError, InterfaceGeometryError
from .core import bessel_j0, bessel_j0_dd, equispaced, tensor_grid
from .operators import (
    LinearOperator,
    NonlinearTerm,
    apply_fd,
    directional_derivative,
    dirichlet,
    evaluate_field,
    finite_difference,
    laplacian,
)


def _column(points, axis=0):
    points = np.asarray(points, dtype=float)
    if points.ndim == 2:
        return points[:, axis]
    return points


@attr.s(frozen=True, repr=False, eq=False)
class BenchmarkFunction(ReprHelperMixin):
    """Closed-form approximation target.

    Parameters:
        id: Registry name.
        dim: 1 or 2.
        domain: ``(lower, upper)`` box.
        evaluator: Vectorised closed form; ``(N,)`` in 1D, ``(N, 2)`` in 2D.
        params: Parameters the function was built with.
        pieces: For piecewise targets, ``(lower, upper, evaluator)`` per smooth
            piece. Each piece is closed on the left and open on the right,
            except the last.
    """

    id = attr.ib()
    dim = attr.ib()
    domain = attr.ib()
    evaluator = attr.ib()
    params = attr.ib(factory=dict)
    pieces = attr.ib(default=None)

    @property
    def breakpoints(self):
        if self.pieces is None:
            return ()
        return tuple(lower for lower, _, _ in self.pieces[1:])

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if self.dim == 1:
            return self.evaluator(_column(points))
        return self.evaluator(points)

    def _repr_helper_(self, r):
        r.keyword_from_attr("id")
        r.keyword_from_attr("dim")
        if self.params:
            r.keyword_from_attr("params")


def _f1(a=30.0):
    if not a > 0:
        raise ConfigError(f"f1 needs a > 0, got {a}")

    def f1(x):
        return (1 - 0.5 * x**2) * np.cos(a * (x + 0.5 * x**3))

    return f1, {"a": a}


def _f3_left(x):
    return np.sin(x) + np.sin(3 * x)


def _f3_right(x):
    return np.sin(23 * x) + np.sin(137 * x) + np.sin(203 * x)


def _f4(points):
    x1, x2 = points[:, 0], points[:, 1]
    return (
        (1 - 0.5 * x1**2)
        * np.cos(20 * (x1 + 0.5 * x1**3))
        * (1 - 0.5 * x2**2)
        * np.cos(20 * (x2 + 0.5 * x2**3))
    )


def _f5(points):
    x1, x2 = points[:, 0], points[:, 1]
    return (
        x1 * np.cos(2 * np.pi * 5 * (x1 + x2))
        + (x1 * x2) ** 3
        + np.exp(np.sin(7 * x1 * x2))
    )


_UNIT_1D = ((-1.0,), (1.0,))
_UNIT_2D = ((-1.0, -1.0), (1.0, 1.0))

_SIMPLE_BENCHMARKS = {
    "f2": (1, lambda x: x * np.sin(100 * x)),
    "f4": (2, _f4),
    "f5": (2, _f5),
    "x3": (1, lambda x: x**3),
    "exp100": (1, lambda x: 100.0**x),
    "sin2pi": (1, lambda x: np.sin(2 * np.pi * x)),
    "sin_exp": (1, lambda x: np.sin(2 * x + 1) + 0.2 * np.exp(1.3 * x)),
}

BENCHMARK_IDS = ("f1", "f3") + tuple(_SIMPLE_BENCHMARKS)

# Filtering comparison targets, in table order.
FILTER_BENCHMARK_IDS = ("x3", "exp100", "sin2pi", "sin_exp", "f1", "f2")


def make_benchmark(id, **params):
    """Build a registered approximation target.

    Parameters:
        id: One of :data:`BENCHMARK_IDS`.
        params: ``a`` for ``f1`` (default 30).
    """
    if id == "f1":
        evaluator, used = _f1(**params)
        return BenchmarkFunction(
            id=id, dim=1, domain=_UNIT_1D, evaluator=evaluator, params=used
        )
    if params:
        raise ConfigError(f"{id} takes no parameters, got {sorted(params)}")
    if id == "f3":

        def f3(x):
            return np.where(x < 0, _f3_left(x), _f3_right(x))

        return BenchmarkFunction(
            id=id,
            dim=1,
            domain=_UNIT_1D,
            evaluator=f3,
            pieces=((-1.0, 0.0, _f3_left), (0.0, 1.0, _f3_right)),
        )
    try:
        dim, evaluator = _SIMPLE_BENCHMARKS[id]
    except KeyError:
        raise ConfigError(f"unknown benchmark {id!r}, expected one of {BENCHMARK_IDS}")
    return BenchmarkFunction(
        id=id, dim=dim, domain=_UNIT_1D if dim == 1 else _UNIT_2D, evaluator=evaluator
    )


@attr.s(frozen=True, repr=False, eq=False)
class BoundarySegment(ReprHelperMixin):
    """Part of the boundary with its operator and data.

    ``sampler(n)`` returns ``(n, d)`` points on the segment (a single point in
    1D whatever ``n``).
    """

    name = attr.ib()
    operator = attr.ib()
    data = attr.ib()
    sampler = attr.ib()

    def _repr_helper_(self, r):
        r.positional_from_attr("name")
        r.keyword_from_attr("operator")


@attr.s(frozen=True, repr=False)
class CircularInterface(ReprHelperMixin):
    """Circle separating an inner subdomain from an outer one.

    Points strictly inside belong to the inner subdomain, points on the circle
    to the outer one. Normals point outwards.
    """

    center = attr.ib(converter=tuple)
    radius = attr.ib()
    tolerance = attr.ib(default=1e-10)

    def _offsets(self, points):
        return np.asarray(points, dtype=float) - np.asarray(self.center)

    def inside(self, points):
        offsets = self._offsets(points)
        return np.sum(offsets * offsets, axis=1) < self.radius**2

    def check_on_curve(self, points):
        distance = np.linalg.norm(self._offsets(points), axis=1)
        error = np.max(np.abs(distance - self.radius), initial=0.0)
        if error > self.tolerance:
            raise InterfaceGeometryError(
                f"interface points are up to {error:.3e} away from the circle"
            )

    def normals(self, points):
        offsets = self._offsets(points)
        return offsets / np.linalg.norm(offsets, axis=1, keepdims=True)

    def sample(self, n):
        angles = 2 * np.pi * np.arange(n) / n
        return np.asarray(self.center) + self.radius * np.stack(
            [np.cos(angles), np.sin(angles)], axis=-1
        )

    def _repr_helper_(self, r):
        r.keyword_from_attr("center")
        r.keyword_from_attr("radius")


@attr.s(frozen=True, eq=False)
class Subdomain:
    """Smooth piece of a piecewise problem."""

    operator = attr.ib()
    source = attr.ib()
    exact = attr.ib()
    beta = attr.ib()


@attr.s(frozen=True, eq=False)
class InterfaceSpec:
    """Interface conditions ``[u] = value_jump`` and
    ``[beta grad u . n] = flux_jump``, with ``[v]`` outer minus inner."""

    geometry = attr.ib()
    beta = attr.ib()
    value_jump = attr.ib()
    flux_jump = attr.ib()
    points = attr.ib(default=None)

    def with_points(self, n):
        return attr.evolve(self, points=self.geometry.sample(n))


@attr.s(frozen=True, repr=False, eq=False)
class PdeSpec(ReprHelperMixin):
    """Boundary value problem ``L[u] + N(u) = f`` with a known solution.

    Parameters:
        id: Registry name.
        dim: Input dimension (space-time problems count time as an axis).
        domain: ``(lower, upper)`` box.
        operator: :class:`~phasetnn.operators.LinearOperator`, ``None`` for
            interface problems.
        source: Field ``f``.
        exact: Exact solution.
        boundary: :class:`BoundarySegment` list.
        nonlinear: Optional :class:`~phasetnn.operators.NonlinearTerm`.
        subdomains: ``(inner, outer)`` :class:`Subdomain` for interface problems.
        interface: :class:`InterfaceSpec` for interface problems.
        params: Parameters the problem was built with.
    """

    id = attr.ib()
    dim = attr.ib()
    domain = attr.ib()
    operator = attr.ib()
    source = attr.ib()
    exact = attr.ib()
    boundary = attr.ib()
    nonlinear = attr.ib(default=None)
    subdomains = attr.ib(default=None)
    interface = attr.ib(default=None)
    params = attr.ib(factory=dict)

    def _repr_helper_(self, r):
        r.keyword_from_attr("id")
        r.keyword_from_attr("dim")
        r.keyword_from_attr("params")


def _endpoint(x):
    def sampler(n):
        return np.array([[x]])

    return sampler


def _dirichlet_1d(exact):
    return [
        BoundarySegment("left", dirichlet(), exact, _endpoint(-1.0)),
        BoundarySegment("right", dirichlet(), exact, _endpoint(1.0)),
    ]


def _variable_coeff(a=250.0):
    if not a > 0:
        raise ConfigError(f"variable_coeff needs a > 0, got {a}")

    def exact(points):
        x = _column(points)
        return np.sin(2 * np.pi * x) + 0.1 * np.sin(a * np.pi * x**2)

    def source(points):
        x = _column(points)
        du = 2 * np.pi * np.cos(2 * np.pi * x) + 0.2 * a * np.pi * x * np.cos(
            a * np.pi * x**2
        )
        d2u = (
            -4 * np.pi**2 * np.sin(2 * np.pi * x)
            + 0.2 * a * np.pi * np.cos(a * np.pi * x**2)
            - 0.4 * a**2 * np.pi**2 * x**2 * np.sin(a * np.pi * x**2)
        )
        return -(1 + x**2) * d2u - 2 * x * du

    operator = LinearOperator(
        dim=1,
        first={0: lambda p: -2 * p[:, 0]},
        second={0: lambda p: -(1 + p[:, 0] ** 2)},
    )
    return PdeSpec(
        id="variable_coeff",
        dim=1,
        domain=_UNIT_1D,
        operator=operator,
        source=source,
        exact=exact,
        boundary=_dirichlet_1d(exact),
        params={"a": a},
    )


def _helmholtz(lam=500.0, mu=200.0):
    if not (lam > 0 and mu > 0):
        raise ConfigError(f"helmholtz needs lam, mu > 0, got {lam}, {mu}")

    def exact(points):
        x = _column(points)
        return bessel_j0(mu * x) + 0.2 * np.cos(lam * x)

    def source(points):
        x = _column(points)
        return mu**2 * bessel_j0_dd(mu * x) + lam**2 * bessel_j0(mu * x)

    return PdeSpec(
        id="helmholtz",
        dim=1,
        domain=_UNIT_1D,
        operator=LinearOperator(dim=1, value=lam**2, second={0: 1.0}),
        source=source,
        exact=exact,
        boundary=_dirichlet_1d(exact),
        params={"lam": lam, "mu": mu},
    )


def _nonlinear_helmholtz():
    a, b = 150 * np.pi, 200 * np.pi
    phase_a, phase_b = 3 * np.pi / 20, 2 * np.pi / 5

    def exact(points):
        x = _column(points)
        return np.sin(a * x + phase_a) * np.cos(b * x - phase_b) + 1.5 + x / 10

    def source(points):
        x = _column(points)
        s, c = np.sin(a * x + phase_a), np.cos(b * x - phase_b)
        d2u = -(a**2 + b**2) * s * c - 2 * a * b * np.cos(a * x + phase_a) * np.sin(
            b * x - phase_b
        )
        u = s * c + 1.5 + x / 10
        return d2u - 50 * u + 10 * np.sin(u)

    return PdeSpec(
        id="nonlinear_helmholtz",
        dim=1,
        domain=_UNIT_1D,
        operator=LinearOperator(dim=1, value=-50.0, second={0: 1.0}),
        source=source,
        exact=exact,
        boundary=_dirichlet_1d(exact),
        nonlinear=NonlinearTerm(lambda u, points: 10 * np.sin(u)),
    )


WAVE_SPEED = 625 / (36 * np.pi**2)


def _edge(axis, value, lower, upper):
    """Sampler of the edge ``x_axis = value`` of a 2D box."""

    def sampler(n):
        other = equispaced(lower[1 - axis], upper[1 - axis], n)
        points = np.empty((n, 2))
        points[:, axis] = value
        points[:, 1 - axis] = other
        return points

    return sampler


def _wave():
    lower, upper = (0.0, 0.0), (1.0, 1.0)

    def exact(points):
        x, t = points[:, 0], points[:, 1]
        return 0.5 * (np.sin(24 * np.pi * x + 100 * t) + np.sin(24 * np.pi * x - 100 * t))

    boundary = [
        BoundarySegment(
            "initial", dirichlet(), lambda p: np.sin(24 * np.pi * p[:, 0]),
            _edge(1, 0.0, lower, upper),
        ),
        BoundarySegment(
            "initial_velocity", directional_derivative((0.0, 1.0)), 0.0,
            _edge(1, 0.0, lower, upper),
        ),
        BoundarySegment("left", dirichlet(), 0.0, _edge(0, 0.0, lower, upper)),
        BoundarySegment("right", dirichlet(), 0.0, _edge(0, 1.0, lower, upper)),
    ]
    return PdeSpec(
        id="wave",
        dim=2,
        domain=(lower, upper),
        operator=LinearOperator(dim=2, second={0: -WAVE_SPEED, 1: 1.0}),
        source=0.0,
        exact=exact,
        boundary=boundary,
        params={"c": WAVE_SPEED},
    )


def _interface(beta_inner=1.0, beta_outer=10.0):
    if not (beta_inner > 0 and beta_outer > 0):
        raise ConfigError("interface coefficients must be positive")
    geometry = CircularInterface(center=(1.0, 1.0), radius=math.sqrt(0.5))
    lower, upper = (0.0, 0.0), (2.0, 2.0)
    k = 16 * np.pi

    def inner(points):
        return (points[:, 0] - 1) ** 2 + (points[:, 1] - 1) ** 2

    def outer(points):
        return np.cos(k * points[:, 0]) * np.cos(k * points[:, 1])

    def exact(points):
        points = np.asarray(points, dtype=float)
        return np.where(geometry.inside(points), inner(points), outer(points))

    def inner_flux(points, normals):
        return 2 * np.sum((points - 1.0) * normals, axis=1)

    def outer_flux(points, normals):
        x, y = points[:, 0], points[:, 1]
        gradient = -k * np.stack(
            [np.sin(k * x) * np.cos(k * y), np.cos(k * x) * np.sin(k * y)], axis=1
        )
        return np.sum(gradient * normals, axis=1)

    def value_jump(points):
        return outer(points) - inner(points)

    def flux_jump(points):
        normals = geometry.normals(points)
        return beta_outer * outer_flux(points, normals) - beta_inner * inner_flux(
            points, normals
        )

    subdomains = (
        Subdomain(
            operator=laplacian(2, coefficient=-beta_inner),
            source=-4.0 * beta_inner,
            exact=inner,
            beta=beta_inner,
        ),
        Subdomain(
            operator=laplacian(2, coefficient=-beta_outer),
            source=lambda p: 2 * k**2 * beta_outer * outer(p),
            exact=outer,
            beta=beta_outer,
        ),
    )

    def source(points):
        points = np.asarray(points, dtype=float)
        return np.where(
            geometry.inside(points),
            evaluate_field(subdomains[0].source, points),
            evaluate_field(subdomains[1].source, points),
        )

    boundary = [
        BoundarySegment(name, dirichlet(), exact, _edge(axis, value, lower, upper))
        for name, axis, value in (
            ("bottom", 1, 0.0), ("top", 1, 2.0), ("left", 0, 0.0), ("right", 0, 2.0)
        )
    ]
    return PdeSpec(
        id="interface",
        dim=2,
        domain=(lower, upper),
        operator=None,
        source=source,
        exact=exact,
        boundary=boundary,
        subdomains=subdomains,
        interface=InterfaceSpec(
            geometry=geometry,
            beta=(beta_inner, beta_outer),
            value_jump=value_jump,
            flux_jump=flux_jump,
        ),
        params={"beta_inner": beta_inner, "beta_outer": beta_outer},
    )


_PDE_FACTORIES = {
    "variable_coeff": _variable_coeff,
    "helmholtz": _helmholtz,
    "nonlinear_helmholtz": _nonlinear_helmholtz,
    "wave": _wave,
    "interface": _interface,
}

PDE_IDS = tuple(_PDE_FACTORIES)


def make_pde(id, **params):
    """Build a registered PDE problem.

    Parameters:
        id: One of :data:`PDE_IDS`.
        params: ``a`` (variable_coeff), ``lam`` and ``mu`` (helmholtz),
            ``beta_inner`` and ``beta_outer`` (interface).
    """
    try:
        factory = _PDE_FACTORIES[id]
    except KeyError:
        raise ConfigError(f"unknown problem {id!r}, expected one of {PDE_IDS}")
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"invalid parameters for {id}: {exc}") from exc


def collocation_points(pde, n_interior, n_boundary=1):
    """Training points of a problem.

    Returns:
        ``(interior, boundary)`` where ``boundary`` is a list of
        ``(points, segment)`` pairs. In 1D ``n_interior`` is the total count of
        equispaced points, in 2D the count per axis.
    """
    lower, upper = pde.domain
    axes = [equispaced(lo, hi, n_interior) for lo, hi in zip(lower, upper)]
    interior = tensor_grid(*axes)
    boundary = [(segment.sampler(n_boundary), segment) for segment in pde.boundary]
    return interior, boundary


def evaluation_points(domain, n):
    """Equispaced evaluation points.

    1D: ``n`` interior points. 2D: an ``n x n`` tensor grid including the edges.
    """
    lower, upper = domain
    if len(lower) == 1:
        return equispaced(lower[0], upper[0], n, interior=True)[:, None]
    return tensor_grid(*(equispaced(lo, hi, n) for lo, hi in zip(lower, upper)))


def _random_interior(domain, n, rng, margin):
    lower, upper = (np.asarray(b, dtype=float) for b in domain)
    return rng.uniform(lower + margin, upper - margin, (n, len(lower)))


def _term_scale(operator, function, points, h):
    """Largest magnitude of any single operator term applied to ``function``."""
    largest = 0.0
    for field, derivative in operator.terms():
        if derivative is None:
            values = function(points)
        else:
            values = finite_difference(function, points, *derivative, h)
        term = evaluate_field(field, points) * values
        largest = max(largest, float(np.max(np.abs(term), initial=0.0)))
    return largest


def consistency_error(pde, n_points=200, seed=0, h=None):
    """Manufactured-solution check by finite differences.

    Applies the operator to the exact solution with fourth-order central
    differences at random interior points and compares with the source term.
    Interface problems are checked per subdomain with the smooth closed form of
    that subdomain.

    Returns:
        Maximum absolute residual divided by the largest magnitude among the
        source and the individual operator terms.
    """
    h = 3e-5 if h is None else h
    rng = np.random.default_rng(seed)
    points = _random_interior(pde.domain, n_points, rng, margin=4 * h)

    def relative(operator, exact, chosen, residual, source):
        scale = max(
            float(np.max(np.abs(source), initial=0.0)),
            _term_scale(operator, exact, chosen, h),
        )
        return float(np.max(np.abs(residual)) / (scale if scale > 0 else 1.0))

    if pde.subdomains is not None:
        inside = pde.interface.geometry.inside(points)
        worst = 0.0
        for subdomain, mask in zip(pde.subdomains, (inside, ~inside)):
            chosen = points[mask]
            if not len(chosen):
                continue
            applied = apply_fd(subdomain.operator, subdomain.exact, chosen, h)
            source = evaluate_field(subdomain.source, chosen)
            error = relative(
                subdomain.operator, subdomain.exact, chosen, applied - source, source
            )
            worst = max(worst, error)
        return worst

    applied = apply_fd(pde.operator, pde.exact, points, h)
    if pde.nonlinear is not None:
        applied = applied + pde.nonlinear(pde.exact(points), points)
    source = evaluate_field(pde.source, points)
    return relative(pde.operator, pde.exact, points, applied - source, source)


def boundary_error(pde, n_points=100, h=1e-5):
    """Largest mismatch between boundary data and the exact solution."""
    worst = 0.0
    for segment in pde.boundary:
        points = segment.sampler(n_points)
        if segment.operator.kind == "value":
            applied = pde.exact(points)
        else:
            applied = apply_fd(segment.operator, pde.exact, points, h)
        data = evaluate_field(segment.data, points)
        worst = max(worst, float(np.max(np.abs(applied - data))))
    return worst


def interface_jump_error(pde, n_points=300, h=1e-5):
    """Mismatch of the jump data against the exact subdomain solutions.

    Gradients of the smooth closed forms are taken by finite differences.
    """
    interface = pde.interface
    points = interface.geometry.sample(n_points)
    normals = interface.geometry.normals(points)
    inner, outer = pde.subdomains

    def flux(subdomain):
        gradient = np.stack(
            [
                finite_difference(subdomain.exact, points, axis, 1, h)
                for axis in range(pde.dim)
            ],
            axis=1,
        )
        return subdomain.beta * np.sum(gradient * normals, axis=1)

    value = outer.exact(points) - inner.exact(points)
    value_error = np.max(np.abs(value - interface.value_jump(points)))
    flux_error = np.max(np.abs(flux(outer) - flux(inner) - interface.flux_jump(points)))
    return float(value_error), float(flux_error)
