"""Coupled phase-shift transferable networks.

One global basis of phase-modulated features
``cos(2 pi kappa . x) tanh(gamma (a . x + r))`` and
``sin(2 pi kappa . x) tanh(gamma (a . x + r))`` is fitted by a single linear
least-squares solve, for function data or for collocation systems of linear,
nonlinear (Picard) and interface problems.
"""
import warnings

import attr
import numpy as np
from represent import ReprHelperMixin

from .base import (
    ConfigError,
    IllConditionedSolveWarning,
    NumericalError,
    PicardConvergenceWarning,
    generators,
    logger,
    parallel_map,
)
from .core import MinNormSolver, lstsq_min_norm
from .features import DEFAULT_GAMMA, _as_points
from .operators import evaluate_field

TRIGS = ("cos", "sin")

DEFAULT_PICARD_TOL = 1e-12
DEFAULT_PICARD_MAX_ITER = 100
RESIDUAL_WARNING_RATIO = 1e-3
ROW_BLOCK = 1024


@attr.s(frozen=True, repr=False, eq=False)
class PhaseModulatedBasis(ReprHelperMixin):
    """Global basis of phase-modulated tanh features.

    Columns are ordered by ``(zeta, trig, m)`` with ``m`` fastest, so
    ``eta = (zeta * 2 + trig) * m_sub + m`` before dropped blocks are removed.
    ``sin`` blocks of a zero frequency vanish identically and are dropped.

    Parameters:
        frequencies: ``(N_kappa, d)`` frequency vectors.
        m_sub: Features per ``(zeta, trig)`` block.
        freq_index: Frequency of every column.
        trig: 0 (cos) or 1 (sin) for every column.
        directions: ``(M_T, d)`` unit directions.
        offsets: ``(M_T,)`` offsets.
        shapes: ``(M_T,)`` shape parameters.
        constant: ``(M_T,)`` mask of columns whose envelope is the constant 1.
        seed: Seed the features were drawn from.
        domain: Optional box mapped onto ``[-1, 1]^d`` inside the envelopes.
    """

    frequencies = attr.ib()
    m_sub = attr.ib()
    freq_index = attr.ib()
    trig = attr.ib()
    directions = attr.ib()
    offsets = attr.ib()
    shapes = attr.ib()
    constant = attr.ib()
    seed = attr.ib(default=None)
    domain = attr.ib(default=None)

    @property
    def dim(self):
        return self.frequencies.shape[1]

    @property
    def n_frequencies(self):
        return self.frequencies.shape[0]

    @property
    def n_columns(self):
        return len(self.freq_index)

    @property
    def slot(self):
        """Position ``m`` of every column inside its block."""
        positions = np.empty(self.n_columns, dtype=int)
        start = 0
        for _, length in self.blocks():
            positions[start:start + length] = np.arange(length)
            start += length
        return positions

    def blocks(self):
        """``((zeta, trig), column count)`` of the kept blocks in column order."""
        keys = list(zip(self.freq_index.tolist(), self.trig.tolist()))
        result = []
        for key in keys:
            if result and result[-1][0] == key:
                result[-1][1] += 1
            else:
                result.append([key, 1])
        return [(key, count) for key, count in result]

    def column_index(self, zeta, trig, m):
        """Flat column of ``(zeta, trig, m)``."""
        trig = TRIGS.index(trig) if isinstance(trig, str) else int(trig)
        matches = np.flatnonzero((self.freq_index == zeta) & (self.trig == trig))
        if not 0 <= m < len(matches):
            raise KeyError((zeta, trig, m))
        return int(matches[m])

    def column_key(self, eta):
        """Inverse of :meth:`column_index`."""
        return int(self.freq_index[eta]), int(self.trig[eta]), int(self.slot[eta])

    def _scale(self):
        if self.domain is None:
            return np.ones(self.dim)
        lower, upper = (np.asarray(b, dtype=float) for b in self.domain)
        return 2.0 / (upper - lower)

    def _map(self, points):
        if self.domain is None:
            return points
        return (points - np.asarray(self.domain[0], dtype=float)) * self._scale() - 1.0

    @classmethod
    def from_feature_basis(cls, basis):
        """Plain feature basis as a single zero-frequency cosine block."""
        n = basis.n_columns
        directions = np.zeros((n, basis.dim))
        offsets = np.zeros(n)
        shapes = np.zeros(n)
        constant = np.zeros(n, dtype=bool)
        start = int(basis.include_constant)
        constant[:start] = True
        directions[start:] = basis.directions
        offsets[start:] = basis.offsets
        shapes[start:] = basis.shapes
        return cls(
            frequencies=np.zeros((1, basis.dim)),
            m_sub=n,
            freq_index=np.zeros(n, dtype=int),
            trig=np.zeros(n, dtype=int),
            directions=directions,
            offsets=offsets,
            shapes=shapes,
            constant=constant,
            seed=basis.seed,
            domain=basis.domain,
        )

    def _repr_helper_(self, r):
        r.keyword_with_value("n_frequencies", self.n_frequencies)
        r.keyword_from_attr("m_sub")
        r.keyword_with_value("n_columns", self.n_columns)
        r.keyword_from_attr("seed")


def _as_frequencies(frequencies, dim):
    frequencies = np.asarray(frequencies, dtype=float)
    if frequencies.ndim == 1:
        if dim not in (None, 1):
            frequencies = frequencies.reshape(-1, dim)
        else:
            frequencies = frequencies[:, None]
    if frequencies.ndim != 2 or (dim is not None and frequencies.shape[1] != dim):
        raise ConfigError(f"frequencies must be an (N, {dim}) array")
    if len(frequencies) < 1:
        raise ConfigError("at least one frequency is required")
    return frequencies


def build_cptnn_basis(
    frequencies,
    m_sub,
    dim=None,
    gamma=DEFAULT_GAMMA,
    seed=0,
    include_constant=False,
    domain=None,
):
    """Draw a phase-modulated basis.

    All ``2 N_kappa m_sub`` directions come from one standard Gaussian draw and
    all offsets from one uniform ``[0, 1]`` draw, each on its own substream.

    Parameters:
        frequencies: ``N_kappa`` frequency vectors (scalars in 1D).
        m_sub: Features per ``(frequency, cos|sin)`` block.
        dim: Input dimension, inferred from ``frequencies`` when omitted.
        gamma: Shape parameter of every feature.
        seed: Master seed.
        include_constant: Use the constant envelope for slot 0 of every block.
        domain: Optional box for the envelope arguments.
    """
    frequencies = _as_frequencies(frequencies, dim)
    dim = frequencies.shape[1]
    if m_sub < 1:
        raise ConfigError(f"m_sub must be at least 1, got {m_sub}")
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    if len(np.unique(frequencies, axis=0)) != len(frequencies):
        raise ConfigError("duplicate frequency vectors")

    n_kappa = len(frequencies)
    total = 2 * n_kappa * m_sub
    direction_rng, offset_rng = generators(seed, count=2)
    gauss = direction_rng.standard_normal((total, dim))
    directions = gauss / np.linalg.norm(gauss, axis=1, keepdims=True)
    offsets = offset_rng.uniform(0.0, 1.0, total)

    eta = np.arange(total)
    block = eta // m_sub
    freq_index = block // 2
    trig = block % 2
    slot = eta % m_sub
    constant = np.zeros(total, dtype=bool)
    if include_constant:
        constant = slot == 0

    zero = np.all(frequencies == 0, axis=1)
    keep = ~((trig == 1) & zero[freq_index])
    if not np.all(keep):
        logger.debug("dropping {} identically zero sin columns", int(np.sum(~keep)))

    return PhaseModulatedBasis(
        frequencies=frequencies,
        m_sub=int(m_sub),
        freq_index=freq_index[keep],
        trig=trig[keep],
        directions=directions[keep],
        offsets=offsets[keep],
        shapes=np.full(int(np.sum(keep)), float(gamma)),
        constant=constant[keep],
        seed=seed,
        domain=domain,
    )


def equispaced_frequencies(n, lower, upper, dim=1):
    """``n`` equispaced frequencies per axis including both endpoints.

    In 2D the result is the tensor grid of ``n**2`` vectors.
    """
    if n < 1:
        raise ConfigError(f"frequency count must be positive, got {n}")
    axis = np.linspace(lower, upper, n) if n > 1 else np.array([float(lower)])
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def random_frequencies(n, lower, upper, dim=1, seed=0):
    """``n`` frequency vectors uniform on ``[lower, upper]^dim``."""
    if n < 1:
        raise ConfigError(f"frequency count must be positive, got {n}")
    (rng,) = generators(seed, 1)
    return rng.uniform(lower, upper, (n, dim))


def _design_block(basis, points, derivative):
    mapped = basis._map(points)
    z = basis.shapes * (mapped @ basis.directions.T + basis.offsets)
    envelope = np.where(basis.constant, 1.0, np.tanh(z))
    theta = 2 * np.pi * (points @ basis.frequencies.T)[:, basis.freq_index]
    is_sin = basis.trig == 1
    cos, sin = np.cos(theta), np.sin(theta)
    carrier = np.where(is_sin, sin, cos)
    if derivative is None:
        return carrier * envelope

    axis, order = derivative
    omega = 2 * np.pi * basis.frequencies[basis.freq_index, axis]
    carrier_d1 = omega * np.where(is_sin, cos, -sin)
    slope = basis.shapes * basis.directions[:, axis] * basis._scale()[axis]
    slope = np.where(basis.constant, 0.0, slope)
    sech2 = np.where(basis.constant, 0.0, 1.0 - envelope * envelope)
    envelope_d1 = slope * sech2
    if order == 1:
        return carrier_d1 * envelope + carrier * envelope_d1
    envelope_d2 = -2.0 * slope * envelope_d1 * envelope
    carrier_d2 = -(omega**2) * carrier
    return carrier_d2 * envelope + 2.0 * carrier_d1 * envelope_d1 + carrier * envelope_d2


def cptnn_design(basis, points, derivative=None, workers=None):
    """Design matrix of ``basis`` or one of its partial derivatives.

    Parameters:
        basis: :class:`PhaseModulatedBasis`.
        points: ``(N, d)`` points (or ``(N,)`` in 1D).
        derivative: ``None`` or ``(axis, order)`` with ``order`` 1 or 2.
        workers: Worker threads; rows are assembled in fixed blocks so the
            result does not depend on the worker count.
    """
    points = _as_points(points, basis.dim)
    if derivative is not None:
        axis, order = derivative
        if not 0 <= axis < basis.dim or order not in (1, 2):
            raise ConfigError(f"invalid derivative {derivative!r}")

    out = np.empty((len(points), basis.n_columns))
    starts = range(0, len(points), ROW_BLOCK)

    def fill(start):
        stop = min(start + ROW_BLOCK, len(points))
        out[start:stop] = _design_block(basis, points[start:stop], derivative)

    if len(points) > ROW_BLOCK:
        parallel_map(fill, starts, workers=workers)
    else:
        for start in starts:
            fill(start)
    return out


@attr.s(frozen=True, repr=False, eq=False)
class CptnnModel(ReprHelperMixin):
    """Fitted CPTNN.

    Interface models carry a second ``(basis, coefficients)`` block for the
    outer subdomain. ``membership`` returns ``True`` for points owned by the
    first block.
    """

    basis = attr.ib()
    coefficients = attr.ib()
    report = attr.ib(default=None)
    pde_residual = attr.ib(default=None)
    boundary_residual = attr.ib(default=None)
    secondary = attr.ib(default=None)
    membership = attr.ib(default=None)

    def __attrs_post_init__(self):
        if len(self.coefficients) != self.basis.n_columns:
            raise ConfigError("coefficient count does not match the basis")
        if self.secondary is not None:
            basis, coefficients = self.secondary
            if len(coefficients) != basis.n_columns:
                raise ConfigError("coefficient count does not match the second basis")
            if self.membership is None:
                raise ConfigError("two-block models need a membership predicate")

    @property
    def n_columns(self):
        total = self.basis.n_columns
        if self.secondary is not None:
            total += self.secondary[0].n_columns
        return total

    def _repr_helper_(self, r):
        r.keyword_from_attr("basis")
        r.keyword_with_value("blocks", 1 if self.secondary is None else 2)
        if self.report is not None:
            r.keyword_with_value("residual_norm", self.report.residual_norm)


@attr.s(repr=False, eq=False)
class PicardState(ReprHelperMixin):
    """Progress of a Picard iteration."""

    tol = attr.ib()
    max_iterations = attr.ib()
    coefficients = attr.ib(default=None)
    history = attr.ib(factory=list)
    converged = attr.ib(default=False)
    best_iteration = attr.ib(default=None)

    @property
    def iteration(self):
        return len(self.history)

    def _repr_helper_(self, r):
        r.keyword_with_value("iteration", self.iteration)
        r.keyword_from_attr("converged")
        r.keyword_from_attr("best_iteration")
        if self.history:
            r.keyword_with_value("last_change", self.history[-1])


def fit_function(basis, points, values, rank_tol=None, workers=None):
    """Least-squares fit of point values."""
    points = _as_points(points, basis.dim)
    values = np.asarray(values, dtype=float)
    if len(points) < 1 or values.shape != (len(points),):
        raise ConfigError("need one value per point and at least one point")
    design = cptnn_design(basis, points, workers=workers)
    report = lstsq_min_norm(design, values, rank_tol)
    logger.info(
        "CPTNN fit: {} x {} system, rank {}, residual {:.3e}",
        *report.shape,
        report.effective_rank,
        report.residual_norm,
    )
    return CptnnModel(basis=basis, coefficients=report.coefficients, report=report)


def _operator_rows(basis, operator, points, workers):
    cache = {}
    rows = np.zeros((len(points), basis.n_columns))
    for field, derivative in operator.terms():
        if derivative not in cache:
            cache[derivative] = cptnn_design(basis, points, derivative, workers)
        rows += evaluate_field(field, points)[:, None] * cache[derivative]
    return rows


def _boundary_blocks(basis, boundary, workers):
    matrices, rhs = [], []
    for points, segment in boundary:
        points = _as_points(points, basis.dim)
        if segment.operator.kind not in ("value", "derivative"):
            raise ConfigError(f"unknown boundary operator {segment.operator.kind!r}")
        matrices.append(_operator_rows(basis, segment.operator, points, workers))
        rhs.append(evaluate_field(segment.data, points))
    return matrices, rhs


def assemble_linear_system(basis, pde, interior, boundary, workers=None):
    """Stacked collocation system ``[A_pde; A_bc] alpha = [f; g]``.

    Parameters:
        basis: :class:`PhaseModulatedBasis`.
        pde: Problem with a linear ``operator`` and a ``source`` field.
        interior: ``(N_pde, d)`` collocation points.
        boundary: ``(points, segment)`` pairs; segments carry an ``operator``
            and a ``data`` field.

    Returns:
        ``(matrix, rhs)`` with the interior rows first.
    """
    interior = _as_points(interior, basis.dim)
    if pde.operator is None:
        raise ConfigError("the problem has no linear operator")
    matrices = [_operator_rows(basis, pde.operator, interior, workers)]
    rhs = [evaluate_field(pde.source, interior)]
    boundary_matrices, boundary_rhs = _boundary_blocks(basis, boundary, workers)
    matrix = np.vstack(matrices + boundary_matrices)
    return matrix, np.concatenate(rhs + boundary_rhs)


def _split_residuals(matrix, rhs, coefficients, n_interior):
    residual = matrix @ coefficients - rhs
    pde = float(np.linalg.norm(residual[:n_interior]))
    boundary = float(np.linalg.norm(residual[n_interior:]))
    return pde, boundary


def _check_residual(report, rhs):
    scale = np.linalg.norm(rhs)
    ratio = report.residual_norm / scale if scale > 0 else report.residual_norm
    if ratio > RESIDUAL_WARNING_RATIO:
        warnings.warn(
            f"collocation residual ratio {ratio:.3e} exceeds {RESIDUAL_WARNING_RATIO:g}",
            IllConditionedSolveWarning,
        )


def solve_linear_pde(basis, pde, interior, boundary, rank_tol=None, workers=None):
    """Collocation solve of a linear problem."""
    matrix, rhs = assemble_linear_system(basis, pde, interior, boundary, workers)
    report = lstsq_min_norm(matrix, rhs, rank_tol)
    _check_residual(report, rhs)
    pde_residual, boundary_residual = _split_residuals(
        matrix, rhs, report.coefficients, len(interior)
    )
    logger.info(
        "CPTNN linear solve: {} x {} system, rank {}, residual pde={:.3e} bc={:.3e}",
        *report.shape,
        report.effective_rank,
        pde_residual,
        boundary_residual,
    )
    return CptnnModel(
        basis=basis,
        coefficients=report.coefficients,
        report=report,
        pde_residual=pde_residual,
        boundary_residual=boundary_residual,
    )


def solve_nonlinear_pde(
    basis,
    pde,
    interior,
    boundary,
    tol=DEFAULT_PICARD_TOL,
    max_iter=DEFAULT_PICARD_MAX_ITER,
    rank_tol=None,
    workers=None,
):
    """Picard iteration for ``L[u] + N(u) = f``.

    Starts from ``u = 0`` and moves ``N`` to the right-hand side, so every
    iteration solves the same linear system with a new right-hand side.

    Returns:
        ``(model, state)``. When ``max_iter`` is reached without convergence the
        iterate with the smallest relative change is returned, with
        ``state.converged`` false and ``state.best_iteration`` pointing at it.
    """
    if max_iter < 1:
        raise ConfigError(f"max_iter must be at least 1, got {max_iter}")
    interior = _as_points(interior, basis.dim)
    matrix, rhs = assemble_linear_system(basis, pde, interior, boundary, workers)
    solver = MinNormSolver(matrix, rank_tol)
    values = cptnn_design(basis, interior, workers=workers)
    source = rhs[: len(interior)]
    nonlinear = pde.nonlinear

    state = PicardState(tol=tol, max_iterations=max_iter)
    state.coefficients = np.zeros(basis.n_columns)
    u = np.zeros(len(interior))
    report = None
    best = None
    while state.iteration < max_iter:
        step_rhs = rhs.copy()
        if nonlinear is not None:
            step_rhs[: len(interior)] = source - nonlinear(u, interior)
        try:
            report = solver.solve(step_rhs)
        except NumericalError as exc:
            raise NumericalError(
                f"Picard iteration {state.iteration + 1}: {exc}"
            ) from exc
        u_next = values @ report.coefficients
        norm = np.linalg.norm(u)
        change = np.linalg.norm(u_next - u) / norm if norm > 0 else np.inf
        state.history.append(float(change))
        state.coefficients = report.coefficients
        u = u_next
        if best is None or change < best[0]:
            best = (change, state.iteration, report, u)
        logger.debug(
            "Picard iteration {}: relative change {:.3e}", state.iteration, change
        )
        if change < tol:
            state.converged = True
            break

    if state.converged:
        logger.info("Picard converged after {} iterations", state.iteration)
    else:
        warnings.warn(
            f"Picard iteration stopped after {max_iter} iterations, "
            f"last relative change {state.history[-1]:.3e}",
            PicardConvergenceWarning,
        )

    _, state.best_iteration, report, u = best
    state.coefficients = report.coefficients

    final_rhs = rhs.copy()
    if nonlinear is not None:
        final_rhs[: len(interior)] = source - nonlinear(u, interior)
    pde_residual, boundary_residual = _split_residuals(
        matrix, final_rhs, state.coefficients, len(interior)
    )
    model = CptnnModel(
        basis=basis,
        coefficients=state.coefficients,
        report=report,
        pde_residual=pde_residual,
        boundary_residual=boundary_residual,
    )
    return model, state


def _gradient_rows(basis, points, normals, workers):
    rows = np.zeros((len(points), basis.n_columns))
    for axis in range(basis.dim):
        rows += normals[:, axis, None] * cptnn_design(basis, points, (axis, 1), workers)
    return rows


def solve_interface_problem(
    bases, pdes, interface, interior, boundary, rank_tol=None, workers=None
):
    """Dual-block collocation solve across an interface.

    Parameters:
        bases: ``(basis_1, basis_2)`` for the inner and outer subdomain.
        pdes: ``(pde_1, pde_2)``, each with ``operator`` and ``source``.
        interface: Interface description with ``geometry`` (``inside``,
            ``check_on_curve``, ``normals``), ``points``, the coefficients
            ``beta`` and the jump data fields ``value_jump`` and ``flux_jump``.
            Jumps are outer minus inner, normals point outwards.
        interior: Collocation points of both subdomains.
        boundary: ``(points, segment)`` pairs on the outer boundary.
    """
    basis_1, basis_2 = bases
    if basis_1.dim != basis_2.dim:
        raise ConfigError("both blocks need the same input dimension")
    geometry = interface.geometry
    gamma_points = _as_points(interface.points, basis_1.dim)
    geometry.check_on_curve(gamma_points)
    normals = geometry.normals(gamma_points)
    n1, n2 = basis_1.n_columns, basis_2.n_columns

    def place(rows, block):
        full = np.zeros((len(rows), n1 + n2))
        if block == 0:
            full[:, :n1] = rows
        else:
            full[:, n1:] = rows
        return full

    interior = _as_points(interior, basis_1.dim)
    inside = geometry.inside(interior)
    matrices, rhs = [], []
    for block, (basis, pde, mask) in enumerate(
        ((basis_1, pdes[0], inside), (basis_2, pdes[1], ~inside))
    ):
        points = interior[mask]
        if len(points):
            rows = _operator_rows(basis, pde.operator, points, workers)
            matrices.append(place(rows, block))
            rhs.append(evaluate_field(pde.source, points))
    n_interior = len(interior)

    for points, segment in boundary:
        points = _as_points(points, basis_1.dim)
        owner = geometry.inside(points)
        for block, (basis, mask) in enumerate(((basis_1, owner), (basis_2, ~owner))):
            if np.any(mask):
                rows, data = _boundary_blocks(basis, [(points[mask], segment)], workers)
                matrices.append(place(rows[0], block))
                rhs.append(data[0])

    beta_1 = evaluate_field(interface.beta[0], gamma_points)[:, None]
    beta_2 = evaluate_field(interface.beta[1], gamma_points)[:, None]
    value_rows = np.hstack(
        [
            -cptnn_design(basis_1, gamma_points, workers=workers),
            cptnn_design(basis_2, gamma_points, workers=workers),
        ]
    )
    flux_rows = np.hstack(
        [
            -beta_1 * _gradient_rows(basis_1, gamma_points, normals, workers),
            beta_2 * _gradient_rows(basis_2, gamma_points, normals, workers),
        ]
    )
    matrices += [value_rows, flux_rows]
    rhs += [
        evaluate_field(interface.value_jump, gamma_points),
        evaluate_field(interface.flux_jump, gamma_points),
    ]

    matrix = np.vstack(matrices)
    rhs = np.concatenate(rhs)
    report = lstsq_min_norm(matrix, rhs, rank_tol)
    _check_residual(report, rhs)
    pde_residual, boundary_residual = _split_residuals(
        matrix, rhs, report.coefficients, n_interior
    )
    logger.info(
        "CPTNN interface solve: {} x {} system, rank {}, residual {:.3e}",
        *report.shape,
        report.effective_rank,
        report.residual_norm,
    )
    return CptnnModel(
        basis=basis_1,
        coefficients=report.coefficients[:n1],
        report=report,
        pde_residual=pde_residual,
        boundary_residual=boundary_residual,
        secondary=(basis_2, report.coefficients[n1:]),
        membership=geometry.inside,
    )


def eval_cptnn(model, points, derivative=None, workers=None):
    """Evaluate a model or one of its partial derivatives.

    Two-block models use the first block where ``membership`` holds and the
    second elsewhere, interface points included.
    """
    dim = model.basis.dim
    scalar = np.ndim(points) == 0 or (dim > 1 and np.ndim(points) == 1)
    if scalar:
        points = np.reshape(np.asarray(points, dtype=float), (1, dim))
    points = _as_points(points, dim)

    if model.secondary is None:
        design = cptnn_design(model.basis, points, derivative, workers)
        result = design @ model.coefficients
    else:
        result = np.empty(len(points))
        inside = np.asarray(model.membership(points), dtype=bool)
        secondary_basis, secondary_coefficients = model.secondary
        for mask, basis, coefficients in (
            (inside, model.basis, model.coefficients),
            (~inside, secondary_basis, secondary_coefficients),
        ):
            if np.any(mask):
                design = cptnn_design(basis, points[mask], derivative, workers)
                result[mask] = design @ coefficients
    if scalar:
        return float(result[0])
    return result
