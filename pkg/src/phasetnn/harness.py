"""Experiment orchestration, metrics and report files."""
import json
import os
import tempfile
import time
from pathlib import Path

import attr
import numpy as np
from represent import ReprHelperMixin

from .base import ConfigError, NumericalError, PhaseTNNError, logger
from .config import SCHEMA_VERSION
from .core import equispaced, trapezoid_grid
from .cptnn import (
    PhaseModulatedBasis,
    build_cptnn_basis,
    equispaced_frequencies,
    eval_cptnn,
    fit_function,
    random_frequencies,
    solve_interface_problem,
    solve_linear_pde,
    solve_nonlinear_pde,
)
from .features import rfm_baseline_basis, sample_feature_basis
from .filtering import (
    BandFilter1D,
    check_sampled_quadrature,
    extend_explicit,
    extend_raw,
    extend_sampled,
    filter_reconstruct,
    frequency_grid,
)
from .pptnn import eval_pptnn, fit_pptnn_1d, fit_pptnn_2d
from .problems import (
    PDE_IDS,
    collocation_points,
    evaluation_points,
    make_benchmark,
    make_pde,
)

PLOT_KINDS = ("error-vs-gamma", "error-vs-capacity", "solution-and-error-field")


def relative_l2(prediction, exact):
    """``||prediction - exact|| / ||exact||``.

    Returns:
        ``(error, absolute)``. When ``exact`` vanishes the absolute norm of the
        difference is returned and ``absolute`` is ``True``.
    """
    prediction = np.asarray(prediction, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if prediction.shape != exact.shape:
        raise ConfigError(
            f"prediction shape {prediction.shape} differs from {exact.shape}"
        )
    difference = float(np.linalg.norm(prediction - exact))
    norm = float(np.linalg.norm(exact))
    if norm == 0:
        return difference, True
    return difference / norm, False


@attr.s(repr=False, eq=False)
class RunReport(ReprHelperMixin):
    """Outcome of :func:`run_experiment`.

    ``points``, ``prediction`` and ``exact`` hold the test data behind the
    metrics; they are written to ``pointwise.csv`` rather than the JSON report.
    """

    config = attr.ib()
    relative_l2 = attr.ib(default=None)
    absolute_error_norm = attr.ib(default=False)
    max_abs_error = attr.ib(default=None)
    max_imag_residual = attr.ib(default=None)
    timings = attr.ib(factory=dict)
    retained_bands = attr.ib(default=None)
    skipped_parts = attr.ib(default=None)
    lstsq = attr.ib(factory=dict)
    picard = attr.ib(default=None)
    sweep_parameter = attr.ib(default=None)
    sweep = attr.ib(factory=list)
    best = attr.ib(default=None)
    capacity = attr.ib(factory=list)
    notes = attr.ib(factory=list)
    files = attr.ib(factory=dict)
    points = attr.ib(default=None)
    prediction = attr.ib(default=None)
    exact = attr.ib(default=None)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "relative_l2": self.relative_l2,
            "absolute_error_norm": self.absolute_error_norm,
            "max_abs_error": self.max_abs_error,
            "max_imag_residual": self.max_imag_residual,
            "timings": self.timings,
            "retained_bands": self.retained_bands,
            "skipped_parts": self.skipped_parts,
            "lstsq": self.lstsq,
            "picard": self.picard,
            "sweep_parameter": self.sweep_parameter,
            "sweep": self.sweep,
            "best": self.best,
            "capacity": self.capacity,
            "notes": self.notes,
            "files": self.files,
        }

    def _repr_helper_(self, r):
        r.keyword_with_value("kind", self.config.kind)
        r.keyword_with_value("problem", self.config.problem)
        r.keyword_from_attr("relative_l2")


@attr.s(eq=False)
class _Outcome:
    """Prediction of one fit plus the diagnostics it produced."""

    prediction = attr.ib()
    imag_residual = attr.ib(default=None)
    timings = attr.ib(factory=dict)
    lstsq = attr.ib(factory=dict)
    retained = attr.ib(default=None)
    skipped = attr.ib(default=None)
    picard = attr.ib(default=None)


def _lstsq_summary(report):
    if report is None:
        return {}
    return {
        "shape": list(report.shape),
        "residual_norm": report.residual_norm,
        "effective_rank": report.effective_rank,
        "singular_value_ratio": report.singular_value_ratio,
    }


def _frequencies(config, dim, n_frequencies=None):
    n = config.n_frequencies if n_frequencies is None else n_frequencies
    lower, upper = config.frequency_range
    if config.frequency_sampling == "random":
        return random_frequencies(n**dim, lower, upper, dim=dim, seed=config.seed)
    return equispaced_frequencies(n, lower, upper, dim=dim)


def _basis(config, dim, gamma=None, capacity=None, r_max=None, stream=0):
    """Column basis of the configured method, as a phase-modulated basis."""
    gamma = config.gamma if gamma is None else gamma
    seed = config.seed + stream
    if config.method == "cptnn":
        return build_cptnn_basis(
            _frequencies(config, dim, capacity),
            config.m_sub,
            dim=dim,
            gamma=gamma,
            seed=seed,
            include_constant=config.include_constant,
        )
    n_features = config.n_features if capacity is None else capacity
    if config.method == "transnet":
        features = sample_feature_basis(n_features, dim, gamma=gamma, seed=seed)
    elif config.method == "rfm":
        r_max = config.r_max if r_max is None else r_max
        features = rfm_baseline_basis(n_features, dim, r_max, seed=seed)
    else:
        raise ConfigError(f"{config.method} has no global basis")
    return PhaseModulatedBasis.from_feature_basis(features)


def _affine_to_unit(lower, upper):
    def forward(x):
        return 2.0 * (x - lower) / (upper - lower) - 1.0

    def backward(u):
        return lower + (u + 1.0) * (upper - lower) / 2.0

    return forward, backward


def _approx_once(config, target, test, gamma=None, capacity=None, r_max=None):
    """Fit one approximation and predict on ``test``."""
    dim = target.dim
    timings = {}
    if target.pieces is not None:
        pieces = target.pieces
    else:
        pieces = ((target.domain[0][0], target.domain[1][0], target.evaluator),)

    prediction = np.zeros(len(test))
    imag = np.zeros(len(test)) if config.method == "pptnn" else None
    lstsq, retained, skipped = {}, 0, 0
    start = time.perf_counter()
    for index, (lower, upper, function) in enumerate(pieces):
        last = index == len(pieces) - 1
        if dim == 1:
            x_test = test[:, 0]
            mask = (x_test >= lower) & ((x_test <= upper) if last else (x_test < upper))
            n_piece = config.n_train if len(pieces) == 1 else (config.n_train + 1) // 2
            x_train = equispaced(lower, upper, n_piece)
        else:
            mask = np.ones(len(test), dtype=bool)

        if config.method == "pptnn":
            pptnn_config = config.pptnn_config(dim=dim, m_sub=capacity, gamma=gamma)
            if dim == 1:
                forward, backward = _affine_to_unit(lower, upper)
                model = fit_pptnn_1d(
                    forward(x_train),
                    function(x_train),
                    pptnn_config,
                    function=lambda u, f=function, b=backward: f(b(u)),
                    workers=config.workers,
                )
                value, residual = eval_pptnn(model, forward(x_test[mask]))
            else:
                train = evaluation_points(target.domain, config.n_train)
                model = fit_pptnn_2d(
                    train, target(train), pptnn_config, target, workers=config.workers
                )
                value, residual = eval_pptnn(model, test)
            prediction[mask] = value
            imag[mask] = residual
            retained += len(model.bands)
            skipped += len(model.skipped)
            timings["parallel"] = timings.get("parallel", 0.0) + model.parallel_time
            timings["sequential"] = timings.get("sequential", 0.0) + model.sequential_time
        else:
            basis = _basis(config, dim, gamma, capacity, r_max, stream=index)
            if dim == 1:
                model = fit_function(
                    basis, x_train[:, None], function(x_train), config.rank_tol,
                    config.workers,
                )
                prediction[mask] = eval_cptnn(model, test[mask], workers=config.workers)
            else:
                train = evaluation_points(target.domain, config.n_train)
                model = fit_function(
                    basis, train, target(train), config.rank_tol, config.workers
                )
                prediction[:] = eval_cptnn(model, test, workers=config.workers)
            lstsq[f"piece{index}"] = _lstsq_summary(model.report)
    timings["fit"] = time.perf_counter() - start
    return _Outcome(
        prediction=prediction,
        imag_residual=imag,
        timings=timings,
        lstsq=lstsq,
        retained=retained if config.method == "pptnn" else None,
        skipped=skipped if config.method == "pptnn" else None,
    )


def _solve_once(config, pde, test, gamma=None, capacity=None, r_max=None):
    if config.method == "pptnn":
        raise ConfigError("PPTNN does not solve PDEs; use cptnn, transnet or rfm")
    timings = {}
    start = time.perf_counter()
    interior, boundary = collocation_points(pde, config.n_train, config.n_boundary)
    picard = None
    if pde.interface is not None:
        bases = tuple(
            _basis(config, pde.dim, gamma, capacity, r_max, stream=s) for s in (0, 1)
        )
        timings["basis"] = time.perf_counter() - start
        model = solve_interface_problem(
            bases,
            pde.subdomains,
            pde.interface.with_points(config.n_interface),
            interior,
            boundary,
            config.rank_tol,
            config.workers,
        )
    else:
        basis = _basis(config, pde.dim, gamma, capacity, r_max)
        timings["basis"] = time.perf_counter() - start
        if pde.nonlinear is not None:
            model, state = solve_nonlinear_pde(
                basis,
                pde,
                interior,
                boundary,
                config.tol,
                config.max_iter,
                config.rank_tol,
                config.workers,
            )
            picard = {
                "iterations": state.iteration,
                "converged": state.converged,
                "best_iteration": state.best_iteration,
                "history": state.history,
            }
        else:
            model = solve_linear_pde(
                basis, pde, interior, boundary, config.rank_tol, config.workers
            )
    timings["solve"] = time.perf_counter() - start - timings["basis"]
    lstsq = _lstsq_summary(model.report)
    lstsq["pde_residual"] = model.pde_residual
    lstsq["boundary_residual"] = model.boundary_residual
    return _Outcome(
        prediction=eval_cptnn(model, test, workers=config.workers),
        timings=timings,
        lstsq=lstsq,
        picard=picard,
    )


def _filter_bench(config, report):
    target = make_benchmark(config.problem, **config.problem_params)
    if target.dim != 1:
        raise ConfigError("filter-bench runs on 1D targets")
    x = equispaced(-1.0, 1.0, config.n_train)
    values = target(x)
    grid = frequency_grid(config.delta_k, config.half_count)
    quad = trapezoid_grid(config.n_quadrature, config.half_width)

    start = time.perf_counter()
    if config.extension == "explicit":
        aux = extend_explicit(target, config.decay_order)
    elif config.extension == "sampled":
        check_sampled_quadrature(x, quad)
        aux = extend_sampled(x, values, config.decay_order)
        report.notes.append(
            "PPR endpoint derivatives: "
            + ", ".join(
                f"{z:+g}: {np.array2string(d, precision=6)}"
                for z, d in aux.endpoint_derivatives.items()
            )
        )
    else:
        aux = extend_raw(function=target)
    band_filter = BandFilter1D(aux, grid, x, quad)
    components = [band_filter.component(band) for band in grid.bands()]
    real, imag = filter_reconstruct(components, len(x))
    report.timings["filter"] = time.perf_counter() - start

    report.points = x[:, None]
    report.prediction = real
    report.exact = values
    report.max_imag_residual = float(np.max(imag))


def _sweep(config):
    if config.method == "rfm" and config.r_max_sweep:
        return "r_max", config.r_max_sweep
    if config.gamma_sweep:
        return "gamma", config.gamma_sweep
    return None, []


def _with_context(message, exc):
    """Re-raise a library error with run context prepended."""
    raise type(exc)(f"{message}: {exc}") from exc


def run_experiment(config, out_dir=None):
    """Run one configured experiment.

    Parameters:
        config: :class:`~phasetnn.config.ExperimentConfig`.
        out_dir: Directory for ``report.json``, ``pointwise.csv`` and the plot
            data files. Nothing is written when ``None``.
    """
    report = RunReport(config=config)
    total_start = time.perf_counter()
    logger.info(
        "running {} {} on {}", config.kind, config.method, config.problem
    )

    if config.kind == "filter-bench":
        _filter_bench(config, report)
    else:
        if config.kind == "approx":
            target = make_benchmark(config.problem, **config.problem_params)
            domain, exact_fn, once = target.domain, target, _approx_once
        else:
            if config.problem not in PDE_IDS:
                raise ConfigError(f"unknown problem {config.problem!r}")
            target = make_pde(config.problem, **config.problem_params)
            domain, exact_fn, once = target.domain, target.exact, _solve_once
        test = evaluation_points(domain, config.n_test)
        exact = exact_fn(test)

        parameter, values = _sweep(config)
        outcome = None
        if values:
            report.sweep_parameter = parameter
            best_error = np.inf
            for value in values:
                try:
                    candidate = once(config, target, test, **{parameter: value})
                except PhaseTNNError as exc:
                    _with_context(f"{parameter}={value}", exc)
                error, _ = relative_l2(candidate.prediction, exact)
                report.sweep.append({parameter: value, "relative_l2": error})
                logger.info("{}={}: relative L2 {:.3e}", parameter, value, error)
                if error < best_error:
                    best_error, outcome = error, candidate
                    report.best = {parameter: value, "relative_l2": error}
        else:
            outcome = once(config, target, test)
        if outcome is None:
            raise NumericalError(
                f"every {parameter} in the sweep gave a non-finite error"
            )

        for capacity in config.capacity_sweep:
            try:
                candidate = once(config, target, test, capacity=capacity)
            except PhaseTNNError as exc:
                _with_context(f"capacity={capacity}", exc)
            error, _ = relative_l2(candidate.prediction, exact)
            report.capacity.append({"capacity": capacity, "relative_l2": error})
            logger.info("capacity {}: relative L2 {:.3e}", capacity, error)

        report.points = test
        report.prediction = outcome.prediction
        report.exact = exact
        report.timings.update(outcome.timings)
        report.lstsq = outcome.lstsq
        report.picard = outcome.picard
        report.retained_bands = outcome.retained
        report.skipped_parts = outcome.skipped
        if outcome.imag_residual is not None:
            report.max_imag_residual = float(np.max(outcome.imag_residual))
        if len(domain[0]) == 1 and config.kind != "filter-bench":
            report.notes.append(
                f"test set: {config.n_test} equispaced interior points"
            )

    report.relative_l2, report.absolute_error_norm = relative_l2(
        report.prediction, report.exact
    )
    report.max_abs_error = float(np.max(np.abs(report.prediction - report.exact)))
    report.timings["total"] = time.perf_counter() - total_start
    logger.info(
        "{} {} {}: relative L2 {:.3e}",
        config.kind,
        config.method,
        config.problem,
        report.relative_l2,
    )

    if out_dir is not None:
        write_report(report, out_dir)
    return report


def _atomic_write(path, write):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            write(f)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def _write_csv(path, header, columns):
    table = np.column_stack(columns)

    def write(f):
        np.savetxt(f, table, fmt="%.17g", delimiter=",", header=header, comments="")

    return _atomic_write(path, write)


def pointwise_columns(report):
    dim = report.points.shape[1]
    names = ["x", "y"] if dim == 2 else ["x"]
    header = ",".join(names + ["pred", "exact", "abs_err"])
    columns = [report.points[:, axis] for axis in range(dim)] + [
        report.prediction,
        report.exact,
        np.abs(report.prediction - report.exact),
    ]
    return header, columns


def emit_plot_data(report, kind, out_dir):
    """Write the CSV behind one figure kind.

    ``error-vs-gamma`` writes ``sweep.csv`` (``gamma,rel_l2``, or ``r_max`` for
    RFM sweeps), ``error-vs-capacity`` writes ``capacity.csv``
    (``capacity,rel_l2``) and ``solution-and-error-field`` writes ``field.csv``
    (coordinates, ``pred``, ``exact``, ``abs_err``).
    """
    out_dir = Path(out_dir)
    if kind == "error-vs-gamma":
        if not report.sweep:
            raise ConfigError("the report has no sweep data")
        parameter = report.sweep_parameter
        path = _write_csv(
            out_dir / "sweep.csv",
            f"{parameter},rel_l2",
            [
                [row[parameter] for row in report.sweep],
                [row["relative_l2"] for row in report.sweep],
            ],
        )
    elif kind == "error-vs-capacity":
        if not report.capacity:
            raise ConfigError("the report has no capacity sweep data")
        path = _write_csv(
            out_dir / "capacity.csv",
            "capacity,rel_l2",
            [
                [row["capacity"] for row in report.capacity],
                [row["relative_l2"] for row in report.capacity],
            ],
        )
    elif kind == "solution-and-error-field":
        if report.points is None:
            raise ConfigError("the report has no test-grid data")
        header, columns = pointwise_columns(report)
        path = _write_csv(out_dir / "field.csv", header, columns)
    else:
        raise ConfigError(f"unknown plot kind {kind!r}, expected one of {PLOT_KINDS}")
    report.files[kind] = str(path)
    logger.info("wrote {}", path)
    return path


def write_report(report, out_dir):
    """Write ``pointwise.csv``, available plot data and ``report.json``."""
    out_dir = Path(out_dir)
    header, columns = pointwise_columns(report)
    pointwise = _write_csv(out_dir / "pointwise.csv", header, columns)
    report.files["pointwise"] = str(pointwise)
    if report.sweep:
        emit_plot_data(report, "error-vs-gamma", out_dir)
    if report.capacity:
        emit_plot_data(report, "error-vs-capacity", out_dir)
    if report.points.shape[1] == 2:
        emit_plot_data(report, "solution-and-error-field", out_dir)

    def write(f):
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")

    path = _atomic_write(out_dir / "report.json", write)
    logger.info("wrote {}", path)
    return path
