"""Parallel phase-shift transferable networks.

Every frequency band gets its own small feature network fitted to the
phase-shifted band component, independently of all other bands. Real and
imaginary parts are separate real least-squares problems, and parts whose
training data has RMS below the threshold are not trained at all.
"""
import time
import warnings

import attr
import numpy as np
from represent import ReprHelperMixin

from .base import (
    ConfigError,
    ConjugateSymmetryWarning,
    NumericalError,
    logger,
    parallel_map,
)
from .core import lstsq_min_norm, trapezoid_grid
from .features import DEFAULT_GAMMA, _as_points, feature_matrix, sample_feature_basis
from .filtering import (
    EXTENSION_MODES,
    BandFilter1D,
    SeparableBandFilter2D,
    check_sampled_quadrature,
    extend_explicit,
    extend_raw,
    extend_sampled,
    frequency_grid,
    rms,
)

PARTS = ("real", "imag")

CONJUGATE_TOLERANCE = 1e-8

# A later shape candidate must lower the residual by more than this factor.
SHAPE_GAIN = 1 - 1e-6


def _positive(instance, attribute, value):
    if not all(v > 0 for v in np.atleast_1d(value)):
        raise ConfigError(f"{attribute.name} must be positive, got {value!r}")


def _non_negative(instance, attribute, value):
    if not all(v >= 0 for v in np.atleast_1d(value)):
        raise ConfigError(f"{attribute.name} must be non-negative, got {value!r}")


def scalar_or_axes(value):
    """Keep scalars, turn sequences (one value per axis) into tuples."""
    if np.ndim(value) == 0:
        return value
    return tuple(np.asarray(value).tolist())


@attr.s(frozen=True, kw_only=True)
class PptnnConfig:
    """Hyperparameters of a PPTNN fit.

    Parameters:
        delta_k: Band width ``dk``, a scalar or one value per axis.
        half_count: ``K``, bands are ``-K..K`` per axis. A scalar or one
            value per axis.
        n_quadrature: Trapezoid nodes ``N_s`` per axis on ``[-C, C]``.
        half_width: Quadrature half width ``C``.
        decay_order: ``Q`` of the extension decay factor.
        extension: ``"explicit"``, ``"sampled"`` or ``"raw"``.
        threshold: Parts with training RMS below this value are skipped.
        m_sub: Tanh features per sub-network (a constant feature is added).
        gamma: Shape parameter of every feature.
        gamma_candidates: Further shape parameters tried for every trained
            part; the one with the smallest training residual is kept.
        seed: Master seed of the per-band bases.
        dim: 1 or 2.
        rank_tol: Relative singular value cutoff of the band solves.
    """

    delta_k = attr.ib(default=2.0, converter=scalar_or_axes, validator=_positive)
    half_count = attr.ib(default=25, converter=scalar_or_axes, validator=_non_negative)
    n_quadrature = attr.ib(default=5001)
    half_width = attr.ib(default=5.0, validator=_positive)
    decay_order = attr.ib(default=6)
    extension = attr.ib(default="explicit")
    threshold = attr.ib(default=1e-14, validator=_non_negative)
    m_sub = attr.ib(default=100)
    gamma = attr.ib(default=DEFAULT_GAMMA, validator=_positive)
    gamma_candidates = attr.ib(default=(), converter=tuple, validator=_positive)
    seed = attr.ib(default=0, validator=_non_negative)
    dim = attr.ib(default=1)
    rank_tol = attr.ib(default=None)

    def __attrs_post_init__(self):
        if self.extension not in EXTENSION_MODES:
            raise ConfigError(
                f"extension must be one of {EXTENSION_MODES}, got {self.extension!r}"
            )
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if self.dim == 2 and self.extension != "explicit":
            raise ConfigError("2D fits only support the explicit extension")
        if self.n_quadrature < 2:
            raise ConfigError(f"n_quadrature must be at least 2, got {self.n_quadrature}")
        if self.m_sub < 1:
            raise ConfigError(f"m_sub must be at least 1, got {self.m_sub}")
        if self.decay_order < 1:
            raise ConfigError(f"decay_order must be at least 1, got {self.decay_order}")
        # Raises on a per-axis value of the wrong length.
        self.frequency_grid()

    @property
    def shapes(self):
        """``gamma`` followed by the distinct extra candidates."""
        shapes = [float(self.gamma)]
        for gamma in self.gamma_candidates:
            if float(gamma) not in shapes:
                shapes.append(float(gamma))
        return tuple(shapes)

    def frequency_grid(self):
        return frequency_grid(self.delta_k, self.half_count, dim=self.dim)

    def quadrature(self):
        return trapezoid_grid(self.n_quadrature, self.half_width)


def pair_representative(band):
    """The member of ``{band, -band}`` that seeds the shared basis."""
    band = tuple(np.atleast_1d(band).tolist())
    negated = tuple(-j for j in band)
    return max(band, negated)


def band_basis(config, band, part, gamma=None):
    """Feature basis of one part of one band.

    Bands ``j`` and ``-j`` draw the same basis, independent of the order or
    thread in which bands are fitted. Every shape parameter shares the
    directions and offsets of the part.
    """
    key = pair_representative(band) + (PARTS.index(part),)
    return sample_feature_basis(
        config.m_sub,
        config.dim,
        gamma=config.gamma if gamma is None else gamma,
        seed=config.seed,
        include_constant=True,
        stream=key,
    )


@attr.s(frozen=True, repr=False, eq=False)
class BandFit(ReprHelperMixin):
    """Fitted sub-network of one band.

    A skipped part has zero coefficients and no basis.
    """

    band = attr.ib()
    kappa = attr.ib()
    real_coefficients = attr.ib()
    imag_coefficients = attr.ib()
    real_basis = attr.ib()
    imag_basis = attr.ib()
    rms_real = attr.ib()
    rms_imag = attr.ib()
    filter_time = attr.ib(default=0.0)
    train_time = attr.ib(default=0.0)

    def coefficients(self, part):
        return getattr(self, f"{part}_coefficients")

    def basis(self, part):
        return getattr(self, f"{part}_basis")

    def evaluate(self, points):
        """Sub-network outputs ``(T_real, T_imag)`` at ``points``."""
        outputs = []
        for part in PARTS:
            basis = self.basis(part)
            if basis is None:
                outputs.append(np.zeros(len(points)))
            else:
                outputs.append(feature_matrix(basis, points) @ self.coefficients(part))
        return tuple(outputs)

    def _repr_helper_(self, r):
        r.keyword_from_attr("band")
        r.keyword_with_value("real", self.real_basis is not None)
        r.keyword_with_value("imag", self.imag_basis is not None)


@attr.s(frozen=True, repr=False, eq=False)
class PptnnModel(ReprHelperMixin):
    """Collection of band sub-networks.

    Parameters:
        config: The :class:`PptnnConfig` the model was fitted with.
        bands: :class:`BandFit` of every band with at least one trained part.
        skipped: ``(band, part)`` pairs that were below the threshold.
        setup_time: Shared filter set-up time in seconds.
    """

    config = attr.ib()
    bands = attr.ib()
    skipped = attr.ib()
    setup_time = attr.ib(default=0.0)

    @property
    def retained_bands(self):
        return [fit.band for fit in self.bands]

    @property
    def skipped_bands(self):
        """Bands whose two parts were both skipped."""
        counts = {}
        for band, _ in self.skipped:
            counts[band] = counts.get(band, 0) + 1
        return [band for band, count in counts.items() if count == len(PARTS)]

    @property
    def filter_times(self):
        return [fit.filter_time for fit in self.bands]

    @property
    def train_times(self):
        return [fit.train_time for fit in self.bands]

    @property
    def sequential_time(self):
        return self.setup_time + sum(self.filter_times) + sum(self.train_times)

    @property
    def parallel_time(self):
        """Wall time if every sub-network ran on its own worker."""
        filter_max = max(self.filter_times, default=0.0)
        train_max = max(self.train_times, default=0.0)
        return self.setup_time + filter_max + train_max

    def band(self, band):
        for fit in self.bands:
            if fit.band == band:
                return fit
        raise KeyError(band)

    def _repr_helper_(self, r):
        r.keyword_with_value("dim", self.config.dim)
        r.keyword_with_value("retained", len(self.bands))
        r.keyword_with_value("skipped_parts", len(self.skipped))


def _normalise_band(band):
    if isinstance(band, tuple):
        return band
    return int(band)


def _solve_part(config, band, part, train_points, target):
    """Least-squares fit of one part, keeping the best of ``config.shapes``."""
    best = None
    for gamma in config.shapes:
        basis = band_basis(config, band, part, gamma)
        try:
            report = lstsq_min_norm(
                feature_matrix(basis, train_points), target, rank_tol=config.rank_tol
            )
        except NumericalError as exc:
            raise NumericalError(f"band {band} ({part}): {exc}") from exc
        if best is None or report.residual_norm < SHAPE_GAIN * best[1].residual_norm:
            best = (basis, report)
    return best


def _fit_band(component, config, train_points, filter_time):
    start = time.perf_counter()
    coefficients = {}
    bases = {}
    skipped = []
    band = _normalise_band(component.band)
    for part, target, level in (
        ("real", component.values.real, component.rms_real),
        ("imag", component.values.imag, component.rms_imag),
    ):
        if level < config.threshold:
            coefficients[part] = np.zeros(config.m_sub + 1)
            bases[part] = None
            skipped.append((band, part))
            continue
        basis, report = _solve_part(config, band, part, train_points, target)
        logger.debug(
            "band {} {} rms={:.3e} gamma={:g} residual={:.3e} rank={}",
            band,
            part,
            level,
            basis.shapes[0],
            report.residual_norm,
            report.effective_rank,
        )
        coefficients[part] = report.coefficients
        bases[part] = basis

    fit = None
    if len(skipped) < len(PARTS):
        fit = BandFit(
            band=band,
            kappa=component.kappa,
            real_coefficients=coefficients["real"],
            imag_coefficients=coefficients["imag"],
            real_basis=bases["real"],
            imag_basis=bases["imag"],
            rms_real=component.rms_real,
            rms_imag=component.rms_imag,
            filter_time=filter_time,
            train_time=time.perf_counter() - start,
        )
    return fit, skipped


def _check_training_set(points, values, config):
    points = _as_points(points, config.dim)
    values = np.asarray(values, dtype=float)
    if values.shape != (len(points),):
        raise ConfigError("one training value per training point is required")
    if np.any(np.abs(points) > 1.0 + 1e-12):
        raise ConfigError("PPTNN training points must lie in [-1, 1]^d")
    if config.m_sub + 1 > len(points):
        raise ConfigError(
            f"m_sub + 1 = {config.m_sub + 1} exceeds the {len(points)} training points"
        )
    return points, values


def _auxiliary_1d(x, values, config, function):
    if config.extension == "explicit":
        if function is None:
            raise ConfigError("the explicit extension needs the target function")
        return extend_explicit(function, config.decay_order, dim=1)
    if config.extension == "sampled":
        check_sampled_quadrature(x, config.quadrature())
        return extend_sampled(x, values, config.decay_order)
    if function is not None:
        return extend_raw(function=function)
    return extend_raw(samples=(x, values))


def _assemble(config, results, setup_time):
    bands = []
    skipped = []
    for fit, band_skipped in results:
        skipped.extend(band_skipped)
        if fit is not None:
            bands.append(fit)
    model = PptnnModel(config=config, bands=bands, skipped=skipped, setup_time=setup_time)
    logger.info(
        "PPTNN fit: {} bands retained, {} parts skipped, parallel time {:.3f}s",
        len(bands),
        len(skipped),
        model.parallel_time,
    )
    defect = conjugate_symmetry_defect(model)
    if defect > CONJUGATE_TOLERANCE:
        warnings.warn(
            f"paired bands differ from the conjugate structure by {defect:.3e}",
            ConjugateSymmetryWarning,
        )
    return model


def fit_pptnn_1d(x, values, config, function=None, workers=None):
    """Fit a 1D PPTNN to samples on ``[-1, 1]``.

    Parameters:
        x: Training abscissae, also used as the filter evaluation points.
        values: Target values at ``x``.
        config: :class:`PptnnConfig` with ``dim=1``.
        function: Closed form of the target, required by the explicit
            extension and optional for the raw one.
        workers: Worker threads for the band fits (see
            :func:`phasetnn.base.worker_count`).
    """
    if config.dim != 1:
        raise ConfigError("fit_pptnn_1d needs a config with dim=1")
    points, values = _check_training_set(x, values, config)
    x = points[:, 0]

    start = time.perf_counter()
    aux = _auxiliary_1d(x, values, config, function)
    band_filter = BandFilter1D(aux, config.frequency_grid(), x, config.quadrature())
    setup_time = time.perf_counter() - start

    def fit(band):
        filter_start = time.perf_counter()
        component = band_filter.component(band)
        return _fit_band(
            component, config, points, time.perf_counter() - filter_start
        )

    results = parallel_map(fit, config.frequency_grid().bands(), workers=workers)
    return _assemble(config, results, setup_time)


def fit_pptnn_2d(points, values, config, function, workers=None):
    """Fit a 2D PPTNN on ``[-1, 1]^2``.

    The filter contraction over the second axis is shared by all bands of a
    column ``j2``, so columns are the unit of parallel work.
    """
    if config.dim != 2:
        raise ConfigError("fit_pptnn_2d needs a config with dim=2")
    if function is None:
        raise ConfigError("2D fits need the target function for the extension")
    points, values = _check_training_set(points, values, config)

    grid = config.frequency_grid()
    start = time.perf_counter()
    aux = extend_explicit(function, config.decay_order, dim=2)
    quad = config.quadrature()
    band_filter = SeparableBandFilter2D(aux, grid, points, (quad, quad))
    setup_time = time.perf_counter() - start

    def fit_column(j2):
        column_start = time.perf_counter()
        column = band_filter.column(j2)
        shared = (time.perf_counter() - column_start) / len(grid.indices(0))
        results = []
        for j1 in grid.indices(0):
            filter_start = time.perf_counter()
            component = band_filter.component((int(j1), int(j2)), column)
            filter_time = shared + time.perf_counter() - filter_start
            results.append(_fit_band(component, config, points, filter_time))
        return results

    columns = parallel_map(fit_column, [int(j) for j in grid.indices(1)], workers)
    results = [result for column in columns for result in column]
    return _assemble(config, results, setup_time)


def eval_pptnn(model, points):
    """Evaluate a PPTNN.

    Returns:
        ``(value, imag_residual)``: the real part of the band sum and the
        magnitude of its imaginary part. Floats for a single point, arrays
        otherwise.
    """
    dim = model.config.dim
    scalar = np.ndim(points) == 0 or (dim > 1 and np.ndim(points) == 1)
    if scalar:
        points = np.reshape(np.asarray(points, dtype=float), (1, dim))
    points = _as_points(points, dim)

    real = np.zeros(len(points))
    imag = np.zeros(len(points))
    for fit in model.bands:
        t_real, t_imag = fit.evaluate(points)
        theta = 2 * np.pi * (points @ np.atleast_1d(fit.kappa))
        cos, sin = np.cos(theta), np.sin(theta)
        real += t_real * cos - t_imag * sin
        imag += t_real * sin + t_imag * cos
    imag = np.abs(imag)
    if scalar:
        return float(real[0]), float(imag[0])
    return real, imag


def conjugate_symmetry_defect(model):
    """Largest relative deviation of band pairs from the conjugate structure.

    For real data, band ``-j`` should carry the real coefficients of band
    ``j`` and the negated imaginary ones.
    """
    fits = {fit.band: fit for fit in model.bands}
    worst = 0.0
    for band, fit in fits.items():
        negated = tuple(-j for j in band) if isinstance(band, tuple) else -band
        mirror = fits.get(negated)
        if mirror is None or negated == band:
            continue
        scale = max(
            1.0,
            np.max(np.abs(fit.real_coefficients)),
            np.max(np.abs(fit.imag_coefficients)),
        )
        diff = max(
            np.max(np.abs(fit.real_coefficients - mirror.real_coefficients)),
            np.max(np.abs(fit.imag_coefficients + mirror.imag_coefficients)),
        )
        worst = max(worst, float(diff / scale))
    return worst
