"""Experiment configuration and shipped presets."""
import json
from importlib import resources

import attr

from .base import ConfigError
from .features import DEFAULT_GAMMA
from .pptnn import PptnnConfig, scalar_or_axes

KINDS = ("filter-bench", "approx", "solve-pde")
METHODS = ("pptnn", "cptnn", "transnet", "rfm")
EXTENSIONS = ("explicit", "sampled", "raw")
FREQUENCY_SAMPLING = ("equispaced", "random")

SCHEMA_VERSION = 1


def _choice(options):
    def validate(instance, attribute, value):
        if value not in options:
            raise ConfigError(
                f"{attribute.name} must be one of {options}, got {value!r}"
            )

    return validate


def _positive_int(instance, attribute, value):
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{attribute.name} must be a positive integer, got {value!r}")


def _float_list(value):
    return [float(v) for v in value]


def _int_list(value):
    return [int(v) for v in value]


@attr.s(kw_only=True, frozen=True)
class ExperimentConfig:
    """Everything one benchmark run needs.

    Point counts are totals in 1D and counts per axis in 2D. Frequency counts
    for CPTNN are per axis in 2D as well.
    """

    kind = attr.ib(default="approx", validator=_choice(KINDS))
    method = attr.ib(default="cptnn", validator=_choice(METHODS))
    problem = attr.ib(default="f1")
    problem_params = attr.ib(factory=dict, converter=dict)

    n_train = attr.ib(default=1001, validator=_positive_int)
    n_test = attr.ib(default=8000, validator=_positive_int)
    n_boundary = attr.ib(default=100, validator=_positive_int)
    n_interface = attr.ib(default=300, validator=_positive_int)

    # Filtering and PPTNN.
    delta_k = attr.ib(default=2.0, converter=scalar_or_axes)
    half_count = attr.ib(default=25, converter=scalar_or_axes)
    n_quadrature = attr.ib(default=5001)
    half_width = attr.ib(default=5.0)
    decay_order = attr.ib(default=6)
    extension = attr.ib(default="explicit", validator=_choice(EXTENSIONS))
    threshold = attr.ib(default=1e-14)

    # Shared by PPTNN (per sub-network) and CPTNN (per frequency block).
    m_sub = attr.ib(default=2, validator=_positive_int)

    # CPTNN.
    n_frequencies = attr.ib(default=250, validator=_positive_int)
    frequency_range = attr.ib(default=(0.0, 20.0), converter=tuple)
    frequency_sampling = attr.ib(
        default="equispaced", validator=_choice(FREQUENCY_SAMPLING)
    )
    include_constant = attr.ib(default=False)

    # Plain feature baselines.
    n_features = attr.ib(default=1000, validator=_positive_int)
    r_max = attr.ib(default=1.0)

    gamma = attr.ib(default=DEFAULT_GAMMA)
    gamma_candidates = attr.ib(factory=tuple, converter=tuple)
    gamma_sweep = attr.ib(factory=list, converter=_float_list)
    r_max_sweep = attr.ib(factory=list, converter=_float_list)
    capacity_sweep = attr.ib(factory=list, converter=_int_list)

    tol = attr.ib(default=1e-12)
    max_iter = attr.ib(default=100, validator=_positive_int)
    rank_tol = attr.ib(default=None)

    seed = attr.ib(default=0)
    workers = attr.ib(default=None)

    def __attrs_post_init__(self):
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if len(self.frequency_range) != 2:
            raise ConfigError("frequency_range needs a lower and an upper bound")
        if self.method in ("transnet", "rfm") and self.kind == "filter-bench":
            raise ConfigError("filter-bench does not take a method")
        if any(g <= 0 for g in self.gamma_sweep) or not self.gamma > 0:
            raise ConfigError("gamma values must be positive")
        if any(r <= 0 for r in self.r_max_sweep) or not self.r_max > 0:
            raise ConfigError("r_max values must be positive")

    def pptnn_config(self, dim=1, m_sub=None, gamma=None):
        """The :class:`~phasetnn.pptnn.PptnnConfig` slice of this config."""
        return PptnnConfig(
            delta_k=self.delta_k,
            half_count=self.half_count,
            n_quadrature=self.n_quadrature,
            half_width=self.half_width,
            decay_order=self.decay_order,
            extension=self.extension,
            threshold=self.threshold,
            m_sub=self.m_sub if m_sub is None else m_sub,
            gamma=self.gamma if gamma is None else gamma,
            gamma_candidates=self.gamma_candidates if gamma is None else (),
            seed=self.seed,
            dim=dim,
            rank_tol=self.rank_tol,
        )

    def to_dict(self):
        data = attr.asdict(self)
        data["frequency_range"] = list(self.frequency_range)
        return data

    @classmethod
    def from_dict(cls, data):
        names = {a.name for a in attr.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_presets():
    """All shipped presets as a name to field mapping."""
    text = resources.files("phasetnn").joinpath("presets.json").read_text("utf-8")
    return json.loads(text)


def preset(name):
    """The :class:`ExperimentConfig` of a shipped preset."""
    return load_config(preset_name=name)


def read_config_data(path=None, preset_name=None):
    """Merged raw fields of a preset and a JSON config file, file winning."""
    data = {}
    if preset_name is not None:
        presets = load_presets()
        if preset_name not in presets:
            raise ConfigError(f"unknown preset {preset_name!r}")
        data.update(presets[preset_name])
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                loaded = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("a config file must hold a JSON object")
        loaded.pop("schema_version", None)
        data.update(loaded)
    return data


def load_config(path=None, preset_name=None, **overrides):
    """Build a config from a preset, a JSON file and explicit overrides.

    Later sources win: preset, then file, then ``overrides`` that are not
    ``None``.
    """
    data = read_config_data(path, preset_name)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)
