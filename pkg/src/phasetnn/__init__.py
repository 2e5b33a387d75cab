from .base import (  # noqa
    ConfigError,
    ConjugateSymmetryWarning,
    IllConditionedSolveWarning,
    InterfaceGeometryError,
    NumericalError,
    PhaseTNNError,
    PicardConvergenceWarning,
)
from .config import ExperimentConfig, load_config, preset  # noqa
from .cptnn import (  # noqa
    build_cptnn_basis,
    eval_cptnn,
    fit_function,
    solve_interface_problem,
    solve_linear_pde,
    solve_nonlinear_pde,
)
from .features import sample_feature_basis  # noqa
from .harness import emit_plot_data, relative_l2, run_experiment  # noqa
from .pptnn import PptnnConfig, eval_pptnn, fit_pptnn_1d, fit_pptnn_2d  # noqa
from .problems import make_benchmark, make_pde  # noqa
from .serialization import dump_model, load_model  # noqa

__version__ = "0.1.0"

__all__ = (
    "ConfigError",
    "ConjugateSymmetryWarning",
    "ExperimentConfig",
    "IllConditionedSolveWarning",
    "InterfaceGeometryError",
    "NumericalError",
    "PhaseTNNError",
    "PicardConvergenceWarning",
    "PptnnConfig",
    "build_cptnn_basis",
    "dump_model",
    "emit_plot_data",
    "eval_cptnn",
    "eval_pptnn",
    "fit_function",
    "fit_pptnn_1d",
    "fit_pptnn_2d",
    "load_config",
    "load_model",
    "make_benchmark",
    "make_pde",
    "preset",
    "relative_l2",
    "run_experiment",
    "sample_feature_basis",
    "solve_interface_problem",
    "solve_linear_pde",
    "solve_nonlinear_pde",
)
