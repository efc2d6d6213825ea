"""Exact high-dimensional scaling laws for data curation in linear models.

Library surface: pruning strategies and curation constants (``curation``),
deformed Marchenko-Pastur spectral functions (``spectral``), the error laws
and strategy-selection results (``laws``), a Monte Carlo validator
(``simulator``), and a sweep-oriented CLI (``cli``).
"""

from .special_fn import (
    IntervalUnion,
    QuadratureError,
    bivariate_normal_cdf,
    expectation_over_gaussian,
    fold_integral,
    gaussian_mass,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    std_normal_quantile_extended,
)
from .curation import (
    CurationConstants,
    CurationMode,
    GeometrySpec,
    InfeasibleGeometryError,
    PruningFunction,
    constants,
    constants_quadrature,
    gamma_bounds,
    j_ratio,
    make_intervals,
    make_keep_all,
    make_keep_easy,
    make_keep_hard,
    make_qpu,
    solve_u_for_gamma,
    strategy_from_spec,
)
from .spectral import (
    RidgelessLimits,
    SpectralPoint,
    general_t_solver,
    ridgeless_limits,
    spectral_point,
    stieltjes_m,
)
from .laws import (
    ClassificationPrediction,
    OmegaConvention,
    RegressionGeometry,
    RegressionPrediction,
    classification_error,
    classification_error_ridgeless,
    collapse_mitigation,
    compare_strategies,
    data_rich_F,
    optimal_p_asymptotic,
    regression_error,
    regression_error_ridgeless,
)
from .simulator import (
    CollapseConfig,
    EmptyKeptSetError,
    ExperimentConfig,
    TrialAggregate,
    TrialResult,
    apply_curation,
    collapse_loop,
    construct_vectors,
    exact_classification_error,
    exact_regression_error,
    margin_probe,
    resolvent_probe,
    ridge_fit,
    run_trials,
    sample_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # special_fn
    "IntervalUnion", "QuadratureError", "bivariate_normal_cdf",
    "expectation_over_gaussian", "fold_integral", "gaussian_mass",
    "std_normal_cdf", "std_normal_pdf", "std_normal_quantile",
    "std_normal_quantile_extended",
    # curation
    "CurationConstants", "CurationMode", "GeometrySpec",
    "InfeasibleGeometryError", "PruningFunction", "constants",
    "constants_quadrature", "gamma_bounds", "j_ratio", "make_intervals",
    "make_keep_all", "make_keep_easy", "make_keep_hard", "make_qpu",
    "solve_u_for_gamma", "strategy_from_spec",
    # spectral
    "RidgelessLimits", "SpectralPoint", "general_t_solver",
    "ridgeless_limits", "spectral_point", "stieltjes_m",
    # laws
    "ClassificationPrediction", "OmegaConvention", "RegressionGeometry",
    "RegressionPrediction", "classification_error",
    "classification_error_ridgeless", "collapse_mitigation",
    "compare_strategies", "data_rich_F", "optimal_p_asymptotic",
    "regression_error", "regression_error_ridgeless",
    # simulator
    "CollapseConfig", "EmptyKeptSetError", "ExperimentConfig",
    "TrialAggregate", "TrialResult", "apply_curation", "collapse_loop",
    "construct_vectors", "exact_classification_error",
    "exact_regression_error", "margin_probe", "resolvent_probe", "ridge_fit",
    "run_trials", "sample_dataset",
]
