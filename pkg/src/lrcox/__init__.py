"""Joint survival modeling across populations with shared low-rank,
row-sparse coefficient structure."""

from .baselines import (
    ConvexConfig,
    ConvexFitResult,
    SeparateConfig,
    fit_convex,
    fit_separate,
    project_separate,
    prox_nuclear,
    prox_rowgroup,
)
from .coxph import (
    Population,
    SurvivalDataset,
    build_dataset,
    derivatives_eta,
    linear_predictors,
    loglik_linear_predictors,
    make_population,
    partial_loglik,
    penalized_objective,
    population_derivatives,
    population_loglik,
)
from .crossval import CVConfig, CVResult, assign_folds, cv_score, select
from .errors import ConfigError, DataError, NumericalError
from .linalg import (
    Constraints,
    Factorization,
    distance_squared,
    project_rank,
    project_rowsparse,
    ridge_regularized_solve,
    svd_factorization,
)
from .metrics import (
    BaselineHazard,
    FactorModel,
    breslow_baseline,
    brier_score,
    c_index_censored,
    c_index_uncensored,
    factor_transfer,
    model_error,
)
from .simulate import (
    GroundTruth,
    SimulationSpec,
    apply_censoring,
    generate_benchmark,
    generate_truth,
    sample_survival,
)
from .solver import FitConfig, FitResult, fit, fit_path, mm_inner_solve, mm_update_population

__version__ = "0.1.0"
