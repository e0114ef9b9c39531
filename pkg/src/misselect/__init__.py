"""Model selection toolkit for possibly misspecified GLMs in high dimensions."""

from .contrast import ContrastEstimate, contrast, estimate_A, estimate_B, true_contrast
from .criteria import CRITERIA, CriterionScores, score_model, select
from .errors import (
    ConvergenceError,
    DegenerateContrastError,
    DivergenceError,
    MisselectError,
    NoSelectableModelError,
    NotPositiveDefiniteError,
    ShapeError,
    SingularDesignError,
)
from .families import (
    BERNOULLI,
    GAUSSIAN,
    POISSON,
    Family,
    cumulant,
    mean,
    quasi_log_likelihood,
    variance,
)
from .path import (
    CandidatePath,
    PathConfig,
    ScoredCandidate,
    ScreenConfig,
    lasso_path,
    path_from_config,
    refit_and_score,
    sica_path,
    sis_screen,
)
from .qmle import FittedModel, best_misspecified_params, fit
from .simbench import (
    Dataset,
    ExperimentResult,
    ReplicationResult,
    ScenarioConfig,
    SelectionMetrics,
    SummaryRow,
    evaluate,
    generate,
    kl_expansion_diagnostic,
    normality_diagnostic,
    robust_sd,
    run_experiment,
    run_replication,
    scenario_truth,
)

__version__ = "0.1.0"

__all__ = [
    "BERNOULLI",
    "CRITERIA",
    "CandidatePath",
    "ContrastEstimate",
    "ConvergenceError",
    "CriterionScores",
    "Dataset",
    "DegenerateContrastError",
    "DivergenceError",
    "ExperimentResult",
    "Family",
    "FittedModel",
    "GAUSSIAN",
    "MisselectError",
    "NoSelectableModelError",
    "NotPositiveDefiniteError",
    "POISSON",
    "PathConfig",
    "ReplicationResult",
    "ScenarioConfig",
    "ScoredCandidate",
    "ScreenConfig",
    "SelectionMetrics",
    "ShapeError",
    "SingularDesignError",
    "SummaryRow",
    "best_misspecified_params",
    "contrast",
    "cumulant",
    "estimate_A",
    "estimate_B",
    "evaluate",
    "fit",
    "generate",
    "kl_expansion_diagnostic",
    "lasso_path",
    "mean",
    "normality_diagnostic",
    "path_from_config",
    "quasi_log_likelihood",
    "refit_and_score",
    "robust_sd",
    "run_experiment",
    "run_replication",
    "scenario_truth",
    "score_model",
    "select",
    "sica_path",
    "sis_screen",
    "true_contrast",
    "variance",
    "__version__",
]
