"""Blind classification of non-stationary signals by maximizing the classification gain."""

from .baselines import GmmParams, brute_force_integer, canonical_labels, em_gmm, kmeans
from .estimator import GainClassifier
from .evaluation import EvalResult, ExperimentResult, false_classification_ratios, run_experiment
from .exceptions import (
    ClassGainError,
    DegenerateSignalError,
    InfeasibleRateError,
    NumericalError,
    SizeGuardError,
    ValidationError,
)
from .gain import (
    RateAllocation,
    classification_gain,
    classified_distortion,
    entropy_bits,
    gaussian_distortion,
    grad_log_objective,
    log_objective,
    optimal_rate_allocation,
)
from .model import (
    ClassificationScheme,
    ClassStats,
    MembershipMatrix,
    MixtureSpec,
    SampleSet,
    class_stats,
    generate,
)
from .pipeline import Classification, classify
from .rounding import (
    RoundingReport,
    TypicalityEpsilons,
    azuma_bound,
    is_typical,
    random_round,
    round_best_of_k,
    typicality_failure_rate,
)
from .solver import SolveReport, SolverConfig, project_row_to_simplex, solve_relaxation

__version__ = "0.1.0"

__all__ = [
    "ClassGainError",
    "ClassStats",
    "Classification",
    "ClassificationScheme",
    "DegenerateSignalError",
    "EvalResult",
    "ExperimentResult",
    "GainClassifier",
    "GmmParams",
    "InfeasibleRateError",
    "MembershipMatrix",
    "MixtureSpec",
    "NumericalError",
    "RateAllocation",
    "RoundingReport",
    "SampleSet",
    "SizeGuardError",
    "SolveReport",
    "SolverConfig",
    "TypicalityEpsilons",
    "ValidationError",
    "azuma_bound",
    "brute_force_integer",
    "canonical_labels",
    "class_stats",
    "classification_gain",
    "classified_distortion",
    "classify",
    "em_gmm",
    "entropy_bits",
    "false_classification_ratios",
    "gaussian_distortion",
    "generate",
    "grad_log_objective",
    "is_typical",
    "kmeans",
    "log_objective",
    "optimal_rate_allocation",
    "project_row_to_simplex",
    "random_round",
    "round_best_of_k",
    "run_experiment",
    "solve_relaxation",
    "typicality_failure_rate",
]

