"""One entry point that runs any of the classifiers on a signal."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .baselines import GmmParams, brute_force_integer, em_gmm, kmeans
from .exceptions import DegenerateSignalError, ValidationError
from .gain import classification_gain, log_objective
from .model import ClassificationScheme, SampleSet, one_hot
from .rounding import RoundingReport, TypicalityEpsilons, random_round, round_best_of_k
from .solver import SolveReport, SolverConfig, solve_relaxation

METHODS = ("relax", "kmeans", "em", "brute")


@dataclass
class Classification:
    scheme: ClassificationScheme
    objective: float
    gain: float
    method: str
    solve: SolveReport | None = None
    rounding: RoundingReport | None = None
    single_draw: ClassificationScheme | None = None
    gmm: GmmParams | None = None


def _gain(values, labels, J) -> float:
    try:
        return classification_gain(values, one_hot(labels, J))
    except DegenerateSignalError:
        return math.nan


def classify(x, n_classes: int, method: str = "relax", cfg: SolverConfig | None = None,
             round_k: int = 32, seed: int = 0, eps: TypicalityEpsilons | None = None) -> Classification:
    """Classify ``x`` into ``n_classes`` classes with the chosen method.

    ``relax`` solves the relaxation, then keeps the best of ``round_k``
    random roundings; the first draw alone is kept as ``single_draw``.
    """
    sample = x if isinstance(x, SampleSet) else SampleSet.from_array(x)
    values = sample.values
    J = int(n_classes)
    if J < 1:
        raise ValidationError("number of classes must be at least 1")
    if method == "relax":
        cfg = cfg or SolverConfig(seed=seed)
        report = solve_relaxation(sample, J, cfg)
        rounding = round_best_of_k(report.best_membership, sample, k=round_k, seed=seed, eps=eps)
        single = random_round(report.best_membership, seed)
        scheme = rounding.scheme
        return Classification(scheme, rounding.hard_F, _gain(values, scheme.labels, J), method,
                              solve=report, rounding=rounding, single_draw=single)
    if method == "kmeans":
        scheme = kmeans(sample, J, seed=seed)
        gmm = None
    elif method == "em":
        gmm, _, scheme = em_gmm(sample, J, seed=seed)
    elif method == "brute":
        scheme, _ = brute_force_integer(sample, J)
        gmm = None
    else:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    F = log_objective(values, one_hot(scheme.labels, J))
    return Classification(scheme, F, _gain(values, scheme.labels, J), method, gmm=gmm)

