"""Randomized rounding of a relaxed membership, typicality checks and the failure bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSignalError, ValidationError
from .gain import log_objective
from .model import ClassificationScheme, SampleSet, as_membership, as_values, class_stats, one_hot


@dataclass(frozen=True)
class TypicalityEpsilons:
    """Tolerances on class mass (``eps1``), first moment (``eps2``) and second moment (``eps3``)."""

    eps1: float
    eps2: float
    eps3: float

    def __post_init__(self):
        for name in ("eps1", "eps2", "eps3"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValidationError(f"{name} must be a positive finite number, got {v!r}")

    @classmethod
    def default_for(cls, n_samples: int, value_range: float) -> "TypicalityEpsilons":
        """``eps1 = eps2 / V = eps3 / V^2 = N^(-1/3)``: the bound vanishes as N grows."""
        base = n_samples ** (-1.0 / 3.0)
        V = value_range if value_range > 0 else 1.0
        return cls(base, base * V, base * V * V)


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _draw(a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(a, axis=1)
    cum /= cum[:, -1:]
    u = rng.random(a.shape[0])
    return np.count_nonzero(cum <= u[:, None], axis=1)


def random_round(a_star, seed: int = 0) -> ClassificationScheme:
    """Draw ``z_n = i`` independently with probability ``a*_ni``."""
    a = as_membership(a_star)
    return ClassificationScheme(_draw(a, _trial_rng(seed, 0)), a.shape[1])


@dataclass(frozen=True)
class TypicalityResult:
    typical: bool
    residuals: np.ndarray
    class_residuals: np.ndarray
    skipped: np.ndarray
    eps: TypicalityEpsilons

    def __bool__(self):
        return self.typical


def typicality_residuals(labels: np.ndarray, a_star: np.ndarray, values: np.ndarray):
    """Normalized deviations ``|sum a - sum a*| / N`` for the three moment conditions.

    Returns a ``(3, J)`` array and a mask of classes whose relaxed mean is
    undefined (their moment rows are NaN).
    """
    N, J = a_star.shape
    a = one_hot(labels, J)
    stats = class_stats(values, a_star)
    mu_star = stats.mu
    skipped = ~stats.defined
    diff = a - a_star
    res = np.full((3, J), np.nan)
    res[0] = np.abs(diff.sum(axis=0)) / N
    x = values[:, None]
    res[1] = np.abs((diff * x).sum(axis=0)) / N
    dev2 = (x - np.where(skipped, 0.0, mu_star)) ** 2
    res[2] = np.abs((diff * dev2).sum(axis=0)) / N
    res[1:, skipped] = np.nan
    return res, skipped


def is_typical(z, a_star, x, eps: TypicalityEpsilons) -> TypicalityResult:
    """Check whether a hard scheme stays within ``eps * N`` of the relaxed moments for every class.

    Classes left empty by ``a_star`` only take part in the count condition.
    """
    values = as_values(x)
    a_star = as_membership(a_star, values.size)
    labels = z.labels if isinstance(z, ClassificationScheme) else np.asarray(z, dtype=int)
    if labels.size != values.size:
        raise ValidationError("scheme and signal differ in length")
    res, skipped = typicality_residuals(labels, a_star, values)
    limits = np.array([eps.eps1, eps.eps2, eps.eps3])
    worst = np.array([np.nanmax(row) if np.any(~np.isnan(row)) else 0.0 for row in res])
    ok = bool(np.all(np.nan_to_num(res, nan=0.0) <= limits[:, None]))
    return TypicalityResult(ok, worst, res, skipped, eps)


def azuma_bound(n_samples: int, n_classes: int, value_range: float, eps: TypicalityEpsilons) -> float:
    """Upper bound on the probability that one rounding is not typical.

    ``2J [exp(-2 eps1^2 N) + exp(-2 eps2^2 N / V^2) + exp(-2 eps3^2 N / V^4)]``.
    May exceed 1.
    """
    if n_samples < 1:
        raise ValidationError("N must be at least 1")
    V = float(value_range)
    if V <= 0:
        raise DegenerateSignalError("bound needs a signal with positive range")
    N, J = n_samples, n_classes
    return (
        2 * J * math.exp(-2 * eps.eps1**2 * N)
        + 2 * J * math.exp(-2 * eps.eps2**2 * N / V**2)
        + 2 * J * math.exp(-2 * eps.eps3**2 * N / V**4)
    )


@dataclass(frozen=True)
class RoundingReport:
    scheme: ClassificationScheme
    hard_F: float
    typicality: TypicalityResult
    trials: int
    azuma_bound: float
    trial_F: np.ndarray

    @property
    def is_typical(self) -> bool:
        return self.typicality.typical

    def summary(self) -> dict:
        eps = self.typicality.eps
        return {
            "hard_F": self.hard_F,
            "trials": self.trials,
            "is_typical": self.is_typical,
            "eps": [eps.eps1, eps.eps2, eps.eps3],
            "residuals": [float(r) for r in self.typicality.residuals],
            "azuma_bound": self.azuma_bound,
        }


def round_best_of_k(
    a_star, x, k: int = 32, seed: int = 0, eps: TypicalityEpsilons | None = None
) -> RoundingReport:
    """Round ``k`` times and keep the scheme with the lowest hard objective.

    Trial ``t`` draws from a stream derived from ``(seed, t)``; trial 0
    reproduces :func:`random_round` with the same seed. Ties keep the
    earliest trial.
    """
    if k < 1:
        raise ValidationError("k must be at least 1")
    sample = x if isinstance(x, SampleSet) else SampleSet.from_array(x)
    values = sample.values
    a = as_membership(a_star, values.size)
    J = a.shape[1]
    best_labels, best_F = None, math.inf
    trial_F = np.empty(k)
    for t in range(k):
        labels = _draw(a, _trial_rng(seed, t))
        F = log_objective(values, one_hot(labels, J))
        trial_F[t] = F
        if F < best_F:
            best_labels, best_F = labels, F
    V = sample.value_range
    if eps is None:
        eps = TypicalityEpsilons.default_for(values.size, V)
    typ = is_typical(best_labels, a, values, eps)
    bound = azuma_bound(values.size, J, V, eps) if V > 0 else math.nan
    return RoundingReport(ClassificationScheme(best_labels, J), best_F, typ, k, bound, trial_F)


def typicality_failure_rate(
    a_star, x, eps: TypicalityEpsilons, trials: int = 1000, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo estimate of ``P(not typical)`` for single roundings of ``a_star``.

    Trial ``t`` uses the same stream as trial ``t`` of :func:`round_best_of_k`.
    Returns the empirical failure fraction and its standard error.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    values = as_values(x)
    a = as_membership(a_star, values.size)
    limits = np.array([eps.eps1, eps.eps2, eps.eps3])[:, None]
    fails = 0
    for t in range(trials):
        res, _ = typicality_residuals(_draw(a, _trial_rng(seed, t)), a, values)
        fails += not np.all(np.nan_to_num(res, nan=0.0) <= limits)
    rate = fails / trials
    return rate, math.sqrt(rate * (1 - rate) / trials)
