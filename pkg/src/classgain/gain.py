"""Rate-distortion arithmetic and the classification-gain objective.

The solver minimizes the base-2 log of the coding cost,

    F(a) = sum_i p_i log2(sigma_i^2) + 2 H(p),

which equals ``log2(sigma_x^2 / G)`` for the classification gain ``G``.
Variances are floored at ``variance_floor(sigma_x^2)`` inside logarithms only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateSignalError, InfeasibleRateError, ValidationError
from .model import ClassStats, as_membership, as_values, class_stats

LN2 = math.log(2.0)
_P_FLOOR = np.finfo(float).tiny


def variance_floor(sigma2_x: float) -> float:
    return 1e-12 * max(float(sigma2_x), 1.0)


def gaussian_distortion(sigma2: float, rate: float) -> float:
    """Smallest mean-squared error for a Gaussian source coded at ``rate`` bits."""
    return sigma2 * 2.0 ** (-2.0 * rate)


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


@dataclass(frozen=True)
class RateAllocation:
    rates: np.ndarray
    lam: float
    total_rate: float
    entropy: float
    p: np.ndarray

    @property
    def coding_rate(self) -> float:
        """Average bits left for coding, ``sum_i p_i R_i``."""
        return float(np.dot(self.p, self.rates))


def _rates(sigma2: np.ndarray, lam: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        r = 0.5 * np.log2(sigma2 / lam)
    return np.maximum(r, 0.0)


def optimal_rate_allocation(stats: ClassStats, rate: float) -> RateAllocation:
    """Water-filling allocation ``R_i = max(0.5 log2(sigma_i^2 / lam), 0)``.

    ``lam`` is chosen so that ``sum_i p_i R_i = rate - H(p)``. A bisection on
    ``log lam`` locates the active set, then ``lam`` is solved in closed form
    on that set.
    """
    p = np.asarray(stats.p, dtype=float)
    live = p > 0
    sigma2 = np.where(live, np.asarray(stats.sigma2, dtype=float), 0.0)
    if np.any(np.isnan(sigma2)):
        raise ValidationError("allocation needs every occupied class variance defined")
    H = entropy_bits(p)
    budget = rate - H
    if budget <= 0:
        raise InfeasibleRateError(f"rate {rate} does not exceed label entropy {H:.6g} bits")
    positive = live & (sigma2 > 0)
    if not positive.any():
        raise DegenerateSignalError("every class has zero variance")

    def coded(lam):
        return float(np.dot(p, _rates(sigma2, lam)))

    J = p.size
    hi = float(sigma2[positive].max())
    lo = float(sigma2[positive].min()) * 2.0 ** (-2.0 * rate * J)
    while coded(lo) < budget:
        lo *= 2.0 ** (-2.0 * rate)
    log_lo, log_hi = math.log(lo), math.log(hi)
    while log_hi - log_lo > 1e-10:
        mid = 0.5 * (log_lo + log_hi)
        if coded(math.exp(mid)) > budget:
            log_lo = mid
        else:
            log_hi = mid
    active = positive & (sigma2 > math.exp(log_hi))
    if not active.any():
        active = positive & (sigma2 >= sigma2[positive].max())
    pa = p[active]
    log2_lam = (np.dot(pa, np.log2(sigma2[active])) - 2.0 * budget) / pa.sum()
    lam = float(2.0**log2_lam)
    return RateAllocation(_rates(sigma2, lam), lam, float(rate), H, p)


class ClassifiedDistortion(NamedTuple):
    value: float
    high_rate: bool
    closed_form: float | None
    sum_form: float


def classified_distortion(stats: ClassStats, rate: float) -> ClassifiedDistortion:
    """Distortion of per-class coding under the optimal allocation.

    In the high-rate regime (every occupied class gets ``R_i > 0``) the value
    is ``prod(sigma_i^2 ** p_i) * 2 ** (2 H - 2 R)``; otherwise the closed
    form does not apply and the direct sum ``sum p_i sigma_i^2 2^(-2 R_i)``
    is returned with ``high_rate=False``.
    """
    alloc = optimal_rate_allocation(stats, rate)
    p = alloc.p
    live = p > 0
    sigma2 = np.where(live, np.asarray(stats.sigma2, dtype=float), 0.0)
    sum_form = float(np.sum(p[live] * sigma2[live] * 2.0 ** (-2.0 * alloc.rates[live])))
    high_rate = bool(np.all(alloc.rates[live] > 0))
    if not high_rate:
        return ClassifiedDistortion(sum_form, False, None, sum_form)
    log2_prod = float(np.dot(p[live], np.log2(sigma2[live])))
    closed = 2.0 ** (log2_prod - 2.0 * rate + 2.0 * alloc.entropy)
    return ClassifiedDistortion(closed, True, closed, sum_form)


def classification_gain(x, a) -> float:
    """``sigma_x^2 / (2^(2H) prod sigma_i^(2 p_i))``; ``inf`` if an occupied class has zero variance."""
    stats = class_stats(x, a)
    if stats.sigma2_x <= 0:
        raise DegenerateSignalError("gain is undefined for a constant signal")
    live = stats.p > 0
    s2 = stats.sigma2[live]
    if np.any(s2 <= 0):
        return math.inf
    log2_gain = math.log2(stats.sigma2_x) - 2.0 * entropy_bits(stats.p) - float(
        np.dot(stats.p[live], np.log2(s2))
    )
    return float(2.0**log2_gain)


def _centered(values: np.ndarray) -> tuple[np.ndarray, float]:
    xc = values - values.mean()
    return xc, variance_floor(float(np.mean(xc**2)))


def objective(xc: np.ndarray, a: np.ndarray, eps: float) -> float:
    """Unchecked F for a pre-centered signal; the solver's inner loop."""
    n = xc.size
    mass = a.sum(axis=0)
    live = mass > 0
    safe = np.where(live, mass, 1.0)
    mu = (a * xc[:, None]).sum(axis=0) / safe
    s2 = (a * (xc[:, None] - mu) ** 2).sum(axis=0) / safe
    p = mass / n
    pl = p[live]
    return float(np.dot(pl, np.log2(np.maximum(s2[live], eps))) - 2.0 * np.dot(pl, np.log2(pl)))


def objective_and_grad(xc: np.ndarray, a: np.ndarray, eps: float) -> tuple[float, np.ndarray]:
    """Unchecked F and dF/da for a pre-centered signal.

    Per entry, with ``s_i = max(sigma_i^2, eps)``::

        N dF/da_ni = log2 s_i + ((x_n - mu_i)^2 / s_i - 1) / ln 2
                     - 2 log2 p_i - 2 / ln 2

    An empty class is treated as the limit of one infinitesimal sample:
    zero deviation, variance at the floor, ``p_i`` at the smallest double.
    """
    n = xc.size
    mass = a.sum(axis=0)
    live = mass > 0
    safe = np.where(live, mass, 1.0)
    mu = (a * xc[:, None]).sum(axis=0) / safe
    dev2 = (xc[:, None] - mu) ** 2
    s2 = (a * dev2).sum(axis=0) / safe
    s = np.where(live, np.maximum(s2, eps), eps)
    dev2 = np.where(live, dev2, 0.0)
    p = mass / n
    log_p = np.log2(np.maximum(p, _P_FLOOR))
    log_s = np.log2(s)
    pl = p[live]
    F = float(np.dot(pl, log_s[live]) - 2.0 * np.dot(pl, log_p[live]))
    grad = (log_s + (dev2 / s - 1.0) / LN2 - 2.0 * log_p - 2.0 / LN2) / n
    return F, grad


def log_objective(x, a) -> float:
    """Base-2 log of the coding cost ``prod(sigma_i^2 ** p_i) * 2 ** (2 H)``."""
    values = as_values(x)
    a = as_membership(a, values.size)
    xc, eps = _centered(values)
    return objective(xc, a, eps)


def grad_log_objective(x, a) -> np.ndarray:
    """Analytic gradient of :func:`log_objective` with respect to every ``a_ni``.

    The partials treat each entry as free (no row-sum coupling), so they can
    be checked entry by entry with finite differences.
    """
    values = as_values(x)
    a = np.asarray(a.entries if hasattr(a, "entries") else a, dtype=float)
    if a.ndim != 2 or a.shape[0] != values.size:
        raise ValidationError(f"membership shape {a.shape} does not match N={values.size}")
    xc, eps = _centered(values)
    return objective_and_grad(xc, a, eps)[1]
