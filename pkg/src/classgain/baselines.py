"""Reference classifiers: 1D k-means, 1D Gaussian-mixture EM and exhaustive search."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import SizeGuardError, ValidationError
from .gain import _centered, log_objective
from .model import ClassificationScheme, as_values, one_hot

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 2**24
_CHUNK = 1 << 15


def _kmeanspp(values: np.ndarray, J: int, rng: np.random.Generator) -> np.ndarray:
    centers = [values[rng.integers(values.size)]]
    for _ in range(1, J):
        d2 = np.min((values[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total > 0:
            idx = rng.choice(values.size, p=d2 / total)
        else:
            idx = rng.integers(values.size)
        centers.append(values[idx])
    return np.asarray(centers, dtype=float)


def kmeans(x, n_classes: int, seed: int = 0, max_iters: int = 300) -> ClassificationScheme:
    """Lloyd iterations on scalar samples from k-means++ seeds.

    Ties in assignment go to the lower center index. A center that loses all
    its samples is moved to the sample farthest from its current center.
    """
    values = as_values(x)
    J = int(n_classes)
    if J < 1:
        raise ValidationError("number of classes must be at least 1")
    if J == 1:
        return ClassificationScheme(np.zeros(values.size, dtype=int), 1)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(values, J, rng)
    labels = None
    for _ in range(max_iters):
        new = np.argmin(np.abs(values[:, None] - centers[None, :]), axis=1)
        counts = np.bincount(new, minlength=J)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(np.abs(values - centers[new])))
            centers[j] = values[far]
            new[far] = j
            counts = np.bincount(new, minlength=J)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        sums = np.bincount(labels, weights=values, minlength=J)
        centers = np.where(counts > 0, sums / np.maximum(counts, 1), centers)
    return ClassificationScheme(labels, J)


def within_cluster_ss(x, labels) -> float:
    values = as_values(x)
    labels = np.asarray(labels, dtype=int)
    total = 0.0
    for j in np.unique(labels):
        v = values[labels == j]
        total += float(np.sum((v - v.mean()) ** 2))
    return total


@dataclass
class GmmParams:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood: float
    trace: list[float] = field(default_factory=list, repr=False)
    converged: bool = False

    @property
    def n_classes(self) -> int:
        return self.weights.size


def _log_joint(values, weights, means, variances):
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return (
        log_w[None, :]
        - 0.5 * np.log(2 * np.pi * variances)[None, :]
        - 0.5 * (values[:, None] - means[None, :]) ** 2 / variances[None, :]
    )


def em_gmm(x, n_classes: int, seed: int = 0, max_iters: int = 500, tol: float = 1e-10):
    """Fit a 1D Gaussian mixture by EM.

    Starts from k-means means, k-means class fractions and the pooled
    within-cluster variance. Returns ``(params, responsibilities, scheme)``
    where the scheme takes the most responsible component, ties to the
    lower index.
    """
    values = as_values(x)
    J = int(n_classes)
    N = values.size
    if J < 1:
        raise ValidationError("number of classes must be at least 1")
    if N < J:
        raise ValidationError(f"EM needs N >= J, got N={N}, J={J}")
    xc, floor = _centered(values)
    shift = float(values.mean())
    if float(np.mean(xc**2)) == 0.0:
        warnings.warn("constant signal; EM falls back to a single component", RuntimeWarning, stacklevel=2)
        resp = one_hot(np.zeros(N, dtype=int), J)
        params = GmmParams(np.ones(1), np.array([shift]), np.array([floor]), math.nan, [], True)
        return params, resp, ClassificationScheme(np.zeros(N, dtype=int), J)

    init = kmeans(xc, J, seed=seed).labels
    counts = np.bincount(init, minlength=J).astype(float)
    weights = np.maximum(counts, 1.0) / np.maximum(counts, 1.0).sum()
    means = np.array([xc[init == j].mean() if counts[j] else 0.0 for j in range(J)])
    pooled = sum(float(np.sum((xc[init == j] - means[j]) ** 2)) for j in range(J) if counts[j]) / N
    variances = np.full(J, max(pooled, floor))

    trace: list[float] = []
    converged = False
    for _ in range(max_iters):
        log_joint = _log_joint(xc, weights, means, variances)
        log_norm = logsumexp(log_joint, axis=1)
        ll = float(log_norm.sum())
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] <= tol * max(1.0, abs(ll)):
            converged = True
            break
        resp = np.exp(log_joint - log_norm[:, None])
        mass = resp.sum(axis=0)
        weights = mass / N
        safe = np.where(mass > 0, mass, 1.0)
        means = np.where(mass > 0, (resp * xc[:, None]).sum(axis=0) / safe, means)
        variances = np.where(
            mass > 0, (resp * (xc[:, None] - means[None, :]) ** 2).sum(axis=0) / safe, variances
        )
        variances = np.maximum(variances, floor)
    log_joint = _log_joint(xc, weights, means, variances)
    log_norm = logsumexp(log_joint, axis=1)
    resp = np.exp(log_joint - log_norm[:, None])
    resp /= resp.sum(axis=1, keepdims=True)
    params = GmmParams(weights, means + shift, variances, float(log_norm.sum()), trace, converged)
    labels = np.argmax(resp, axis=1)
    return params, resp, ClassificationScheme(labels, J)


def canonical_labels(labels) -> np.ndarray:
    """Relabel classes in order of first appearance (0, 1, 2, ...)."""
    labels = np.asarray(labels, dtype=int)
    mapping: dict[int, int] = {}
    out = np.empty_like(labels)
    for n, z in enumerate(labels):
        if z not in mapping:
            mapping[z] = len(mapping)
        out[n] = mapping[z]
    return out


def _chunk_objective(xc: np.ndarray, L: np.ndarray, J: int, eps: float) -> np.ndarray:
    N = xc.size
    F = np.zeros(L.shape[0])
    for j in range(J):
        mask = L == j
        s0 = mask.sum(axis=1).astype(float)
        s1 = mask @ xc
        s2 = mask @ (xc * xc)
        live = s0 > 0
        safe = np.where(live, s0, 1.0)
        var = np.maximum(s2 / safe - (s1 / safe) ** 2, 0.0)
        p = s0 / N
        with np.errstate(divide="ignore", invalid="ignore"):
            term = p * np.log2(np.maximum(var, eps)) - 2.0 * p * np.log2(np.where(live, p, 1.0))
        F += np.where(live, term, 0.0)
    return F


def brute_force_integer(x, n_classes: int) -> tuple[ClassificationScheme, float]:
    """Exact minimizer of the hard objective by enumerating every labeling.

    Only labelings in canonical form (classes numbered by first appearance)
    are scored, which removes class-permutation duplicates. Ties keep the
    lexicographically smallest labeling.
    """
    values = as_values(x)
    J = int(n_classes)
    N = values.size
    if J < 1:
        raise ValidationError("number of classes must be at least 1")
    if J**N > BRUTE_FORCE_LIMIT:
        raise SizeGuardError(f"J^N = {J}^{N} exceeds the enumeration limit {BRUTE_FORCE_LIMIT}")
    xc, eps = _centered(values)
    if J == 1:
        labels = np.zeros(N, dtype=int)
        return ClassificationScheme(labels, 1), log_objective(values, one_hot(labels, 1))

    powers = J ** np.arange(N - 1, -1, -1)
    best_F, best_labels = math.inf, None
    # canonical labelings start with class 0, so only the first J^(N-1) codes matter
    total = J ** (N - 1)
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total))
        L = (codes[:, None] // powers[None, :]) % J
        running = np.maximum.accumulate(L, axis=1)
        canon = np.all(L[:, 1:] <= running[:, :-1] + 1, axis=1)
        L = L[canon]
        if L.size == 0:
            continue
        F = _chunk_objective(xc, L, J, eps)
        k = int(np.argmin(F))
        if F[k] < best_F:
            best_F, best_labels = float(F[k]), L[k].copy()
    scheme = ClassificationScheme(best_labels, J)
    return scheme, log_objective(values, one_hot(best_labels, J))
