"""scikit-learn compatible front end for the relaxation classifier."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .baselines import _log_joint
from .gain import variance_floor
from .model import SampleSet, class_stats, one_hot
from .pipeline import classify
from .solver import SolverConfig


def _as_signal(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature column, got {X.shape[1]}")
        X = X[:, 0]
    return X


class GainClassifier(ClusterMixin, BaseEstimator):
    """Blind classification of scalar samples by maximizing the classification gain.

    Solves the box-relaxed membership program with multi-start projected
    gradient and rounds the soft memberships at random, keeping the best of
    ``round_k`` draws.

    Parameters
    ----------
    n_classes : int, default=2
    restarts : int, default=8
    max_iters : int, default=2000
    step_init : float, default=0.1
    init_strategy : {"mixed", "dirichlet", "quantile", "outlier_max", "outlier_min", "uniform"}, default="mixed"
    round_k : int, default=32
    random_state : int, default=0

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    membership_ : ndarray of shape (n_samples, n_classes)
        Relaxed soft memberships.
    objective_ : float
        Log coding cost of ``labels_``.
    relaxed_objective_ : float
    gain_ : float
    weights_, means_, variances_ : ndarray of shape (n_classes,)
        Class statistics of ``labels_``; NaN for empty classes.
    """

    def __init__(self, n_classes=2, restarts=8, max_iters=2000, step_init=0.1,
                 init_strategy="mixed", round_k=32, random_state=0):
        self.n_classes = n_classes
        self.restarts = restarts
        self.max_iters = max_iters
        self.step_init = step_init
        self.init_strategy = init_strategy
        self.round_k = round_k
        self.random_state = random_state

    def fit(self, X, y=None):
        x = _as_signal(X)
        seed = 0 if self.random_state is None else int(self.random_state)
        cfg = SolverConfig(max_iters=self.max_iters, step_init=self.step_init, restarts=self.restarts,
                           seed=seed, init_strategy=self.init_strategy)
        out = classify(SampleSet.from_array(x), self.n_classes, "relax", cfg=cfg,
                       round_k=self.round_k, seed=seed)
        stats = class_stats(x, one_hot(out.scheme.labels, self.n_classes))
        self.labels_ = np.asarray(out.scheme.labels)
        self.membership_ = out.solve.best_membership
        self.objective_ = out.objective
        self.relaxed_objective_ = out.solve.best_F
        self.gain_ = out.gain
        self.solve_report_ = out.solve
        self.rounding_report_ = out.rounding
        self.weights_ = np.asarray(stats.p)
        self.means_ = np.asarray(stats.mu)
        self.variances_ = np.asarray(stats.sigma2)
        self._floor = variance_floor(stats.sigma2_x)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        """Assign each sample to the occupied class of highest weighted Gaussian density."""
        check_is_fitted(self, "labels_")
        x = _as_signal(X)
        live = self.weights_ > 0
        weights = np.where(live, self.weights_, 0.0)
        means = np.where(live, self.means_, 0.0)
        variances = np.where(live, np.maximum(np.nan_to_num(self.variances_), self._floor), 1.0)
        return np.argmax(_log_joint(x, weights, means, variances), axis=1)
