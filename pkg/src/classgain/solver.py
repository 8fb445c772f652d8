"""Projected-gradient solver for the box-relaxed membership program."""

from __future__ import annotations

import logging
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import NumericalError, ValidationError
from .gain import _centered, classification_gain, objective, objective_and_grad
from .model import as_values

logger = logging.getLogger(__name__)

INIT_STRATEGIES = ("mixed", "dirichlet", "quantile", "outlier_max", "outlier_min", "uniform")
_OUTLIER_LEAK = 1e-6


def project_row_to_simplex(v) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    return project_rows_to_simplex(v.reshape(1, -1)).ravel()


def project_rows_to_simplex(V: np.ndarray) -> np.ndarray:
    """Project each row of ``V`` onto the probability simplex (sort and threshold)."""
    V = np.asarray(V, dtype=float)
    J = V.shape[1]
    if J == 1:
        return np.ones_like(V)
    U = -np.sort(-V, axis=1)
    cssv = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, J + 1)
    rho = np.count_nonzero(U - cssv / ind > 0, axis=1)
    theta = cssv[np.arange(V.shape[0]), rho - 1] / rho
    return np.clip(V - theta[:, None], 0.0, 1.0)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for :func:`solve_relaxation`.

    The search direction is the per-sample gradient ``N * dF/da`` so that
    ``step_init`` does not depend on the signal length. ``init_strategy``
    ``"mixed"`` seeds restart 0 from quantile centers, restarts 1 and 2 with
    the extra classes parked on the largest / smallest sample, and the rest from
    Dirichlet(1, ..., 1) rows.
    """

    max_iters: int = 2000
    step_init: float = 0.1
    armijo_c: float = 1e-4
    step_shrink: float = 0.5
    tol_obj: float = 1e-10
    tol_step: float = 1e-9
    restarts: int = 8
    seed: int = 0
    init_strategy: str = "mixed"
    min_step: float = 1e-14
    max_step: float = 1e6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError("max_iters must be at least 1")
        if self.restarts < 1:
            raise ValidationError("restarts must be at least 1")
        if not 0 < self.armijo_c < 1:
            raise ValidationError("armijo_c must lie in (0, 1)")
        if not 0 < self.step_shrink < 1:
            raise ValidationError("step_shrink must lie in (0, 1)")
        if self.max_step < self.step_init:
            raise ValidationError("max_step must be at least step_init")
        for name in ("step_init", "tol_obj", "tol_step", "min_step"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValidationError(f"init_strategy must be one of {INIT_STRATEGIES}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RestartResult:
    index: int
    strategy: str
    membership: np.ndarray
    final_F: float
    trajectory: np.ndarray
    iterations: int
    converged: bool
    status: str


@dataclass
class SolveReport:
    best_membership: np.ndarray
    best_F: float
    gain: float
    best_restart: int
    restarts: list[RestartResult] = field(repr=False)
    wall_time: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def iterations_used(self) -> int:
        return int(sum(r.iterations for r in self.restarts))

    @property
    def converged(self) -> list[bool]:
        return [r.converged for r in self.restarts]

    @property
    def trajectories(self) -> list[np.ndarray]:
        return [r.trajectory for r in self.restarts]

    def summary(self) -> dict:
        return {
            "best_F": self.best_F,
            "gain": self.gain,
            "best_restart": self.best_restart,
            "iterations_used": self.iterations_used,
            "wall_time": self.wall_time,
            "restarts": [
                {
                    "index": r.index,
                    "init": r.strategy,
                    "final_F": r.final_F,
                    "iterations": r.iterations,
                    "converged": r.converged,
                    "status": r.status,
                }
                for r in self.restarts
            ],
            "warnings": list(self.warnings),
        }


def initial_membership(values: np.ndarray, n_classes: int, strategy: str, rng: np.random.Generator) -> np.ndarray:
    N, J = values.size, n_classes
    if strategy == "uniform" or J == 1:
        return np.full((N, J), 1.0 / J)
    if strategy == "dirichlet":
        return rng.dirichlet(np.ones(J), size=N)
    if strategy == "quantile":
        centers = np.quantile(values, (np.arange(J) + 0.5) / J)
        nearest = np.argmin(np.abs(values[:, None] - centers[None, :]), axis=1)
        a = np.full((N, J), 0.2 / (J - 1))
        a[np.arange(N), nearest] = 0.8
        return a
    if strategy in ("outlier_max", "outlier_min"):
        # classes 1..J-1 each start on one sample: an extreme first, then farthest-first
        chosen = [int(np.argmax(values) if strategy == "outlier_max" else np.argmin(values))]
        while len(chosen) < J - 1:
            d = np.min(np.abs(values[:, None] - values[chosen][None, :]), axis=1)
            d[chosen] = -1.0
            chosen.append(int(np.argmax(d)))
        a = np.full((N, J), _OUTLIER_LEAK)
        a[:, 0] = 1.0 - (J - 1) * _OUTLIER_LEAK
        for j, n in enumerate(chosen, start=1):
            a[n] = 0.0
            a[n, j] = 1.0
        return a
    raise ValidationError(f"unknown init strategy {strategy!r}")


def _restart_strategy(cfg: SolverConfig, index: int) -> str:
    if cfg.init_strategy == "mixed":
        return {0: "quantile", 1: "outlier_max", 2: "outlier_min"}.get(index, "dirichlet")
    return cfg.init_strategy


def _descend(xc: np.ndarray, a: np.ndarray, eps: float, cfg: SolverConfig):
    N = xc.size
    F, g = objective_and_grad(xc, a, eps)
    trajectory = [F]
    if not math.isfinite(F):
        return a, F, trajectory, 0, False, "nonfinite"
    step = cfg.step_init
    for it in range(1, cfg.max_iters + 1):
        direction = N * g
        t = step
        while True:
            trial = project_rows_to_simplex(a - t * direction)
            F_trial = objective(xc, trial, eps)
            decrease = cfg.armijo_c * float(np.sum(g * (trial - a)))
            if math.isfinite(F_trial) and F_trial <= F + decrease:
                break
            t *= cfg.step_shrink
            if t < cfg.min_step:
                # no admissible step: projected-gradient stationary point
                return a, F, trajectory, it - 1, True, "stationary"
        moved = float(np.abs(trial - a).max())
        drop = F - F_trial
        a = trial
        F, g = objective_and_grad(xc, a, eps)
        trajectory.append(F)
        if not math.isfinite(F):
            return a, F, trajectory, it, False, "nonfinite"
        if moved < cfg.tol_step:
            return a, F, trajectory, it, True, "tol_step"
        if drop <= cfg.tol_obj * max(1.0, abs(F)):
            return a, F, trajectory, it, True, "tol_obj"
        step = min(t / cfg.step_shrink, cfg.max_step)
    return a, F, trajectory, cfg.max_iters, False, "max_iters"


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("CLASSGAIN_THREADS", "1")))
    except ValueError:
        return 1


def solve_relaxation(x, n_classes: int, cfg: SolverConfig | None = None) -> SolveReport:
    """Minimize the log coding cost over soft memberships with multi-start projected gradient.

    Each restart iterates ``a <- P(a - t N grad F)`` row by row with Armijo
    backtracking. The lowest final ``F`` wins; ties go to the lowest restart
    index.
    """
    cfg = cfg or SolverConfig()
    values = as_values(x)
    J = int(n_classes)
    if J < 1:
        raise ValidationError("number of classes must be at least 1")
    N = values.size
    notes: list[str] = []
    if N < J:
        msg = f"N={N} is smaller than J={J}; some classes must stay empty"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    start = time.perf_counter()
    xc, eps = _centered(values)

    if float(np.mean(xc**2)) == 0.0:
        msg = "signal is constant; returning uniform membership, gain undefined"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        a = np.full((N, J), 1.0 / J)
        F = objective(xc, a, eps)
        rr = RestartResult(0, "uniform", a, F, np.array([F]), 0, True, "degenerate")
        return SolveReport(a, F, math.nan, 0, [rr], time.perf_counter() - start, notes + [msg])

    if J == 1:
        a = np.ones((N, 1))
        F = objective(xc, a, eps)
        rr = RestartResult(0, "uniform", a, F, np.array([F]), 0, True, "single_class")
        return SolveReport(a, F, 1.0, 0, [rr], time.perf_counter() - start, notes)

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)

    def run(index: int) -> RestartResult:
        strategy = _restart_strategy(cfg, index)
        rng = np.random.default_rng(seeds[index])
        a0 = initial_membership(values, J, strategy, rng)
        a, F, traj, iters, converged, status = _descend(xc, a0, eps, cfg)
        return RestartResult(index, strategy, a, F, np.asarray(traj), iters, converged, status)

    workers = min(_thread_cap(), cfg.restarts)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(cfg.restarts)))
    else:
        results = [run(i) for i in range(cfg.restarts)]

    finite = [r for r in results if math.isfinite(r.final_F)]
    for r in results:
        if r not in finite:
            msg = f"restart {r.index} aborted: non-finite objective"
            logger.warning(msg)
            notes.append(msg)
    if not finite:
        raise NumericalError("every restart produced a non-finite objective")
    best = min(finite, key=lambda r: (r.final_F, r.index))
    best_a = _clean_rows(best.membership)
    gain = classification_gain(values, best_a)
    return SolveReport(
        best_membership=best_a,
        best_F=best.final_F,
        gain=gain,
        best_restart=best.index,
        restarts=results,
        wall_time=time.perf_counter() - start,
        warnings=notes,
    )


def _clean_rows(a: np.ndarray) -> np.ndarray:
    # projection leaves row sums within a few ulps of 1; renormalize for validators
    return a / a.sum(axis=1, keepdims=True)
