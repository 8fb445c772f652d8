"""False-classification ratios and multi-seed experiments."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ValidationError
from .model import ClassificationScheme, MixtureSpec, generate
from .pipeline import METHODS, classify
from .solver import SolverConfig

MAX_PERMUTATION_CLASSES = 8


@dataclass
class EvalResult:
    """Per-class truth counts ``n``, misclassified counts ``m`` and ratios ``r = m / n``.

    ``permutation[e]`` is the truth class matched to estimated label ``e``.
    Ratios of truth classes with no samples are NaN and listed in
    ``undefined``.
    """

    n: np.ndarray
    m: np.ndarray
    ratios: np.ndarray
    overall_error: float
    permutation: tuple[int, ...]
    gain: float | None = None
    seed: int | None = None
    undefined: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "n": [int(v) for v in self.n],
            "m": [int(v) for v in self.m],
            "ratios": [None if math.isnan(r) else float(r) for r in self.ratios],
            "overall_error": self.overall_error,
            "permutation": list(self.permutation),
            "gain": _json_float(self.gain),
            "seed": self.seed,
            "undefined_classes": list(self.undefined),
        }


def _json_float(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None if v is None or math.isnan(v) else ("inf" if v > 0 else "-inf")
    return float(v)


def _labels(z) -> np.ndarray:
    return z.labels if isinstance(z, ClassificationScheme) else np.asarray(z, dtype=int)


def false_classification_ratios(estimated, truth, n_classes: int, gain: float | None = None,
                                seed: int | None = None) -> EvalResult:
    """Match estimated labels to truth by the permutation with fewest errors, then count them."""
    est, tru = _labels(estimated), _labels(truth)
    J = int(n_classes)
    if est.shape != tru.shape:
        raise ValidationError("estimated and truth schemes differ in length")
    if J > MAX_PERMUTATION_CLASSES:
        raise ValidationError(f"permutation matching supports J <= {MAX_PERMUTATION_CLASSES}")
    for z in (est, tru):
        if z.size and (z.min() < 0 or z.max() >= J):
            raise ValidationError(f"labels must lie in 0..{J - 1}")
    confusion = np.zeros((J, J), dtype=int)
    np.add.at(confusion, (est, tru), 1)
    best, best_hits = None, -1
    for perm in itertools.permutations(range(J)):
        hits = int(sum(confusion[e, perm[e]] for e in range(J)))
        if hits > best_hits:
            best, best_hits = perm, hits
    mapped = np.asarray(best)[est] if est.size else est
    n = np.bincount(tru, minlength=J)
    m = np.bincount(tru[mapped != tru], minlength=J)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(n > 0, m / np.maximum(n, 1), np.nan)
    undefined = tuple(int(i) for i in np.flatnonzero(n == 0))
    overall = float(m.sum() / tru.size) if tru.size else 0.0
    return EvalResult(n, m, ratios, overall, tuple(int(p) for p in best), gain, seed, undefined)


def _stats(arr) -> dict:
    arr = np.asarray(arr, dtype=float)
    out = {}
    for name, fn in (("mean", np.nanmean), ("median", np.nanmedian), ("min", np.nanmin), ("max", np.nanmax)):
        v = fn(arr, axis=0)
        out[name] = v.tolist() if isinstance(v, np.ndarray) else float(v)
    return out


@dataclass
class SeedRun:
    seed: int
    result: EvalResult
    single_draw: EvalResult | None = None
    objective: float | None = None
    solve: dict | None = None
    rounding: dict | None = None


@dataclass
class ExperimentResult:
    method: str
    runs: list[SeedRun] = field(default_factory=list)

    @property
    def overall_errors(self) -> np.ndarray:
        return np.array([r.result.overall_error for r in self.runs])

    @property
    def class_ratios(self) -> np.ndarray:
        return np.array([r.result.ratios for r in self.runs], dtype=float)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([np.nan if r.objective is None else r.objective for r in self.runs])

    def aggregate(self) -> dict:
        out = {
            "method": self.method,
            "seeds": [r.seed for r in self.runs],
            "overall_error": _stats(self.overall_errors),
            "class_ratios": _stats(self.class_ratios),
            "zero_error_seeds": int(np.sum(self.overall_errors == 0)),
        }
        singles = [r.single_draw for r in self.runs if r.single_draw is not None]
        if len(singles) == len(self.runs) and singles:
            out["single_draw"] = {
                "overall_error": _stats(np.array([s.overall_error for s in singles])),
                "class_ratios": _stats(np.array([s.ratios for s in singles], dtype=float)),
            }
        return out


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("CLASSGAIN_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(spec: MixtureSpec, method: str, seeds, cfg: SolverConfig | None = None,
                   n_samples: int | None = None, round_k: int = 32) -> ExperimentResult:
    """Generate, classify and score one signal per seed.

    The seed drives the signal draw, the solver restarts and the rounding.
    For the relaxation method both the best-of-k scheme and a single
    rounding draw are scored.
    """
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}")
    cfg = cfg or SolverConfig()
    seeds = [int(s) for s in seeds]

    def one(seed: int) -> SeedRun:
        signal, truth = generate(spec.with_seed(seed), n_samples)
        J = spec.n_classes
        out = classify(signal, J, method, cfg=replace(cfg, seed=seed), round_k=round_k, seed=seed)
        result = false_classification_ratios(out.scheme, truth, J, gain=out.gain, seed=seed)
        single = None
        if out.single_draw is not None:
            single = false_classification_ratios(out.single_draw, truth, J, seed=seed)
        return SeedRun(
            seed,
            result,
            single,
            out.objective,
            out.solve.summary() if out.solve is not None else None,
            out.rounding.summary() if out.rounding is not None else None,
        )

    workers = min(_thread_cap(), len(seeds)) or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, seeds))
    else:
        runs = [one(s) for s in seeds]
    return ExperimentResult(method, runs)
