"""Signal containers, membership types and the synthetic mixture generator.

Labels are 0-based in memory (``0 .. J-1``). Files written by the CLI use
1-based labels; see :mod:`classgain.io`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import ValidationError

ROW_SUM_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SampleSet:
    """Observed signal ``x_1 .. x_N``, either a line or a row-major grid."""

    values: np.ndarray
    shape: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        shape = tuple(int(s) for s in self.shape)
        if values.size < 1:
            raise ValidationError("a signal needs at least one sample")
        if not np.all(np.isfinite(values)):
            raise ValidationError("signal contains non-finite values")
        if len(shape) not in (1, 2) or int(np.prod(shape)) != values.size:
            raise ValidationError(f"shape {shape} does not match {values.size} samples")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "shape", shape)

    @classmethod
    def from_array(cls, data) -> "SampleSet":
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.ndim > 2:
            raise ValidationError(f"expected a 1D or 2D signal, got {arr.ndim} dimensions")
        return cls(arr.ravel(), arr.shape)

    @property
    def n_samples(self) -> int:
        return self.values.size

    @property
    def is_grid(self) -> bool:
        return len(self.shape) == 2

    @property
    def value_range(self) -> float:
        """``max x - min x``; zero iff the signal is constant."""
        return float(self.values.max() - self.values.min())

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.shape)

    def __len__(self):
        return self.n_samples


def as_values(x) -> np.ndarray:
    """Flat float array from a SampleSet or anything array-like."""
    if isinstance(x, SampleSet):
        return x.values
    return SampleSet.from_array(x).values


@dataclass(frozen=True)
class MembershipMatrix:
    """N x J row-stochastic matrix of soft memberships."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        check_membership(a)
        object.__setattr__(self, "entries", _frozen(a))

    @property
    def n_samples(self) -> int:
        return self.entries.shape[0]

    @property
    def n_classes(self) -> int:
        return self.entries.shape[1]

    @property
    def is_hard(self) -> bool:
        return is_hard(self.entries)

    @classmethod
    def from_labels(cls, labels, n_classes: int) -> "MembershipMatrix":
        return cls(one_hot(labels, n_classes))

    def to_scheme(self) -> "ClassificationScheme":
        if not self.is_hard:
            raise ValidationError("only a hard membership matrix encodes a scheme")
        return ClassificationScheme(self.entries.argmax(axis=1), self.n_classes)


def check_membership(a, n_samples: int | None = None, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate box and row-sum constraints, returning a float array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] < 1:
        raise ValidationError(f"membership must be 2D with J >= 1 columns, got shape {a.shape}")
    if n_samples is not None and a.shape[0] != n_samples:
        raise ValidationError(f"membership has {a.shape[0]} rows, signal has {n_samples} samples")
    if not np.all(np.isfinite(a)):
        raise ValidationError("membership contains non-finite entries")
    if a.min() < 0 or a.max() > 1:
        raise ValidationError("membership entries must lie in [0, 1]")
    bad = np.abs(a.sum(axis=1) - 1.0) > tol
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"row {row} sums to {a[row].sum()!r}, not 1")
    return a


def as_membership(a, n_samples: int | None = None) -> np.ndarray:
    if isinstance(a, MembershipMatrix):
        a = a.entries
    return check_membership(a, n_samples)


def is_hard(a) -> bool:
    a = np.asarray(a)
    return bool(np.all((a == 0) | (a == 1)))


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValidationError(f"labels must lie in 0..{n_classes - 1}")
    a = np.zeros((labels.size, n_classes))
    a[np.arange(labels.size), labels] = 1.0
    return a


@dataclass(frozen=True)
class ClassificationScheme:
    """Hard labels ``z_n`` in ``0 .. J-1``."""

    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ValidationError("labels must be a 1D sequence")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise ValidationError("labels must be integers")
        labels = labels.astype(int)
        if self.n_classes < 1:
            raise ValidationError("need at least one class")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValidationError(f"labels must lie in 0..{self.n_classes - 1}")
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "n_classes", int(self.n_classes))

    def to_membership(self) -> MembershipMatrix:
        return MembershipMatrix.from_labels(self.labels, self.n_classes)

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def __len__(self):
        return self.labels.size


@dataclass(frozen=True)
class ClassStats:
    """Per-class fraction, mean and biased variance plus the global variance.

    ``mu`` and ``sigma2`` hold NaN for classes whose membership mass is zero;
    ``defined`` marks the others.
    """

    p: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    sigma2_x: float
    mu_x: float
    defined: np.ndarray = field(repr=False)

    @property
    def n_classes(self) -> int:
        return self.p.size


def class_stats(x, a) -> ClassStats:
    """Weighted class statistics of signal ``x`` under membership ``a``.

    ``mu_i = sum_n a_ni x_n / sum_n a_ni`` and
    ``sigma2_i = sum_n a_ni (x_n - mu_i)^2 / sum_n a_ni`` (no Bessel
    correction), ``p_i = sum_n a_ni / N``.
    """
    values = as_values(x)
    a = as_membership(a, values.size)
    n = values.size
    mu_x = float(values.mean())
    xc = values - mu_x
    mass = a.sum(axis=0)
    defined = mass > 0
    safe = np.where(defined, mass, 1.0)
    mu_c = (a * xc[:, None]).sum(axis=0) / safe
    sigma2 = (a * (xc[:, None] - mu_c) ** 2).sum(axis=0) / safe
    mu = np.where(defined, mu_c + mu_x, np.nan)
    sigma2 = np.where(defined, sigma2, np.nan)
    return ClassStats(
        p=_frozen(mass / n),
        mu=_frozen(mu),
        sigma2=_frozen(sigma2),
        sigma2_x=float(np.mean(xc**2)),
        mu_x=mu_x,
        defined=_frozen(defined),
    )


@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian sources plus a layout describing which source emits each sample.

    ``layout`` is ``"blocks"`` (contiguous runs given by ``runs`` as
    ``(class, length)`` pairs) or ``"iid"`` (labels drawn with ``weights``).
    ``grid`` optionally reshapes the generated signal to ``(height, width)``.
    """

    means: tuple[float, ...]
    variances: tuple[float, ...]
    weights: tuple[float, ...] | None = None
    layout: str = "blocks"
    runs: tuple[tuple[int, int], ...] = ()
    seed: int = 0
    grid: tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "variances", tuple(float(v) for v in self.variances))
        object.__setattr__(self, "runs", tuple((int(c), int(k)) for c, k in self.runs))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))
        self.validate()

    @property
    def n_classes(self) -> int:
        return len(self.means)

    def validate(self, n_samples: int | None = None) -> None:
        J = self.n_classes
        if J < 1:
            raise ValidationError("a mixture needs at least one class")
        if len(self.variances) != J:
            raise ValidationError("means and variances differ in length")
        if not all(np.isfinite(self.means)):
            raise ValidationError("class means must be finite")
        if not all(v > 0 and np.isfinite(v) for v in self.variances):
            raise ValidationError("class variances must be positive and finite")
        if self.weights is not None:
            if len(self.weights) != J:
                raise ValidationError("weights and means differ in length")
            if any(w <= 0 for w in self.weights):
                raise ValidationError("class weights must be positive")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValidationError(f"class weights sum to {sum(self.weights)!r}, not 1")
        if self.layout == "blocks":
            if not self.runs:
                raise ValidationError("blocks layout needs at least one run")
            for c, k in self.runs:
                if not 0 <= c < J:
                    raise ValidationError(f"run class {c} out of range 0..{J - 1}")
                if k < 1:
                    raise ValidationError("run lengths must be positive")
            if n_samples is not None and sum(k for _, k in self.runs) != n_samples:
                raise ValidationError(
                    f"run lengths sum to {sum(k for _, k in self.runs)}, expected N={n_samples}"
                )
        elif self.layout != "iid":
            raise ValidationError(f"unknown layout {self.layout!r}")
        if self.grid is not None:
            if len(self.grid) != 2 or min(self.grid) < 1:
                raise ValidationError("grid must be (height, width) with positive sides")
            if n_samples is not None and self.grid[0] * self.grid[1] != n_samples:
                raise ValidationError(f"grid {self.grid} does not hold N={n_samples} samples")

    @property
    def default_n_samples(self) -> int | None:
        if self.grid is not None:
            return self.grid[0] * self.grid[1]
        if self.layout == "blocks":
            return sum(k for _, k in self.runs)
        return None

    def with_seed(self, seed: int) -> "MixtureSpec":
        from dataclasses import replace

        return replace(self, seed=int(seed))


def block_runs(classes: Sequence[int], n_samples: int) -> tuple[tuple[int, int], ...]:
    """Split ``n_samples`` into near-equal contiguous runs cycling through ``classes``."""
    k = len(classes)
    base, extra = divmod(n_samples, k)
    return tuple((c, base + (1 if j < extra else 0)) for j, c in enumerate(classes))


def generate(spec: MixtureSpec, n_samples: int | None = None) -> tuple[SampleSet, ClassificationScheme]:
    """Draw a signal from ``spec``; returns the signal and its ground-truth labels.

    Uses numpy's PCG64 generator seeded with ``spec.seed``, so a given spec
    replays exactly.
    """
    if n_samples is None:
        n_samples = spec.default_n_samples
        if n_samples is None:
            raise ValidationError("iid layout needs an explicit sample count")
    if n_samples < 1:
        raise ValidationError("N must be at least 1")
    spec.validate(n_samples)
    rng = np.random.default_rng(spec.seed)
    J = spec.n_classes
    if spec.layout == "blocks":
        labels = np.concatenate([np.full(k, c, dtype=int) for c, k in spec.runs])
    else:
        weights = spec.weights if spec.weights is not None else (1.0 / J,) * J
        labels = rng.choice(J, size=n_samples, p=np.asarray(weights))
    means = np.asarray(spec.means)[labels]
    scales = np.sqrt(np.asarray(spec.variances))[labels]
    values = rng.normal(means, scales)
    shape = spec.grid if spec.grid is not None else (n_samples,)
    return SampleSet(values, shape), ClassificationScheme(labels, J)
