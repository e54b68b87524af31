"""Shared data model: label spaces, candidate sets, datasets and run configuration.

Labels are 0-indexed everywhere. A candidate set is a non-empty, proper subset
of ``{0, ..., k-1}``; the collection of all such sets has ``2**k - 2`` members.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import (
    EmptySet,
    FullSet,
    KTooLarge,
    OutOfRange,
    ShapeMismatch,
    ValidationError,
)

MAX_ENUMERATE_K = 20


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabelSpace:
    k: int

    def __post_init__(self):
        if int(self.k) < 2:
            raise ValidationError(f"need at least 2 classes, got k={self.k}")

    def __iter__(self):
        return iter(range(self.k))

    def __len__(self):
        return self.k


@dataclass(frozen=True)
class CandidateSet:
    """A candidate label set stored as an arbitrary-width bitset.

    Bit ``i`` of ``bits`` is set iff label ``i`` is a candidate. Python ints
    have no fixed width, so k is unbounded (real PLL data reaches k=219).
    """

    bits: int
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValidationError(f"need at least 2 classes, got k={self.k}")
        if self.bits < 0 or self.bits >> self.k:
            raise OutOfRange(f"bitset {self.bits:#x} has bits outside [0, {self.k})")
        size = self.bits.bit_count()
        if size == 0:
            raise EmptySet("candidate set is empty")
        if size == self.k:
            raise FullSet(f"candidate set covers all {self.k} labels")

    def __contains__(self, label) -> bool:
        return 0 <= label < self.k and bool(self.bits >> int(label) & 1)

    def __iter__(self) -> Iterator[int]:
        bits, i = self.bits, 0
        while bits:
            if bits & 1:
                yield i
            bits >>= 1
            i += 1

    def __len__(self) -> int:
        return self.bits.bit_count()

    def indices(self) -> list[int]:
        return list(self)

    def to_mask(self) -> np.ndarray:
        return np.array([(self.bits >> i) & 1 for i in range(self.k)], dtype=bool)

    @classmethod
    def from_mask(cls, mask) -> "CandidateSet":
        mask = np.asarray(mask, dtype=bool)
        bits = 0
        for i in np.flatnonzero(mask)[::-1]:
            bits |= 1 << int(i)
        return cls(bits, int(mask.shape[0]))

    def __str__(self):
        return "{" + ",".join(map(str, self)) + "}"


def candidate_set_from_indices(indices: Iterable[int], k: int) -> CandidateSet:
    indices = sorted(set(int(i) for i in indices))
    if not indices:
        raise EmptySet("no candidate labels given")
    if indices[0] < 0 or indices[-1] >= k:
        raise OutOfRange(f"label indices {indices} not all in [0, {k})")
    bits = 0
    for i in indices:
        bits |= 1 << i
    return CandidateSet(bits, k)


def enumerate_candidate_sets(k: int) -> list[CandidateSet]:
    """All members of C in ascending bitmask order (length ``2**k - 2``)."""
    if k < 2:
        raise ValidationError(f"need at least 2 classes, got k={k}")
    if k > MAX_ENUMERATE_K:
        raise KTooLarge(f"refusing to enumerate 2**{k} - 2 candidate sets (k > {MAX_ENUMERATE_K})")
    return [CandidateSet(bits, k) for bits in range(1, (1 << k) - 1)]


# the name used throughout the theory
enumerate_C = enumerate_candidate_sets


def candidate_mask_matrix(k: int) -> np.ndarray:
    """Boolean matrix of shape (2**k - 2, k); row j is the mask of the j-th set of C."""
    if k > MAX_ENUMERATE_K:
        raise KTooLarge(f"k={k} exceeds enumeration limit {MAX_ENUMERATE_K}")
    bits = np.arange(1, (1 << k) - 1, dtype=np.int64)
    return ((bits[:, None] >> np.arange(k)) & 1).astype(bool)


def _check_features(features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"features must be an n x d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("features contain non-finite values")
    return x


@dataclass(frozen=True)
class SupervisedDataset:
    features: np.ndarray
    labels: np.ndarray
    k: int

    def __post_init__(self):
        x = _check_features(self.features)
        y = np.asarray(self.labels)
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ShapeMismatch(f"{x.shape[0]} feature rows but labels of shape {y.shape}")
        if self.k < 2:
            raise ValidationError(f"need at least 2 classes, got k={self.k}")
        if y.size and (y.min() < 0 or y.max() >= self.k):
            raise OutOfRange(f"labels must lie in [0, {self.k})")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx) -> "SupervisedDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return SupervisedDataset(self.features[idx], self.labels[idx], self.k)

    def with_features(self, features) -> "SupervisedDataset":
        return SupervisedDataset(features, self.labels, self.k)


@dataclass(frozen=True)
class PartialDataset:
    """Instances paired with candidate sets.

    Candidate sets are held as an (n, k) boolean mask, one row per example;
    :meth:`candidate_set` returns the bitset form of a single row.
    ``hidden_labels`` exists for evaluation only and is never read by trainers.
    """

    features: np.ndarray
    candidates: np.ndarray
    k: int
    hidden_labels: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        x = _check_features(self.features)
        mask = np.asarray(self.candidates, dtype=bool)
        if mask.ndim != 2 or mask.shape != (x.shape[0], self.k):
            raise ShapeMismatch(
                f"candidate mask must have shape ({x.shape[0]}, {self.k}), got {mask.shape}"
            )
        if self.k < 2:
            raise ValidationError(f"need at least 2 classes, got k={self.k}")
        sizes = mask.sum(axis=1)
        if np.any(sizes == 0):
            raise EmptySet(f"empty candidate set at row {int(np.argmax(sizes == 0))}")
        if np.any(sizes == self.k):
            raise FullSet(f"full candidate set at row {int(np.argmax(sizes == self.k))}")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "candidates", _frozen(mask))
        if self.hidden_labels is not None:
            y = np.asarray(self.hidden_labels)
            if y.shape != (x.shape[0],):
                raise ShapeMismatch(f"hidden labels of shape {y.shape} for {x.shape[0]} rows")
            if y.size and (y.min() < 0 or y.max() >= self.k):
                raise OutOfRange(f"hidden labels must lie in [0, {self.k})")
            y = y.astype(np.int64)
            inside = mask[np.arange(y.size), y]
            if not np.all(inside):
                bad = int(np.argmin(inside))
                raise ValidationError(f"row {bad}: true label {y[bad]} is not a candidate")
            object.__setattr__(self, "hidden_labels", _frozen(y))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def candidate_set(self, i: int) -> CandidateSet:
        return CandidateSet.from_mask(self.candidates[i])

    def candidate_sets(self) -> list[CandidateSet]:
        return [self.candidate_set(i) for i in range(self.n)]

    def mean_candidate_size(self) -> float:
        return float(self.candidates.sum(axis=1).mean()) if self.n else 0.0

    def subset(self, idx) -> "PartialDataset":
        idx = np.asarray(idx, dtype=np.int64)
        hidden = None if self.hidden_labels is None else self.hidden_labels[idx]
        return PartialDataset(self.features[idx], self.candidates[idx], self.k, hidden)

    def with_features(self, features) -> "PartialDataset":
        return PartialDataset(features, self.candidates, self.k, self.hidden_labels)

    def true_labeled(self) -> SupervisedDataset:
        """The same instances with their hidden labels (transductive evaluation)."""
        if self.hidden_labels is None:
            raise ValidationError("dataset carries no hidden true labels")
        return SupervisedDataset(self.features, self.hidden_labels, self.k)


MODELS = ("linear", "mlp")
METHODS = ("rc", "cc", "supervised")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    epochs: int = 250
    batch_size: int = 256
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    model: str = "linear"
    method: str = "rc"
    trials: int = 1
    validation_fraction: float = 0.1
    hidden: int = 500

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.trials < 1 or self.hidden < 1:
            raise ValidationError("epochs, batch_size, trials and hidden must be positive")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning rate must be positive, got {self.learning_rate}")
        if not self.weight_decay >= 0:
            raise ValidationError(f"weight decay must be non-negative, got {self.weight_decay}")
        if self.model not in MODELS:
            raise ValidationError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0 <= self.validation_fraction < 1:
            raise ValidationError("validation_fraction must lie in [0, 1)")

    def check_train_size(self, n: int):
        if self.batch_size > n:
            raise ValidationError(f"batch_size {self.batch_size} exceeds training set size {n}")
