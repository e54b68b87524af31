"""Candidate-set generation and the class-transition entropy diagnostic.

Two generation models are supported:

* :class:`UniformGenerationModel` -- given the true label ``y``, every one of the
  ``2**(k-1) - 1`` candidate sets containing ``y`` is equally likely.
* :class:`TransitionMatrixModel` -- label ``j`` joins the set independently with
  probability ``T[y, j]``; ``T[y, y] = 1``.

Both are realized by the same rejection sampler: include each non-true label
independently, and redraw whenever the full label set comes out. For the
uniform model the inclusion probability is 1/2, which makes the accepted
distribution exactly uniform over the admissible sets.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .core import MAX_ENUMERATE_K, CandidateSet, PartialDataset, SupervisedDataset
from .errors import DegenerateMatrix, KTooLarge, OutOfRange, ValidationError, ZeroRow

DIAGONAL_TOL = 1e-9


@dataclass(frozen=True)
class UniformGenerationModel:
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValidationError(f"need at least 2 classes, got k={self.k}")

    def set_probability(self, true_label: int) -> float:
        """p(Y | y) for any admissible Y containing ``true_label``."""
        return 1.0 / (2 ** (self.k - 1) - 1)

    def inclusion_matrix(self) -> np.ndarray:
        T = np.full((self.k, self.k), 0.5)
        np.fill_diagonal(T, 1.0)
        return T


@dataclass(frozen=True)
class TransitionMatrixModel:
    T: np.ndarray

    def __post_init__(self):
        T = np.array(self.T, dtype=np.float64)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] < 2:
            raise ValidationError(f"T must be a k x k matrix with k >= 2, got shape {T.shape}")
        if not np.all(np.isfinite(T)) or T.min() < 0 or T.max() > 1:
            raise ValidationError("T entries must lie in [0, 1]")
        if np.max(np.abs(np.diag(T) - 1.0)) > DIAGONAL_TOL:
            raise ValidationError("T must have ones on the diagonal (the true label is always a candidate)")
        np.fill_diagonal(T, 1.0)
        T.setflags(write=False)
        object.__setattr__(self, "T", T)

    @property
    def k(self) -> int:
        return self.T.shape[0]

    @classmethod
    def uniform(cls, k: int, p: float | None = None) -> "TransitionMatrixModel":
        """Constant off-diagonal inclusion ``p`` (default: the uniform model's exact marginal)."""
        if p is None:
            p = uniform_inclusion_probability(k)
        T = np.full((k, k), float(p))
        np.fill_diagonal(T, 1.0)
        return cls(T)

    def inclusion_matrix(self) -> np.ndarray:
        return self.T


GenerationModel = Union[UniformGenerationModel, TransitionMatrixModel]


@dataclass(frozen=True)
class NormalizedTransition:
    P: np.ndarray
    entropy: float


def uniform_inclusion_probability(k: int) -> float:
    """Marginal probability that a given wrong label is a candidate under the uniform model."""
    return (2 ** (k - 2) - 1) / (2 ** (k - 1) - 1) if k >= 2 else 0.0


def expected_candidate_size(k: int) -> float:
    return 1.0 + (k - 1) * uniform_inclusion_probability(k)


def _sample_masks(labels: np.ndarray, T: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    n, k = labels.shape[0], T.shape[0]
    if n and (labels.min() < 0 or labels.max() >= k):
        raise OutOfRange(f"true labels must lie in [0, {k})")
    rows = T[labels]
    # a row whose other entries are all 1 always yields the full set
    certain = np.all((rows >= 1.0) | (np.arange(k) == labels[:, None]), axis=1)
    if np.any(certain):
        bad = int(labels[np.argmax(certain)])
        raise DegenerateMatrix(f"row {bad} of T puts every label in the set with certainty")

    masks = rng.random((n, k)) < rows
    masks[np.arange(n), labels] = True
    full = np.flatnonzero(masks.all(axis=1))
    while full.size:
        redraw = rng.random((full.size, k)) < rows[full]
        redraw[np.arange(full.size), labels[full]] = True
        masks[full] = redraw
        full = full[redraw.all(axis=1)]
    return masks


def sample_candidate_masks(labels, model: GenerationModel, rng: np.random.Generator) -> np.ndarray:
    """Draw one candidate mask per true label; returns an (n, k) boolean array."""
    return _sample_masks(np.asarray(labels), model.inclusion_matrix(), rng)


def sample_uniform_candidate_set(true_label: int, k: int, rng: np.random.Generator) -> CandidateSet:
    if not 0 <= true_label < k:
        raise OutOfRange(f"true label {true_label} not in [0, {k})")
    mask = sample_candidate_masks([true_label], UniformGenerationModel(k), rng)[0]
    return CandidateSet.from_mask(mask)


def sample_tmatrix_candidate_set(
    true_label: int, T: TransitionMatrixModel, rng: np.random.Generator
) -> CandidateSet:
    if not 0 <= true_label < T.k:
        raise OutOfRange(f"true label {true_label} not in [0, {T.k})")
    mask = _sample_masks(np.array([true_label]), T.T, rng)[0]
    return CandidateSet.from_mask(mask)


def generate_partial_dataset(
    ds: SupervisedDataset, model: GenerationModel, rng: np.random.Generator
) -> PartialDataset:
    if model.k != ds.k:
        raise ValidationError(f"generation model has k={model.k} but dataset has k={ds.k}")
    masks = sample_candidate_masks(ds.labels, model, rng)
    return PartialDataset(ds.features, masks.reshape(ds.n, ds.k), ds.k, ds.labels)


def candidate_set_pmf(true_label: int, model: GenerationModel) -> dict[int, float]:
    """Exact distribution of the sampled set (bitmask -> probability) by enumeration."""
    k = model.k
    if k > MAX_ENUMERATE_K:
        raise KTooLarge(f"k={k} exceeds enumeration limit {MAX_ENUMERATE_K}")
    if isinstance(model, UniformGenerationModel):
        p = model.set_probability(true_label)
        return {b: p for b in range(1, (1 << k) - 1) if b >> true_label & 1}
    row = model.T[true_label]
    full = (1 << k) - 1
    weights = {}
    for b in range(1, full):
        if not b >> true_label & 1:
            continue
        w = 1.0
        for j in range(k):
            if j != true_label:
                w *= row[j] if b >> j & 1 else 1.0 - row[j]
        weights[b] = w
    total = sum(weights.values())
    if total <= 0:
        raise DegenerateMatrix(f"row {true_label} of T never produces an admissible set")
    return {b: w / total for b, w in weights.items()}


def entropy_of_T(T) -> NormalizedTransition:
    """Row-normalize T and return the mean row entropy (natural log)."""
    T = T.T if isinstance(T, TransitionMatrixModel) else np.asarray(T, dtype=np.float64)
    sums = T.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise ZeroRow("every row of T needs a positive sum")
    P = T / sums
    logs = np.log(P, where=P > 0, out=np.zeros_like(P))
    entropy = float(-(P * logs).sum() / T.shape[0]) + 0.0  # no negative zero
    return NormalizedTransition(P, entropy)


def load_tmatrix(path) -> TransitionMatrixModel:
    """Read ``{"k": int, "T": [[...], ...]}`` (row-major)."""
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(doc, dict) or "T" not in doc or "k" not in doc:
        raise ValidationError(f"{path}: expected an object with keys 'k' and 'T'")
    T = np.asarray(doc["T"], dtype=np.float64)
    if T.shape != (doc["k"], doc["k"]):
        raise ValidationError(f"{path}: k={doc['k']} but T has shape {T.shape}")
    return TransitionMatrixModel(T)


def save_tmatrix(model: TransitionMatrixModel, path):
    Path(path).write_text(json.dumps({"k": model.k, "T": model.T.tolist()}) + "\n", encoding="utf-8")

