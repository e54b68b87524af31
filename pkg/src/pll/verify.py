"""Exact checks of the generation model's distributional identities.

Every check works on a :class:`DiscreteToyProblem`: a finite instance space
with prior ``p(x)`` and conditionals ``p(y|x)``. Integrals over instances become
sums, and sums over candidate sets run over the full enumeration of C, so the
checks carry no sampling noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import candidate_mask_matrix
from .errors import KTooLarge, NonConvergence, ValidationError
from .model import log_softmax, softmax

RANK_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteToyProblem:
    prior: np.ndarray
    cond: np.ndarray

    def __post_init__(self):
        prior = np.asarray(self.prior, dtype=np.float64)
        cond = np.asarray(self.cond, dtype=np.float64)
        if prior.ndim != 1 or cond.ndim != 2 or cond.shape[0] != prior.shape[0]:
            raise ValidationError(f"prior {prior.shape} and cond {cond.shape} do not line up")
        if prior.min() < 0 or abs(prior.sum() - 1.0) > 1e-12:
            raise ValidationError("prior must be a probability vector")
        if cond.min() < 0 or np.max(np.abs(cond.sum(axis=1) - 1.0)) > 1e-12:
            raise ValidationError("each row of cond must be a probability vector")
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "cond", cond)

    @property
    def m(self) -> int:
        return self.prior.shape[0]

    @property
    def k(self) -> int:
        return self.cond.shape[1]

    @property
    def joint(self) -> np.ndarray:
        """p(x, y) as an (m, k) array."""
        return self.prior[:, None] * self.cond

    @classmethod
    def random(cls, m: int, k: int, rng: np.random.Generator, concentration=1.0) -> "DiscreteToyProblem":
        prior = rng.dirichlet(np.full(m, concentration))
        cond = rng.dirichlet(np.full(k, concentration), size=m)
        # renormalize so the 1e-12 sum checks hold after rounding
        return cls(prior / prior.sum(), cond / cond.sum(axis=1, keepdims=True))

    @classmethod
    def uniform(cls, m: int, k: int) -> "DiscreteToyProblem":
        return cls(np.full(m, 1.0 / m), np.full((m, k), 1.0 / k))


@dataclass(frozen=True)
class TransitionMatrixQ:
    Q: np.ndarray
    rank: int


def _guard(k: int, kmax: int):
    if k < 2:
        raise ValidationError(f"need at least 2 classes, got k={k}")
    if k > kmax:
        raise KTooLarge(f"k={k} exceeds the enumeration limit {kmax} for this check")


def _resolve_k(toy: DiscreteToyProblem, k: Optional[int]) -> int:
    if k is not None and k != toy.k:
        raise ValidationError(f"toy problem has {toy.k} classes, not {k}")
    return toy.k


def partial_joint(toy: DiscreteToyProblem) -> np.ndarray:
    """p~(x, Y) over all instances and all Y in C, shape (m, 2**k - 2)."""
    C = candidate_mask_matrix(toy.k)
    return toy.joint @ C.T.astype(np.float64) / (2 ** (toy.k - 1) - 1)


def check_theorem1(toy: DiscreteToyProblem, k: Optional[int] = None) -> float:
    """Total mass of p~(x, Y); should be 1."""
    k = _resolve_k(toy, k)
    _guard(k, 12)
    return float(partial_joint(toy).sum())


def check_theorem2(toy: DiscreteToyProblem, k: Optional[int] = None) -> float:
    """Smallest posterior probability that the true label lies in Y, over all (x, Y) with mass.

    Computed by Bayes' rule from p(Y | y) without using the simplified form of p~.
    """
    k = _resolve_k(toy, k)
    _guard(k, 12)
    C = candidate_mask_matrix(k)
    p_set_given_label = np.where(C, 1.0 / (2 ** (k - 1) - 1), 0.0)  # (|C|, k)
    # p(y=i, Y | x) for every x, Y, i
    joint = toy.cond[:, None, :] * p_set_given_label[None, :, :]
    evidence = joint.sum(axis=2)
    inside = np.where(C[None, :, :], joint, 0.0).sum(axis=2)
    has_mass = evidence > 0
    return float(np.min(inside[has_mass] / evidence[has_mass]))


def check_lemma1(k: int, cond_row=None) -> float:
    """p(y in Y | x) when Y is drawn uniformly from all of C.

    ``cond_row`` is p(y | x) for one instance; by default a point mass on label 0.
    """
    _guard(k, 12)
    if cond_row is None:
        cond_row = np.zeros(k)
        cond_row[0] = 1.0
    cond_row = np.asarray(cond_row, dtype=np.float64)
    C = candidate_mask_matrix(k)
    hits = C.astype(np.float64) @ cond_row  # p(y in C_j | x)
    return float(hits.sum() / C.shape[0])


def check_theorem3(toy: DiscreteToyProblem, k: Optional[int] = None) -> float:
    """Max |p(x, Y | y in Y) - p~(x, Y)| over all cells.

    The left side simulates the labeling system: draw x and y from the toy,
    draw Y uniformly from C independently, then keep only outcomes with y in Y.
    """
    k = _resolve_k(toy, k)
    _guard(k, 10)
    C = candidate_mask_matrix(k)
    ncand = C.shape[0]
    # p(x, y, Y) with Y independent of (x, y)
    full = toy.joint[:, :, None] * np.full((1, 1, ncand), 1.0 / ncand)
    kept = np.where(C.T[None, :, :], full, 0.0)
    accept = kept.sum()
    conditioned = kept.sum(axis=1) / accept
    return float(np.max(np.abs(conditioned - partial_joint(toy))))


def matrix_rank(A: np.ndarray, tol: float = RANK_TOL) -> int:
    """Rank by Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=np.float64)
    rows, cols = A.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        pivot = rank + int(np.argmax(np.abs(A[rank:, c])))
        if abs(A[pivot, c]) <= tol:
            continue
        A[[rank, pivot]] = A[[pivot, rank]]
        A[rank + 1 :] -= np.outer(A[rank + 1 :, c] / A[rank, c], A[rank])
        rank += 1
    return rank


def build_Q(k: int) -> TransitionMatrixQ:
    """Q[i, j] = p(Y = C_j | y = i) under the uniform generation model."""
    _guard(k, 12)
    C = candidate_mask_matrix(k)
    Q = np.where(C.T, 1.0 / (2 ** (k - 1) - 1), 0.0)
    return TransitionMatrixQ(Q, matrix_rank(Q))


def check_rc_equivalence(toy: DiscreteToyProblem, logits, k: Optional[int] = None):
    """Return ``(R, R_rc)`` for cross-entropy loss and per-instance logits of shape (m, k).

    R_rc reweights every label's loss by p(y=i|x) / sum_{j in Y} p(y=j|x) and
    takes the expectation over p~(x, Y), halved.
    """
    k = _resolve_k(toy, k)
    _guard(k, 10)
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (toy.m, k):
        raise ValidationError(f"logits must have shape {(toy.m, k)}, got {logits.shape}")
    losses = -log_softmax(logits)  # L(f(x), i)
    risk = float(np.sum(toy.joint * losses))

    C = candidate_mask_matrix(k).astype(np.float64)
    pt = partial_joint(toy)  # (m, |C|)
    in_set = toy.cond @ C.T  # sum_{j in Y} p(y=j|x)
    per_x = np.einsum("xi,xi->x", toy.cond, losses)  # sum_i p(y=i|x) L_i
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(pt > 0, per_x[:, None] / in_set, 0.0)
    risk_rc = float(0.5 * np.sum(pt * inner))
    return risk, risk_rc


def cc_expected_risk(toy: DiscreteToyProblem, logits) -> float:
    """Expected CC risk: -E_{p~}[log((1/(2^(k-1)-1)) sum_{y in Y} g_y(x))]."""
    k = toy.k
    C = candidate_mask_matrix(k).astype(np.float64)
    g = softmax(np.asarray(logits, dtype=np.float64))
    q = g @ C.T / (2 ** (k - 1) - 1)
    pt = partial_joint(toy)
    return float(-np.sum(np.where(pt > 0, pt * np.log(q), 0.0)))


def check_cc_fixed_point(toy: DiscreteToyProblem, k: Optional[int] = None, steps: int = 20000,
                         lr: float = 0.5, risk_trace: Optional[list] = None,
                         grad_tol: float = 1e-6) -> float:
    """Minimize the exact CC risk over a free logit table; return max |g - p(y|x)|.

    ``risk_trace``, if given, receives the risk before each step and after the last.
    """
    k = _resolve_k(toy, k)
    _guard(k, 8)
    C = candidate_mask_matrix(k).astype(np.float64)
    pt = partial_joint(toy)
    logits = np.zeros((toy.m, k))
    grad_norm = math.inf
    for step in range(steps + 1):
        g = softmax(logits)
        in_set = g @ C.T  # (m, |C|)
        if risk_trace is not None:
            q = in_set / (2 ** (k - 1) - 1)
            risk_trace.append(float(-np.sum(np.where(pt > 0, pt * np.log(q), 0.0))))
        # d/dlogits of -pt log(sum_{y in Y} g_y) = pt * (g - g masked to Y and renormalized)
        ratio = np.where(pt > 0, pt / in_set, 0.0)
        grad = pt.sum(axis=1, keepdims=True) * g - g * (ratio @ C)
        grad_norm = float(np.linalg.norm(grad))
        if step == steps:
            break
        logits -= lr * grad
    if grad_norm > grad_tol:
        raise NonConvergence(f"gradient norm {grad_norm:.3e} after {steps} steps")
    return float(np.max(np.abs(softmax(logits) - toy.cond)))
