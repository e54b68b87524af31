"""Linear and d-500-k MLP classifiers with hand-written backprop.

Every loss function returns ``(loss, grads)`` where ``grads`` maps parameter
names to arrays shaped like the parameters. Weight decay is not part of these
gradients; the optimizer adds it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch, ValidationError, ZeroConfidence

PARAM_NAMES = {"linear": ("W", "b"), "mlp": ("W1", "b1", "W2", "b2")}
HIDDEN = 500


@dataclass
class Model:
    kind: str
    params: dict
    d: int
    k: int
    hidden: int = 0

    @classmethod
    def init(cls, kind: str, d: int, k: int, rng: np.random.Generator, hidden: int = HIDDEN) -> "Model":
        """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero."""
        if kind == "linear":
            bound = 1.0 / math.sqrt(d)
            params = {"W": rng.uniform(-bound, bound, (k, d)), "b": np.zeros(k)}
            hidden = 0
        elif kind == "mlp":
            b1, b2 = 1.0 / math.sqrt(d), 1.0 / math.sqrt(hidden)
            params = {
                "W1": rng.uniform(-b1, b1, (hidden, d)),
                "b1": np.zeros(hidden),
                "W2": rng.uniform(-b2, b2, (k, hidden)),
                "b2": np.zeros(k),
            }
        else:
            raise ValidationError(f"unknown model kind {kind!r}")
        return cls(kind, params, d, k, hidden)

    @classmethod
    def zeros(cls, kind: str, d: int, k: int, hidden: int = HIDDEN) -> "Model":
        m = cls.init(kind, d, k, np.random.default_rng(0), hidden)
        for p in m.params.values():
            p[...] = 0.0
        return m

    def names(self):
        return PARAM_NAMES[self.kind]

    def copy(self) -> "Model":
        return Model(self.kind, {n: p.copy() for n, p in self.params.items()}, self.d, self.k, self.hidden)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[n].ravel() for n in self.names()])

    def set_flat(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.num_params():
            raise ShapeMismatch(f"expected {self.num_params()} parameters, got {vec.size}")
        i = 0
        for n in self.names():
            p = self.params[n]
            p[...] = vec[i : i + p.size].reshape(p.shape)
            i += p.size

    def num_params(self) -> int:
        return sum(p.size for p in self.params.values())


@dataclass(frozen=True)
class Prediction:
    logits: np.ndarray
    probs: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _logits(model: Model, X: np.ndarray):
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ShapeMismatch(f"model expects inputs of width {model.d}, got shape {X.shape}")
    p = model.params
    if model.kind == "linear":
        return X @ p["W"].T + p["b"], None
    z = X @ p["W1"].T + p["b1"]
    h = np.maximum(z, 0.0)
    return h @ p["W2"].T + p["b2"], (z, h)


def forward(model: Model, x) -> Prediction:
    """Logits and softmax probabilities for one instance (1-D) or a batch (2-D)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    logits, _ = _logits(model, x[None, :] if single else x)
    probs = softmax(logits)
    if single:
        return Prediction(logits[0], probs[0])
    return Prediction(logits, probs)


def _backward(model: Model, X, cache, delta) -> dict:
    """Parameter gradients given dLoss/dlogits (already averaged over the batch)."""
    p = model.params
    if model.kind == "linear":
        return {"W": delta.T @ X, "b": delta.sum(axis=0)}
    z, h = cache
    dh = delta @ p["W2"]
    dz = dh * (z > 0)
    return {"W1": dz.T @ X, "b1": dz.sum(axis=0), "W2": delta.T @ h, "b2": delta.sum(axis=0)}


def cc_log_normalizer(k: int) -> float:
    """ln(2**(k-1) - 1), overflow-safe for large k."""
    if k <= 60:
        return math.log(2 ** (k - 1) - 1)
    return (k - 1) * math.log(2.0) + math.log1p(-(2.0 ** -(k - 1)))


def _masked_logsumexp(logits, mask):
    masked = np.where(mask, logits, -np.inf)
    top = masked.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(masked - top).sum(axis=1, keepdims=True)))[:, 0]


# ---------------------------------------------------------------------------
# per-example losses on logits

def ce_losses(logits, labels) -> np.ndarray:
    return -log_softmax(logits)[np.arange(len(labels)), labels]


def rc_weights(conf, mask) -> np.ndarray:
    """Normalize confidences over each candidate set; non-candidates get weight 0."""
    w = np.where(mask, conf, 0.0)
    totals = w.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ZeroConfidence(f"row {int(np.argmax(totals[:, 0] <= 0))} has zero confidence on its candidates")
    return w / totals


def rc_losses(logits, mask, conf) -> np.ndarray:
    w = rc_weights(conf, mask)
    return 0.5 * (w * -log_softmax(logits)).sum(axis=1)


def cc_losses(logits, mask) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    lse_all = _masked_logsumexp(logits, np.ones_like(mask))
    return lse_all - _masked_logsumexp(logits, mask) + cc_log_normalizer(mask.shape[1])


# ---------------------------------------------------------------------------
# batch losses with gradients

def supervised_loss_and_grad(model: Model, X, labels):
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    logits, cache = _logits(model, X)
    B = X.shape[0]
    target = np.zeros_like(logits)
    target[np.arange(B), labels] = 1.0
    delta = (softmax(logits) - target) / B
    return float(ce_losses(logits, labels).mean()), _backward(model, X, cache, delta)


def rc_loss_and_grad(model: Model, X, mask, conf):
    """Importance-reweighted risk on a batch.

    ``conf`` holds the current (unnormalized) label confidences; they are
    normalized over each candidate set and treated as constants.
    """
    X = np.asarray(X, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    logits, cache = _logits(model, X)
    B = X.shape[0]
    w = rc_weights(np.asarray(conf, dtype=np.float64), mask)
    loss = 0.5 * (w * -log_softmax(logits)).sum() / B
    delta = (softmax(logits) - w) / (2 * B)
    return float(loss), _backward(model, X, cache, delta)


def cc_loss_and_grad(model: Model, X, mask):
    X = np.asarray(X, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if X.shape[0] == 0:
        raise ValidationError("empty batch")
    logits, cache = _logits(model, X)
    B = X.shape[0]
    g = softmax(logits)
    gm = np.where(mask, g, 0.0)
    gY = gm / gm.sum(axis=1, keepdims=True)
    delta = (g - gY) / B
    return float(cc_losses(logits, mask).mean()), _backward(model, X, cache, delta)


# ---------------------------------------------------------------------------
# checkpoints: JSON header + little-endian float64 sidecar

def save_model(model: Model, path):
    path = Path(path)
    sidecar = path.with_suffix(".bin")
    header = {
        "kind": model.kind,
        "d": model.d,
        "k": model.k,
        "hidden": model.hidden,
        "params": [[n, list(model.params[n].shape)] for n in model.names()],
        "data": sidecar.name,
    }
    path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    model.flat().astype("<f8").tofile(sidecar)


def load_model(path) -> Model:
    path = Path(path)
    header = json.loads(path.read_text(encoding="utf-8"))
    vec = np.fromfile(path.parent / header["data"], dtype="<f8").astype(np.float64)
    model = Model.zeros(header["kind"], header["d"], header["k"], header["hidden"] or HIDDEN)
    model.set_flat(vec)
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"{path}: checkpoint holds non-finite parameters")
    return model
