"""Mini-batch training for the RC, CC and supervised objectives."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core import PartialDataset, RunConfig, SupervisedDataset
from .errors import NonFiniteLoss, ShapeMismatch, ValidationError
from .model import (
    Model,
    cc_loss_and_grad,
    forward,
    rc_loss_and_grad,
    supervised_loss_and_grad,
)

log = logging.getLogger(__name__)

LAST_EPOCHS = 10


class Adam:
    """Bias-corrected adaptive moment updates with L2 weight decay added to the gradient."""

    def __init__(self, params: dict, learning_rate=1e-3, weight_decay=0.0,
                 beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.m = {n: np.zeros_like(p) for n, p in params.items()}
        self.v = {n: np.zeros_like(p) for n, p in params.items()}

    def step(self, params: dict, grads: dict):
        """Update ``params`` in place."""
        if grads.keys() != params.keys():
            raise ShapeMismatch(f"gradient keys {sorted(grads)} do not match {sorted(params)}")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for n, p in params.items():
            g = grads[n]
            if g.shape != p.shape:
                raise ShapeMismatch(f"{n}: gradient shape {g.shape} != parameter shape {p.shape}")
            if self.weight_decay:
                g = g + self.weight_decay * p
            m = self.m[n] = self.beta1 * self.m[n] + (1.0 - self.beta1) * g
            v = self.v[n] = self.beta2 * self.v[n] + (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.epsilon)


def optimizer_step(state: Adam, params: dict, grads: dict) -> dict:
    state.step(params, grads)
    return params


class ConfidenceTable:
    """Per-example label confidences; zero outside each candidate set."""

    def __init__(self, candidates: np.ndarray):
        self.mask = np.asarray(candidates, dtype=bool)
        self.conf = self.mask.astype(np.float64)

    def rows(self, idx) -> np.ndarray:
        return self.conf[idx]

    def update(self, idx, probs: np.ndarray):
        self.conf[idx] = np.where(self.mask[idx], probs, 0.0)

    def check(self):
        if np.any(self.conf[~self.mask] != 0):
            raise ValidationError("confidence leaked onto a non-candidate label")
        if np.any(self.conf.sum(axis=1) <= 0):
            raise ValidationError("a confidence row has no mass on its candidates")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_accuracy: Optional[float] = None
    transductive_accuracy: Optional[float] = None
    validation_score: Optional[float] = None


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def append(self, record: EpochRecord):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def final_metric(self, key="test_accuracy", last=LAST_EPOCHS) -> Optional[float]:
        """Mean of ``key`` over the last ``last`` epochs (the reported trial accuracy)."""
        vals = [getattr(r, key) for r in self.records[-last:]]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.records)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_jsonl())

    @classmethod
    def read(cls, path) -> "TrainLog":
        with open(path, encoding="utf-8") as f:
            return cls([EpochRecord(**json.loads(line)) for line in f if line.strip()])


def evaluate(model: Model, ds: SupervisedDataset) -> float:
    """Top-1 accuracy; ties go to the lowest label index."""
    if ds.n == 0:
        return float("nan")
    pred = np.argmax(forward(model, ds.features).logits, axis=1)
    return float(np.mean(pred == ds.labels))


def validate_partial(model: Model, pds: PartialDataset) -> float:
    """Fraction of examples whose predicted label lies in their candidate set."""
    if pds.n == 0:
        raise ValidationError("validation set is empty")
    pred = np.argmax(forward(model, pds.features).logits, axis=1)
    return float(np.mean(pds.candidates[np.arange(pds.n), pred]))


def _fit(method, X, targets, k, cfg: RunConfig, rng, test, transductive, validation, on_epoch=None):
    n, d = X.shape
    cfg.check_train_size(n)
    model = Model.init(cfg.model, d, k, rng, cfg.hidden)
    opt = Adam(model.params, cfg.learning_rate, cfg.weight_decay)
    conf = ConfidenceTable(targets) if method == "rc" else None
    out = TrainLog()

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = X[idx]
            if method == "rc":
                loss, grads = rc_loss_and_grad(model, xb, targets[idx], conf.rows(idx))
            elif method == "cc":
                loss, grads = cc_loss_and_grad(model, xb, targets[idx])
            else:
                loss, grads = supervised_loss_and_grad(model, xb, targets[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"{method} loss became {loss} at epoch {epoch}, batch starting {start}")
            opt.step(model.params, grads)
            if conf is not None:
                conf.update(idx, forward(model, xb).probs)
            total += loss * len(idx)

        rec = EpochRecord(epoch, total / n)
        if test is not None:
            rec.test_accuracy = evaluate(model, test)
        if transductive is not None:
            rec.transductive_accuracy = evaluate(model, transductive)
        if validation is not None and validation.n:
            rec.validation_score = validate_partial(model, validation)
        out.append(rec)
        log.debug("%s epoch %d loss %.6f test %s", method, epoch, rec.train_loss, rec.test_accuracy)
        if on_epoch is not None:
            on_epoch(model, rec)
    return model, out


def _transductive(pds: PartialDataset, enabled: bool):
    if enabled and pds.hidden_labels is not None:
        return pds.true_labeled()
    return None


def train_rc(pds: PartialDataset, test: Optional[SupervisedDataset], cfg: RunConfig,
             rng: np.random.Generator, validation: Optional[PartialDataset] = None,
             transductive: bool = True, on_epoch=None):
    """Risk-consistent training.

    Confidences start at 1 on every candidate. After each optimizer step the
    batch's confidence rows are replaced by the updated model's probabilities,
    zeroed outside the candidate set.
    """
    return _fit("rc", pds.features, pds.candidates, pds.k, cfg, rng, test,
                _transductive(pds, transductive), validation, on_epoch)


def train_cc(pds: PartialDataset, test: Optional[SupervisedDataset], cfg: RunConfig,
             rng: np.random.Generator, validation: Optional[PartialDataset] = None,
             transductive: bool = True, on_epoch=None):
    return _fit("cc", pds.features, pds.candidates, pds.k, cfg, rng, test,
                _transductive(pds, transductive), validation, on_epoch)


def train_supervised(ds: SupervisedDataset, test: Optional[SupervisedDataset], cfg: RunConfig,
                     rng: np.random.Generator, validation: Optional[PartialDataset] = None,
                     transductive: bool = True, on_epoch=None):
    return _fit("supervised", ds.features, ds.labels, ds.k, cfg, rng, test,
                ds if transductive else None, validation, on_epoch)


def train(data, test, cfg: RunConfig, rng, validation=None, transductive=True, on_epoch=None):
    """Dispatch on ``cfg.method``. Supervised training on partial data uses its hidden labels."""
    if cfg.method == "rc":
        return train_rc(data, test, cfg, rng, validation, transductive, on_epoch)
    if cfg.method == "cc":
        return train_cc(data, test, cfg, rng, validation, transductive, on_epoch)
    if isinstance(data, PartialDataset):
        data = data.true_labeled()
    return train_supervised(data, test, cfg, rng, validation, transductive, on_epoch)
