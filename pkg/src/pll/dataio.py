"""Dataset ingestion and the on-disk formats.

Supervised CSV
    ``d`` feature columns followed by one integer label column; an optional
    header line ``f0,...,f{d-1},label``.

Partial CSV
    First line ``# k=<int>``, then an optional header
    ``f0,...,f{d-1},candidates[,true]``. The candidates column holds
    pipe-separated 0-indexed labels (``0|3|7``); ``true`` is the hidden label.

IDX
    The big-endian MNIST container (magic 0x00000803 for images,
    0x00000801 for labels).
"""
from __future__ import annotations

import csv
import re
import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import PartialDataset, SupervisedDataset
from .errors import (
    BadIndex,
    BadMagic,
    CountMismatch,
    EmptyCandidates,
    FullCandidates,
    LabelOutOfRange,
    ParseError,
    RaggedRows,
    Truncated,
    ValidationError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
STD_FLOOR = 1e-8
_K_HEADER = re.compile(r"#\s*k\s*=\s*(\d+)\s*$")

Dataset = Union[SupervisedDataset, PartialDataset]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _is_header(fields) -> bool:
    try:
        [float(f) for f in fields]
    except ValueError:
        return True
    return False


def _parse_floats(fields, row):
    try:
        return [float(f) for f in fields]
    except ValueError as e:
        raise ParseError(f"bad number ({e})", row) from None


def load_supervised_csv(path, k: Optional[int] = None) -> SupervisedDataset:
    features, labels, width = [], [], None
    with open(path, newline="", encoding="utf-8") as f:
        for row_no, fields in enumerate(csv.reader(f), start=1):
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if row_no == 1 and _is_header(fields):
                width = len(fields)
                continue
            if width is None:
                width = len(fields)
            if len(fields) != width:
                raise RaggedRows(f"expected {width} columns, found {len(fields)}", row_no)
            if width < 2:
                raise ParseError("need at least one feature column and a label column", row_no)
            try:
                label = int(fields[-1])
            except ValueError:
                raise ParseError(f"label {fields[-1]!r} is not an integer", row_no) from None
            if label < 0 or (k is not None and label >= k):
                raise LabelOutOfRange(f"label {label} outside [0, {k})", row_no)
            features.append(_parse_floats(fields[:-1], row_no))
            labels.append(label)
    if not labels:
        raise ParseError(f"{path}: no data rows")
    if k is None:
        k = max(max(labels) + 1, 2)
    X = np.array(features, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ParseError(f"{path}: non-finite feature values")
    return SupervisedDataset(X, np.array(labels, dtype=np.int64), k)


def save_supervised_csv(ds: SupervisedDataset, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([f"f{j}" for j in range(ds.d)] + ["label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([_fmt(v) for v in x] + [int(y)])


def _read_exact(f, n, what):
    data = f.read(n)
    if len(data) != n:
        raise Truncated(f"{what}: expected {n} bytes, got {len(data)}")
    return data


def _read_idx(path, magic, ndims):
    with open(path, "rb") as f:
        got = struct.unpack(">I", _read_exact(f, 4, path))[0]
        if got != magic:
            raise BadMagic(f"{path}: magic {got:#010x}, expected {magic:#010x}")
        dims = struct.unpack(f">{ndims}I", _read_exact(f, 4 * ndims, path))
        count = int(np.prod(dims))
        data = np.frombuffer(_read_exact(f, count, path), dtype=np.uint8)
    return data.reshape(dims)


def load_idx_images(images_path, labels_path) -> SupervisedDataset:
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = labels.astype(np.int64)
    k = max(int(y.max()) + 1, 2) if y.size else 10
    return SupervisedDataset(X, y, k)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path):
    """Write uint8 images of shape (n, rows, cols) and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def save_partial_csv(pds: PartialDataset, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# k={pds.k}\n")
        w = csv.writer(f, lineterminator="\n")
        header = [f"f{j}" for j in range(pds.d)] + ["candidates"]
        if pds.hidden_labels is not None:
            header.append("true")
        w.writerow(header)
        for i in range(pds.n):
            row = [_fmt(v) for v in pds.features[i]]
            row.append("|".join(str(j) for j in np.flatnonzero(pds.candidates[i])))
            if pds.hidden_labels is not None:
                row.append(int(pds.hidden_labels[i]))
            w.writerow(row)


def _parse_candidates(text, k, row):
    try:
        idx = {int(t) for t in text.split("|") if t.strip()}
    except ValueError:
        raise BadIndex(f"candidate list {text!r} is not pipe-separated integers", row) from None
    if not idx:
        raise EmptyCandidates("empty candidate set", row)
    if min(idx) < 0 or max(idx) >= k:
        raise BadIndex(f"candidate labels {sorted(idx)} not all in [0, {k})", row)
    if len(idx) == k:
        raise FullCandidates(f"candidate set covers all {k} labels", row)
    mask = np.zeros(k, dtype=bool)
    mask[sorted(idx)] = True
    return mask


def load_partial_csv(path) -> PartialDataset:
    with open(path, newline="", encoding="utf-8") as f:
        first = f.readline()
        m = _K_HEADER.match(first.strip())
        if not m:
            raise ParseError(f"{path}: first line must be '# k=<int>'", 1)
        k = int(m.group(1))
        if k < 2:
            raise ParseError(f"k must be at least 2, got {k}", 1)
        features, masks, hidden = [], [], []
        has_true = None
        width = None
        for row_no, fields in enumerate(csv.reader(f), start=2):
            if not fields:
                continue
            if width is None and any(name in ("candidates", "true") for name in fields):
                width = len(fields)
                has_true = fields[-1] == "true"
                continue
            if width is None:
                width = len(fields)
            if len(fields) != width:
                raise RaggedRows(f"expected {width} columns, found {len(fields)}", row_no)
            if has_true is None:
                # without a header, a trailing integer column after a candidates column means "true"
                has_true = len(fields) >= 3 and "|" not in fields[-1] and "|" in fields[-2]
            ncols = width - (2 if has_true else 1)
            if ncols < 1:
                raise ParseError("need at least one feature column", row_no)
            features.append(_parse_floats(fields[:ncols], row_no))
            masks.append(_parse_candidates(fields[ncols], k, row_no))
            if has_true:
                try:
                    y = int(fields[-1])
                except ValueError:
                    raise ParseError(f"true label {fields[-1]!r} is not an integer", row_no) from None
                if not 0 <= y < k:
                    raise LabelOutOfRange(f"true label {y} outside [0, {k})", row_no)
                if not masks[-1][y]:
                    raise ParseError(f"true label {y} is not among the candidates", row_no)
                hidden.append(y)
    d = len(features[0]) if features else max((width or 1) - (2 if has_true else 1), 0)
    X = np.array(features, dtype=np.float64).reshape(len(features), d)
    mask = np.array(masks, dtype=bool).reshape(len(masks), k)
    return PartialDataset(X, mask, k, np.array(hidden, dtype=np.int64) if has_true else None)


@dataclass(frozen=True)
class SplitSpec:
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.validation_fraction < 1:
            raise ValidationError("validation_fraction must lie in [0, 1)")


def split_indices(n: int, spec: SplitSpec):
    n_val = int(np.floor(spec.validation_fraction * n))
    if spec.validation_fraction > 0 and n_val < 1:
        raise ValidationError(f"validation fraction {spec.validation_fraction} of {n} examples is empty")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def split(ds: Dataset, spec: SplitSpec):
    """Deterministic shuffled split into (train, validation); validation gets floor(fraction * n)."""
    train_idx, val_idx = split_indices(ds.n, spec)
    return ds.subset(train_idx), ds.subset(val_idx)


def standardize(train: Dataset, *others: Dataset):
    """Z-score every dataset with the training set's per-feature mean and std.

    Returns ``([train, *others], (mean, std))``.
    """
    if train.n == 0:
        raise ValidationError("cannot standardize with an empty training set")
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    constant = np.all(train.features == train.features[0], axis=0)
    mean[constant] = train.features[0, constant]  # exact, so constant columns map to 0
    std = np.maximum(std, STD_FLOOR)
    out = [ds.with_features((ds.features - mean) / std) for ds in (train, *others)]
    return out, (mean, std)
