"""Synthetic data for desk-scale experiments."""
import numpy as np

from .core import SupervisedDataset


def gaussian_blobs(n: int, k: int = 5, rng=None, radius: float = 4.0, d: int = 2) -> SupervisedDataset:
    """``k`` unit-variance clusters with centers evenly spaced on a circle of ``radius``.

    Labels are drawn uniformly; only the first two coordinates carry the centers.
    """
    rng = np.random.default_rng(rng)
    angles = 2 * np.pi * np.arange(k) / k
    centers = np.zeros((k, d))
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    labels = rng.integers(0, k, size=n)
    X = centers[labels] + rng.standard_normal((n, d))
    return SupervisedDataset(X, labels, k)
