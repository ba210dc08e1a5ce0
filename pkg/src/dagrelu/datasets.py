"""Small synthetic tasks used by the tests and the CLI examples."""
from __future__ import annotations

import numpy as np

from .network import Dataset


def summing_task(n: int = 256, seed: int = 0, d: int = 2) -> Dataset:
    """x uniform on [0, 1]^d, y = sum of the components."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (n, d))
    return Dataset(X, X.sum(axis=1))


def negative_sum_task(n: int = 256, seed: int = 0) -> Dataset:
    """Two uniform inputs on [0, 1], target -(x1 + x2)."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (n, 2))
    return Dataset(X, -X.sum(axis=1))


def binary_task(n: int = 400, d: int = 10, seed: int = 0, noise: float = 0.0) -> Dataset:
    """Gaussian inputs labelled by a fixed random hyperplane through the origin.

    With ``noise > 0`` that fraction of labels is flipped.
    """
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    X = rng.normal(size=(n, d))
    y = (X @ w > 0).astype(float)
    if noise > 0:
        flip = rng.random(n) < noise
        y[flip] = 1.0 - y[flip]
    return Dataset(X, y)


def train_test_split(data: Dataset, test_fraction: float = 0.25, seed: int = 0):
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(data))
    k = max(1, int(round(test_fraction * len(data))))
    return data.subset(np.sort(idx[k:])), data.subset(np.sort(idx[:k]))
