"""Synthetic datasets used by the training and CLI tests."""

import numpy as np

from layerslang.dataio import DataSet


def gaussians(n=200, seed=0, sep=5.0):
    """Two isotropic 2-D Gaussian blobs, centers ``sep`` apart, n/2 each."""
    rng = np.random.default_rng(seed)
    half = n // 2
    a = rng.normal(size=(half, 2)) + [-sep / 2, 0.0]
    b = rng.normal(size=(n - half, 2)) + [sep / 2, 0.0]
    labels = np.r_[np.zeros(half, int), np.ones(n - half, int)]
    return DataSet(np.vstack([a, b]), labels, k=2)


def patterns(n=200, seed=0, size=8, noise=0.3):
    """8x8 single-channel images: class 0 has a vertical bar, class 1 a
    horizontal one, at a random position, plus Gaussian pixel noise."""
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=noise, size=(n, size, size))
    labels = rng.integers(0, 2, n)
    pos = rng.integers(1, size - 1, n)
    for i in range(n):
        if labels[i] == 0:
            x[i, :, pos[i]] += 1.0
        else:
            x[i, pos[i], :] += 1.0
    return DataSet(x.reshape(n, -1), labels, k=2)


def xor():
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    return DataSet(x, np.array([0, 1, 1, 0]), k=2)


def regression(n=32, d=3, t=2, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    w = rng.normal(size=(d, t))
    return DataSet(x, targets=np.tanh(x @ w), k=0)
