"""Seeded synthetic 2-class datasets at desk scale."""

import numpy as np

__all__ = ["make_dataset", "make_blobs", "make_two_moons"]


def _split(x, y, n_train, n_test, rng):
    order = rng.permutation(len(y))
    x, y = x[order], y[order]
    return x[:n_train], y[:n_train], x[n_train : n_train + n_test], y[n_train : n_train + n_test]


def make_blobs(rng: np.random.Generator, n_train: int = 500, n_test: int = 200):
    """Two well-separated 2D Gaussian clouds, class-balanced."""
    total = n_train + n_test
    half = (total + 1) // 2
    centers = np.array([[-1.5, -1.5], [1.5, 1.5]])
    y = np.repeat([0, 1], half)[:total]
    x = centers[y] + 0.7 * rng.standard_normal((total, 2))
    return _split(x, y, n_train, n_test, rng)


def make_two_moons(rng: np.random.Generator, n_train: int = 500, n_test: int = 200):
    """Interleaved half-circles with Gaussian jitter."""
    total = n_train + n_test
    half = (total + 1) // 2
    t = rng.uniform(0.0, np.pi, size=half)
    upper = np.stack([np.cos(t), np.sin(t)], axis=1)
    t = rng.uniform(0.0, np.pi, size=total - half)
    lower = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
    x = np.concatenate([upper, lower])
    y = np.repeat([0, 1], [half, total - half])
    x += 0.15 * rng.standard_normal(x.shape)
    return _split(x, y, n_train, n_test, rng)


def make_dataset(name: str, rng: np.random.Generator, n_train: int = 500, n_test: int = 200):
    if name == "blobs":
        return make_blobs(rng, n_train, n_test)
    if name == "two_moons":
        return make_two_moons(rng, n_train, n_test)
    raise ValueError(f"unknown dataset {name!r}")
