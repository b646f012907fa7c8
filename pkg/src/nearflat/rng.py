"""Deterministic per-purpose RNG streams.

Each stream is derived from the master seed and a fixed text label by
hashing, so adding a new experiment or reordering calls never perturbs the
randomness any other consumer sees.
"""

import hashlib

import numpy as np

__all__ = ["stream"]


def stream(master_seed: int, label: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))
