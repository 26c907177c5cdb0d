"""Counter-based seed derivation: one root seed, many independent task streams."""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def derive_seed(root: int, *tasks: int) -> int:
    h = splitmix64(root & MASK64)
    for t in tasks:
        h = splitmix64(h ^ splitmix64(t & MASK64))
    return h


def rng_for(root: int, *tasks: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(root, *tasks)))
