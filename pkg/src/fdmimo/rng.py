"""Deterministic stream-splitting for reproducible simulations.

Every random quantity in the package draws from a Philox counter-based
generator keyed by a root seed plus an integer path, so users, drops,
channel trials and randomization candidates get independent substreams
that do not depend on evaluation order:

    substream(seed)             root stream
    substream(seed, k)          e.g. user k
    substream(seed, drop, k)    user k inside drop `drop`
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "child_seed", "complex_normal"]


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the given seed and integer path."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *path: int) -> int:
    """Derived integer seed for APIs that take a root seed themselves."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return int(ss.generate_state(1)[0])


def complex_normal(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples (unit
    variance per complex entry)."""
    return (rng.standard_normal(shape)
            + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
