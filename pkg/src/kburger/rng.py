"""Deterministic seed derivation for parallel trials.

splitmix64-style mixing: per-trial seed = mix(master_seed, trial_index),
so results are independent of worker count and scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK
    x ^= x >> 31
    return x


def derive_seed(master: int, *parts: int | str) -> int:
    """Mix a master seed with trial indices / stream labels into a 64-bit seed."""
    h = splitmix64(master & _MASK)
    for p in parts:
        if isinstance(p, str):
            for b in p.encode("utf-8"):
                h = splitmix64(h ^ b)
        else:
            h = splitmix64(h ^ (p & _MASK))
    return h


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
