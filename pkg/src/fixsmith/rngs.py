"""Deterministic RNG stream derivation.

Every randomized component draws from a stream derived from (seed, purpose,
indices...).  Streams are independent of execution order and thread schedule,
so parallel runs replay byte-identically.
"""

from __future__ import annotations

import numpy as np

# Fixed purpose tags; never renumber, only append.
CORPUS_SEEDS = 1
CORPUS_PAIR = 2
MODEL_INIT = 3
TRAIN_SHUFFLE = 4
TRAIN_PAIR = 5
DECODE_DRAW = 6
REPAIR_PROGRAM = 7


def derive(seed: int, *path: int) -> np.random.Generator:
    """Generator for a (seed, *path) stream; stable across runs and platforms."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(path)))
