"""Derived random streams.

Every stochastic operation draws from a generator keyed by a master seed
plus a small integer tuple (stream kind, asset index, path index, ...).
Streams are independent of evaluation order and worker count, so batch
runs, single-path calls, and parallel schedules all produce identical
numbers for the same key.
"""

from __future__ import annotations

import numpy as np

# stream kinds
SIM = 0
RESAMPLE = 1
BOOTSTRAP = 2
UNIVERSE = 3


def child_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for the stream identified by ``key`` under ``master_seed``."""
    return np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))


def child_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by ``key`` under ``master_seed``."""
    return np.random.default_rng(child_sequence(master_seed, *key))
