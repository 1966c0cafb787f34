"""Seed handling.

Every sampling routine takes either an integer seed or an existing
``numpy.random.Generator``.  Monte-Carlo trials derive their streams from a
counter-based Philox generator so a trial's draws depend only on the master
seed and the trial index, never on how trials are split among workers.
"""

from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.Generator | None"


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is not None and (not isinstance(seed, (int, np.integer)) or seed < 0):
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.default_rng(seed)


def trial_generator(master_seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Generator for one Monte-Carlo trial, independent of scheduling."""
    key = int(master_seed) & ((1 << 64) - 1)
    counter = [0, 0, int(stream), int(trial)]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
