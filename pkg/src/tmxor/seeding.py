"""Per-run random streams derived from a master seed.

Streams use the counter-based Philox bit generator; run ``i`` always gets the
same stream for a given master seed, independent of how many runs execute or
in which order.
"""

from __future__ import annotations

import os

import numpy as np

SEED_ENV = "TMXOR_SEED"
DEFAULT_SEED = 20210101


def resolve_seed(seed: int | None = None) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    return int(env) if env else DEFAULT_SEED


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(run_index,))
    return np.random.Generator(np.random.Philox(ss))
