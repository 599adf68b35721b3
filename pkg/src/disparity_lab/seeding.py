"""Deterministic seed derivation for every random draw in the package.

Each consumer derives its own stream from (master_seed, purpose tag, index),
so runs are reproducible regardless of execution order or parallelism.
"""

from __future__ import annotations

import numpy as np

GEN = 1
SPLIT = 2
INJECT = 3
PHASE1 = 4
PHASE2 = 5
FOLD = 6
INIT = 7


def derive_seed(master_seed: int, *path: int) -> int:
    """Collapse (master_seed, *path) into one reproducible 64-bit seed."""
    seq = np.random.SeedSequence([int(master_seed), *map(int, path)])
    return int(seq.generate_state(1, np.uint64)[0])


def rng_for(master_seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *path))
