"""Deterministic hierarchical random streams.

Every stochastic step derives its generator from (master seed, path of
nonnegative integers), so runs are reproducible bit-for-bit and per-node /
per-scan streams never collide or depend on execution order.
"""

import numpy as np

# purpose tags for stream paths
TRUTH = 1
MEASURE = 2
PREDICT = 3
UPDATE = 4
CONSENSUS = 5


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    if any(p < 0 for p in path):
        raise ValueError("seed path entries must be nonnegative")
    seq = np.random.SeedSequence([int(master_seed), *[int(p) for p in path]])
    return np.random.Generator(np.random.PCG64(seq))
