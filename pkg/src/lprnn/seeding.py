"""Deterministic seed derivation.

Every run consumes one 64-bit seed. Components receive children of its
SeedSequence in a fixed documented order, so any artifact is bit-for-bit
reproducible from (config, seed):

- supervised training: child 0 -> network init, child 1 -> stream
  (whose own children are: lexicon, then one per lane in lane order);
- actor-critic training: child 0 -> network init, child 1 -> environment,
  child 2 -> action sampling;
- environments draw per-episode randomness sequentially from their seed.
"""

import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def rng_from(seed) -> np.random.Generator:
    return np.random.default_rng(as_seed_sequence(seed))
