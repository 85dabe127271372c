"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator seeded from a
``SeedSequence``. Independent purposes (true kernel, data, initialization,
sampling blocks) get independent children via ``spawn_key``.
"""

import numpy as np

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"

STREAM_TRUTH = 0
STREAM_DATA = 1
STREAM_INIT = 2


def seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        raise TypeError("pass an integer seed or SeedSequence, not a Generator")
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.SeedSequence(seed)


def substream(seed, *key):
    """Child sequence of ``seed`` addressed by ``key``; deterministic."""
    ss = seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + tuple(int(k) for k in key))


def generator(seed):
    return np.random.Generator(np.random.PCG64(seed_sequence(seed)))
