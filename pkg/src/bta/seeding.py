"""Seed splitting.

Every random stream is derived from one master seed plus a tuple of integer
keys, so a fold or a sweep cell can be re-run alone and still see the same
numbers it saw inside the full run::

    rng = derive_rng(seed, STREAM_FOLD_INIT, fold)
"""

import zlib

import numpy as np

STREAM_SYNTH = 1
STREAM_FOLDS = 2
STREAM_INIT = 3
STREAM_SHUFFLE = 4
STREAM_MASK = 5
STREAM_SPLIT = 6
STREAM_MIX = 7
STREAM_SESSIONS = 8


def derive_seed_sequence(seed, *keys):
    entropy = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            key = zlib.crc32(key.encode("utf-8"))
        entropy.append(int(key) & 0xFFFFFFFF)
    return np.random.SeedSequence(entropy)


def derive_rng(seed, *keys):
    return np.random.default_rng(derive_seed_sequence(seed, *keys))
