"""Deterministic RNG stream derivation.

Every stochastic stage draws from its own named stream derived from the
master seed, so reruns are bitwise reproducible and independent oracle
loops (e.g. a plain DP-FedAvg re-implementation) can replay the exact
noise draws of a protocol run.
"""

import zlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    return zlib.crc32(str(tag).encode("utf-8"))


def derive_rng(seed: int, *tags) -> np.random.Generator:
    """Generator for the stream named by ``tags`` under ``seed``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_int_seed(seed: int, *tags) -> int:
    """64-bit integer seed for consumers that cannot take a Generator."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag_to_int(t) for t in tags]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])
