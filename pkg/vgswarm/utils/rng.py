"""
Seeded random streams.

Every stochastic component (a camera, an agent's random walk, a target policy,
scenario generation) draws from its own numpy Generator derived from the run
seed and a tag. Streams never share state, so adding a consumer does not shift
the numbers seen by another one.
"""

import zlib

import numpy as np


def _tag_key(tag):
    # crc32, never hash(): str hashing is randomized per process
    return zlib.crc32(str(tag).encode("utf-8")) & 0xFFFFFFFF


def derive_seed(seed, tag):
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, _tag_key(tag)]).generate_state(1)[0])


def stream(seed, tag):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, _tag_key(tag)]))


def batch_seeds(base_seed, count):
    """Seeds for a batch of runs, stable for a given base seed."""
    return [derive_seed(base_seed, f"batch/{i}") for i in range(count)]
