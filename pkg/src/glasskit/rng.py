"""Seeded random streams.

Every random choice in the toolkit flows from one 64-bit seed. Independent
sub-streams (weight init, data generation, shuffling, augmentation) are derived
by hashing a stream name into the seed sequence, so adding draws to one stream
never perturbs another.
"""

import hashlib

import numpy as np


def _stream_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Generator for the sub-stream `name` of the run seeded by `seed`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, _stream_key(name)])))
