"""Hierarchical seeding.

Every random stream is derived from one root seed and a path of keys, e.g.
``rng_for(7, "hinge", "train", 12, "surface")``. String keys are hashed with
CRC-32, and the resulting integer path becomes the ``spawn_key`` of a numpy
``SeedSequence``. The stream itself is PCG64, whose output is specified
bit-for-bit and does not depend on the platform.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("seed path integers must be non-negative")
        return int(k)
    raise TypeError(f"unsupported seed key {k!r}")


def seed_sequence(root, *path):
    return np.random.SeedSequence(int(root), spawn_key=tuple(_key(k) for k in path))


def rng_for(root, *path):
    return np.random.Generator(np.random.PCG64(seed_sequence(root, *path)))


def derive_seed(root, *path):
    """A 63-bit integer seed for APIs that take a plain int."""
    return int(seed_sequence(root, *path).generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> np.uint64(1))
