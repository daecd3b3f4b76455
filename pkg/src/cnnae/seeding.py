"""Deterministic child generators keyed by task labels."""

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def child_rng(seed: int, *keys) -> np.random.Generator:
    """Generator for task ``keys`` under master ``seed``; independent of call order."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys)))


def child_seed(seed: int, *keys) -> int:
    return int(child_rng(seed, *keys).integers(0, 2**63 - 1))
