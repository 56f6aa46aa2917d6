"""Deterministic RNG derivation.

Every source of randomness in the package is a numpy Generator derived
from a master seed plus a tuple of tags (strings or ints). Streams are
independent of each other and of the order in which they are created,
which keeps runs reproducible even when code paths draw different
numbers of variates.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _as_words(part) -> list[int]:
    if isinstance(part, (int, np.integer)):
        return [int(part) & 0xFFFFFFFF, (int(part) >> 32) & 0xFFFFFFFF]
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def derive_rng(seed: int, *tags) -> np.random.Generator:
    """Generator for the stream identified by (seed, *tags)."""
    words = [int(seed) & 0xFFFFFFFF]
    for tag in tags:
        words.extend(_as_words(tag))
    return np.random.default_rng(np.random.SeedSequence(words))
