"""Deterministic RNG substream derivation.

A substream is keyed by the textual join (unit-separator delimited) of the
seed and the caller-supplied parts, hashed with SHA-256 into a numpy
SeedSequence. Identical keys yield identical generators on every platform
and under any parallel schedule.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, *parts: object) -> np.random.Generator:
    key = "\x1f".join([str(seed), *map(str, parts)]).encode()
    digest = hashlib.sha256(key).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 32, 4)]
    return np.random.default_rng(np.random.SeedSequence(words))
