"""Named, platform-stable random substreams.

Every run holds one integer seed; each consumer (init, dropout, shuffle,
fold splitting, synthetic data) draws from its own named stream so that
variants sharing a seed also share initialization wherever shapes agree.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream_seed(seed: int, name: str) -> int:
    digest = hashlib.blake2b(
        f"{int(seed)}:{name}".encode("utf-8"), digest_size=16
    ).digest()
    return int.from_bytes(digest, "little")


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(substream_seed(seed, name)))


def stable_string_hash(s: str) -> int:
    """64-bit hash of a string, identical across runs and platforms."""
    return int.from_bytes(
        hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little"
    )
