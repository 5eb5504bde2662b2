"""
Seeded random streams.

Every random draw in the lab comes from a named stream of a counter-based
Philox generator, so a (seed, stream) pair reproduces the same numbers on
every platform.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream_key(stream: int | str) -> int:
    if isinstance(stream, str):
        return zlib.crc32(stream.encode("utf-8"))
    return int(stream)


def make_rng(seed: int, stream: int | str = 0) -> np.random.Generator:
    """Generator for the named stream of a 64-bit seed"""
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(stream_key(stream),))
    return np.random.Generator(np.random.Philox(seq))
