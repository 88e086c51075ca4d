"""Seeded random substreams, one per decision family."""

from __future__ import annotations

import zlib

import numpy as np


class RngStream:
    """A 64-bit seed fanned out into named, independent generators.

    Substream ``name`` with optional integer ``key`` always yields the same
    generator for the same seed, so rounding is reproducible regardless of
    the order in which families are consumed.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def substream(self, name: str, *key: int) -> np.random.Generator:
        words = (zlib.crc32(name.encode("utf-8")),) + tuple(int(k) for k in key)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=words)))

    def thresholds(self, name: str, size: int, *key: int) -> np.ndarray:
        """Uniform draws in (0, 1]; an event of probability q fires iff q >= theta."""
        return 1.0 - self.substream(name, *key).random(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed})"
