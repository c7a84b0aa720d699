"""Portable splitmix64 random streams.

Everything procedural in the package draws from these streams so that a
world seed reproduces the same geometry on any platform.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# Stream ids used to derive independent sub-seeds.
STREAM_TRAIN = 0x7472_6169_6E00_0001
STREAM_EVAL = 0x6576_616C_0000_0002
STREAM_ACD = 0x6163_6400_0000_0003
STREAM_RETRY = 0x7265_7472_7900_0004


def mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def splitmix64(seed: int) -> int:
    """One splitmix64 output for state ``seed``."""
    return mix64((seed + GOLDEN) & MASK64)


def derive_seed(seed: int, *parts: int) -> int:
    """Chain ``splitmix64(seed XOR part)`` over every part."""
    s = seed & MASK64
    for p in parts:
        s = splitmix64(s ^ (p & MASK64))
    return s


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def angle(self) -> float:
        return self.uniform(-math.pi, math.pi)

    def substream(self, stream_id: int) -> "SplitMix64":
        return SplitMix64(splitmix64(self.state ^ (stream_id & MASK64)))
