"""Counter-seeded xoshiro256++ generator.

Pure-Python mirror of the generator compiled into the numba kernels
(`_kernels.py`). Both sides must produce bit-identical streams: trajectory
workers derive their state statelessly from (master seed, trajectory index),
which is what makes ensemble output independent of scheduling.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """splitmix64 finalizer: a bijective avalanche mix on 64-bit words."""
    x &= MASK64
    x ^= x >> 30
    x = (x * _MIX1) & MASK64
    x ^= x >> 27
    x = (x * _MIX2) & MASK64
    x ^= x >> 31
    return x


def stream_seed(master: int, index: int) -> int:
    """Stateless per-trajectory seed: avalanche of the index XORed onto the master."""
    return (master & MASK64) ^ mix64((index + _GOLDEN) & MASK64)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256pp:
    """xoshiro256++ with splitmix64 state expansion from a single 64-bit seed."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        base = seed & MASK64
        self.s0 = mix64((base + _GOLDEN) & MASK64)
        self.s1 = mix64((base + 2 * _GOLDEN) & MASK64)
        self.s2 = mix64((base + 3 * _GOLDEN) & MASK64)
        self.s3 = mix64((base + 4 * _GOLDEN) & MASK64)
        if self.s0 | self.s1 | self.s2 | self.s3 == 0:
            self.s0 = _GOLDEN  # all-zero state is a fixed point of xoshiro

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s0 + s3) & MASK64, 23) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def next_float(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    @classmethod
    def for_trajectory(cls, master: int, index: int) -> "Xoshiro256pp":
        return cls(stream_seed(master, index))
