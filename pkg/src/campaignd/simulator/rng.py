"""xoshiro256** generator for reproducible simulation runs.

The algorithm is pinned (not stdlib random) so a scenario seed produces the
same measurement stream in any implementation language. Seeding discipline:
the four 64-bit state words are the first four outputs of a splitmix64
stream started at the scenario seed, per the generator authors' guidance.
State updates follow the reference C implementation exactly; Python ints are
masked back to 64 bits after every arithmetic step.
"""
from __future__ import annotations

_MASK = (1 << 64) - 1


def splitmix64(seed: int):
    """Infinite stream of splitmix64 outputs starting from ``seed``."""
    x = seed & _MASK
    while True:
        x = (x + 0x9E3779B97F4A7C15) & _MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        yield (z ^ (z >> 31)) & _MASK


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256StarStar:
    __slots__ = ("s",)

    def __init__(self, seed: int):
        sm = splitmix64(seed)
        self.s = [next(sm), next(sm), next(sm), next(sm)]

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1): top 53 bits scaled by 2^-53."""
        return (self.next_u64() >> 11) * 1.1102230246251565e-16

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi]; modulo reduction (bias irrelevant here)."""
        return lo + self.next_u64() % (hi - lo + 1)
