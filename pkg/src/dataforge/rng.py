"""SplitMix64 pseudo-random generator.

Tiny, well-known generator with a fully pinned bit-exact definition, used
wherever reproducible ordering matters (shuffles, splits, buffered streaming
shuffle). Any implementation of SplitMix64 in any language produces the same
stream for the same seed, which keeps cached artifacts portable.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


class SplitMix64:
    """The Steele/Lea/Flood SplitMix64 sequence for a 64-bit seed."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this generator."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def permutation(n: int, seed: int) -> list[int]:
    """The seed-determined Fisher-Yates permutation of range(n)."""
    idx = list(range(n))
    SplitMix64(seed).shuffle(idx)
    return idx
