"""Counter-based splitmix64 generator.

Output ``i`` of a stream with key ``k`` is ``mix(k + (i + 1) * GAMMA)`` where
``mix`` is the standard splitmix64 finalizer:

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

all arithmetic modulo 2**64. Uniform doubles take the top 53 bits. Being pure
integer arithmetic on uint64, the streams are identical on every platform.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *labels: str | int) -> int:
    """Key for an independent sub-stream, e.g. ``derive_key(seed, "layer", 3, "wq")``."""
    key = mix64(seed & MASK64)
    for label in labels:
        data = str(label).encode()
        for byte in data:
            key = mix64(key ^ byte)
        key = mix64(key + GAMMA)
    return key


class SplitMix64:
    def __init__(self, key: int):
        self.key = key & MASK64
        self.counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.key) + idx * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
            z = z ^ (z >> np.uint64(31))
        return z

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        return low + (high - low) * u

    def integers(self, n: int, upper: int) -> np.ndarray:
        """Integers in [0, upper) by scaling the top 53 bits (bias < 2**-40 for small ``upper``)."""
        return np.floor(self.uniform(n) * upper).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        # ties in the sort keys are impossible in practice; stable sort keeps it deterministic anyway
        return np.argsort(self.uniform(n), kind="stable")
