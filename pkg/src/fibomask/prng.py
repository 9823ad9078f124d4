"""SplitMix64 streams and Fisher-Yates permutations.

Everything random in the package is derived from a 64-bit seed through
SplitMix64, so outputs are bit-identical across platforms and numpy versions.
"""
import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def _mix(z):
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential SplitMix64 generator on Python ints."""

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + GAMMA) & MASK64
        return _mix(self.state)

    def below(self, n):
        """Unbiased integer in ``[0, n)`` by rejection of the top partial block."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = MASK64 - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x <= limit:
                return x % n

    def random(self):
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def sub_seed(seed, index):
    """Per-layer / per-head stream seed: ``seed XOR index``."""
    return (int(seed) ^ int(index)) & MASK64


def permutation(n, seed):
    """Fisher-Yates shuffle of ``range(n)`` driven by SplitMix64(seed)."""
    rng = SplitMix64(seed)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return tuple(perm)


def splitmix64_array(seed, count):
    """First ``count`` outputs of SplitMix64(seed) as a uint64 array (vectorized)."""
    steps = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(int(seed) & MASK64) + steps * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        z = z ^ (z >> np.uint64(31))
    return z


def uniform_array(seed, shape, low=0.0, high=1.0):
    """Doubles in ``[low, high)`` from the top 53 bits of each SplitMix64 output."""
    count = int(np.prod(shape)) if len(shape) else 1
    u = (splitmix64_array(seed, count) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    return (low + (high - low) * u).reshape(shape)
