"""Deterministic counter-based random number generator (splitmix64).

The platform generators are deliberately avoided: the whole test suite
and the reproducibility guarantees hang off this stream being identical
on every machine. splitmix64 is counter-based — after n draws the state
is ``seed + n*GOLDEN mod 2^64`` — so bulk draws vectorize exactly: the
numpy uint64 path and the scalar python-int path produce the same bits.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_GOLDEN_U64 = np.uint64(GOLDEN)
_MIX1_U64 = np.uint64(_MIX1)
_MIX2_U64 = np.uint64(_MIX2)
_U64_30 = np.uint64(30)
_U64_27 = np.uint64(27)
_U64_31 = np.uint64(31)
_U64_11 = np.uint64(11)
_INV53 = 2.0 ** -53


def mix64(state):
    """splitmix64 output function for a raw 64-bit counter value."""
    z = state & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed, stream):
    """Decorrelated child seed for an independent stream (head, baseline, ...)."""
    return mix64((seed ^ ((stream + 1) * _MIX1)) & MASK64)


def _mix_array(counters):
    z = counters
    z = (z ^ (z >> _U64_30)) * _MIX1_U64
    z = (z ^ (z >> _U64_27)) * _MIX2_U64
    return z ^ (z >> _U64_31)


class Rng:
    """Single-owner deterministic stream. Same seed, same bits, any platform."""

    def __init__(self, seed):
        self._state = int(seed) & MASK64

    @property
    def state(self):
        return self._state

    def next_u64(self):
        self._state = (self._state + GOLDEN) & MASK64
        return mix64(self._state)

    def uniform(self):
        """One draw in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * _INV53

    def randint(self, n):
        """One draw in {0, ..., n-1}."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return self.next_u64() % n

    def _u64_array(self, n):
        counters = np.uint64(self._state) + _GOLDEN_U64 * np.arange(
            1, n + 1, dtype=np.uint64
        )
        self._state = (self._state + n * GOLDEN) & MASK64
        return _mix_array(counters)

    def uniform_array(self, n):
        """n draws in [0, 1); consumes exactly n scalar draws."""
        if n == 0:
            return np.empty(0, dtype=np.float64)
        return (self._u64_array(n) >> _U64_11).astype(np.float64) * _INV53

    def normal_array(self, n):
        """n standard-normal draws via Box-Muller; consumes 2*ceil(n/2) draws."""
        half = (n + 1) // 2
        if half == 0:
            return np.empty(0, dtype=np.float64)
        # u1 in (0, 1] so log() is safe
        raw = self._u64_array(2 * half)
        u1 = ((raw[:half] >> _U64_11).astype(np.float64) + 1.0) * _INV53
        u2 = (raw[half:] >> _U64_11).astype(np.float64) * _INV53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def shuffle(self, seq):
        """In-place Fisher-Yates shuffle of a list or 1-D array; returns seq."""
        n = len(seq)
        if n < 2:
            return seq
        draws = self._u64_array(n - 1)
        bases = np.arange(n, 1, -1, dtype=np.uint64)
        js = draws % bases
        for i in range(n - 1):
            a = n - 1 - i
            b = int(js[i])
            seq[a], seq[b] = seq[b], seq[a]
        return seq
