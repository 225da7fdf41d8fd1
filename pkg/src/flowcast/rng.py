"""Reproducible pseudorandom numbers.

The generator is xorshift64* (Vigna, 2016) seeded through one round of
splitmix64, with normals from the Box-Muller transform. Every step is
written out below so another implementation of the same recipe yields the
same stream bit for bit:

* seeding: ``z = (seed + 0x9E3779B97F4A7C15) mod 2**64``, then
  ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``,
  ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``, ``state = z ^ (z >> 31)``
  (all products mod 2**64); a zero state is replaced by the golden constant.
* step: ``x ^= x >> 12; x ^= x << 25 (mod 2**64); x ^= x >> 27``;
  output ``x * 0x2545F4914F6CDD1D mod 2**64``.
* uniform in [0, 1): ``(output >> 11) * 2**-53``.
* normal pair: ``u1 = 1 - uniform()`` (so u1 is in (0, 1]), ``u2 = uniform()``,
  ``r = sqrt(-2 ln u1)``, returning ``r cos(2 pi u2)`` then ``r sin(2 pi u2)``.
"""

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(seed):
    z = (seed + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class XorShift64Star:
    """Seeded xorshift64* generator with a Box-Muller normal sampler."""

    def __init__(self, seed=0):
        state = _splitmix64(int(seed) & _MASK)
        self._state = state or _GOLDEN
        self._spare = None

    def next_u64(self):
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK

    def uniform(self):
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def normal(self):
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, n):
        return np.array([self.normal() for _ in range(n)], dtype=float)

    def exponential(self):
        return -math.log(1.0 - self.uniform())

    def randbelow(self, n):
        """Uniform integer in [0, n) by rejection, free of modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
