"""SplitMix64 pseudo-random generator.

A tiny integer-only generator whose raw output is easy to reproduce in any
language.  Floats are derived from the top 53 bits; normals use Box-Muller.
"""

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """Seedable SplitMix64 stream.

    >>> g = SplitMix64(1234567)
    >>> g.next_u64()
    6457827717110365317
    """

    def __init__(self, seed=0):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self):
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low=0.0, high=1.0, size=None):
        if size is None:
            return low + (high - low) * self.random()
        n = int(np.prod(size))
        out = np.array([self.random() for _ in range(n)], dtype=float)
        return (low + (high - low) * out).reshape(size)

    def normal(self, size=None):
        """Standard normals; pairs come from one Box-Muller draw."""
        n = 1 if size is None else int(np.prod(size))
        vals = []
        while len(vals) < n:
            u1 = 1.0 - self.random()  # (0, 1], keeps log finite
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            vals.append(r * math.cos(2.0 * math.pi * u2))
            vals.append(r * math.sin(2.0 * math.pi * u2))
        if size is None:
            return vals[0]
        return np.array(vals[:n], dtype=float).reshape(size)
