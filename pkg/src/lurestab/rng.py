"""Seed-keyed deterministic random source.

A splitmix64 counter generator feeding Box-Muller normals.  The entire
stream is a pure function of the integer seed, so randomized system setups
and sampled initial conditions are reproducible bit-for-bit across runs.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class RandomSource:
    """splitmix64 stream with uniform and standard-normal draws."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64
        self._spare: float | None = None

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform draw in (0, 1]; never zero, so log() is safe."""
        return ((self.next_uint64() >> 11) + 1) * 2.0 ** -53

    def normal(self) -> float:
        """Standard normal via Box-Muller; second draw of each pair is cached."""
        if self._spare is not None:
            value, self._spare = self._spare, None
            return value
        u1 = self.uniform()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        self._spare = radius * math.sin(2.0 * math.pi * u2)
        return radius * math.cos(2.0 * math.pi * u2)

    def normals(self, shape) -> np.ndarray:
        """Array of standard normals filled in row-major order."""
        flat = np.array([self.normal() for _ in range(int(np.prod(shape)))])
        return flat.reshape(shape)
