"""SplitMix64 random stream.

SplitMix64 is used instead of numpy's bit generators so that any
reimplementation can reproduce a stream bit for bit from the seed alone.

Stream definition, for draw index ``i = 0, 1, 2, ...``::

    state_i = seed + (i + 1) * 0x9E3779B97F4A7C15          (mod 2**64)
    z = (state_i ^ (state_i >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out_i = z ^ (z >> 31)

Uniforms use the top 53 bits: ``u = (out >> 11) * 2**-53`` in [0, 1).
Each standard normal consumes two draws ``a, b`` via Box-Muller (cosine
branch only): ``sqrt(-2 ln(1 - u_a)) * cos(2 pi u_b)``.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, stream: int) -> int:
    """Independent sub-seed for a named stream number."""
    s = np.array([(seed + stream * 0xD1B54A32D192ED03) & _MASK64], dtype=np.uint64)
    return int(_mix(s + GAMMA)[0])


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        i = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            state = np.uint64(self.seed) + i * GAMMA
            return _mix(state)

    def uniform(self, n: int) -> np.ndarray:
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        u = self.uniform(2 * n)
        a, b = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log1p(-a)) * np.cos(2.0 * np.pi * b)
