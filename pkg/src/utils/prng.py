"""Portable seeded Gaussian noise.

The stream is xoshiro256** seeded through splitmix64, both with their
published constants, so any implementation reproduces the same noise for a
given seed. Normal deviates come from the Box-Muller transform, two per pair
of uniforms, in draw order.
"""
import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
SPLITMIX_MUL1 = 0xBF58476D1CE4E5B9
SPLITMIX_MUL2 = 0x94D049BB133111EB


def splitmix64(state: int):
    """Advance a splitmix64 state; returns (new_state, output)."""
    state = (state + SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * SPLITMIX_MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * SPLITMIX_MUL2) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(value: int, shift: int) -> int:
    return ((value << shift) | (value >> (64 - shift))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** generator with splitmix64 seeding."""

    def __init__(self, seed: int):
        state = int(seed) & _MASK64
        words = []
        for _ in range(4):
            state, word = splitmix64(state)
            words.append(word)
        self._s = words

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniforms(self, count: int) -> np.ndarray:
        """`count` doubles in [0, 1) built from the top 53 bits of each draw."""
        draws = [self.next_u64() >> 11 for _ in range(count)]
        return np.asarray(draws, dtype=np.float64) * (2.0 ** -53)

    def normals(self, count: int) -> np.ndarray:
        """`count` standard normal deviates via Box-Muller."""
        pairs = (count + 1) // 2
        u = self.uniforms(2 * pairs).reshape(pairs, 2)
        # 1 - u keeps the radius argument in (0, 1]
        radius = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        out = np.empty((pairs, 2))
        out[:, 0] = radius * np.cos(angle)
        out[:, 1] = radius * np.sin(angle)
        return out.ravel()[:count]
