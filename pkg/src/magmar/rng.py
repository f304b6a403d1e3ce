"""Deterministic, cross-language-reproducible uniform random numbers.

Generator: xoshiro256++ (Blackman & Vigna), seeded by four outputs of
splitmix64 applied to the 64-bit user seed.  Uniforms in (0,1) are
produced as ``((x >> 11) + 0.5) * 2**-53`` from each 64-bit output, so
identical seeds give bit-identical streams in any implementation of the
same two algorithms.

Substreams for independent replications / Monte-Carlo paths are derived
by hashing (seed, *indices) through splitmix64 (see :func:`derive_seed`).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, (z ^ (z >> 31)) & _MASK


def derive_seed(seed: int, *indices: int) -> int:
    """Deterministic substream seed from a base seed and integer indices."""
    s = seed & _MASK
    for idx in indices:
        s, out = _splitmix64(s ^ ((idx + 1) * 0xD1342543DE82EF95 & _MASK))
        s = out
    s, out = _splitmix64(s)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Rng:
    """xoshiro256++ stream over uniforms in the open interval (0, 1)."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        s = self.seed
        self._s = []
        for _ in range(4):
            s, out = _splitmix64(s)
            self._s.append(out)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s0 + s3) & _MASK, 23) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        return ((self.next_u64() >> 11) + 0.5) * 2.0 ** -53

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)], dtype=float)
