"""Deterministic pseudo-random streams.

The generator is xoshiro256** seeded through splitmix64 expansion of a
64-bit seed; Gaussian variates come from Box-Muller applied to the
unit-interval stream. Everything is integer arithmetic on 64-bit words,
so identical seeds produce identical streams on every platform.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# Uniforms are ((u64 >> 11) + 1) * 2^-53, i.e. the open-at-zero interval
# (0, 1]; Box-Muller takes log(u) so zero must be unreachable.
_U53 = 2.0**-53


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (next_state, output word)."""
    state = (state + _GAMMA) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def derive_seed(base: int, *keys: int | str) -> int:
    """Fold extra keys (ints or names) into a base seed.

    Used to give every tensor, token id, and noise draw its own
    independent stream while staying reproducible from one user seed.
    """
    h = base & _MASK
    for key in keys:
        k = fnv1a64(key.encode("utf-8")) if isinstance(key, str) else key & _MASK
        _, h = splitmix64(h ^ k)
    return h


class Rng:
    """xoshiro256** stream with uniform and Gaussian output."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        s = self.seed
        state = []
        for _ in range(4):
            s, word = splitmix64(s)
            state.append(word)
        self._s = state
        self._spare: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        x = (s1 * 5) & _MASK
        result = (((x << 7) | (x >> 57)) & _MASK) * 9 & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Next uniform variate in (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * _U53

    def uniforms(self, n: int) -> np.ndarray:
        # Inlined next_u64: this loop dominates weight initialisation.
        s0, s1, s2, s3 = self._s
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            x = (s1 * 5) & _MASK
            out[i] = ((((((x << 7) | (x >> 57)) & _MASK) * 9 & _MASK) >> 11) + 1) * _U53
            t = (s1 << 17) & _MASK
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = [s0, s1, s2, s3]
        return out

    def gaussians(self, n: int) -> np.ndarray:
        """Next n standard-normal variates (float64).

        Box-Muller pairs; an unconsumed second variate is carried over to
        the next call, so gaussians(3) + gaussians(1) == gaussians(4).
        """
        out = np.empty(n, dtype=np.float64)
        start = 0
        if self._spare is not None and n > 0:
            out[0] = self._spare
            self._spare = None
            start = 1
        need = n - start
        if need <= 0:
            return out
        pairs = (need + 1) // 2
        u = self.uniforms(2 * pairs)
        r = np.sqrt(-2.0 * np.log(u[0::2]))
        theta = (2.0 * np.pi) * u[1::2]
        z = np.empty(2 * pairs, dtype=np.float64)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        out[start:] = z[:need]
        if need < 2 * pairs:
            self._spare = float(z[need])
        return out

    def gaussian(self) -> float:
        return float(self.gaussians(1)[0])

    def fill_gaussian(self, shape: tuple[int, ...], scale: float = 1.0) -> np.ndarray:
        """Gaussian tensor with standard deviation `scale`, as float32."""
        n = int(np.prod(shape)) if shape else 1
        flat = self.gaussians(n) * scale
        return flat.astype(np.float32).reshape(shape)
