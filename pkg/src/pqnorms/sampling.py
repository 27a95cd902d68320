"""Seed-indexed Gaussian sampling.

Every sample is addressed by a ``SampleKey(seed, index)``.  The key selects a
Philox-4x64 stream: the 128-bit Philox key is ``(seed, domain)`` and the
counter starts at ``(0, 0, index, 0)``, so streams for different indices are
disjoint blocks of one counter space and never depend on call order or on how
many workers are used.  Normals come from numpy's ziggurat sampler
(``Generator.standard_normal``) and are consumed in row-major order, so the
variate used for cell ``(i, j)`` depends only on ``(seed, index, i, j, m, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profiles import VarianceProfile

U64 = 2**64

# Philox key word 1; separates sample streams from auxiliary randomness.
DOMAIN_SAMPLES = 0
DOMAIN_STARTS = 1
DOMAIN_PROFILES = 2


@dataclass(frozen=True)
class SampleKey:
    seed: int
    index: int

    def __post_init__(self):
        for name in ("seed", "index"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v}")


@dataclass(frozen=True, eq=False)
class MatrixRealization:
    """One draw ``G = (a_ij * g_ij)``."""

    g: np.ndarray

    @property
    def m(self) -> int:
        return self.g.shape[0]

    @property
    def n(self) -> int:
        return self.g.shape[1]


class KeyedStream:
    """Reusable Philox generator that can be repositioned at any sample index.

    Not thread-safe; give each thread its own instance.
    """

    def __init__(self, seed: int, domain: int = DOMAIN_SAMPLES):
        SampleKey(seed, 0)
        self.seed = int(seed)
        self._bitgen = np.random.Philox(key=np.array([seed, domain], dtype=np.uint64))
        self._gen = np.random.Generator(self._bitgen)
        self._state = self._bitgen.state

    def at(self, index: int) -> np.random.Generator:
        st = self._state
        st["state"]["counter"][:] = (0, 0, index, 0)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bitgen.state = st
        return self._gen

    def normals(self, index: int, size) -> np.ndarray:
        return self.at(index).standard_normal(size)


def generator_for(key: SampleKey, domain: int = DOMAIN_SAMPLES) -> np.random.Generator:
    return KeyedStream(key.seed, domain).at(key.index)


def _apply_scale(a: np.ndarray, g: np.ndarray) -> np.ndarray:
    # exact zeros (not -0.0) wherever the scale vanishes
    return np.where(a != 0, a * g, 0.0)


def sample_matrix(profile: VarianceProfile, key: SampleKey) -> MatrixRealization:
    g = generator_for(key).standard_normal(profile.shape)
    return MatrixRealization(_apply_scale(profile.a, g))


def sample_matrices(profile: VarianceProfile, seed: int, count: int, start: int = 0) -> np.ndarray:
    """Stack of realizations for indices ``start .. start+count-1``, shape ``(count, m, n)``."""
    stream = KeyedStream(seed)
    out = np.empty((count, profile.m, profile.n))
    for k in range(count):
        out[k] = stream.normals(start + k, profile.shape)
    return _apply_scale(profile.a, out)


def sample_weighted_vector(a, key: SampleKey) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return _apply_scale(a, generator_for(key).standard_normal(a.shape))


def sample_weighted_vectors(a, seed: int, count: int, start: int = 0) -> np.ndarray:
    """Rows are ``sample_weighted_vector(a, SampleKey(seed, start + k))``."""
    a = np.asarray(a, dtype=np.float64).ravel()
    stream = KeyedStream(seed)
    out = np.empty((count, a.size))
    for k in range(count):
        out[k] = stream.normals(start + k, a.size)
    return _apply_scale(a, out)
