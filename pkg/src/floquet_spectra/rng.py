"""Splittable random streams and Haar (CUE) sampling.

Every Monte Carlo sample draws from its own stream, keyed by a 128-bit hash
of ``(master_seed, stream_index)``.  The key seeds a counter-based Philox
generator, so a sample's random numbers never depend on which worker drew it.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

U64_MAX = 2**64 - 1


class InvalidDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_index: int

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if not (0 <= v <= U64_MAX):
                raise ValueError(f"{name}={v} is not a 64-bit unsigned integer")

    @cached_property
    def key(self) -> int:
        """128-bit Philox key mixed from both fields."""
        raw = struct.pack("<QQ", self.master_seed, self.stream_index)
        digest = hashlib.blake2b(raw, digest_size=16, person=b"floquet-stream").digest()
        return int.from_bytes(digest, "little")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key))

    def child_seed(self) -> int:
        """64-bit master seed for streams nested below this one."""
        return self.key & U64_MAX


def derive_stream(master_seed: int, index: int) -> SeedSpec:
    return SeedSpec(int(master_seed), int(index))


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, SeedSpec):
        return seed.generator()
    if isinstance(seed, np.random.Generator):
        return seed
    return derive_stream(seed, 0).generator()


def cue_sample(dim: int, seed) -> np.ndarray:
    """Draw a ``dim x dim`` unitary from the Haar measure.

    A complex Ginibre matrix is QR-factorized and each column of Q is
    rotated by the phase of the matching diagonal entry of R; without that
    correction the result is not Haar distributed.

    Parameters
    ----------
    dim : int
        Matrix dimension, at least 1.
    seed : SeedSpec, numpy Generator or int
        Source of randomness.  An int is treated as ``derive_stream(seed, 0)``.
    """
    if dim < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {dim}")
    rng = _as_generator(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def unitarity_error(u: np.ndarray) -> float:
    n = u.shape[0]
    return float(np.max(np.abs(u.conj().T @ u - np.eye(n))))


def is_unitary(u: np.ndarray) -> bool:
    """Check the ``max|U^dag U - I| <= 1e-10 N`` tolerance."""
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] < 1:
        return False
    return unitarity_error(u) <= 1e-10 * u.shape[0]
