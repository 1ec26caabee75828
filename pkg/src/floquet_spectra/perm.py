"""Permutations of ``{1..p}`` and their cycle types (integer partitions)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

MAX_PARTITION_P = 20


@dataclass(frozen=True)
class Permutation:
    """Bijection of ``{1..p}``; ``images[k-1]`` is the image of ``k``."""

    images: tuple[int, ...]

    def __post_init__(self):
        imgs = tuple(int(x) for x in self.images)
        object.__setattr__(self, "images", imgs)
        if not imgs or sorted(imgs) != list(range(1, len(imgs) + 1)):
            raise ValueError(f"{imgs} is not a permutation of 1..{len(imgs)}")

    @classmethod
    def identity(cls, p: int) -> "Permutation":
        return cls(tuple(range(1, p + 1)))

    @property
    def size(self) -> int:
        return len(self.images)

    def __call__(self, k: int) -> int:
        return self.images[k - 1]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)


@dataclass(frozen=True, order=True)
class CycleType:
    """Integer partition, parts sorted non-increasing."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(sorted((int(c) for c in self.parts), reverse=True))
        if any(c < 1 for c in parts):
            raise ValueError(f"cycle lengths must be positive: {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def of(cls, parts: Iterable[int]) -> "CycleType":
        return cls(tuple(parts))

    @property
    def total(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    def __str__(self):
        return ",".join(map(str, self.parts))


def compose(a: Permutation, b: Permutation) -> Permutation:
    """Return ``a o b``, i.e. ``k -> a(b(k))``."""
    if a.size != b.size:
        raise ValueError(f"size mismatch: {a.size} vs {b.size}")
    return Permutation(tuple(a.images[j - 1] for j in b.images))


def inverse(a: Permutation) -> Permutation:
    inv = [0] * a.size
    for k, img in enumerate(a.images, start=1):
        inv[img - 1] = k
    return Permutation(tuple(inv))


def cycle_lengths(images: Sequence[int]) -> list[int]:
    """Cycle lengths of a 1-based image tuple (no validation, hot path)."""
    seen = [False] * len(images)
    out = []
    for start in range(len(images)):
        if seen[start]:
            continue
        n, k = 0, start
        while not seen[k]:
            seen[k] = True
            k = images[k] - 1
            n += 1
        out.append(n)
    return out


def cycle_type(a: Permutation) -> CycleType:
    return CycleType(tuple(cycle_lengths(a.images)))


def sign(a: Permutation) -> int:
    m = len(cycle_lengths(a.images))
    return -1 if (a.size - m) % 2 else 1


def partitions_of(p: int) -> list[CycleType]:
    """All partitions of ``p`` in reverse-lexicographic order.

    >>> [c.parts for c in partitions_of(3)]
    [(3,), (2, 1), (1, 1, 1)]
    """
    if not (1 <= p <= MAX_PARTITION_P):
        raise ValueError(f"p must lie in 1..{MAX_PARTITION_P}, got {p}")
    return [CycleType(parts) for parts in _partitions(p, p)]


def _partitions(n: int, largest: int):
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest
