"""Floquet circuits of two-qudit Haar gates on D-dimensional lattices.

Conventions
-----------
* Sites are coordinate tuples in ``{1..L}^D``, ordered lexicographically.
  The many-body basis index is mixed-radix with the first site most
  significant, so a dense operator reshapes to ``(q,)*n_sites`` per side.
* ``gate_order`` lists bonds as the factors of the Floquet product from left
  to right.  The rightmost factor acts first on states.
* Substeps are non-decreasing along ``gate_order`` (substep 1 is the leftmost
  layer of the product).  Bonds sharing a substep touch disjoint sites, so
  their relative order is immaterial.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from floquet_spectra.rng import cue_sample, derive_stream

DENSE_CEILING = 4096
BOUNDARIES = ("periodic", "open")
ORDERINGS = ("brickwork", "staircase", "random")

Site = tuple


class CircuitError(ValueError):
    pass


class ResourceError(CircuitError):
    pass


@dataclass(frozen=True)
class Bond:
    a: Site
    b: Site
    substep: int

    @property
    def pair(self) -> frozenset:
        return frozenset((self.a, self.b))


@dataclass(frozen=True)
class CircuitSpec:
    dimension: int
    linear_size: int
    local_dim: int
    boundary: str
    bonds: tuple
    gate_order: tuple

    def __post_init__(self):
        object.__setattr__(self, "bonds", tuple(self.bonds))
        object.__setattr__(self, "gate_order", tuple(int(k) for k in self.gate_order))

    @property
    def n_sites(self) -> int:
        return self.linear_size**self.dimension

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_sites

    @property
    def n_substeps(self) -> int:
        return len({b.substep for b in self.bonds})

    def sites(self) -> list:
        return lattice_sites(self.dimension, self.linear_size)

    def ordered_bonds(self) -> list:
        return [self.bonds[k] for k in self.gate_order]

    def sample(self, seed: int) -> np.ndarray:
        return build_floquet(self, seed)

    def with_order(self, gate_order: Sequence[int]) -> "CircuitSpec":
        return CircuitSpec(self.dimension, self.linear_size, self.local_dim, self.boundary, self.bonds, tuple(gate_order))


# --- lattice --------------------------------------------------------------------

def lattice_sites(dimension: int, linear_size: int) -> list:
    return list(itertools.product(range(1, linear_size + 1), repeat=dimension))


def neighbor_pairs(dimension: int, linear_size: int, boundary: str) -> list:
    """Canonical list of nearest-neighbour pairs ``(a, b)``, ``b = a + e_axis``.

    Wraparound pairs appear only for periodic boundaries.  A pair is listed
    once even when the wraparound coincides with an interior bond (``L = 2``).
    """
    if boundary not in BOUNDARIES:
        raise CircuitError(f"unknown boundary {boundary!r}")
    out, seen = [], set()
    for site in lattice_sites(dimension, linear_size):
        for axis in range(dimension):
            x = site[axis]
            if x < linear_size:
                nb = site[:axis] + (x + 1,) + site[axis + 1:]
            elif boundary == "periodic":
                nb = site[:axis] + (1,) + site[axis + 1:]
            else:
                continue
            key = frozenset((site, nb))
            if len(key) == 2 and key not in seen:
                seen.add(key)
                out.append((site, nb))
    return out


def _bond_axis_start(a: Site, b: Site, linear_size: int):
    """Axis and lower coordinate of the bond, wraparound bonds start at L."""
    axis = next(k for k in range(len(a)) if a[k] != b[k])
    lo, hi = sorted((a[axis], b[axis]))
    start = linear_size if (lo == 1 and hi == linear_size and linear_size > 2) else lo
    return axis, start


def site_index(site: Site, linear_size: int) -> int:
    idx = 0
    for x in site:
        idx = idx * linear_size + (x - 1)
    return idx


def encode(digits: Sequence[int], q: int) -> int:
    """Flat many-body index from per-site digits (first site most significant)."""
    idx = 0
    for d in digits:
        if not 0 <= d < q:
            raise ValueError(f"digit {d} outside 0..{q - 1}")
        idx = idx * q + int(d)
    return idx


def decode(index: int, q: int, n_sites: int) -> tuple:
    if not 0 <= index < q**n_sites:
        raise ValueError(f"index {index} outside 0..{q**n_sites - 1}")
    digits = []
    for _ in range(n_sites):
        index, d = divmod(index, q)
        digits.append(d)
    return tuple(reversed(digits))


# --- validation -----------------------------------------------------------------

def validate(spec: CircuitSpec) -> list[str]:
    """Return a list of violated invariants (empty for a valid circuit)."""
    problems = []
    if spec.dimension < 1:
        problems.append(f"dimension {spec.dimension} < 1")
    if spec.linear_size < 2:
        problems.append(f"linear_size {spec.linear_size} < 2")
    if spec.local_dim < 2:
        problems.append(f"local_dim {spec.local_dim} < 2")
    if spec.boundary not in BOUNDARIES:
        problems.append(f"unknown boundary {spec.boundary!r}")
    if problems:
        return problems

    L = spec.linear_size
    expected = {frozenset(p) for p in neighbor_pairs(spec.dimension, L, spec.boundary)}
    counts: dict = {}
    for k, bond in enumerate(spec.bonds):
        for s in (bond.a, bond.b):
            if len(s) != spec.dimension or any(not 1 <= x <= L for x in s):
                problems.append(f"bond {k}: site {s} outside lattice")
        if bond.substep < 1:
            problems.append(f"bond {k}: substep {bond.substep} < 1")
        counts[bond.pair] = counts.get(bond.pair, 0) + 1
    for pair, n in counts.items():
        if pair not in expected:
            problems.append(f"bond {_fmt_pair(pair)} is not a nearest-neighbour pair")
        elif n > 1:
            problems.append(f"bond {_fmt_pair(pair)} appears {n} times")
    for pair in expected - set(counts):
        problems.append(f"missing bond {_fmt_pair(pair)}")

    incident: dict = {}
    for k, bond in enumerate(spec.bonds):
        for s in (bond.a, bond.b):
            incident.setdefault(s, []).append((bond.substep, k))
    for site in sorted(incident):
        by_step: dict = {}
        for step, k in incident[site]:
            by_step.setdefault(step, []).append(k)
        for step, ks in sorted(by_step.items()):
            if len(ks) > 1:
                problems.append(f"site {site}: bonds {ks} share substep {step}")

    if sorted(spec.gate_order) != list(range(len(spec.bonds))):
        problems.append("gate_order is not a permutation of the bond indices")
    else:
        steps = [spec.bonds[k].substep for k in spec.gate_order]
        if any(s1 > s2 for s1, s2 in zip(steps, steps[1:])):
            problems.append("gate_order is not sorted by substep")
    return problems


def _fmt_pair(pair) -> str:
    a, b = sorted(pair)
    return f"{a}-{b}"


# --- standard orderings -----------------------------------------------------------

def _spec_from_substeps(dimension, linear_size, local_dim, boundary, pairs, substeps) -> CircuitSpec:
    bonds = tuple(Bond(a, b, int(s)) for (a, b), s in zip(pairs, substeps))
    order = sorted(range(len(bonds)), key=lambda k: (bonds[k].substep, k))
    return CircuitSpec(dimension, linear_size, local_dim, boundary, bonds, tuple(order))


def from_substeps(dimension, linear_size, local_dim, boundary, substeps) -> CircuitSpec:
    """Spec with the given substep per canonical bond, gates ordered by substep."""
    pairs = neighbor_pairs(dimension, linear_size, boundary)
    if len(substeps) != len(pairs):
        raise CircuitError(f"expected {len(pairs)} substeps, got {len(substeps)}")
    return _spec_from_substeps(dimension, linear_size, local_dim, boundary, pairs, substeps)


def from_product_order(dimension, linear_size, local_dim, boundary, order) -> CircuitSpec:
    """Spec whose Floquet product lists canonical bonds in ``order`` (left to right).

    Substeps are assigned first-fit: a new layer starts whenever a bond
    shares a site with a bond already placed in the current layer.
    """
    pairs = neighbor_pairs(dimension, linear_size, boundary)
    order = [int(k) for k in order]
    if sorted(order) != list(range(len(pairs))):
        raise CircuitError("order must be a permutation of the canonical bond indices")
    substeps = [0] * len(pairs)
    step, used = 1, set()
    for k in order:
        a, b = pairs[k]
        if a in used or b in used:
            step, used = step + 1, set()
        used.update((a, b))
        substeps[k] = step
    bonds = tuple(Bond(a, b, s) for (a, b), s in zip(pairs, substeps))
    return CircuitSpec(dimension, linear_size, local_dim, boundary, bonds, tuple(order))


def standard_orderings(kind: str, dimension: int, linear_size: int, local_dim: int,
                       boundary: str, seed: int = 0) -> CircuitSpec:
    """Brickwork, staircase or uniformly random gate ordering.

    ``brickwork`` alternates the two parities of bonds along each axis
    (2D substeps in total) and needs even ``L`` under periodic boundaries.
    ``staircase`` is 1D only, with bond ``(n, n+1)`` at substep ``n``.
    ``random`` draws the product order uniformly from all permutations of
    the bonds and layers it first-fit.
    """
    L = linear_size
    if dimension < 1 or L < 2 or local_dim < 2:
        raise CircuitError("need dimension >= 1, linear_size >= 2, local_dim >= 2")
    pairs = neighbor_pairs(dimension, L, boundary)
    if kind == "brickwork":
        if boundary == "periodic" and L % 2 and L > 2:
            raise CircuitError(f"periodic brickwork needs even linear size, got L={L}")
        substeps = []
        for a, b in pairs:
            axis, start = _bond_axis_start(a, b, L)
            substeps.append(2 * axis + (1 if start % 2 else 2))
        return _spec_from_substeps(dimension, L, local_dim, boundary, pairs, substeps)
    if kind == "staircase":
        if dimension != 1:
            raise CircuitError("staircase ordering is defined for D=1 only")
        substeps = [_bond_axis_start(a, b, L)[1] for a, b in pairs]
        return _spec_from_substeps(dimension, L, local_dim, boundary, pairs, substeps)
    if kind == "random":
        rng = derive_stream(seed, 0).generator()
        return from_product_order(dimension, L, local_dim, boundary, rng.permutation(len(pairs)))
    raise CircuitError(f"unknown ordering {kind!r}; expected one of {ORDERINGS}")


def greedy_edge_coloring(dimension, linear_size, local_dim, boundary) -> CircuitSpec:
    """Substeps from a greedy proper edge colouring of the lattice."""
    pairs = neighbor_pairs(dimension, linear_size, boundary)
    colors: dict = {}
    substeps = []
    for a, b in pairs:
        taken = colors.get(a, set()) | colors.get(b, set())
        c = next(c for c in itertools.count(1) if c not in taken)
        colors.setdefault(a, set()).add(c)
        colors.setdefault(b, set()).add(c)
        substeps.append(c)
    return _spec_from_substeps(dimension, linear_size, local_dim, boundary, pairs, substeps)


# --- dense assembly ---------------------------------------------------------------

def apply_local(op: np.ndarray, tensor: np.ndarray, axes: Sequence[int], q: int) -> np.ndarray:
    """Left-multiply ``tensor`` by ``op`` acting on the listed site axes."""
    k = len(axes)
    op_t = op.reshape((q,) * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def embed_gate(gate: np.ndarray, sites: Sequence[int], n_sites: int, q: int) -> np.ndarray:
    """Dense ``N x N`` operator of ``gate`` acting on the given site positions."""
    n = q**n_sites
    eye = np.eye(n, dtype=complex).reshape((q,) * n_sites + (n,))
    return apply_local(gate, eye, sites, q).reshape(n, n)


def _check_ceiling(n: int):
    if n > DENSE_CEILING:
        raise ResourceError(f"Hilbert space dimension {n} exceeds dense ceiling {DENSE_CEILING}")


GateSampler = Callable[[int, object], np.ndarray]


def sample_gates(spec: CircuitSpec, seed: int, gate_sampler: GateSampler | None = None) -> list:
    """One gate per canonical bond, gate ``k`` drawn from ``derive_stream(seed, k)``."""
    sampler = gate_sampler or cue_sample
    d = spec.local_dim**2
    return [sampler(d, derive_stream(seed, k)) for k in range(len(spec.bonds))]


def build_floquet(spec: CircuitSpec, seed: int, gate_sampler: GateSampler | None = None,
                  gates: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """Dense Floquet operator ``U = W_{g1} W_{g2} ... W_{gK}`` for ``gate_order = (g1..gK)``.

    Gate randomness depends on ``seed`` and the canonical bond index only, so
    two orderings of the same lattice share gates under the same seed.
    """
    n = spec.dim
    _check_ceiling(n)
    if gates is None:
        gates = sample_gates(spec, seed, gate_sampler)
    L, q, ns = spec.linear_size, spec.local_dim, spec.n_sites
    u = np.eye(n, dtype=complex).reshape((q,) * ns + (n,))
    for k in reversed(spec.gate_order):
        bond = spec.bonds[k]
        axes = (site_index(bond.a, L), site_index(bond.b, L))
        u = apply_local(gates[k], u, axes, q)
    return u.reshape(n, n)


@dataclass(frozen=True)
class Noninteracting:
    """Tensor product of ``L`` independent CUE(q) single-site operators."""

    q: int
    L: int

    @property
    def dim(self) -> int:
        return self.q**self.L

    def factors(self, seed: int) -> list:
        return noninteracting_factors(self.q, self.L, seed)

    def sample(self, seed: int) -> np.ndarray:
        return build_noninteracting(self.q, self.L, seed)


@dataclass(frozen=True)
class SingleCue:
    """A single Haar-random ``N x N`` unitary."""

    N: int = field(default=2)

    @property
    def dim(self) -> int:
        return self.N

    def sample(self, seed: int) -> np.ndarray:
        return cue_sample(self.N, derive_stream(seed, 0))


def noninteracting_factors(q: int, L: int, seed: int) -> list:
    return [cue_sample(q, derive_stream(seed, k)) for k in range(L)]


def build_noninteracting(q: int, L: int, seed: int) -> np.ndarray:
    _check_ceiling(q**L)
    return reduce(np.kron, noninteracting_factors(q, L, seed))


# --- config (de)serialisation -----------------------------------------------------

def spec_to_dict(spec: CircuitSpec) -> dict:
    return {
        "dimension": spec.dimension,
        "linear_size": spec.linear_size,
        "local_dim": spec.local_dim,
        "boundary": spec.boundary,
        "bonds": [{"a": list(b.a), "b": list(b.b), "substep": b.substep} for b in spec.bonds],
        "gate_order": list(spec.gate_order),
    }


def spec_from_dict(d: dict, seed: int = 0) -> CircuitSpec:
    """Build a spec from config keys.

    Accepts an explicit ``bonds`` list (optionally with ``gate_order``), a
    ``substeps`` list over canonical bonds, or an ordering ``kind``.  The
    result is not validated.
    """
    try:
        D, L, q = int(d["dimension"]), int(d["linear_size"]), int(d["local_dim"])
    except KeyError as e:
        raise CircuitError(f"missing circuit key {e.args[0]!r}") from None
    boundary = d.get("boundary", "open")
    if "bonds" in d:
        bonds = tuple(Bond(tuple(b["a"]), tuple(b["b"]), int(b["substep"])) for b in d["bonds"])
        order = d.get("gate_order")
        if order is None:
            order = sorted(range(len(bonds)), key=lambda k: (bonds[k].substep, k))
        return CircuitSpec(D, L, q, boundary, bonds, tuple(order))
    if "substeps" in d:
        return from_substeps(D, L, q, boundary, list(d["substeps"]))
    return standard_orderings(d.get("kind", "brickwork"), D, L, q, boundary, int(d.get("ordering_seed", seed)))
