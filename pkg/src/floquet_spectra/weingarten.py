"""Exact Weingarten function of U(q) and Haar moment integrals.

Values ``V[c1,...,cm]`` (one per cycle type) are obtained level by level from
the two linear recursions

    (a)  q V[c,1] + sum_s c_s V[c with c_s -> c_s + 1] = V[c]
    (b)  q V[c]  + sum_{k=1}^{c1-1} V[c1-k, k, rest]
                 + sum_{s>=2} c_s V[c1 + c_s, rest without c_s] = 0,  c1 >= 2

solved in exact rational arithmetic.  Every instance of (b), for every part
that can play the role of ``c1``, is kept; the solver insists the whole
overdetermined system is consistent.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from floquet_spectra._parallel import map_samples, mean_stderr
from floquet_spectra.perm import CycleType, cycle_lengths, partitions_of
from floquet_spectra.rng import cue_sample

FORMAT_HEADER = "wg-table v1"
MAX_MOMENT_P = 6


class WeingartenDomainError(ValueError):
    pass


class RecursionInconsistent(RuntimeError):
    pass


Parts = tuple


def _canon(parts: Iterable[int]) -> Parts:
    return tuple(sorted(parts, reverse=True))


# --- recursion equations -------------------------------------------------------

def _eq_a(q: int, c: Parts):
    """Relation (a) for a partition ``c`` of p: returns (coeffs on level p+1, key of rhs)."""
    coeffs: Counter = Counter()
    coeffs[_canon(c + (1,))] += q
    for s, cs in enumerate(c):
        coeffs[_canon(c[:s] + (cs + 1,) + c[s + 1:])] += cs
    return coeffs, c


def _eq_b(q: int, c: Parts, s1: int):
    """Relation (b) for partition ``c`` with part ``c[s1] >= 2`` distinguished."""
    c1 = c[s1]
    rest = c[:s1] + c[s1 + 1:]
    coeffs: Counter = Counter()
    coeffs[_canon(c)] += q
    for k in range(1, c1):
        coeffs[_canon((c1 - k, k) + rest)] += 1
    for s, cs in enumerate(rest):
        coeffs[_canon((c1 + cs,) + rest[:s] + rest[s + 1:])] += cs
    return coeffs


def _distinguished_positions(c: Parts):
    """One position per distinct part value >= 2 (equal values give identical equations)."""
    seen = set()
    for s, cs in enumerate(c):
        if cs >= 2 and cs not in seen:
            seen.add(cs)
            yield s


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction], n: int) -> list[Fraction]:
    """Gauss-Jordan elimination over the rationals for an overdetermined system."""
    a = [row[:] + [b] for row, b in zip(rows, rhs)]
    pivot_row = 0
    pivots = []
    for col in range(n):
        pr = next((r for r in range(pivot_row, len(a)) if a[r][col] != 0), None)
        if pr is None:
            raise RecursionInconsistent(f"recursion system is singular in column {col}")
        a[pivot_row], a[pr] = a[pr], a[pivot_row]
        piv = a[pivot_row][col]
        a[pivot_row] = [x / piv for x in a[pivot_row]]
        for r in range(len(a)):
            if r != pivot_row and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[pivot_row])]
        pivots.append(pivot_row)
        pivot_row += 1
    for r in range(pivot_row, len(a)):
        if a[r][n] != 0:
            raise RecursionInconsistent(f"recursion system is inconsistent (residual {a[r][n]})")
    return [a[r][n] for r in pivots]


# --- table -----------------------------------------------------------------------

@dataclass(frozen=True)
class WeingartenTable:
    q: int
    max_p: int
    values: dict = field(repr=False)  # Parts -> Fraction

    def __getitem__(self, ct) -> Fraction:
        return wg(self, ct)

    def level(self, p: int) -> list[tuple[CycleType, Fraction]]:
        return [(ct, self.values[ct.parts]) for ct in partitions_of(p)]

    def as_float(self, ct) -> float:
        return float(wg(self, ct))

    def __eq__(self, other):
        if not isinstance(other, WeingartenTable):
            return NotImplemented
        return (self.q, self.max_p, self.values) == (other.q, other.max_p, other.values)

    def __hash__(self):
        return hash((self.q, self.max_p))

    def dumps(self) -> str:
        lines = [f"{FORMAT_HEADER} q={self.q} max_p={self.max_p}"]
        for p in range(1, self.max_p + 1):
            for ct, v in self.level(p):
                lines.append(f"{ct} {v.numerator}/{v.denominator}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.dumps())
        return path

    @classmethod
    def loads(cls, text: str) -> "WeingartenTable":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith(FORMAT_HEADER):
            raise ValueError("missing 'wg-table v1' header")
        header = dict(tok.split("=", 1) for tok in lines[0][len(FORMAT_HEADER):].split())
        q, max_p = int(header["q"]), int(header["max_p"])
        values = {}
        for ln in lines[1:]:
            parts_s, val_s = ln.split()
            parts = _canon(int(x) for x in parts_s.split(","))
            values[parts] = Fraction(val_s)
        expected = {ct.parts for p in range(1, max_p + 1) for ct in partitions_of(p)}
        if set(values) != expected:
            raise ValueError("table does not list every partition up to max_p exactly once")
        return cls(q, max_p, values)

    @classmethod
    def load(cls, path) -> "WeingartenTable":
        return cls.loads(Path(path).read_text())


def solve_table(q: int, max_p: int) -> WeingartenTable:
    """Solve the recursions for every cycle type of size ``<= max_p``.

    Only ``1 <= max_p <= q`` is supported; for ``p > q`` the recursion no
    longer pins down the Weingarten function.
    """
    if q < 1 or max_p < 1:
        raise WeingartenDomainError("q and max_p must be positive")
    if max_p > q:
        raise WeingartenDomainError(f"extrapolation to p>q not supported (q={q}, max_p={max_p})")
    return _solve_cached(q, max_p)


@lru_cache(maxsize=64)
def _solve_cached(q: int, max_p: int) -> WeingartenTable:
    values: dict = {(): Fraction(1)}
    for p in range(0, max_p):
        unknowns = [ct.parts for ct in partitions_of(p + 1)]
        index = {parts: k for k, parts in enumerate(unknowns)}
        rows, rhs = [], []
        lower = [()] if p == 0 else [ct.parts for ct in partitions_of(p)]
        for c in lower:
            coeffs, key = _eq_a(q, c)
            rows.append(_dense(coeffs, index))
            rhs.append(values[key])
        for c in unknowns:
            for s in _distinguished_positions(c):
                rows.append(_dense(_eq_b(q, c, s), index))
                rhs.append(Fraction(0))
        for parts, v in zip(unknowns, _solve_exact(rows, rhs, len(unknowns))):
            values[parts] = v
    del values[()]
    return WeingartenTable(q, max_p, values)


def _dense(coeffs: Counter, index: dict) -> list[Fraction]:
    row = [Fraction(0)] * len(index)
    for parts, c in coeffs.items():
        row[index[parts]] += c
    return row


def recursion_residuals(table: WeingartenTable) -> list[tuple[str, Fraction]]:
    """Residual of every instance of both recursions the table can evaluate.

    Relation (b) is checked for *every* position with a part ``>= 2``, not
    just one per distinct value.
    """
    vals = dict(table.values)
    vals[()] = Fraction(1)
    q = table.q
    out = []
    for p in range(0, table.max_p):
        lower = [()] if p == 0 else [ct.parts for ct in partitions_of(p)]
        for c in lower:
            coeffs, key = _eq_a(q, c)
            res = sum(k * vals[parts] for parts, k in coeffs.items()) - vals[key]
            out.append((f"a[{','.join(map(str, c))}]", res))
    for p in range(1, table.max_p + 1):
        for ct in partitions_of(p):
            for s, cs in enumerate(ct.parts):
                if cs < 2:
                    continue
                coeffs = _eq_b(q, ct.parts, s)
                res = sum(k * vals[parts] for parts, k in coeffs.items())
                out.append((f"b[{ct}]@{s}", res))
    return out


def wg(table: WeingartenTable, ct) -> Fraction:
    parts = _canon(ct.parts if isinstance(ct, CycleType) else ct)
    total = sum(parts)
    if total > table.max_p or total < 1:
        raise KeyError(f"cycle type {parts} not in table (max_p={table.max_p})")
    return table.values[parts]


# --- Haar moments ----------------------------------------------------------------

@dataclass(frozen=True)
class MomentPattern:
    """Index tuples of ``<U_{i1 j1}..U_{ip jp} U^dag_{j'1 i'1}..U^dag_{j'p' i'p'}>``.

    All indices are 1-based.  ``rows``/``cols`` belong to the ``U`` factors,
    ``rows_c``/``cols_c`` to the ``U^dag`` factors.
    """

    rows: tuple
    cols: tuple
    rows_c: tuple
    cols_c: tuple

    def __post_init__(self):
        for name in ("rows", "cols", "rows_c", "cols_c"):
            object.__setattr__(self, name, tuple(int(x) for x in getattr(self, name)))
        if len(self.rows) != len(self.cols) or len(self.rows_c) != len(self.cols_c):
            raise ValueError("row and column tuples of the same factor must have equal length")

    @property
    def p(self) -> int:
        return len(self.rows)

    @property
    def p_conj(self) -> int:
        return len(self.rows_c)

    def check_bounds(self, q: int):
        for x in self.rows + self.cols + self.rows_c + self.cols_c:
            if not 1 <= x <= q:
                raise IndexError(f"index {x} outside 1..{q}")


def _matchings(a: Sequence[int], b: Sequence[int]):
    """All permutations ``s`` (0-based images) with ``a[k] == b[s[k]]``."""
    p = len(a)
    used = [False] * p
    cur = [0] * p

    def rec(k):
        if k == p:
            yield tuple(cur)
            return
        for j in range(p):
            if not used[j] and b[j] == a[k]:
                used[j] = True
                cur[k] = j
                yield from rec(k + 1)
                used[j] = False

    yield from rec(0)


def moment_cycle_counts(pat: MomentPattern) -> Counter:
    """Multiplicity of each cycle type of ``tau^-1 sigma`` over delta-compatible pairs."""
    sigmas = list(_matchings(pat.rows, pat.rows_c))
    taus = list(_matchings(pat.cols, pat.cols_c))
    counts: Counter = Counter()
    for tau in taus:
        tau_inv = [0] * len(tau)
        for k, t in enumerate(tau):
            tau_inv[t] = k
        for sigma in sigmas:
            images = [tau_inv[sigma[k]] + 1 for k in range(len(sigma))]
            counts[_canon(cycle_lengths(images))] += 1
    return counts


def haar_moment(table: WeingartenTable, pat: MomentPattern) -> Fraction:
    """Exact Haar average of the monomial described by ``pat``."""
    pat.check_bounds(table.q)
    if pat.p != pat.p_conj:
        return Fraction(0)
    if pat.p > table.max_p:
        raise WeingartenDomainError(f"pattern order {pat.p} exceeds table max_p={table.max_p}")
    if pat.p > MAX_MOMENT_P:
        raise WeingartenDomainError(f"moment order {pat.p} above practical ceiling {MAX_MOMENT_P}")
    return sum(
        (n * table.values[parts] for parts, n in moment_cycle_counts(pat).items()),
        Fraction(0),
    )


def _index_groups(patterns: Sequence[MomentPattern]):
    """Patterns grouped by (p, p'), as 0-based index arrays plus original positions."""
    groups: dict = {}
    for k, pat in enumerate(patterns):
        groups.setdefault((pat.p, pat.p_conj), []).append(k)
    out = []
    for ks in groups.values():
        arr = lambda name: np.array([getattr(patterns[k], name) for k in ks], dtype=np.intp).reshape(len(ks), -1) - 1
        out.append((np.array(ks), arr("rows"), arr("cols"), arr("rows_c"), arr("cols_c")))
    return tuple(out)


def _cue_monomials(seed, q, n_patterns, groups):
    u = cue_sample(q, seed)
    vals = np.empty(n_patterns, dtype=complex)
    for ks, r, c, rc, cc in groups:
        vals[ks] = np.prod(u[r, c], axis=1) * np.prod(np.conj(u[rc, cc]), axis=1)
    return vals


def haar_moments_mc(q: int, patterns: Sequence[MomentPattern], n_samples: int, seed: int, workers=None):
    """Monte Carlo estimates for several patterns sharing the same CUE draws."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    for pat in patterns:
        pat.check_bounds(q)
    args = (q, len(patterns), _index_groups(patterns))
    vals = map_samples(_cue_monomials, n_samples, seed, workers, args=args)
    mean, se = mean_stderr(vals)
    return [(complex(m), float(s)) for m, s in zip(mean, se)]


def haar_moment_mc(q: int, pat: MomentPattern, n_samples: int, seed: int, workers=None):
    return haar_moments_mc(q, [pat], n_samples, seed, workers)[0]


def asymptotic_check(ct, q_list: Iterable[int]) -> list[tuple[int, Fraction]]:
    """``q^(2p-m) Wg(ct)`` for each ``q``; tends to a finite nonzero constant."""
    ct = ct if isinstance(ct, CycleType) else CycleType.of(ct)
    p, m = ct.total, ct.length
    out = []
    for q in q_list:
        if q < p:
            raise WeingartenDomainError(f"q={q} smaller than p={p}")
        out.append((q, Fraction(q) ** (2 * p - m) * wg(solve_table(q, p), ct)))
    return out


def all_permutations(p: int):
    return itertools.permutations(range(1, p + 1))
