"""Exact and sampled second/fourth moments of Floquet operators.

For independent gates, ``E[U^{(x)k} (x) conj(U)^{(x)k}]`` factorises into one
Haar channel per gate.  Each channel is applied matrix-free to a tensor with
one axis per (replica, site), replicas ``0..k-1`` carrying ``U`` and
``k..2k-1`` carrying ``conj(U)``.  Per-gate kernels are exact finite-q
Weingarten sums, so nothing here is asymptotic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from floquet_spectra._parallel import map_samples, mean_stderr
from floquet_spectra.circuit import CircuitSpec, Noninteracting, ResourceError, SingleCue, site_index
from floquet_spectra.perm import cycle_lengths
from floquet_spectra.weingarten import solve_table

DENSE_SECOND_MOMENT_MAX_N = 16
MATRIX_FREE_SECOND_MOMENT_MAX_N = 64
FOURTH_MOMENT_MAX_N = 16


@dataclass(frozen=True)
class CircuitPattern:
    """Matrix-element indices of a circuit moment, 0-based flat many-body indices.

    Describes ``<U_{i1 j1} .. U_{ik jk} U^dag_{j'1 i'1} .. U^dag_{j'k i'k}>``.
    """

    rows: tuple
    cols: tuple
    rows_c: tuple
    cols_c: tuple

    def __post_init__(self):
        for name in ("rows", "cols", "rows_c", "cols_c"):
            object.__setattr__(self, name, tuple(int(x) for x in getattr(self, name)))
        k = len(self.rows)
        if not (len(self.cols) == len(self.rows_c) == len(self.cols_c) == k) or k < 1:
            raise ValueError("all four index tuples must share the same positive length")

    @property
    def order(self) -> int:
        return len(self.rows)


def rmt_target(pat: CircuitPattern, n: int) -> float:
    """Large-dimension CUE value: sum over sigma of matching row and column pairings."""
    total = 0
    for perm in itertools.permutations(range(pat.order)):
        if all(pat.rows[m] == pat.rows_c[perm[m]] and pat.cols[m] == pat.cols_c[perm[m]] for m in range(pat.order)):
            total += 1
    return total / n**pat.order


# --- layouts --------------------------------------------------------------------------

def _layout(model):
    """``(n_sites, site_dim, gates)``; gates are site tuples in product order, left to right."""
    if isinstance(model, CircuitSpec):
        L = model.linear_size
        gates = [(site_index(model.bonds[k].a, L), site_index(model.bonds[k].b, L)) for k in model.gate_order]
        return model.n_sites, model.local_dim, gates
    if isinstance(model, Noninteracting):
        return model.L, model.q, [(s,) for s in range(model.L)]
    if isinstance(model, SingleCue):
        return 1, model.N, [(0,)]
    raise TypeError(f"no moment layout for {type(model).__name__}")


@lru_cache(maxsize=None)
def _kernel(d: int, k: int):
    """Row-pairing deltas and the Weingarten matrix ``Wg(tau^-1 sigma)`` for CUE(d)."""
    table = solve_table(d, k)
    perms = list(itertools.permutations(range(k)))
    wgm = np.empty((len(perms), len(perms)))
    for a, sigma in enumerate(perms):
        for b, tau in enumerate(perms):
            tau_inv = [0] * k
            for m, t in enumerate(tau):
                tau_inv[t] = m
            images = [tau_inv[sigma[m]] + 1 for m in range(k)]
            wgm[a, b] = table.as_float(tuple(cycle_lengths(images)))
    deltas = []
    for sigma in perms:
        delta = np.zeros((d,) * (2 * k))
        for a in itertools.product(range(d), repeat=k):
            ac = [0] * k
            for m in range(k):
                ac[sigma[m]] = a[m]
            delta[tuple(a) + tuple(ac)] = 1.0
        deltas.append(delta)
    return perms, wgm, deltas


def _trace_subscripts(k: int, tau):
    letters = "abcdefgh"
    idx = [""] * (2 * k)
    for m in range(k):
        idx[m] = letters[m]
        idx[k + tau[m]] = letters[m]
    return "".join(idx) + "z->z"


def apply_gate_channel(tensor: np.ndarray, sites: Sequence[int], n_sites: int, q: int, k: int) -> np.ndarray:
    """Apply one Haar gate channel of order ``k`` acting on ``sites``.

    ``tensor`` has ``2k * n_sites`` axes of size ``q`` followed by one batch
    axis.
    """
    d = q ** len(sites)
    perms, wgm, deltas = _kernel(d, k)
    axes = [r * n_sites + s for r in range(2 * k) for s in sites]
    x = np.moveaxis(tensor, axes, list(range(len(axes))))
    rest_shape = x.shape[len(axes):]
    x = x.reshape((d,) * (2 * k) + (-1,))
    c = np.stack([np.einsum(_trace_subscripts(k, tau), x) for tau in perms])
    coeff = wgm @ c
    y = sum(np.multiply.outer(delta, coeff[a]) for a, delta in enumerate(deltas))
    y = y.reshape((q,) * len(axes) + rest_shape)
    return np.moveaxis(y, list(range(len(axes))), axes)


def propagate(model, tensor: np.ndarray, k: int) -> np.ndarray:
    """Apply the full moment channel of ``model`` (rightmost gate first)."""
    n_sites, q, gates = _layout(model)
    for sites in reversed(gates):
        tensor = apply_gate_channel(tensor, sites, n_sites, q, k)
    return tensor


# --- exact moments -------------------------------------------------------------------

def _digits(index: int, q: int, n_sites: int) -> tuple:
    return tuple(np.unravel_index(index, (q,) * n_sites))


def second_moment_exact(model) -> np.ndarray:
    """Dense ``N^2 x N^2`` matrix ``M[(i,i'),(j,j')] = <U_ij U^dag_j'i'>``."""
    n_sites, q, _ = _layout(model)
    n = q**n_sites
    if n > DENSE_SECOND_MOMENT_MAX_N:
        raise ResourceError(f"dense second moment limited to N <= {DENSE_SECOND_MOMENT_MAX_N}, got {n}")
    t = np.eye(n * n).reshape((q,) * (2 * n_sites) + (n * n,))
    return propagate(model, t, 1).reshape(n * n, n * n)


def second_moment_apply(model, vec: np.ndarray) -> np.ndarray:
    """Matrix-free action of the second-moment channel on an ``(N, N)`` array."""
    n_sites, q, _ = _layout(model)
    n = q**n_sites
    if n > MATRIX_FREE_SECOND_MOMENT_MAX_N:
        raise ResourceError(f"second moment limited to N <= {MATRIX_FREE_SECOND_MOMENT_MAX_N}, got {n}")
    t = np.asarray(vec, dtype=float).reshape((q,) * (2 * n_sites) + (1,))
    return propagate(model, t, 1).reshape(n, n)


def sff2_from_channel(model, block: int = 256) -> float:
    """``<|Tr U|^2> = sum_ij <U_ii U^dag_jj>``, the trace of the exact channel.

    Columns are propagated in blocks, so ``N`` up to 64 stays matrix-free.
    """
    n_sites, q, _ = _layout(model)
    n = q**n_sites
    if n > MATRIX_FREE_SECOND_MOMENT_MAX_N:
        raise ResourceError(f"second moment limited to N <= {MATRIX_FREE_SECOND_MOMENT_MAX_N}, got {n}")
    total = 0.0
    for lo in range(0, n * n, block):
        cols = np.arange(lo, min(lo + block, n * n))
        t = np.zeros((n * n, len(cols)))
        t[cols, np.arange(len(cols))] = 1.0
        out = propagate(model, t.reshape((q,) * (2 * n_sites) + (len(cols),)), 1).reshape(n * n, len(cols))
        total += float(out[cols, np.arange(len(cols))].sum())
    return total


def second_moment_target(n: int) -> np.ndarray:
    """``delta_ii' delta_jj' / N`` laid out like ``second_moment_exact``."""
    v = np.eye(n).reshape(-1)
    return np.outer(v, v) / n


def moment_exact(model, pat: CircuitPattern) -> float:
    """Exact moment of order ``pat.order`` (1 or 2) by channel propagation."""
    n_sites, q, _ = _layout(model)
    n = q**n_sites
    k = pat.order
    limit = MATRIX_FREE_SECOND_MOMENT_MAX_N if k == 1 else FOURTH_MOMENT_MAX_N
    if k > 2 or n > limit:
        raise ResourceError(f"order-{2 * k} moment not supported at N={n}")
    t = np.zeros((q,) * (2 * k * n_sites) + (1,))
    col = sum((_digits(j, q, n_sites) for j in pat.cols + pat.cols_c), ())
    t[col + (0,)] = 1.0
    t = propagate(model, t, k)
    row = sum((_digits(i, q, n_sites) for i in pat.rows + pat.rows_c), ())
    return float(t[row + (0,)])


def fourth_moment_exact(model, pat: CircuitPattern) -> float:
    if pat.order != 2:
        raise ValueError("fourth moment needs index pairs")
    return moment_exact(model, pat)


def fourth_moment_deviation(model, pat: CircuitPattern) -> float:
    """``|exact - RMT target|`` for a fourth-moment pattern."""
    n_sites, q, _ = _layout(model)
    return abs(fourth_moment_exact(model, pat) - rmt_target(pat, q**n_sites))


# --- Monte Carlo ---------------------------------------------------------------------

def _monomial(seed, model, pat):
    u = model.sample(seed.child_seed())
    val = 1.0 + 0.0j
    for i, j in zip(pat.rows, pat.cols):
        val *= u[i, j]
    for i, j in zip(pat.rows_c, pat.cols_c):
        val *= np.conj(u[i, j])
    return val


def moment_mc(model, pat: CircuitPattern, order: int, n_samples: int, seed: int, workers=None):
    """Monte Carlo moment over realisations: ``(mean, stderr)``."""
    if order != 2 * pat.order:
        raise ValueError(f"order {order} does not match a pattern with {pat.order} index pairs")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    vals = map_samples(_monomial, n_samples, seed, workers, args=(model, pat))
    mean, se = mean_stderr(vals)
    return complex(mean), float(se)
