"""Quasi-energies, spectral form factors, two-level correlations and closed forms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from floquet_spectra._parallel import map_samples, mean_stderr

TWO_PI = 2.0 * np.pi
DEFAULT_BINS = 64


class SpectralDomainError(ValueError):
    pass


@dataclass(frozen=True)
class SffEstimate:
    t: int
    mean: float
    stderr: float
    n_samples: int


@dataclass(frozen=True)
class R2Histogram:
    bin_edges: np.ndarray
    densities: np.ndarray
    stderr: np.ndarray
    n_samples: int
    include_diagonal: bool = False

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)


# --- per-realisation quantities ---------------------------------------------------

def eigenphases(u: np.ndarray) -> np.ndarray:
    """Eigen-phases of a unitary, wrapped to ``[0, 2pi)``."""
    try:
        ev = np.linalg.eigvals(np.asarray(u))
    except np.linalg.LinAlgError as e:
        raise ArithmeticError(f"eigensolver failed: {e}") from e
    phases = np.mod(np.angle(ev), TWO_PI)
    phases[phases >= TWO_PI] = 0.0
    return np.sort(phases)


def sff_exact(phases: np.ndarray, t) -> float | np.ndarray:
    """``|sum_j exp(i t theta_j)|^2`` for one spectrum; ``t`` may be an array."""
    phases = np.asarray(phases, dtype=float)
    t_arr = np.atleast_1d(np.asarray(t))
    tr = np.exp(1j * np.outer(t_arr, phases)).sum(axis=1)
    out = np.abs(tr) ** 2
    return float(out[0]) if np.ndim(t) == 0 else out


def sff_matrix_power(u: np.ndarray, t: int) -> float:
    """``|Tr U^t|^2`` by repeated multiplication; independent of the eigensolver."""
    u = np.asarray(u)
    if t < 0:
        u, t = u.conj().T, -t
    return float(abs(np.trace(np.linalg.matrix_power(u, t))) ** 2)


# --- ensembles ----------------------------------------------------------------------

def _sample_phases(seed, model):
    return eigenphases(model.sample(seed.child_seed()))


def sample_spectra(model, n_samples: int, master_seed: int, workers=None) -> np.ndarray:
    """Eigen-phases of ``n_samples`` independent realisations, shape ``(n, N)``.

    ``model`` is anything with a ``sample(seed: int) -> ndarray`` method
    (a ``CircuitSpec``, ``Noninteracting`` or ``SingleCue``).
    """
    return map_samples(_sample_phases, n_samples, master_seed, workers, args=(model,))


def sff_from_spectra(spectra: np.ndarray, t_list: Sequence[int]) -> list[SffEstimate]:
    spectra = np.asarray(spectra)
    n = spectra.shape[0]
    if n < 2:
        raise ValueError("need at least two samples")
    t = np.asarray(list(t_list))
    tr = np.exp(1j * spectra[:, None, :] * t[None, :, None]).sum(axis=2)
    k = np.abs(tr) ** 2
    mean, se = mean_stderr(k)
    return [SffEstimate(int(tt), float(m), float(s), n) for tt, m, s in zip(t, mean, se)]


def sff_mc(model, t_list: Sequence[int], n_samples: int, master_seed: int, workers=None) -> list[SffEstimate]:
    """Monte Carlo spectral form factor, one eigendecomposition per realisation."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    return sff_from_spectra(sample_spectra(model, n_samples, master_seed, workers), t_list)


def r2bar_estimate(spectra, bins=DEFAULT_BINS, include_diagonal: bool = False) -> R2Histogram:
    """Histogram estimate of the spectrum-averaged two-level correlation.

    All ordered pair differences ``(theta_i - theta_j) mod 2pi`` are binned
    and normalised by ``2pi * bin_width * n_samples``.  Without the diagonal
    the estimator targets the correlation minus its ``N delta / 2pi`` term.
    """
    spectra = [np.asarray(s, dtype=float) for s in spectra]
    if not spectra:
        raise ValueError("need at least one spectrum")
    edges = np.linspace(0.0, TWO_PI, bins + 1) if np.ndim(bins) == 0 else np.asarray(bins, dtype=float)
    nb = len(edges) - 1
    per_sample = np.empty((len(spectra), nb))
    for k, ph in enumerate(spectra):
        diff = np.mod(ph[:, None] - ph[None, :], TWO_PI)
        if not include_diagonal:
            diff = diff[~np.eye(len(ph), dtype=bool)]
        per_sample[k], _ = np.histogram(diff.ravel(), bins=edges)
    norm = TWO_PI * np.diff(edges)
    dens = per_sample / norm
    mean = dens.mean(axis=0)
    se = dens.std(axis=0, ddof=1) / np.sqrt(len(spectra)) if len(spectra) > 1 else np.full(nb, np.nan)
    return R2Histogram(edges, mean, se, len(spectra), include_diagonal)


def r2_fourier(hist: R2Histogram, t: int, n_levels: int) -> float:
    """SFF rebuilt from an off-diagonal histogram plus the ``N`` self-term.

    Each bin contributes its mass times the bin average of ``exp(-i t dphi)``.
    """
    lo, hi = hist.bin_edges[:-1], hist.bin_edges[1:]
    if t == 0:
        kernel = hi - lo
    else:
        kernel = (np.exp(-1j * t * hi) - np.exp(-1j * t * lo)) / (-1j * t)
    return float(np.real(TWO_PI * np.sum(hist.densities * kernel))) + n_levels


# --- closed forms -------------------------------------------------------------------

def _check_gap(dphi):
    d = np.asarray(dphi, dtype=float)
    if np.any(np.mod(d, TWO_PI) == 0.0):
        raise SpectralDomainError("level separation 0 is a pole; the delta term is separate")


def cue_r2bar(N: int, dphi):
    """CUE two-level correlation at nonzero separation (delta term excluded)."""
    _check_gap(dphi)
    d = np.asarray(dphi, dtype=float)
    val = -(np.sin(N * d / 2) ** 2) / (np.sin(d / 2) ** 2) / (4 * np.pi**2) + N**2 / (4 * np.pi**2)
    return float(val) if np.ndim(dphi) == 0 else val


def sigma_r2bar(N: int, dphi):
    """Smooth (non-oscillatory) two-level correlation of the circuit family."""
    _check_gap(dphi)
    d = np.asarray(dphi, dtype=float)
    val = -1.0 / (8 * np.pi**2) / (np.sin(d / 2) ** 2) + N**2 / (4 * np.pi**2)
    return float(val) if np.ndim(dphi) == 0 else val


def oscillatory_remainder(N: int, dphi):
    """``cue_r2bar - sigma_r2bar`` in closed form."""
    _check_gap(dphi)
    d = np.asarray(dphi, dtype=float)
    val = -(np.sin(N * d / 2) ** 2 - 0.5) / (np.sin(d / 2) ** 2) / (4 * np.pi**2)
    return float(val) if np.ndim(dphi) == 0 else val


def cue_r2_connected_scaled(eps: float) -> float:
    if eps == 0:
        raise SpectralDomainError("eps = 0 is excluded")
    x = np.pi * eps
    return -((np.sin(x) / x) ** 2)


def cue_sff(N: int, t: int) -> int:
    return min(abs(t), N) + (N * N if t == 0 else 0)


def noninteracting_sff(q: int, L: int, t: int) -> int:
    """Product of single-site CUE(q) form factors."""
    return math.prod(cue_sff(q, t) for _ in range(L))


def sigma_correlator(x: complex) -> complex:
    """``x / (1 - x)^2`` with ``x = alpha * beta``."""
    if x == 1:
        raise SpectralDomainError("x = 1 is a pole")
    return x / (1 - x) ** 2


def sigma_correlator_series(order: int) -> list[Fraction]:
    """Exact Taylor coefficients of ``x / (1 - x)^2`` for powers 1..order.

    Built from the geometric series ``1/(1-x)`` by Cauchy product, without
    using the closed-form coefficients.
    """
    geo = [Fraction(1)] * order
    square = [sum((geo[i] * geo[k - i] for i in range(k + 1)), Fraction(0)) for k in range(order)]
    # coefficient of x^(k+1) in x * (1/(1-x))^2 is square[k]
    return square


def cue_r2bar_bin_average(N: int, lo: float, hi: float) -> float:
    """Exact mean of ``cue_r2bar`` over ``[lo, hi]``.

    Uses the Fejer expansion ``sin^2(Nx/2)/sin^2(x/2) = sum_{|k|<N} (N-|k|) e^{ikx}``,
    which is smooth through ``x = 0``.
    """
    if not hi > lo:
        raise ValueError("need hi > lo")
    k = np.arange(1, N)
    fejer = N * (hi - lo) + np.sum(2.0 * (N - k) * (np.sin(k * hi) - np.sin(k * lo)) / k)
    return float((-fejer / (4 * np.pi**2) + N**2 * (hi - lo) / (4 * np.pi**2)) / (hi - lo))


def sigma_r2bar_bin_average(N: int, lo: float, hi: float) -> float:
    """Exact mean of ``sigma_r2bar`` over ``[lo, hi]`` inside ``(0, 2pi)``."""
    if not (0.0 < lo < hi < TWO_PI):
        raise SpectralDomainError("bin touches the pole at zero separation")
    integral = 2.0 / np.tan(lo / 2) - 2.0 / np.tan(hi / 2)
    return float(-integral / (8 * np.pi**2) / (hi - lo) + N**2 / (4 * np.pi**2))
