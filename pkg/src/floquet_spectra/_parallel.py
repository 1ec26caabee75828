"""Deterministic fan-out of per-sample Monte Carlo work."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from floquet_spectra.rng import derive_stream

WORKERS_ENV = "FLOQUET_SPECTRA_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _run_chunk(fn, start, stop, master_seed, args):
    return np.stack([np.asarray(fn(derive_stream(master_seed, i), *args)) for i in range(start, stop)])


def map_samples(fn, n_samples: int, master_seed: int, workers: int | None = None, args=()) -> np.ndarray:
    """Evaluate ``fn(derive_stream(master_seed, i), *args)`` for every sample index.

    Results are stacked in sample-index order.  Each sample owns its stream,
    so the output is bit-identical for any ``workers``.  ``fn`` and ``args``
    must be picklable when ``workers > 1``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, n_samples)
    if workers == 1:
        return _run_chunk(fn, 0, n_samples, master_seed, args)
    bounds = np.linspace(0, n_samples, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_chunk, fn, int(lo), int(hi), master_seed, args)
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        parts = [f.result() for f in futures]
    return np.concatenate(parts, axis=0)


def mean_stderr(samples: np.ndarray):
    """Sample mean and standard error (unbiased variance) along axis 0."""
    samples = np.asarray(samples)
    n = samples.shape[0]
    if n < 2:
        raise ValueError("need at least two samples for a standard error")
    mean = samples.mean(axis=0)
    if np.iscomplexobj(samples):
        var = samples.real.var(axis=0, ddof=1) + samples.imag.var(axis=0, ddof=1)
    else:
        var = samples.var(axis=0, ddof=1)
    return mean, np.sqrt(var / n)
