"""Acceptance criteria, one test per criterion.

Every Monte Carlo criterion renders its results as CSV text through the same
formatter as the CLI; criterion 11 reruns each with 1 and 4 workers and
compares the bytes.
"""

import itertools
from fractions import Fraction
from functools import lru_cache

import numpy as np

from floquet_spectra.circuit import Noninteracting, SingleCue, standard_orderings
from floquet_spectra.cli import fmt
from floquet_spectra.moments import (
    CircuitPattern,
    fourth_moment_deviation,
    second_moment_exact,
    second_moment_target,
    sff2_from_channel,
)
from floquet_spectra.spectra import (
    cue_r2bar,
    cue_sff,
    noninteracting_sff,
    oscillatory_remainder,
    r2_fourier,
    r2bar_estimate,
    sample_spectra,
    sff_mc,
    sigma_correlator_series,
    sigma_r2bar,
)
from floquet_spectra.verify import identity_residuals
from floquet_spectra.weingarten import MomentPattern, haar_moment, haar_moments_mc, recursion_residuals, solve_table

Z = 5.0


def csv(header, rows):
    return ("\n".join([",".join(header)] + [",".join(fmt(v) for v in r) for r in rows]) + "\n").encode()


def parse(blob):
    lines = blob.decode().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, (float(x) if x else None for x in line.split(",")))) for line in lines[1:]]


# --- Monte Carlo runs, cached per worker count ------------------------------------------

@lru_cache(maxsize=None)
def run_cue_ramp(workers):
    rows = []
    for n, seed in ((4, 101), (16, 102)):
        for est in sff_mc(SingleCue(n), range(1, 2 * n + 1), 10_000, seed, workers):
            pred = cue_sff(n, est.t)
            rows.append((n, est.t, est.mean, est.stderr, est.n_samples, pred, (est.mean - pred) / est.stderr))
    return csv(("N", "t", "mean", "stderr", "n", "prediction", "z"), rows)


@lru_cache(maxsize=None)
def run_k1(workers):
    spec = standard_orderings("brickwork", 1, 4, 2, "periodic")
    (est,) = sff_mc(spec, [1], 2000, 103, workers)
    return csv(("t", "mean", "stderr", "n", "prediction", "z"),
               [(1, est.mean, est.stderr, est.n_samples, 1.0, (est.mean - 1.0) / est.stderr)])


ORDERING_KINDS = ("brickwork", "staircase", "random")


@lru_cache(maxsize=None)
def run_orderings(workers):
    rows = []
    for k, kind in enumerate(ORDERING_KINDS):
        spec = standard_orderings(kind, 1, 3, 3, "open", seed=7)
        for est in sff_mc(spec, [1, 2, 3], 4000, 200 + k, workers):
            rows.append((k, est.t, est.mean, est.stderr, est.n_samples))
    return csv(("ordering", "t", "mean", "stderr", "n"), rows)


@lru_cache(maxsize=None)
def run_noninteracting(workers):
    rows = []
    for est in sff_mc(Noninteracting(8, 2), [1, 2, 3], 4000, 104, workers):
        pred = noninteracting_sff(8, 2, est.t)
        rows.append((est.t, est.mean, est.stderr, est.n_samples, pred, (est.mean - pred) / est.stderr))
    return csv(("t", "mean", "stderr", "n", "prediction", "z"), rows)


def wg_patterns(q):
    """Six patterns with p <= 2, indices 1-based."""
    b = 2
    return [
        MomentPattern((1,), (1,), (1,), (1,)),
        MomentPattern((1,), (b,), (1,), (b,)),
        MomentPattern((1,), (1,), (b,), (1,)),
        MomentPattern((1, b), (1, b), (1, b), (1, b)),
        MomentPattern((1, 1), (1, 1), (1, 1), (1, 1)),
        MomentPattern((1, b), (1, b), (1, b), (b, 1)),
    ]


@lru_cache(maxsize=None)
def run_wg_mc(workers):
    rows = []
    for q in (2, 3):
        table = solve_table(q, 2)
        pats = wg_patterns(q)
        for k, (pat, (mean, se)) in enumerate(zip(pats, haar_moments_mc(q, pats, 100_000, 300 + q, workers))):
            exact = float(haar_moment(table, pat))
            # imaginary part has mean zero; its spread is folded into se
            rows.append((q, k, mean.real, mean.imag, se, exact, abs(mean - exact) / se))
    return csv(("q", "pattern", "mean_re", "mean_im", "stderr", "exact", "z"), rows)


@lru_cache(maxsize=None)
def run_fourier(workers):
    n = 8
    spectra = sample_spectra(SingleCue(n), 4000, 105, workers)
    rows = []
    edges = np.linspace(0, 2 * np.pi, 257)
    for t in (1, 2, 3, 5, 8):
        k = np.abs(np.exp(1j * t * spectra).sum(axis=1)) ** 2
        f = np.array([r2_fourier(r2bar_estimate([s], edges), t, n) for s in spectra])
        d = f - k
        rows.append((t, f.mean(), f.std(ddof=1) / np.sqrt(len(f)), k.mean(), k.std(ddof=1) / np.sqrt(len(k)),
                     d.mean(), d.std(ddof=1) / np.sqrt(len(d))))
    return csv(("t", "fourier", "fourier_se", "sff", "sff_se", "diff", "diff_se"), rows)


MC_RUNS = {
    1: run_cue_ramp,
    3: run_k1,
    4: run_orderings,
    6: run_noninteracting,
    8: run_wg_mc,
    10: run_fourier,
}


# --- criteria ------------------------------------------------------------------------

def test_criterion_01_cue_ramp_and_plateau(report):
    rows = parse(run_cue_ramp(4))
    worst = max(abs(r["z"]) for r in rows)
    assert report(1, "CUE SFF min(|t|, N) for N=4,16, t=1..2N", worst <= Z, f"max |z| = {worst:.2f} over {len(rows)} points")


def test_criterion_02_second_moment_identity(report):
    specs = [("brickwork open L=3", standard_orderings("brickwork", 1, 3, 2, "open")),
             ("brickwork periodic L=4", standard_orderings("brickwork", 1, 4, 2, "periodic")),
             ("staircase open L=3", standard_orderings("staircase", 1, 3, 2, "open")),
             ("staircase periodic L=3", standard_orderings("staircase", 1, 3, 2, "periodic"))]
    for boundary, seed in itertools.product(("open", "periodic"), (1, 2, 3)):
        specs.append((f"random({seed}) {boundary} L=3", standard_orderings("random", 1, 3, 2, boundary, seed=seed)))
    specs.append(("2D brickwork L=2", standard_orderings("brickwork", 2, 2, 2, "open")))
    devs = {name: float(np.max(np.abs(second_moment_exact(s) - second_moment_target(s.dim)))) for name, s in specs}
    worst = max(devs.values())
    assert report(2, "exact second moment = delta delta / N", worst <= 1e-12, f"{len(specs)} circuits, max dev {worst:.1e}")


def test_criterion_03_k1_equals_one(report):
    (row,) = parse(run_k1(4))
    exact = sff2_from_channel(standard_orderings("brickwork", 1, 4, 2, "periodic"))
    ok = abs(row["z"]) <= Z and abs(exact - 1) <= 1e-12
    assert report(3, "K(1) = 1, brickwork q=2 L=4 periodic", ok,
                  f"MC {row['mean']:.4f} +- {row['stderr']:.4f}, channel |K-1| = {abs(exact - 1):.1e}")


def test_criterion_04_ordering_invariance(report):
    rows = parse(run_orderings(4))
    by = {(int(r["ordering"]), int(r["t"])): r for r in rows}
    worst = 0.0
    for a, b in itertools.combinations(range(len(ORDERING_KINDS)), 2):
        for t in (1, 2, 3):
            ra, rb = by[a, t], by[b, t]
            worst = max(worst, abs(ra["mean"] - rb["mean"]) / np.hypot(ra["stderr"], rb["stderr"]))
    assert report(4, "brickwork/staircase/random SFF agree, q=3 L=3", worst <= Z, f"max pairwise z = {worst:.2f}")


def _digit_pattern(q, rows, cols, rows_c, cols_c):
    enc = lambda pairs: tuple(x * q + y for x, y in pairs)  # noqa: E731
    return CircuitPattern(enc(rows), enc(cols), enc(rows_c), enc(cols_c))


FOURTH_PATTERNS = {
    "diagonal distinct": ([(0, 0), (1, 1)],) * 4,
    "all equal": ([(0, 0), (0, 0)],) * 4,
    "swapped conjugate rows": ([(0, 0), (1, 1)], [(0, 0), (1, 1)], [(1, 1), (0, 0)], [(0, 0), (1, 1)]),
    "equal rows, swapped columns": ([(0, 1), (0, 1)], [(0, 0), (1, 1)], [(0, 1), (0, 1)], [(1, 1), (0, 0)]),
    "swapped rows, equal columns": ([(0, 0), (1, 1)], [(0, 1), (0, 1)], [(1, 1), (0, 0)], [(0, 1), (0, 1)]),
}


def test_criterion_05_fourth_moment_approaches_rmt(report):
    specs = {q: standard_orderings("brickwork", 1, 2, q, "open") for q in (2, 3)}
    parts = []
    ok = True
    for name, digits in FOURTH_PATTERNS.items():
        e2, e3 = (fourth_moment_deviation(specs[q], _digit_pattern(q, *digits)) for q in (2, 3))
        ok &= e3 < e2
        parts.append(f"{name} {e2:.4f}->{e3:.4f}")
    assert report(5, "fourth-moment deviation decreases q=2 -> 3 on L=2", ok, "; ".join(parts))


def test_criterion_06_noninteracting_product_law(report):
    rows = parse(run_noninteracting(4))
    worst = max(abs(r["z"]) for r in rows)
    preds = [r["prediction"] for r in rows]
    ramp = all(noninteracting_sff(8, 2, t) == t**2 for t in range(1, 8))
    ok = worst <= Z and preds == [1, 4, 9] and ramp
    assert report(6, "noninteracting q=8 L=2 K(t) = t^L", ok, f"max |z| = {worst:.2f}")


def test_criterion_07_weingarten_recursion(report):
    q = 6
    table = solve_table(q, 4)
    residuals = recursion_residuals(table)
    zero = all(r == 0 for _, r in residuals)
    level2 = table[(1, 1)] == Fraction(1, q * q - 1) and table[(2,)] == Fraction(-1, q * (q * q - 1))
    assert report(7, "q=6 max_p=4 recursion residuals exactly 0", zero and level2,
                  f"{len(residuals)} residuals, Wg[1,1]={table[(1, 1)]}, Wg[2]={table[(2,)]}")


def test_criterion_08_weingarten_vs_monte_carlo(report):
    rows = parse(run_wg_mc(4))
    worst = max(r["z"] for r in rows)
    assert report(8, "exact Haar moments vs 1e5-sample MC, q=2,3", worst <= Z and len(rows) == 12,
                  f"max |z| = {worst:.2f} over {len(rows)} moments")


def test_criterion_09_asymptotics(report):
    ratios = []
    for p in (2, 3):
        res = identity_residuals(p, (8, 16, 32))
        ratios += [a / b for a, b in zip(res, res[1:])]
    ok = min(ratios) >= 3
    assert report(9, "q^p Wg[1^p] - 1 shrinks >= 3x per doubling", ok, "ratios " + ", ".join(f"{r:.2f}" for r in ratios))


def test_criterion_10_analytic_identities(report):
    series = sigma_correlator_series(6) == [Fraction(k) for k in range(1, 7)]
    n = 12
    grid = np.linspace(0.05, 2 * np.pi - 0.05, 100)
    rem = float(np.max(np.abs(cue_r2bar(n, grid) - sigma_r2bar(n, grid) - oscillatory_remainder(n, grid))))
    rows = parse(run_fourier(4))
    fz = max(abs(r["fourier"] - r["sff"]) / np.hypot(r["fourier_se"], r["sff_se"]) for r in rows)
    ok = series and rem <= 1e-12 and fz <= Z
    assert report(10, "series coefficients, remainder identity, Fourier consistency", ok,
                  f"series exact={series}, remainder max {rem:.1e}, Fourier max z {fz:.2f}")


def test_criterion_11_determinism(report):
    same = {k: run(1) == run(4) for k, run in MC_RUNS.items()}
    ok = all(same.values())
    assert report(11, "CSV byte-identical for workers 1 and 4", ok,
                  ", ".join(f"c{k}={'same' if v else 'DIFF'}" for k, v in same.items()))
