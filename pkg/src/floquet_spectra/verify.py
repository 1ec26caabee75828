"""Self-check suites run by ``floquet-spectra verify``."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from floquet_spectra.circuit import standard_orderings
from floquet_spectra.moments import second_moment_exact, second_moment_target, sff2_from_channel
from floquet_spectra.perm import CycleType
from floquet_spectra.spectra import sff_mc
from floquet_spectra.weingarten import MomentPattern, asymptotic_check, haar_moment, recursion_residuals, solve_table

SUITES = ("weingarten", "moments", "ordering", "asymptotics")
EXACT_TOL = 1e-12
Z_MAX = 5.0


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def to_dict(self):
        d = asdict(self)
        d["value"] = float(d["value"])
        return d


def weingarten_suite(q: int = 4, max_p: int = 4) -> list[Check]:
    table = solve_table(q, max_p)
    checks = []
    for name, res in recursion_residuals(table):
        checks.append(Check("weingarten", f"residual {name}", res == 0, float(res), 0.0))
    if max_p >= 2:
        exp11, exp2 = Fraction(1, q * q - 1), Fraction(-1, q * (q * q - 1))
        checks.append(Check("weingarten", "Wg[1,1] = 1/(q^2-1)", table[(1, 1)] == exp11, float(table[(1, 1)] - exp11), 0.0))
        checks.append(Check("weingarten", "Wg[2] = -1/(q(q^2-1))", table[(2,)] == exp2, float(table[(2,)] - exp2), 0.0))
    # sum_j <U_ij U^dag_ji> = 1
    total = sum(haar_moment(table, MomentPattern((1,), (j,), (1,), (j,))) for j in range(1, q + 1))
    checks.append(Check("weingarten", "unitarity sum rule p=1", total == 1, float(total - 1), 0.0))
    return checks


def moment_specs():
    """Lattices on which the exact second-moment identity is checked."""
    return [
        ("brickwork open L=3", standard_orderings("brickwork", 1, 3, 2, "open")),
        ("brickwork periodic L=4", standard_orderings("brickwork", 1, 4, 2, "periodic")),
        ("staircase open L=3", standard_orderings("staircase", 1, 3, 2, "open")),
        ("staircase periodic L=3", standard_orderings("staircase", 1, 3, 2, "periodic")),
        ("random open L=3", standard_orderings("random", 1, 3, 2, "open", seed=1)),
        ("random periodic L=3", standard_orderings("random", 1, 3, 2, "periodic", seed=2)),
        ("2D brickwork L=2", standard_orderings("brickwork", 2, 2, 2, "open")),
    ]


def moments_suite() -> list[Check]:
    checks = []
    for name, spec in moment_specs():
        dev = float(np.max(np.abs(second_moment_exact(spec) - second_moment_target(spec.dim))))
        checks.append(Check("moments", f"second moment {name}", dev <= EXACT_TOL, dev, EXACT_TOL))
        dk = abs(sff2_from_channel(spec) - 1.0)
        checks.append(Check("moments", f"K(1)=1 {name}", dk <= EXACT_TOL, dk, EXACT_TOL))
    return checks


def ordering_suite(q: int = 3, L: int = 3, boundary: str = "open", t_list=(1, 2, 3),
                   n_samples: int = 2000, seed: int = 0, workers=None) -> list[Check]:
    kinds = ("brickwork", "staircase", "random")
    est = {}
    for k, kind in enumerate(kinds):
        spec = standard_orderings(kind, 1, L, q, boundary, seed=seed + 101)
        est[kind] = sff_mc(spec, t_list, n_samples, seed + k, workers)
    checks = []
    for a, b in itertools.combinations(kinds, 2):
        for ea, eb in zip(est[a], est[b]):
            z = abs(ea.mean - eb.mean) / np.hypot(ea.stderr, eb.stderr)
            checks.append(Check("ordering", f"K({ea.t}) {a} vs {b}", z <= Z_MAX, z, Z_MAX,
                                f"{ea.mean:.4f}+-{ea.stderr:.4f} vs {eb.mean:.4f}+-{eb.stderr:.4f}"))
    return checks


def identity_residuals(p: int, q_list=(8, 16, 32)):
    """``|q^p Wg([1^p]) - 1|`` for each ``q``."""
    return [float(abs(v - 1)) for _, v in asymptotic_check(CycleType.of([1] * p), q_list)]


def asymptotics_suite(q_list=(8, 16, 32), min_ratio: float = 3.0) -> list[Check]:
    checks = []
    for p in (2, 3):
        res = identity_residuals(p, q_list)
        for (q1, r1), (q2, r2) in zip(zip(q_list, res), zip(q_list[1:], res[1:])):
            ratio = r1 / r2
            checks.append(Check("asymptotics", f"q^{p} Wg[1^{p}] residual shrink q={q1}->{q2}",
                                ratio >= min_ratio, ratio, min_ratio))
    for ct in ([2], [2, 1], [3]):
        ct = CycleType.of(ct)
        vals = [abs(float(v)) for _, v in asymptotic_check(ct, q_list)]
        # scaled values converge: successive changes shrink
        diffs = [abs(b - a) for a, b in zip(vals, vals[1:])]
        ok = all(v > 0 for v in vals) and all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
        checks.append(Check("asymptotics", f"q^(2p-m) Wg[{ct}] converges", ok, vals[-1], 0.0,
                            " ".join(f"{v:.6f}" for v in vals)))
    return checks


def run_suite(name: str, **kwargs) -> list[Check]:
    funcs = {
        "weingarten": weingarten_suite,
        "moments": moments_suite,
        "ordering": ordering_suite,
        "asymptotics": asymptotics_suite,
    }
    if name not in funcs:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    return funcs[name](**kwargs)
