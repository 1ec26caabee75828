"""Command-line experiment runner.

Subcommands: ``sff``, ``r2``, ``verify``, ``wg-table``, ``validate-circuit``.
Exit codes: 0 all checks pass, 1 statistical or invariant failure,
2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from floquet_spectra import circuit as circ
from floquet_spectra._parallel import WORKERS_ENV, default_workers
from floquet_spectra.moments import MATRIX_FREE_SECOND_MOMENT_MAX_N, sff2_from_channel
from floquet_spectra.spectra import (
    cue_r2bar_bin_average,
    cue_sff,
    noninteracting_sff,
    r2bar_estimate,
    sample_spectra,
    sff_from_spectra,
    sigma_r2bar_bin_average,
)
from floquet_spectra.svgplot import line_plot
from floquet_spectra.verify import SUITES, run_suite
from floquet_spectra.weingarten import WeingartenDomainError, solve_table

log = logging.getLogger("floquet_spectra")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
Z_MAX = 5.0
MODELS = ("circuit", "noninteracting", "single_cue")
CIRCUIT_KEYS = ("dimension", "linear_size", "local_dim", "boundary", "kind", "ordering_seed",
                "substeps", "bonds", "gate_order")


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    model: str
    t_list: list = field(default_factory=lambda: [1])
    n_samples: int = 1000
    master_seed: int = 0
    workers: int = 1
    bins: int = 64
    output_dir: str = "results"
    experiment: str = "experiment"
    dim: int | None = None
    circuit: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, d: dict, experiment: str = "experiment") -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        known = {"model", "t_list", "n_samples", "master_seed", "workers", "bins", "output_dir",
                 "experiment", "dim", *CIRCUIT_KEYS}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if d.get("model") not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {d.get('model')!r}")
        try:
            cfg = cls(
                model=d["model"],
                t_list=[int(t) for t in d.get("t_list", [1])],
                n_samples=int(d.get("n_samples", 1000)),
                master_seed=int(d.get("master_seed", 0)),
                workers=int(d.get("workers", default_workers())),
                bins=int(d.get("bins", 64)),
                output_dir=str(d.get("output_dir", "results")),
                experiment=str(d.get("experiment", experiment)),
                dim=int(d["dim"]) if d.get("dim") is not None else None,
                circuit={k: d[k] for k in CIRCUIT_KEYS if k in d},
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad config value: {e}") from None
        cfg.check()
        return cfg

    def check(self):
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")
        if not self.t_list:
            raise ConfigError("t_list must be non-empty")
        if self.bins < 1:
            raise ConfigError("bins must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        self.build_model()

    def build_model(self):
        try:
            if self.model == "single_cue":
                if not self.dim or self.dim < 1:
                    raise ConfigError("single_cue needs a positive 'dim'")
                return circ.SingleCue(self.dim)
            c = self.circuit
            if self.model == "noninteracting":
                if "local_dim" not in c or "linear_size" not in c:
                    raise ConfigError("noninteracting needs 'local_dim' and 'linear_size'")
                model = circ.Noninteracting(int(c["local_dim"]), int(c["linear_size"]))
            else:
                model = circ.spec_from_dict(c, seed=self.master_seed)
                problems = circ.validate(model)
                if problems:
                    raise ConfigError("invalid circuit: " + "; ".join(problems))
        except circ.CircuitError as e:
            raise ConfigError(str(e)) from None
        if model.dim > circ.DENSE_CEILING:
            raise ConfigError(f"Hilbert space dimension {model.dim} exceeds {circ.DENSE_CEILING}")
        return model


def load_config(path, overrides: dict) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config: {e}") from None
    raw = dict(raw or {})
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_mapping(raw, experiment=Path(path).stem)


# --- formatting -------------------------------------------------------------------------

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path: Path, header, rows):
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def z_score(estimate, prediction, stderr):
    if prediction is None:
        return None
    diff = estimate - prediction
    if stderr > 0:
        return diff / stderr
    return 0.0 if abs(diff) <= 1e-9 * max(1.0, abs(prediction)) else float("inf")


# --- subcommands ----------------------------------------------------------------------

def sff_prediction(cfg: ExperimentConfig, model, t: int):
    if cfg.model == "single_cue":
        return float(cue_sff(model.N, t))
    if cfg.model == "noninteracting":
        return float(noninteracting_sff(model.q, model.L, t))
    if t == 0:
        return float(model.dim**2)
    if abs(t) == 1:
        return sff2_from_channel(model) if model.dim <= MATRIX_FREE_SECOND_MOMENT_MAX_N else 1.0
    return None


def run_sff(cfg: ExperimentConfig, plot: bool = False) -> int:
    model = cfg.build_model()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spectra = sample_spectra(model, cfg.n_samples, cfg.master_seed, cfg.workers)
    rows, ok = [], True
    for est in sff_from_spectra(spectra, cfg.t_list):
        pred = sff_prediction(cfg, model, est.t)
        z = z_score(est.mean, pred, est.stderr)
        ok &= z is None or abs(z) <= Z_MAX
        rows.append((est.t, est.mean, est.stderr, est.n_samples, pred, z))
    path = write_csv(out / f"{cfg.experiment}_sff.csv", ("t", "mean", "stderr", "n", "prediction", "z"), rows)
    log.info("wrote %s", path)
    if plot:
        ts = [r[0] for r in rows]
        series = {"estimate": [r[1] for r in rows]}
        if any(r[4] is not None for r in rows):
            series["prediction"] = [r[4] if r[4] is not None else float("nan") for r in rows]
        line_plot(out / f"{cfg.experiment}_sff.svg", ts, series, title=f"K(t) {cfg.experiment}", xlabel="t", ylabel="K(t)")
    return EXIT_OK if ok else EXIT_FAIL


def run_r2(cfg: ExperimentConfig, plot: bool = False) -> int:
    """Per-bin two-level correlation with both closed-form predictions.

    Only the single-CUE model has an exact finite-N prediction, so only that
    model can fail on z-scores.
    """
    model = cfg.build_model()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spectra = sample_spectra(model, cfg.n_samples, cfg.master_seed, cfg.workers)
    hist = r2bar_estimate(spectra, cfg.bins)
    n = model.dim
    rows, ok = [], True
    for lo, hi, c, d, se in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.centers, hist.densities, hist.stderr):
        cue = cue_r2bar_bin_average(n, lo, hi)
        sig = sigma_r2bar_bin_average(n, lo, hi) if 0 < lo and hi < 2 * np.pi else None
        z_cue, z_sig = z_score(d, cue, se), z_score(d, sig, se)
        if cfg.model == "single_cue":
            ok &= abs(z_cue) <= Z_MAX
        rows.append((lo, hi, c, d, se, hist.n_samples, cue, sig, z_cue, z_sig))
    header = ("bin_lo", "bin_hi", "center", "mean", "stderr", "n", "cue_prediction", "sigma_prediction", "z_cue", "z_sigma")
    path = write_csv(out / f"{cfg.experiment}_r2.csv", header, rows)
    log.info("wrote %s", path)
    if plot:
        line_plot(out / f"{cfg.experiment}_r2.svg", [r[2] for r in rows],
                  {"estimate": [r[3] for r in rows], "CUE": [r[6] for r in rows],
                   "smooth": [r[7] if r[7] is not None else float("nan") for r in rows]},
                  title=f"R2 {cfg.experiment}", xlabel="level separation", ylabel="R2")
    return EXIT_OK if ok else EXIT_FAIL


def run_verify(suite: str, out_dir=None, **kwargs) -> int:
    checks = run_suite(suite, **kwargs)
    records = [c.to_dict() for c in checks]
    for r in records:
        print(json.dumps(r, sort_keys=True))
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{suite}.json").write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def run_wg_table(q: int, max_p: int, out_path) -> Path:
    table = solve_table(q, max_p)
    out_path = Path(out_path)
    if out_path.is_dir():
        out_path = out_path / f"wg_q{q}_p{max_p}.txt"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    return table.save(out_path)


def run_validate(path) -> int:
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
        spec = circ.spec_from_dict(raw)
    except (OSError, yaml.YAMLError, circ.CircuitError, TypeError, ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    problems = circ.validate(spec)
    for p in problems:
        print(p)
    if not problems:
        print(f"ok: {len(spec.bonds)} bonds, {spec.n_substeps} substeps, N={spec.dim}")
    return EXIT_OK if not problems else EXIT_FAIL


# --- entry point ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="floquet-spectra", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("sff", "spectral form factor sweep"), ("r2", "two-level correlation histogram")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--plot", action="store_true", help="also write an SVG line chart")
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--q", type=int, default=4, help="group dimension (weingarten suite)")
    v.add_argument("--max-p", type=int, default=4, help="max moment order (weingarten suite)")
    v.add_argument("--samples", type=int, default=2000, help="samples per ordering (ordering suite)")
    w = sub.add_parser("wg-table", parents=[common], help="write an exact Weingarten table")
    w.add_argument("--q", type=int, required=True)
    w.add_argument("--max-p", type=int, required=True)
    c = sub.add_parser("validate-circuit", parents=[common], help="check a circuit config")
    c.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        workers = args.workers if args.workers is not None else default_workers()
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command in ("sff", "r2"):
        overrides = {"master_seed": args.seed, "workers": workers if args.workers is not None else None,
                     "output_dir": args.out}
        try:
            cfg = load_config(args.config, overrides)
        except ConfigError as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        runner = run_sff if args.command == "sff" else run_r2
        return runner(cfg, plot=args.plot)
    if args.command == "verify":
        kwargs = {}
        if args.suite == "weingarten":
            kwargs = {"q": args.q, "max_p": args.max_p}
        elif args.suite == "ordering":
            kwargs = {"n_samples": args.samples, "seed": args.seed or 0, "workers": workers}
        try:
            return run_verify(args.suite, args.out, **kwargs)
        except WeingartenDomainError as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
    if args.command == "wg-table":
        try:
            path = run_wg_table(args.q, args.max_p, args.out or f"wg_q{args.q}_p{args.max_p}.txt")
        except WeingartenDomainError as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        print(path)
        return EXIT_OK
    if args.command == "validate-circuit":
        return run_validate(args.config)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
