import json
from pathlib import Path

import pytest
import yaml

from floquet_spectra.cli import ConfigError, ExperimentConfig, fmt, main, z_score
from floquet_spectra.weingarten import WeingartenTable

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_cfg(tmp_path, name="exp", **d):
    path = tmp_path / f"{name}.yaml"
    path.write_text(yaml.safe_dump(d))
    return path


def rows(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return header, [dict(zip(header, line.split(","))) for line in lines[1:]]


def test_sff_single_cue(tmp_path):
    cfg = write_cfg(tmp_path, model="single_cue", dim=4, t_list=list(range(1, 9)), n_samples=2000, master_seed=1)
    assert main(["sff", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    header, body = rows(tmp_path / "exp_sff.csv")
    assert header == ["t", "mean", "stderr", "n", "prediction", "z"]
    assert [float(r["prediction"]) for r in body] == [min(t, 4) for t in range(1, 9)]
    assert all(r["n"] == "2000" for r in body)
    assert not (tmp_path / "exp_sff.svg").exists()


def test_sff_floats_have_17_digits(tmp_path):
    cfg = write_cfg(tmp_path, model="single_cue", dim=3, t_list=[1], n_samples=10, master_seed=2)
    main(["sff", "--config", str(cfg), "--out", str(tmp_path)])
    _, body = rows(tmp_path / "exp_sff.csv")
    mean = body[0]["mean"]
    assert float(mean) == float(f"{float(mean):.17g}")
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3"
    assert fmt(None) == ""


def test_sff_circuit_prediction_only_at_t1(tmp_path):
    cfg = write_cfg(tmp_path, model="circuit", dimension=1, linear_size=3, local_dim=2, boundary="open",
                    kind="brickwork", t_list=[1, 2], n_samples=200, master_seed=0)
    assert main(["sff", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    _, body = rows(tmp_path / "exp_sff.csv")
    assert float(body[0]["prediction"]) == pytest.approx(1.0, abs=1e-12)
    assert body[1]["prediction"] == "" and body[1]["z"] == ""


def test_sff_plot_flag(tmp_path):
    cfg = write_cfg(tmp_path, model="noninteracting", local_dim=3, linear_size=2, t_list=[1, 2], n_samples=50)
    assert main(["sff", "--config", str(cfg), "--out", str(tmp_path), "--plot"]) == 0
    svg = (tmp_path / "exp_sff.svg").read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert "</svg>" in svg


def test_failing_prediction_exits_one(tmp_path, monkeypatch):
    import floquet_spectra.cli as cli

    monkeypatch.setattr(cli, "sff_prediction", lambda cfg, model, t: 100.0)
    cfg = write_cfg(tmp_path, model="single_cue", dim=4, t_list=[2], n_samples=500, master_seed=0)
    assert main(["sff", "--config", str(cfg), "--out", str(tmp_path), "--plot"]) == 1
    _, body = rows(tmp_path / "exp_sff.csv")
    assert abs(float(body[0]["z"])) > 5
    assert (tmp_path / "exp_sff.svg").exists()


def test_r2_single_cue(tmp_path):
    cfg = write_cfg(tmp_path, model="single_cue", dim=8, n_samples=2000, bins=16, master_seed=3)
    assert main(["r2", "--config", str(cfg), "--out", str(tmp_path), "--plot"]) == 0
    header, body = rows(tmp_path / "exp_r2.csv")
    assert header[:4] == ["bin_lo", "bin_hi", "center", "mean"]
    assert len(body) == 16
    assert body[0]["sigma_prediction"] == "" and body[-1]["sigma_prediction"] == ""
    assert body[5]["sigma_prediction"] != ""
    assert (tmp_path / "exp_r2.svg").exists()


def test_r2_circuit_not_gated(tmp_path):
    cfg = write_cfg(tmp_path, model="circuit", dimension=1, linear_size=3, local_dim=2, boundary="open",
                    kind="brickwork", n_samples=100, bins=8)
    assert main(["r2", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert not (tmp_path / "exp_r2.svg").exists()


@pytest.mark.parametrize("command", ["sff", "r2"])
def test_workers_byte_identical(tmp_path, command):
    cfg = write_cfg(tmp_path, model="circuit", dimension=1, linear_size=3, local_dim=2, boundary="periodic",
                    kind="random", ordering_seed=7, t_list=[1, 2, 3], n_samples=60, bins=8, master_seed=11)
    outs = []
    for w in ("1", "4"):
        out = tmp_path / f"w{w}"
        assert main([command, "--config", str(cfg), "--out", str(out), "--workers", w]) == 0
        outs.append((out / f"exp_{command}.csv").read_bytes())
    assert outs[0] == outs[1]


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_cfg(tmp_path, model="single_cue", dim=3, t_list=[1], n_samples=20, master_seed=1)
    main(["sff", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["sff", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "1"])
    main(["sff", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "2"])
    a, b, c = ((tmp_path / d / "exp_sff.csv").read_bytes() for d in "abc")
    assert a == b != c


def test_env_workers_default(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, model="single_cue", dim=3, t_list=[1], n_samples=20)
    monkeypatch.setenv("FLOQUET_SPECTRA_WORKERS", "2")
    assert main(["sff", "--config", str(cfg), "--out", str(tmp_path / "env")]) == 0
    monkeypatch.setenv("FLOQUET_SPECTRA_WORKERS", "lots")
    assert main(["sff", "--config", str(cfg), "--out", str(tmp_path / "bad")]) == 2


@pytest.mark.parametrize(
    "cfg",
    [
        {"model": "tensor_network"},
        {"model": "single_cue", "dim": 4, "n_samples": 1},
        {"model": "single_cue", "dim": 4, "t_list": []},
        {"model": "single_cue", "dim": 4, "colour": "red"},
        {"model": "single_cue"},
        {"model": "noninteracting", "local_dim": 2},
        {"model": "circuit", "dimension": 1, "linear_size": 3, "local_dim": 2, "boundary": "periodic", "kind": "brickwork"},
        {"model": "circuit", "dimension": 1, "linear_size": 13, "local_dim": 2, "boundary": "open", "kind": "brickwork"},
        {"model": "circuit", "dimension": 1, "linear_size": 3, "local_dim": 2, "boundary": "open",
         "bonds": [{"a": [1], "b": [2], "substep": 1}, {"a": [2], "b": [3], "substep": 1}], "gate_order": [0, 1]},
    ],
)
def test_config_errors_exit_two(tmp_path, cfg, capsys):
    path = write_cfg(tmp_path, **cfg)
    assert main(["sff", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(cfg)


def test_missing_config_file(tmp_path):
    assert main(["sff", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_wg_table_examples(tmp_path):
    out = tmp_path / "wg.txt"
    assert main(["wg-table", "--q", "3", "--max-p", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    for expected in ("1 1/3", "1,1 1/8", "2 -1/24"):
        assert expected in lines
    table = WeingartenTable.load(out)
    assert table.q == 3 and table.max_p == 2
    assert table[(1, 1)] * 8 == 1


def test_wg_table_rejects_p_above_q(tmp_path, capsys):
    assert main(["wg-table", "--q", "2", "--max-p", "3", "--out", str(tmp_path / "x.txt")]) == 2
    assert "p>q" in capsys.readouterr().err
    assert not (tmp_path / "x.txt").exists()


def test_validate_circuit(tmp_path, capsys):
    assert main(["validate-circuit", "--config", str(CONFIGS / "staircase_explicit.yaml")]) == 0
    assert capsys.readouterr().out.startswith("ok")
    bad = write_cfg(tmp_path, dimension=1, linear_size=3, local_dim=2, boundary="open",
                    bonds=[{"a": [1], "b": [2], "substep": 1}, {"a": [2], "b": [3], "substep": 1}], gate_order=[0, 1])
    assert main(["validate-circuit", "--config", str(bad)]) == 1
    assert "share substep" in capsys.readouterr().out
    assert main(["validate-circuit", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_verify_weingarten(tmp_path, capsys):
    assert main(["verify", "weingarten", "--q", "4", "--max-p", "4", "--out", str(tmp_path)]) == 0
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert lines and all(r["passed"] for r in lines)
    assert json.loads((tmp_path / "verify_weingarten.json").read_text()) == lines


def test_verify_moments(capsys):
    assert main(["verify", "moments"]) == 0
    assert all(json.loads(x)["passed"] for x in capsys.readouterr().out.splitlines())


def test_verify_domain_error():
    assert main(["verify", "weingarten", "--q", "2", "--max-p", "4"]) == 2


def test_z_score():
    assert z_score(3.0, 1.0, 0.5) == 4.0
    assert z_score(1.0, None, 0.5) is None
    assert z_score(1.0, 1.0, 0.0) == 0.0
    assert z_score(2.0, 1.0, 0.0) == float("inf")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_shipped_configs_parse(name):
    from floquet_spectra.cli import load_config

    cfg = load_config(CONFIGS / name, {})
    assert cfg.experiment == Path(name).stem
