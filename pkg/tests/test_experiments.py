import csv
import json

import numpy as np
import pytest

from nsstab import cli
from nsstab.errors import ConfigError
from nsstab.experiments import (CASE_COLUMNS, BenchCell, ExperimentConfig, accuracy_tag,
                                config_to_json, load_config, read_log, run_benchmarks,
                                run_case_study)

SMC_CELL = {"name": "smc_short", "system": "smc_demo", "controller": "smc", "x0": [1.0, 1.0],
            "delta": 0.01, "T": 8.0, "R": 2.0, "r": 0.1, "T_entry": 8.0}
NI_CELL = {"name": "ni_optim", "system": "ni", "controller": "optim", "clf": "v1_ni",
           "x0": [0.3, 0.2, 0.1], "delta": 0.05, "T": 0.5, "R": 1.0, "r": 0.05, "T_entry": 0.5}


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- config -----------------------------------------------------------------

def test_defaults_are_case_study():
    cfg = load_config()
    assert (cfg.system, cfg.controller, cfg.clf) == ("endi", "infc", "vc_endi")
    assert cfg.x0 == [-1.0, 0.5, 0.01, 0.05, 0.075]
    assert cfg.delta == 0.005 and cfg.alpha == 0.1 and cfg.control_bound == 3.0
    assert cfg.accuracies == [1e-2, 1e-3, 1e-4, 1e-6, 1e-8]
    assert [c.name for c in cfg.bench][-1] == "smc_demo"
    json.loads(config_to_json(cfg))


@pytest.mark.parametrize("bad", [
    {"system": "car"}, {"controller": "pid"}, {"clf": "v9"}, {"accuracies": [1e-3, 0]},
    {"accuracies": []}, {"x0": [1, 2]}, {"delta": -1}, {"colour": "red"},
    {"bench": [dict(SMC_CELL, r=5.0)]}, {"bench": [dict(SMC_CELL, x0=[1.0])]},
    {"bench": [dict(SMC_CELL, wheels=3)]},
])
def test_config_errors(tmp_path, bad):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, bad))


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(p))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, [1, 2]))


def test_seed_environment_override(tmp_path, monkeypatch):
    path = _write(tmp_path, {"seed": 3})
    assert load_config(path).seed == 3
    monkeypatch.setenv("NSSTAB_SEED", "17")
    assert load_config(path).seed == 17
    monkeypatch.setenv("NSSTAB_SEED", "x")
    with pytest.raises(ConfigError):
        load_config(path)


def test_accuracy_tag():
    assert accuracy_tag(1e-2) == "1e-02" and accuracy_tag(1e-8) == "1e-08"


# --- case study -------------------------------------------------------------

def test_single_accuracy_sweep(tmp_path):
    cfg = load_config(overrides={"T": 0.02, "accuracies": [1e-3]})
    rows = run_case_study(cfg, str(tmp_path))
    assert len(rows) == 1
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["case_summary.csv", "traj_eps1e-03.csv"]
    summary = _rows(tmp_path / "case_summary.csv")
    assert list(summary[0]) == list(CASE_COLUMNS)
    log = read_log(tmp_path / "traj_eps1e-03.csv")
    assert len(log) == 5
    assert float(summary[0]["final_norm"]) == np.linalg.norm(log.states[-1])
    assert np.all(np.abs(np.array(log.controls)) <= 3)


# --- bench ------------------------------------------------------------------

def test_bench_summary_matches_logs(tmp_path):
    cfg = load_config(overrides={"bench": [SMC_CELL, NI_CELL]})
    rows = run_benchmarks(cfg, str(tmp_path))
    assert [r["name"] for r in rows] == ["smc_short", "ni_optim"]
    summary = _rows(tmp_path / "bench_summary.csv")
    for s in summary:
        log = read_log(tmp_path / f"bench_{s['name']}.csv")
        assert float(s["final_norm"]) == np.linalg.norm(log.states[-1])
    assert summary[0]["passed"] == "True"


def test_empty_bench(tmp_path):
    cfg = load_config(overrides={"bench": []})
    assert run_benchmarks(cfg, str(tmp_path)) == []
    assert (tmp_path / "bench_summary.csv").read_text().count("\n") == 1


def test_bench_is_byte_identical_and_parallel_safe(tmp_path):
    cfg = load_config(overrides={"bench": [SMC_CELL, NI_CELL]})
    a, b = tmp_path / "a", tmp_path / "b"
    run_benchmarks(cfg, str(a))
    run_benchmarks(cfg, str(b), jobs=2)
    for p in sorted(a.iterdir()):
        assert p.read_bytes() == (b / p.name).read_bytes()


def test_bench_cell_dataclass():
    c = BenchCell(**SMC_CELL)
    assert c.substeps == 10 and c.clf is None
    ExperimentConfig(bench=[c]).validate()


# --- CLI --------------------------------------------------------------------

def test_cli_bench(tmp_path, capsys):
    cfg = _write(tmp_path, {"bench": [SMC_CELL]})
    out = tmp_path / "out"
    assert cli.main(["bench", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "bench_summary.csv").exists()
    assert "smc_short" in capsys.readouterr().out


def test_cli_empty_bench_exit_zero(tmp_path):
    cfg = _write(tmp_path, {"bench": []})
    assert cli.main(["bench", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


def test_cli_config_error_exit_two(tmp_path, capsys):
    cfg = _write(tmp_path, {"system": "car"})
    assert cli.main(["case-study", "--config", cfg]) == 2
    assert "config error" in capsys.readouterr().err
    assert cli.main(["bench", "--config", str(tmp_path / "nope.json")]) == 2
    assert cli.main(["check-clf", "--system", "ni", "--clf", "artstein_v"]) == 2
    with pytest.raises(SystemExit) as ei:
        cli.main(["check-clf", "--system", "car", "--clf", "v1_ni"])
    assert ei.value.code == 2


def test_cli_case_study(tmp_path, capsys):
    cfg = _write(tmp_path, {"T": 0.01, "accuracies": [1e-2]})
    assert cli.main(["case-study", "--config", cfg, "--out", str(tmp_path / "cs")]) == 0
    assert (tmp_path / "cs" / "traj_eps1e-02.csv").exists()


def test_cli_check_clf(capsys):
    assert cli.main(["check-clf", "--system", "ni", "--clf", "v1_ni", "--samples", "5",
                     "--pairs", "200", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "decay (ldgd)" in out and "5/5" in out
    assert cli.main(["check-clf", "--system", "artstein", "--clf", "artstein_family",
                     "--samples", "5", "--pairs", "200"]) == 0
    assert "decay (disassembled)" in capsys.readouterr().out
