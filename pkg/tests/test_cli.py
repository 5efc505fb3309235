import csv
import filecmp
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from evogame import __version__
from evogame.cli import main
from evogame.config import ConfigError, load, materialize
from evogame.io import config_hash
from evogame.learners import knn_fitness

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def read_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


KNN = {
    "seed": 7,
    "learner": {"variant": "knn_closed_form", "alpha": 0.2, "beta": 0.8, "k": 1},
    "dynamics": {"variant": "replicator_continuous", "dt": 0.5, "horizon": 5000},
    "analysis": {"initial_state": [0.4, 0.6], "table_resolution": 10, "basin_resolution": 5,
                 "bifurcation": {"param": "alpha", "values": [0.2, 0.5]}},
    "agents": {"model": "imitation", "counts": [40000, 60000], "pairs_per_step": 1000,
               "horizon": 300},
}


def test_game_command_knn(tmp_path):
    out = tmp_path / "out"
    assert main(["game", "--config", write_cfg(tmp_path, KNN), "--output-dir", str(out)]) == 0
    rows = read_rows(out / "fitness_table.csv")
    assert len(rows) == 11
    for r in rows:
        p = [float(r["p_1"]), float(r["p_2"])]
        f = knn_fitness(0.2, 0.8, 1, p)
        assert abs(float(r["F_1"]) - f[0]) <= 1e-12 and abs(float(r["F_2"]) - f[1]) <= 1e-12
    header = (out / "fitness_table.csv").read_text().splitlines()[0]
    assert header.startswith(f"# evogame {__version__}")
    assert "config_sha256=" in header and "seed=7" in header


def test_game_command_table_passthrough(tmp_path):
    out = tmp_path / "out"
    assert main(["game", "--config", str(CONFIGS / "constant_table.json"),
                 "--output-dir", str(out)]) == 0
    got = read_rows(out / "fitness_table.csv")
    want = read_rows(CONFIGS / "tables" / "constant.csv")
    assert [{k: float(v) for k, v in r.items()} for r in got] == \
           [{k: float(v) for k, v in r.items()} for r in want]


def test_game_command_monte_carlo_has_se_columns(tmp_path):
    cfg = {"seed": 1, "groups": {"construction": "hard_svm", "params": {"epsilon": 0.01}},
           "learner": {"variant": "hard_svm_mc", "n": 8, "trials": 50},
           "analysis": {"table_resolution": 2}}
    out = tmp_path / "out"
    assert main(["game", "--config", write_cfg(tmp_path, cfg), "--output-dir", str(out)]) == 0
    assert {"SE_1", "SE_2"} <= set(read_rows(out / "fitness_table.csv")[0])


def test_invalid_flip_prob_names_field(tmp_path, capsys):
    cfg = {"seed": 1, "groups": [
        {"components": [{"shape": {"kind": "uniform", "lo": 0, "hi": 1}, "weight": 1.0,
                         "label": 1, "flip_prob": 1.5}]},
        {"components": [{"shape": {"kind": "uniform", "lo": -1, "hi": 0}, "weight": 1.0,
                         "label": -1}]}],
        "learner": {"variant": "oracle_threshold"}}
    path = write_cfg(tmp_path, cfg)
    assert main(["game", "--config", path, "--output-dir", str(tmp_path / "o")]) == 2
    assert "/groups/0/components/0/flip_prob" in capsys.readouterr().err
    with pytest.raises(ConfigError) as err:
        load(path)
    assert err.value.pointer == "/groups/0/components/0/flip_prob"


def test_semantic_errors_carry_pointers(tmp_path):
    bad = json.loads(json.dumps(KNN))
    bad["analysis"]["initial_state"] = [0.7, 0.7]
    with pytest.raises(ConfigError) as err:
        load(write_cfg(tmp_path, bad))
    assert err.value.pointer == "/analysis/initial_state"
    bad = json.loads(json.dumps(KNN))
    bad["dynamics"]["variant"] = "euler"
    with pytest.raises(ConfigError) as err:
        load(write_cfg(tmp_path, bad))
    assert err.value.pointer.startswith("/dynamics")


def test_simulate_knn(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", write_cfg(tmp_path, KNN), "--output-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert np.max(np.abs(np.array(summary["terminal_state"]) - 0.5)) <= 1e-3
    assert summary["terminated_by"] == "fixed_point"
    assert summary["_meta"]["seed"] == 7


def test_simulate_vertex_start(tmp_path):
    cfg = json.loads(json.dumps(KNN))
    cfg["learner"] = {"variant": "table", "path": str(CONFIGS / "tables" / "constant.csv")}
    cfg["analysis"]["initial_state"] = [1.0, 0.0]
    out = tmp_path / "out"
    assert main(["simulate", "--config", write_cfg(tmp_path, cfg), "--output-dir", str(out)]) == 0
    assert len(read_rows(out / "trajectory.csv")) == 1
    assert json.loads((out / "summary.json").read_text())["terminated_by"] == "fixed_point"


def test_stochastic_simulate_is_byte_identical(tmp_path):
    cfg = str(CONFIGS / "gaussian_pair_noisy.json")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--output-dir", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--output-dir", str(b)]) == 0
    for name in ("trajectory.csv", "summary.json", "config.json"):
        assert filecmp.cmp(a / name, b / name, shallow=False)
    c = tmp_path / "c"
    assert main(["simulate", "--config", cfg, "--output-dir", str(c), "--seed", "99"]) == 0
    assert (a / "trajectory.csv").read_bytes() != (c / "trajectory.csv").read_bytes()


def test_basins_constant_game_single_label(tmp_path):
    out = tmp_path / "out"
    assert main(["basins", "--config", str(CONFIGS / "constant_table.json"),
                 "--output-dir", str(out)]) == 0
    rows = read_rows(out / "basins.csv")
    labels = {r["label"] for r in rows if float(r["p0_1"]) > 0}
    assert len(labels) == 1


def test_agents_knn_imitation(tmp_path):
    out = tmp_path / "out"
    assert main(["agents", "--config", write_cfg(tmp_path, KNN), "--output-dir", str(out)]) == 0
    rows = read_rows(out / "agents_0.csv")
    assert abs(float(rows[-1]["p_1"]) - 0.5) <= 0.02
    assert int(float(rows[-1]["N"])) == 100000


def test_bifurcate_soft_svm_counts(tmp_path):
    out = tmp_path / "out"
    assert main(["bifurcate", "--config", str(CONFIGS / "soft_svm.json"),
                 "--output-dir", str(out), "--threads", "3"]) == 0
    res = json.loads((out / "bifurcation.json").read_text())
    assert [r["nash_count"] for r in res["results"]] == [3, 1, 5]


def test_numerical_failure_exit_code(tmp_path, capsys):
    table = tmp_path / "steep.csv"
    table.write_text("p_1,p_2,F_1,F_2\n1,0,50,0\n0,1,50,0\n")
    cfg = {"seed": 1, "learner": {"variant": "table", "path": str(table)},
           "dynamics": {"variant": "replicator_continuous", "dt": 1.0, "horizon": 10},
           "analysis": {"initial_state": [0.5, 0.5]}}
    assert main(["simulate", "--config", write_cfg(tmp_path, cfg),
                 "--output-dir", str(tmp_path / "o")]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_missing_block_is_validation_error(tmp_path):
    cfg = {k: v for k, v in KNN.items() if k != "agents"}
    assert main(["agents", "--config", write_cfg(tmp_path, cfg),
                 "--output-dir", str(tmp_path / "o")]) == 2


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("EVOGAME_THREADS", "0")
    assert main(["game", "--config", write_cfg(tmp_path, KNN),
                 "--output-dir", str(tmp_path / "o")]) == 2
    monkeypatch.setenv("EVOGAME_THREADS", "2")
    assert main(["game", "--config", write_cfg(tmp_path, KNN),
                 "--output-dir", str(tmp_path / "o")]) == 0


def test_config_round_trip(tmp_path):
    for path in sorted(CONFIGS.glob("*.json")):
        cfg, base = load(str(path))
        out = tmp_path / path.stem
        out.mkdir()
        saved = out / "config.json"
        # echo relative table paths against the original location
        shutil.copytree(CONFIGS / "tables", out / "tables")
        saved.write_text(json.dumps(dict(cfg, _meta={"note": "x"})))
        again, _ = load(str(saved))
        assert again == cfg
        assert config_hash(again) == config_hash(cfg)
        assert materialize(json.loads(json.dumps(cfg))) == cfg


def test_echoed_config_reloads(tmp_path):
    out = tmp_path / "out"
    assert main(["equilibria", "--config", write_cfg(tmp_path, KNN),
                 "--output-dir", str(out)]) == 0
    echoed, _ = load(str(out / "config.json"))
    original, _ = load(write_cfg(tmp_path, KNN))
    assert echoed == original


def test_console_entry_point(tmp_path):
    env = dict(os.environ, PYTHONPATH=str(ROOT / "src"))
    res = subprocess.run([sys.executable, "-m", "evogame", "equilibria", "--config",
                          str(CONFIGS / "knn.json"), "--output-dir", str(tmp_path)],
                         capture_output=True, env=env)
    assert res.returncode == 0, res.stderr
    eq = json.loads((tmp_path / "equilibria.json").read_text())
    assert eq["nash_count"] >= 1
