import csv
import json

import pytest

from blowup_lab import cli
from blowup_lab.verification import FLOORS


def run(tmp_path, mode, cfg, *extra):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    return cli.main([mode, "--config", str(cfg_path), "--out", str(out), *extra]), out


def test_empty_config_is_a_config_error(tmp_path):
    status, out = run(tmp_path, "sequence", {})
    assert status == 2
    assert json.loads((out / "error.json").read_text())["error"] == "config"


@pytest.mark.parametrize(
    "cfg",
    [
        {"kind": "swish", "init": "random:1"},
        {"h": 0},
        {"unknown_key": 1},
        {"init": "family:tanh_square:10", "h": 1},
        {"domain": [1, 0]},
        {"mode": "bounds"},
    ],
)
def test_bad_configs(tmp_path, cfg):
    status, _ = run(tmp_path, "simulate-gf", cfg)
    assert status == 2


def test_missing_and_broken_config_files(tmp_path):
    assert cli.main(["sequence", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["sequence", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_bounds_mode(tmp_path):
    status = cli.main(["bounds", "--out", str(tmp_path)])
    assert status == 0
    checks = json.loads((tmp_path / "bounds.json").read_text())["checks"]
    unit = next(c for c in checks if c["lemma"] == "affine_min_unit")
    assert unit["claimed"][2] == 0.0625 and unit["computed"][2] == pytest.approx(0.0625, abs=1e-12) and unit["pass"]


def test_sequence_mode_csv(tmp_path):
    status, out = run(tmp_path, "sequence", {"sequence": {"family": "relu_indicator", "n_list": [1, 10, 100], "final_ratio": 1}})
    assert status == 0
    rows = list(csv.DictReader(open(out / "sequence.csv")))
    assert [r["n"] for r in rows] == ["1", "10", "100"]
    assert all(float(r["risk"]) <= float(r["bound"]) and r["pass"] == "true" for r in rows)


def test_sequence_failure_is_status_1(tmp_path):
    status, out = run(tmp_path, "sequence", {"sequence": {"family": "relu_indicator:-0.5"}})
    assert status == 1
    assert json.loads((out / "error.json").read_text())["error"] == "assertion"


def test_simulate_gf_artifacts_are_deterministic(tmp_path):
    cfg = {"kind": "relu", "h": 2, "init": "family:relu_indicator:100", "flow": {"t_end": 2.0}}
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    s1, out1 = run(tmp_path / "a", "simulate-gf", cfg)
    s2, out2 = run(tmp_path / "b", "simulate-gf", cfg)
    assert s1 == s2 == 0
    for name in ("trajectory.csv", "verdict.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    verdict = json.loads((out1 / "verdict.json").read_text())
    assert verdict["verdict"]["verdict"] != "converged"


def test_simulate_gd(tmp_path):
    cfg = {"kind": "tanh", "target": "square", "h": 2, "init": "random:3", "gd": {"n_steps": 20}}
    status, out = run(tmp_path, "simulate-gd", cfg)
    assert status == 0 and (out / "trajectory.csv").exists()


def test_explicit_theta_init(tmp_path):
    cfg = {"kind": "relu", "h": 1, "init": [1.5, 1.0, 1.0, -1.25], "flow": {"t_end": 1.0}}
    status, out = run(tmp_path, "simulate-gf", cfg)
    assert status == 0
    assert json.loads((out / "verdict.json").read_text())["verdict"]["verdict"] == "converged"


def test_discrete_mode(tmp_path):
    status, out = run(tmp_path, "discrete", {"discrete": {"xs": [0, 1, 2], "ys": [0, 2, 1], "n_seeds": 10}})
    assert status == 0
    rep = json.loads((out / "discrete.json").read_text())
    assert rep["case"] == "monotone_three" and rep["floor"] == pytest.approx(1 / 6)
    status, out = run(tmp_path, "discrete", {"discrete": {"xs": [0, 1, 2], "ys": [0, 1, 3]}})
    assert status == 0 and json.loads((out / "discrete.json").read_text())["risk"] <= 1e-12


def test_critical_mode_and_mutation(tmp_path):
    status, out = run(tmp_path, "critical", {"h": 1, "critical": {"n_seeds": 20}})
    assert status == 0
    rows = list(csv.reader(open(out / "critical.csv")))
    assert rows[0][:3] == ["seed", "risk", "grad_norm"] and len(rows[0]) == 7
    status, out = run(tmp_path, "critical", {"h": 1, "critical": {"n_seeds": 20}, "floors": {"1": 0.05}})
    assert status == 1


def test_verify_all_mutation_fails_critical_floor():
    suite = dict(cli.suite("quick", 0, {2: 1 / 400}))
    good = dict(cli.suite("quick", 0))
    assert cli._timed("x", good["critical.floor_h2"]).passed
    assert not cli._timed("x", suite["critical.floor_h2"]).passed


def test_full_suite_has_enough_checks():
    ids = [cid for cid, _ in cli.suite("full")]
    assert len(ids) >= 25 and len(set(ids)) == len(ids)
    assert FLOORS[2] == 1 / 864
