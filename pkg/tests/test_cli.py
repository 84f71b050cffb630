import json

import pytest

from fairride.cli import compare_rows, main

CONFIG = """\
grid: {rows: 6, cols: 6}
fleet_size: 4
duration_slices: 3
demand:
  base_rate: 0.1
  hotspots: [{cell: 14, multiplier: 4, radius: 1.0}]
"""


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "world.yaml"
    p.write_text(CONFIG)
    return p


def test_missing_config_exit_2(tmp_path, capsys):
    missing = tmp_path / "nowhere.yaml"
    assert main(["simulate", "--config", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_invalid_config_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("capacity: 0\n")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "capacity" in capsys.readouterr().err


def test_usage_error_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["simulate"]) == 2


def test_simulate_writes_outputs(config, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(config), "--out", str(out), "--policy", "greedy", "--seed", "4"]) == 0
    for name in ("events.csv", "metrics.csv", "lorenz.csv", "ledger.csv", "summary.json", "manifest.json"):
        assert (out / name).is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["overrides"] == {"policy": "greedy", "seed": 4}
    assert manifest["config"]["policy"] == "greedy" and manifest["seed"] == 4
    assert manifest["config_path"] == str(config.resolve())


def test_output_root_from_env(config, tmp_path, monkeypatch):
    monkeypatch.setenv("FAIRRIDE_OUT", str(tmp_path / "root"))
    assert main(["simulate", "--config", str(config)]) == 0
    runs = list((tmp_path / "root").iterdir())
    assert len(runs) == 1 and (runs[0] / "summary.json").is_file()


def test_set_override(config, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(config), "--out", str(out), "--set", "demand.base_rate=0"]) == 0
    assert json.loads((out / "summary.json").read_text())["spawned"] == 0


def test_compare_identical_runs(config, tmp_path, capsys):
    out = tmp_path / "run"
    main(["simulate", "--config", str(config), "--out", str(out)])
    capsys.readouterr()
    assert main(["compare", str(out), str(out)]) == 0
    text = capsys.readouterr().out
    assert "positive = better" in text.splitlines()[0]
    assert [line.split(",")[-1] for line in text.splitlines()[2:]] == ["+0.00"] * 3


def test_compare_rejects_different_demand(config, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", str(config), "--out", str(a), "--seed", "1"])
    main(["simulate", "--config", str(config), "--out", str(b), "--seed", "2"])
    assert main(["compare", str(a), str(b)]) == 2
    assert "demand_hash" in capsys.readouterr().err


def test_compare_sign_convention():
    a = {"demand_hash": "h", "total_utility": "120", "final_gini": 0.2, "mean_wait_minutes": 9.0}
    b = {"demand_hash": "h", "total_utility": "100", "final_gini": 0.4, "mean_wait_minutes": 10.0}
    rows = {name: imp for name, _p, _q, imp in compare_rows(a, b)}
    assert rows["utility"] == pytest.approx(20.0)
    assert rows["gini"] == pytest.approx(50.0)
    assert rows["wait"] == pytest.approx(10.0)


def test_golden_command(capsys):
    assert main(["golden"]) == 0
    assert capsys.readouterr().out.count("PASS") == 3
    assert main(["golden", "dp_trace"]) == 0
    assert main(["golden", "nope"]) == 2


def test_bench_command(tmp_path, capsys):
    csv_path = tmp_path / "bench.csv"
    assert main(["bench", "--sides", "5", "10", "--repeats", "3", "--csv", str(csv_path)]) == 0
    out = capsys.readouterr().out
    assert "R^2" in out
    assert csv_path.read_text().splitlines()[0] == "side,cells,median_s,max_s,route_cells"


def test_runtime_failure_exit_1(config, tmp_path, monkeypatch, capsys):
    import fairride.sim

    def boom(*a, **k):
        raise RuntimeError("engine exploded")

    monkeypatch.setattr(fairride.sim, "run", boom)
    assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "x")]) == 1
    assert "engine exploded" in capsys.readouterr().err
