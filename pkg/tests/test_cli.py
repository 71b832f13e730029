import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from sinrcast.cli import _parse_seeds, main


@pytest.fixture
def runner():
    return CliRunner()


def test_parse_seeds():
    assert _parse_seeds("0-3,10") == [0, 1, 2, 3, 10]
    assert _parse_seeds("7") == [7]
    with pytest.raises(Exception):
        _parse_seeds("5-2")


def test_gen_writes_topology(runner, tmp_path):
    out = tmp_path / "topo.json"
    res = runner.invoke(
        main,
        ["gen", "--generator", "uniform", "--n", "6", "--width", "6",
         "--seed", "3", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1
    assert len(doc["positions"]) == 6
    assert doc["min_spacing"] >= 1.0

    # same seed, same layout
    out2 = tmp_path / "topo2.json"
    runner.invoke(
        main,
        ["gen", "--generator", "uniform", "--n", "6", "--width", "6",
         "--seed", "3", "--out", str(out2)],
    )
    assert json.loads(out2.read_text())["positions"] == doc["positions"]


def test_gen_missing_args(runner, tmp_path):
    res = runner.invoke(main, ["gen", "--generator", "ring"])
    assert res.exit_code != 0
    assert "ring needs" in res.output


def test_gen_honors_out_env(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("SINRCAST_OUT", str(tmp_path / "nested"))
    res = runner.invoke(main, ["gen", "--generator", "line", "--n", "3"])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "nested" / "topology.json").exists()


def test_verify_lb(runner):
    res = runner.invoke(main, ["verify-lb", "--delta", "2", "--delta", "3"])
    assert res.exit_code == 0, res.output
    assert "delta=2: max simultaneous cross receptions = 1" in res.output
    assert "uniform transmit power" in res.output


def test_run_and_report(runner, tmp_path):
    cfg = {
        "schema_version": 1,
        "kind": "smb",
        "seeds": [0, 1],
        "topology": {"generator": "line", "n": 3, "spacing": 1.0},
        "sinr": {"alpha": 3.0, "beta": 2.0, "noise": 1.0, "power": 3.456, "eps": 0.1},
    }
    cfg_path = tmp_path / "little-smb.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "run-out"
    res = runner.invoke(main, ["run", "--config", str(cfg_path), "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert "kind: smb" in res.output
    assert (out / "metrics.csv").exists()
    assert (out / "events.jsonl").exists()

    res = runner.invoke(main, ["report", "--run", str(out)])
    assert res.exit_code == 0, res.output
    assert (out / "completion.png").exists()
    assert (out / "receptions.png").exists()


def test_run_seeds_override(runner, tmp_path):
    cfg = {
        "schema_version": 1,
        "kind": "lower-bound",
        "seeds": [0],
        "topology": {"generator": "two_line_lb", "delta": 2},
    }
    cfg_path = tmp_path / "lb.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "lb-out"
    res = runner.invoke(
        main,
        ["run", "--config", str(cfg_path), "--out", str(out), "--seeds", "4-6"],
    )
    assert res.exit_code == 0, res.output
    echo = json.loads((out / "config.json").read_text())
    assert echo["seeds"] == [4, 5, 6]


def test_run_rejects_bad_config(runner, tmp_path):
    cfg_path = tmp_path / "bad.yaml"
    cfg_path.write_text(yaml.safe_dump({"schema_version": 1, "kind": "nope"}))
    res = runner.invoke(main, ["run", "--config", str(cfg_path)])
    assert res.exit_code != 0
    assert "bad.yaml" in res.output


def test_calibrate_mu(runner, tmp_path):
    topo = tmp_path / "t.json"
    res = runner.invoke(
        main,
        ["gen", "--generator", "line", "--n", "4", "--out", str(topo)],
    )
    assert res.exit_code == 0, res.output
    res = runner.invoke(
        main,
        ["calibrate-mu", "--topology", str(topo), "--alpha", "3", "--beta", "2",
         "--noise", "1", "--strong-range", "2.5", "--p", "0.5"],
    )
    assert res.exit_code == 0, res.output
    assert res.output.startswith("mu_star = ")
    mu = float(res.output.split("=")[1].split("(")[0])
    assert 0.0 < mu <= 0.5

    res = runner.invoke(
        main,
        ["calibrate-mu", "--topology", str(topo), "--alpha", "3", "--beta", "2",
         "--noise", "1"],
    )
    assert res.exit_code != 0
    assert "exactly one of" in res.output


def test_oracle_report_figure(runner, tmp_path):
    cfg = {
        "schema_version": 1,
        "kind": "oracle-substitution",
        "seeds": [0],
        "topology": {"generator": "uniform", "n": 8, "width": 5.0, "seed": None},
        "sinr": {"alpha": 3.0, "beta": 2.0, "noise": 1.0, "power": 250.0, "eps": 0.1},
    }
    cfg_path = tmp_path / "oracle.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "oracle-out"
    res = runner.invoke(main, ["run", "--config", str(cfg_path), "--out", str(out)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["report", "--run", str(out)])
    assert res.exit_code == 0, res.output
    assert (out / "spacing.png").exists()
