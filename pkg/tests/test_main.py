import json

import pytest

from mmslam import main as cli
from mmslam import runner
from mmslam.rbpf import FilterDivergenceError


@pytest.fixture
def short_config(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"steps": 2, "particle_count": 4}), encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def local_storage(monkeypatch):
    monkeypatch.setenv("STORAGE_MODE", "local")


def test_run_writes_outputs(tmp_path, short_config):
    out_dir = tmp_path / "out"
    code = cli.main(["run", "--config", str(short_config), "--known-vehicle", "--seed", "5", "--out-dir", str(out_dir)])
    assert code == 0
    summary = json.loads((out_dir / "summary.json").read_text(encoding="utf-8"))
    assert summary["seed"] == 5
    assert summary["known_vehicle"] is True
    assert (out_dir / "steps.csv").exists()


def test_run_timing_adds_column(tmp_path, short_config):
    out_dir = tmp_path / "out"
    assert cli.main(["run", "--config", str(short_config), "--known-vehicle", "--timing", "--out-dir", str(out_dir)]) == 0
    header = (out_dir / "steps.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header.endswith(",wall_time")


def test_run_dump_then_replay(tmp_path, short_config):
    scans = tmp_path / "scans.jsonl"
    first, second = tmp_path / "first", tmp_path / "second"
    args = ["run", "--config", str(short_config), "--known-vehicle"]
    assert cli.main(args + ["--dump-scans", str(scans), "--out-dir", str(first)]) == 0
    assert len(scans.read_text(encoding="utf-8").splitlines()) == 2
    assert cli.main(args + ["--replay-scans", str(scans), "--out-dir", str(second)]) == 0
    assert (first / "steps.csv").read_bytes() == (second / "steps.csv").read_bytes()


def test_invalid_config_exit_code(tmp_path, caplog):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"steps": 0}), encoding="utf-8")
    assert cli.main(["run", "--config", str(path), "--out-dir", str(tmp_path)]) == cli.EXIT_CONFIG_ERROR
    assert "steps" in caplog.text


def test_invalid_override_exit_code(tmp_path, short_config):
    code = cli.main(["run", "--config", str(short_config), "--particles", "0", "--out-dir", str(tmp_path)])
    assert code == cli.EXIT_CONFIG_ERROR


def test_divergence_exit_code(tmp_path, short_config, monkeypatch):
    def diverge(config, replay_scans=None):
        raise FilterDivergenceError("filter divergence")

    monkeypatch.setattr(runner, "run", diverge)
    assert cli.main(["run", "--config", str(short_config), "--out-dir", str(tmp_path)]) == cli.EXIT_DIVERGENCE


def test_compare_writes_comparison(tmp_path, short_config):
    out_dir = tmp_path / "compare"
    code = cli.main([
        "compare", "--config", str(short_config), "--seeds", "2", "--known-vehicle",
        "--from-step", "1", "--out-dir", str(out_dir),
    ])
    assert code == 0
    comparison = json.loads((out_dir / "comparison.json").read_text(encoding="utf-8"))
    assert comparison["seeds"] == [0, 1]
    assert {"all_paths", "specular_only", "config"} <= set(comparison)


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args([])
