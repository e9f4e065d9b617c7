import json

import pytest

from archer.cli import main

TINY = {"env": "pointgoal", "hidden": [8], "cycles": 2, "episodes_per_cycle": 2,
        "opt_steps_per_cycle": 2, "batch_size": 8, "eval_episodes": 3, "seeds": [1, 2]}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY))
    return path


def test_run_twice_is_byte_identical(tmp_path, config_file, capsys):
    for name in ("a", "b"):
        assert main(["run", "--config", str(config_file), "--out", str(tmp_path / name)]) == 0
    capsys.readouterr()
    for f in ("seed_1.csv", "seed_2.csv", "averaged.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_run_overrides(tmp_path, config_file, capsys):
    out = tmp_path / "o"
    assert main(["run", "--config", str(config_file), "--lambda-r", "1", "--lambda-h", "0.5",
                 "--strategy", "future", "--k", "2", "--cycles", "1", "--seeds", "3..4",
                 "--reward", "shaped", "--out", str(out)]) == 0
    saved = json.loads((out / "config.json").read_text())
    assert (saved["lambda_h"], saved["strategy"], saved["k"], saved["seeds"]) == \
        (0.5, "future", 2, [3, 4])
    assert saved["reward"] == "shaped" and saved["cycles"] == 1
    summary = json.loads(capsys.readouterr().out)
    assert set(summary["per_seed_cycles"]) == {"3", "4"}


def test_eval_checkpoint(tmp_path, config_file, capsys):
    main(["run", "--config", str(config_file), "--out", str(tmp_path)])
    capsys.readouterr()
    ckpt = tmp_path / "checkpoints" / "seed_1.json"
    assert main(["eval", "--checkpoint", str(ckpt), "--episodes", "5"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert 0.0 <= result["success_rate"] <= 1.0 and result["episodes"] == 5


def test_plot(tmp_path, config_file, capsys):
    main(["run", "--config", str(config_file), "--out", str(tmp_path)])
    out = tmp_path / "chart.svg"
    assert main(["plot", "--in", str(tmp_path / "seed_1.csv"), "--out", str(out)]) == 0
    assert out.read_text().startswith("<svg") and "polyline" in out.read_text()
    assert main(["plot", "--in", str(tmp_path / "averaged.csv"), "--out", str(out)]) == 0
    rows = (tmp_path / "averaged.csv").read_text().splitlines()[1:]
    assert all(0.0 <= float(v) <= 1.0 for row in rows for v in row.split(",")[1:])


def test_bad_config_reports_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    assert main(["run", "--config", str(bad)]) == 2
    assert "bogus" in capsys.readouterr().err
