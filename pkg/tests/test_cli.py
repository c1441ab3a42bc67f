import json

import pytest

from subterra.cli import main

from conftest import corridor_grid_doc, write_scenario
from test_mission import corridor_scenario


@pytest.fixture()
def mini_scenario(tmp_path):
    corridor_scenario(tmp_path, tasks=[("T1", (6.5, 1.5, 0.5))], name="mini")
    return tmp_path / "mini.json"


class TestRun:
    def test_run_writes_reports_and_exits_zero(self, mini_scenario, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", "--scenario", str(mini_scenario), "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["complete"] is True
        assert (out / "events.ndjson").exists()
        assert "Execution Time [s]" in (out / "report.txt").read_text()

    def test_unreachable_task_exits_two(self, tmp_path):
        corridor_scenario(tmp_path, tasks=[("T1", (12.5, 1.5, 0.5))], block_at=8,
                          name="blocked")
        out = tmp_path / "out2"
        code = main(["run", "--scenario", str(tmp_path / "blocked.json"), "--out", str(out)])
        assert code == 2
        report = json.loads((out / "report.json").read_text())
        assert report["tasks"][0]["status"] == "unserviceable"

    def test_same_seed_identical_events(self, mini_scenario, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["run", "--scenario", str(mini_scenario), "--out", str(out)]) == 0
            outs.append((out / "events.ndjson").read_bytes())
        assert outs[0] == outs[1]

    def test_seed_override_changes_nothing_without_randomness(self, mini_scenario, tmp_path):
        # drop_prob 0 and no tracking noise: a different seed must not change events
        a = tmp_path / "s1"
        b = tmp_path / "s2"
        main(["run", "--scenario", str(mini_scenario), "--seed", "1", "--out", str(a)])
        main(["run", "--scenario", str(mini_scenario), "--seed", "2", "--out", str(b)])
        assert (a / "events.ndjson").read_bytes() == (b / "events.ndjson").read_bytes()

    def test_refuses_overwrite_without_force(self, mini_scenario, tmp_path):
        out = tmp_path / "out3"
        assert main(["run", "--scenario", str(mini_scenario), "--out", str(out)]) == 0
        with pytest.raises(FileExistsError):
            main(["run", "--scenario", str(mini_scenario), "--out", str(out)])
        assert main(["run", "--scenario", str(mini_scenario), "--out", str(out),
                     "--force"]) == 0

    def test_invalid_scenario_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "x")]) == 1
        assert "invalid scenario" in capsys.readouterr().err


class TestValidate:
    def test_accepts_what_run_accepts(self, mini_scenario):
        assert main(["validate", "--scenario", str(mini_scenario)]) == 0

    def test_rejects_what_run_rejects(self, tmp_path, capsys):
        grid = corridor_grid_doc()
        doc = {"name": "bad", "agents": [], "comms": {}, "timing": {}, "seed": 0}
        path = write_scenario(tmp_path, grid, doc, name="bad")
        assert main(["validate", "--scenario", str(path)]) == 1
        assert "no agents" in capsys.readouterr().err


class TestSynthBt:
    def test_prints_golden_render(self, capsys):
        assert main(["synth-bt", "--goal", "At goal point"]) == 0
        out = capsys.readouterr().out
        from test_synthesis import INSPECTION_TREE_RENDER
        assert out.strip() == INSPECTION_TREE_RENDER

    def test_small_goal(self, capsys):
        assert main(["synth-bt", "--goal", "Is armed"]) == 0
        assert capsys.readouterr().out.strip() == (
            "Fallback\n  Condition Is armed\n  Action Arm")

    def test_cyclic_library_exits_one(self, tmp_path, capsys):
        lib = tmp_path / "cyc.json"
        lib.write_text(json.dumps([
            {"name": "A", "pre": ["P2"], "post": ["P1"]},
            {"name": "B", "pre": ["P1"], "post": ["P2"]},
        ]))
        assert main(["synth-bt", "--library", str(lib), "--goal", "P1"]) == 1
        err = capsys.readouterr().err
        assert "P1" in err and "P2" in err

    def test_ambiguous_library_exits_one(self, tmp_path, capsys):
        lib = tmp_path / "amb.json"
        lib.write_text(json.dumps([
            {"name": "A", "pre": [], "post": ["G"]},
            {"name": "B", "pre": [], "post": ["G"]},
        ]))
        assert main(["synth-bt", "--library", str(lib), "--goal", "G"]) == 1
        assert "G" in capsys.readouterr().err


class TestFieldAnalogCli:
    def test_shipped_scenario_runs_clean(self, field_analog_scenario_path, tmp_path):
        out = tmp_path / "field"
        code = main(["run", "--scenario", str(field_analog_scenario_path),
                     "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["tasks"]) == 7
        assert all(r["status"] == "completed" for r in report["tasks"])
