import json

import numpy as np
import pytest
from PIL import Image

from qpath.cli import main
from qpath.grid import Cell
from qpath.planner import load_mission_log
from qpath.qrl import load_tables
from qpath.scenario import Hyperparams, InlineGrid, ScenarioSpec, save_scenario


@pytest.fixture
def scenario_file(tmp_path):
    mask = np.zeros((12, 12), dtype=bool)
    mask[4, 2:9] = True
    spec = ScenarioSpec(
        grid=InlineGrid(mask=mask),
        source=Cell(0, 0),
        destination=Cell(11, 11),
        seed=77,
        hyperparams=Hyperparams(max_ticks=300),
    )
    path = tmp_path / "scenario.json"
    save_scenario(spec, path)
    return path


class TestTrain:
    def test_writes_artifact(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "tables.json"
        assert main(["train", "--scenario", str(scenario_file), "--out", str(out)]) == 0
        assert out.exists()
        tables = load_tables(out)
        assert tables.goal == Cell(11, 11)
        assert "trained" in capsys.readouterr().out

    def test_missing_scenario_exits_2(self, tmp_path, capsys):
        rc = main(["train", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "t.json")])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_seed_override_changes_artifact(self, scenario_file, tmp_path):
        a, b, c = (tmp_path / n for n in ("a.json", "b.json", "c.json"))
        main(["train", "--scenario", str(scenario_file), "--out", str(a)])
        main(["train", "--scenario", str(scenario_file), "--out", str(b), "--seed", "123"])
        main(["train", "--scenario", str(scenario_file), "--out", str(c), "--seed", "123"])
        assert a.read_bytes() != b.read_bytes()
        assert b.read_bytes() == c.read_bytes()

    def test_bad_override_exits_2(self, scenario_file, tmp_path):
        rc = main([
            "train", "--scenario", str(scenario_file),
            "--out", str(tmp_path / "t.json"), "--epsilon", "2.0",
        ])
        assert rc == 2


class TestRun:
    def test_static_success_summary(self, scenario_file, tmp_path, capsys):
        log_path = tmp_path / "mission.jsonl"
        rc = main(["run", "--scenario", str(scenario_file), "--out", str(log_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "outcome=success" in out
        log = load_mission_log(log_path)
        assert log.outcome == "success"

    def test_goal_mismatch_retrains(self, scenario_file, tmp_path, capsys, caplog):
        tables_path = tmp_path / "tables.json"
        main(["train", "--scenario", str(scenario_file), "--out", str(tables_path)])
        # doctor the artifact goal so it no longer matches the scenario
        doc = json.loads(tables_path.read_text())
        doc["goal"] = [1, 1]
        tables_path.write_text(json.dumps(doc))
        rc = main([
            "run", "--scenario", str(scenario_file),
            "--tables", str(tables_path), "--out", str(tmp_path / "m.jsonl"),
        ])
        assert rc == 0
        assert "outcome=success" in capsys.readouterr().out

    def test_max_ticks_one_times_out(self, scenario_file, tmp_path, capsys):
        rc = main(["run", "--scenario", str(scenario_file), "--max-ticks", "1"])
        assert rc == 0
        assert "outcome=timeout" in capsys.readouterr().out

    def test_reproducible_logs(self, scenario_file, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        main(["run", "--scenario", str(scenario_file), "--out", str(a)])
        main(["run", "--scenario", str(scenario_file), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestPlan:
    def test_astar_plan(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "path.json"
        rc = main(["plan", "--scenario", str(scenario_file), "--out", str(out)])
        assert rc == 0
        assert "astar path" in capsys.readouterr().out
        doc = json.loads(out.read_text())
        assert doc["cells"][0] == [0, 0] and doc["cells"][-1] == [11, 11]

    def test_hybrid_plan_with_tables(self, scenario_file, tmp_path, capsys):
        tables_path = tmp_path / "tables.json"
        main(["train", "--scenario", str(scenario_file), "--out", str(tables_path)])
        rc = main(["plan", "--scenario", str(scenario_file), "--tables", str(tables_path)])
        assert rc == 0
        assert "hybrid path" in capsys.readouterr().out


class TestBench:
    def test_two_scenario_suite(self, scenario_file, tmp_path, capsys):
        suite = {"scenarios": [scenario_file.name], "planners": ["astar_static", "hybrid"]}
        suite_path = scenario_file.parent / "suite.json"
        suite_path.write_text(json.dumps(suite))
        out = tmp_path / "report.csv"
        rc = main(["bench", "--suite", str(suite_path), "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 3  # header + 2 planners
        assert (tmp_path / "report.txt").exists()

    def test_rerun_byte_identical(self, scenario_file, tmp_path):
        suite = {"scenarios": [scenario_file.name], "planners": ["hybrid"]}
        suite_path = scenario_file.parent / "suite.json"
        suite_path.write_text(json.dumps(suite))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["bench", "--suite", str(suite_path), "--out", str(a)])
        main(["bench", "--suite", str(suite_path), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_broken_scenario_warns_but_completes(self, scenario_file, tmp_path, capsys):
        broken = scenario_file.parent / "broken.json"
        broken.write_text("{")
        suite = {"scenarios": [scenario_file.name, "broken.json"], "planners": ["astar_static"]}
        suite_path = scenario_file.parent / "suite.json"
        suite_path.write_text(json.dumps(suite))
        rc = main(["bench", "--suite", str(suite_path), "--out", str(tmp_path / "r.csv")])
        assert rc == 0
        assert "skipped" in capsys.readouterr().err


class TestIngest:
    def test_skeleton_written(self, tmp_path, capsys):
        img = np.full((40, 40), 255, dtype=np.uint8)
        img[0:20, 0:20] = 0
        img_path = tmp_path / "map.png"
        Image.fromarray(img, mode="L").save(img_path)
        out = tmp_path / "skeleton.json"
        rc = main([
            "ingest", "--image", str(img_path), "--threshold", "128",
            "--dims", "20x20", "--out", str(out),
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["grid"]["image"]["dims"] == [20, 20]
        assert doc["source"] is None and doc["destination"] is None
        assert "fill in source/destination" in capsys.readouterr().out

    def test_bad_dims_exit_2(self, tmp_path):
        img_path = tmp_path / "map.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(img_path)
        rc = main(["ingest", "--image", str(img_path), "--dims", "VGA", "--out", str(tmp_path / "s.json")])
        assert rc == 2

    def test_missing_image_exit_3(self, tmp_path):
        rc = main(["ingest", "--image", str(tmp_path / "nope.png"), "--dims", "4x4", "--out", str(tmp_path / "s.json")])
        assert rc == 3


class TestParsing:
    def test_unknown_flag_rejected(self, scenario_file, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--scenario", str(scenario_file), "--out", "x", "--bogus", "1"])
        assert exc.value.code == 2

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for sub in ("train", "plan", "run", "bench", "ingest", "serve"):
            assert sub in out
