import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from qpath.cli import main
from qpath.grid import Cell, MotionSchedule, Obstacle, ObstacleKind
from qpath.planner import load_mission_log
from qpath.scenario import Hyperparams, InlineGrid, ScenarioSpec, save_scenario
from qpath.service import PROTOCOL_VERSION, SessionCore, create_app

REPO = Path(__file__).resolve().parents[1]
GOLDEN_PATH = REPO / "fixtures" / "golden_session.json"


def corridor_spec(with_mover: bool = False) -> ScenarioSpec:
    mask = np.zeros((12, 20), dtype=bool)
    obstacles = ()
    if with_mover:
        obstacles = (
            Obstacle(
                id="crosser", kind=ObstacleKind.MOVING,
                footprint=frozenset([Cell(10, 11)]),
                schedule=MotionSchedule(waypoints=(Cell(10, 11), Cell(10, 0)), speed=0.5),
            ),
        )
    return ScenarioSpec(
        grid=InlineGrid(mask=mask),
        source=Cell(0, 6),
        destination=Cell(19, 6),
        obstacles=obstacles,
        seed=2024,
        hyperparams=Hyperparams(max_ticks=300),
    )


def command(kind, cid="c1", **payload):
    return {"command_id": cid, "kind": kind, **payload}


def frame_types(frames):
    return [f["type"] for f in frames]


class TestSessionCore:
    def test_step_emits_one_tickstate_per_tick(self):
        core = SessionCore(corridor_spec())
        frames = core.step_once()
        assert frame_types(frames) == ["TickState"]
        assert frames[0]["payload"]["tick"] == 1
        assert frames[0]["v"] == PROTOCOL_VERSION

    def test_seq_strictly_increasing(self):
        core = SessionCore(corridor_spec())
        last = 0
        for _ in range(5):
            for f in core.step_once():
                assert f["seq"] > last
                last = f["seq"]

    def test_runs_to_success_terminal(self):
        core = SessionCore(corridor_spec())
        frames = core.handle_command(command("Step", ticks=100))
        assert frames[0]["type"] == "Ack"
        assert frames[-1]["type"] == "Terminal"
        assert frames[-1]["payload"]["outcome"] == "success"
        # once terminal, stepping is a no-op
        assert core.step_once() == []

    def test_place_obstacle_on_path_pauses_then_replans(self):
        core = SessionCore(corridor_spec())
        core.handle_command(command("Step", ticks=3))
        frames = core.handle_command(command("PlaceObstacle", cell=[10, 6]))
        assert frame_types(frames) == ["Ack", "TickState"]
        frames = core.handle_command(command("Step", ticks=12))
        types = frame_types(frames)
        assert "Paused" in types and "Replan" in types
        paused = next(f for f in frames if f["type"] == "Paused")
        replan = next(f for f in frames if f["type"] == "Replan")
        assert replan["payload"]["tick"] - paused["payload"]["tick"] == 5
        frames = core.handle_command(command("Step", ticks=100))
        assert frames[-1]["payload"]["outcome"] == "success"

    def test_place_obstacle_out_of_grid(self):
        core = SessionCore(corridor_spec())
        frames = core.handle_command(command("PlaceObstacle", cell=[99, 6]))
        assert frames[0]["type"] == "Error"
        assert frames[0]["payload"]["reason"] == "OutOfBounds"

    def test_place_obstacle_on_agent(self):
        core = SessionCore(corridor_spec())
        frames = core.handle_command(command("PlaceObstacle", cell=[0, 6]))
        assert frames[0]["payload"]["reason"] == "AgentCell"

    def test_place_moving_unsupported(self):
        core = SessionCore(corridor_spec())
        frames = core.handle_command(command("PlaceObstacle", cell=[5, 5], obstacle_kind="moving"))
        assert frames[0]["payload"]["reason"] == "UnsupportedKind"

    def test_remove_obstacle_roundtrip(self):
        core = SessionCore(corridor_spec())
        core.handle_command(command("PlaceObstacle", cell=[10, 6]))
        assert any(o.id == "user0" for o in core.engine.world.obstacles)
        frames = core.handle_command(command("RemoveObstacle", id="user0"))
        assert frames[0]["type"] == "Ack"
        assert not any(o.id == "user0" for o in core.engine.world.obstacles)
        frames = core.handle_command(command("RemoveObstacle", id="ghost"))
        assert frames[0]["payload"]["reason"] == "UnknownObstacle"

    def test_move_destination_retrains_and_replans(self):
        core = SessionCore(corridor_spec())
        core.handle_command(command("Step", ticks=2))
        frames = core.handle_command(command("MoveDestination", cell=[19, 0]))
        assert frame_types(frames) == ["Ack", "TickState"]
        assert core.tables.goal == Cell(19, 0)
        planned = frames[1]["payload"]["planned_path"]
        assert planned[-1] == [19, 0]
        frames = core.handle_command(command("Step", ticks=100))
        assert frames[-1]["payload"]["outcome"] == "success"
        assert core.engine.agent == Cell(19, 0)

    def test_move_destination_occupied_rejected(self):
        core = SessionCore(corridor_spec())
        core.handle_command(command("PlaceObstacle", cell=[9, 9]))
        frames = core.handle_command(command("MoveDestination", cell=[9, 9]))
        assert frames[0]["payload"]["reason"] == "CellOccupied"

    def test_reset_returns_to_tick_zero(self):
        core = SessionCore(corridor_spec())
        core.handle_command(command("Step", ticks=8))
        frames = core.handle_command(command("Reset"))
        assert frame_types(frames) == ["Ack", "TickState"]
        assert frames[1]["payload"]["tick"] == 0
        assert frames[1]["payload"]["agent"] == [0, 6]

    def test_user_pause_resume(self):
        core = SessionCore(corridor_spec())
        frames = core.handle_command(command("Pause"))
        assert frame_types(frames) == ["Ack", "Paused"]
        assert frames[1]["payload"]["cause"] == "user"
        assert core.running is False
        frames = core.handle_command(command("Resume"))
        assert frame_types(frames) == ["Ack", "Resumed"]
        assert core.running is True

    def test_set_speed_validation(self):
        core = SessionCore(corridor_spec())
        assert core.handle_command(command("SetSpeed", ticks_per_sec=25))[0]["type"] == "Ack"
        assert core.ticks_per_sec == 25.0
        frames = core.handle_command(command("SetSpeed", ticks_per_sec=-1))
        assert frames[0]["payload"]["reason"] == "BadRate"

    def test_unknown_command(self):
        core = SessionCore(corridor_spec())
        frames = core.handle_command(command("Teleport"))
        assert frames[0]["type"] == "Error"


class TestSnapshot:
    def test_fresh_snapshot_equals_tick0_state(self):
        core = SessionCore(corridor_spec(with_mover=True))
        snap = core.snapshot()
        assert snap["state"]["tick"] == 0
        assert snap["state"]["agent"] == [0, 6]
        assert snap["grid"]["width"] == 20 and snap["grid"]["height"] == 12
        assert snap["state"]["planned_path"][0] == [0, 6]

    def test_snapshot_after_k_ticks_equals_last_tickstate(self):
        core = SessionCore(corridor_spec(with_mover=True))
        last_state = None
        for _ in range(7):
            for f in core.step_once():
                if f["type"] == "TickState":
                    last_state = f["payload"]
        snap = core.snapshot()
        assert snap["state"] == last_state

    def test_two_snapshot_calls_identical(self):
        core = SessionCore(corridor_spec(with_mover=True))
        core.handle_command(command("Step", ticks=5))
        a = json.dumps(core.snapshot(), sort_keys=True)
        b = json.dumps(core.snapshot(), sort_keys=True)
        assert a == b


class TestWebSocket:
    def make_client(self, spec=None):
        app = create_app(spec or corridor_spec())
        return TestClient(app)

    def test_health(self):
        with self.make_client() as client:
            doc = client.get("/health").json()
            assert doc["ok"] is True
            assert doc["protocol"] == PROTOCOL_VERSION

    def test_snapshot_endpoint(self):
        with self.make_client() as client:
            doc = client.get("/snapshot").json()
            assert doc["state"]["tick"] == 0

    def test_command_stream_over_websocket(self):
        with self.make_client() as client:
            with client.websocket_connect("/session") as ws:
                ws.send_json({"v": 1, "type": "command", "seq": 1,
                              "payload": command("SetSpeed", ticks_per_sec=0)})
                assert ws.receive_json()["type"] == "Ack"
                ws.send_json({"v": 1, "type": "command", "seq": 2,
                              "payload": command("Step", cid="c2", ticks=3)})
                frames = [ws.receive_json() for _ in range(4)]
                assert frame_types(frames) == ["Ack", "TickState", "TickState", "TickState"]
                ticks = [f["payload"]["tick"] for f in frames[1:]]
                assert ticks == [1, 2, 3]

    def test_malformed_frame_closes_client(self):
        with self.make_client() as client:
            with client.websocket_connect("/session") as ws:
                ws.send_text("this is not json")
                with pytest.raises(Exception):
                    ws.receive_json()

    def test_two_clients_see_identical_frames(self):
        with self.make_client() as client:
            with client.websocket_connect("/session") as ws1:
                with client.websocket_connect("/session") as ws2:
                    ws1.send_json({"v": 1, "type": "command", "seq": 1,
                                   "payload": command("Step", ticks=2)})
                    a = [ws1.receive_json() for _ in range(3)]
                    b = [ws2.receive_json() for _ in range(3)]
                    assert a == b


class TestHeadlessParity:
    def test_served_session_matches_cmd_run(self, tmp_path):
        spec = corridor_spec(with_mover=True)
        scenario_path = tmp_path / "scenario.json"
        save_scenario(spec, scenario_path)
        headless_path = tmp_path / "headless.jsonl"
        assert main([
            "run", "--scenario", str(scenario_path), "--out", str(headless_path),
        ]) == 0

        app = create_app(spec)
        with TestClient(app) as client:
            with client.websocket_connect("/session") as ws:
                ws.send_json({"v": 1, "type": "command", "seq": 1,
                              "payload": command("Step", ticks=300)})
                terminal = None
                while terminal is None:
                    frame = ws.receive_json()
                    if frame["type"] == "Terminal":
                        terminal = frame
            served = client.get("/missionlog").text
        assert served == headless_path.read_text()
        served_log = load_mission_log(headless_path)
        assert served_log.outcome == terminal["payload"]["outcome"]


class TestGoldenFixture:
    def test_replaying_script_reproduces_committed_frames(self):
        doc = json.loads(GOLDEN_PATH.read_text())
        core = SessionCore(corridor_spec(with_mover=True))
        frames = []
        for cmd in doc["script"]:
            frames.extend(core.handle_command(cmd))
        assert frames == doc["frames"]
        types = frame_types(frames)
        assert "Paused" in types and "Replan" in types and "Terminal" in types
