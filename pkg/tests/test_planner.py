import math

import numpy as np
import pytest

from conftest import cells, empty_world, make_world
from oracles import dijkstra_cost
from qpath.errors import BlockedError, NoPathError
from qpath.grid import Cell, MotionSchedule, Obstacle, ObstacleKind
from qpath.planner import (
    Mission,
    MissionEngine,
    MissionLog,
    Path,
    PlannerConfig,
    astar_plan_fn,
    execute_mission,
    hybrid_plan_fn,
    load_mission_log,
    plan_astar,
    plan_hybrid,
    qval,
    total_cost,
)
from qpath.qrl import SENTINEL, TrainConfig, train
from qpath.qsim import CircuitParams

SQRT2 = math.sqrt(2)


def trained(world, goal, seed=21):
    return train(world, goal, TrainConfig(seed=seed), CircuitParams(layers=2, seed=7))


class TestQval:
    def setup_method(self):
        self.world = empty_world(8, 8)
        self.tables = trained(self.world, Cell(7, 7))

    def test_keeping_heading_reads_straight_entry(self):
        v = qval(self.tables, Cell(3, 3), 0, prev_heading=0)
        assert v == self.tables.q_density[3, 4, 0]

    def test_turning_reads_turn_entry(self):
        v = qval(self.tables, Cell(3, 3), 2, prev_heading=0)
        assert v == self.tables.q_density[4, 3, 1]

    def test_first_step_counts_as_straight(self):
        for a in (0, 2, 5):
            tx, ty = Cell(3, 3).x, Cell(3, 3).y
            v = qval(self.tables, Cell(3, 3), a, prev_heading=None)
            ox, oy = __import__("qpath.grid", fromlist=["ACTION_OFFSETS"]).ACTION_OFFSETS[a]
            assert v == self.tables.q_density[ty + oy, tx + ox, 0]

    def test_blocked_propagates(self):
        with pytest.raises(BlockedError):
            qval(self.tables, Cell(0, 0), 4, prev_heading=None)


class TestTotalCost:
    def test_degenerate_weight(self):
        cfg = PlannerConfig(q_weight=0.0)
        assert total_cost(2.0, 1.0, 0.7, cfg) == pytest.approx(3.0)

    def test_arithmetic(self):
        cfg = PlannerConfig(q_weight=2.0)
        assert total_cost(2.0, 1.0, 0.5, cfg) == pytest.approx(2.0)

    def test_monotone_in_qval(self):
        cfg = PlannerConfig(q_weight=0.5)
        assert total_cost(1.0, 1.0, 0.9, cfg) < total_cost(1.0, 1.0, 0.1, cfg)


class TestAstar:
    def test_straight_corridor(self):
        world = empty_world(8, 1)
        path = plan_astar(world, Cell(0, 0), Cell(7, 0))
        assert path.cost == pytest.approx(7.0)
        assert len(path.cells) == 8

    def test_diagonal(self):
        world = empty_world(4, 4)
        path = plan_astar(world, Cell(0, 0), Cell(3, 3))
        assert path.cost == pytest.approx(3 * SQRT2)

    def test_no_path(self):
        mask = np.zeros((7, 7), dtype=bool)
        mask[3, :] = True
        world = make_world(mask)
        with pytest.raises(NoPathError):
            plan_astar(world, Cell(0, 0), Cell(0, 6))

    def test_matches_dijkstra_on_random_grids(self):
        rng = np.random.default_rng(1001)
        solved = 0
        for _ in range(100):
            mask = rng.random((20, 20)) < 0.25
            mask[0, 0] = mask[19, 19] = False
            oracle = dijkstra_cost(mask, (0, 0), (19, 19))
            world = make_world(mask)
            if oracle is None:
                with pytest.raises(NoPathError):
                    plan_astar(world, Cell(0, 0), Cell(19, 19))
                continue
            path = plan_astar(world, Cell(0, 0), Cell(19, 19))
            assert path.cost == pytest.approx(oracle, abs=1e-9)
            solved += 1
        assert solved > 50


class TestHybrid:
    def test_reduces_to_astar_with_zero_weight(self):
        world = empty_world(10, 10)
        tables = trained(world, Cell(5, 5))
        cfg = PlannerConfig(q_weight=0.0, heuristic_weight=1.0)
        path = plan_hybrid(world, tables, Cell(0, 0), Cell(5, 5), cfg)
        assert path.cost == pytest.approx(5 * SQRT2)

    def test_zero_weight_matches_astar_cost_on_random_maps(self):
        rng = np.random.default_rng(1002)
        cfg = PlannerConfig(q_weight=0.0, heuristic_weight=1.0)
        checked = 0
        while checked < 20:
            mask = rng.random((15, 15)) < 0.2
            mask[0, 0] = mask[14, 14] = False
            if dijkstra_cost(mask, (0, 0), (14, 14)) is None:
                continue
            world = make_world(mask)
            tables = trained(world, Cell(14, 14), seed=checked)
            a = plan_astar(world, Cell(0, 0), Cell(14, 14))
            h = plan_hybrid(world, tables, Cell(0, 0), Cell(14, 14), cfg)
            assert h.cost == pytest.approx(a.cost, abs=1e-9)
            checked += 1

    def test_enclosed_destination(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[3:6, 3:6] = True
        mask[4, 4] = False
        world = make_world(mask)
        tables = trained(world, Cell(0, 0))
        with pytest.raises(NoPathError):
            plan_hybrid(world, tables, Cell(0, 0), Cell(4, 4), PlannerConfig())

    def test_bounded_suboptimality_on_seeded_maps(self):
        rng = np.random.default_rng(1003)
        cfg = PlannerConfig()
        done = 0
        while done < 10:
            mask = rng.random((50, 50)) < 0.25
            mask[0, 0] = mask[49, 49] = False
            oracle = dijkstra_cost(mask, (0, 0), (49, 49))
            if oracle is None:
                continue
            world = make_world(mask)
            tables = trained(world, Cell(49, 49), seed=done)
            path = plan_hybrid(world, tables, Cell(0, 0), Cell(49, 49), cfg)
            assert path.cost <= 1.25 * oracle + 1e-9
            done += 1

    def test_argmax_level_invariance(self):
        rng = np.random.default_rng(1004)
        mask = rng.random((20, 20)) < 0.2
        mask[0, 0] = mask[19, 19] = False
        if dijkstra_cost(mask, (0, 0), (19, 19)) is None:
            pytest.skip("unlucky mask")
        world = make_world(mask)
        tables = trained(world, Cell(19, 19))
        cfg = PlannerConfig()
        base = plan_hybrid(world, tables, Cell(0, 0), Cell(19, 19), cfg)
        live = tables.q_action > SENTINEL / 2
        tables.q_action[live] += 17.5
        shifted = plan_hybrid(world, tables, Cell(0, 0), Cell(19, 19), cfg)
        assert base.cells == shifted.cells


def corridor_world(obstacles=()):
    return empty_world(20, 12, obstacles)


def corridor_mission(**kwargs):
    defaults = dict(
        source=Cell(0, 6), destination=Cell(19, 6),
        safety_radius=3.0, wait_timeout=5, max_ticks=200,
    )
    defaults.update(kwargs)
    return Mission(**defaults)


def crossing_mover():
    # Reaches the corridor row (y=6) at ticks 10-11, then leaves.
    return Obstacle(
        id="crosser", kind=ObstacleKind.MOVING,
        footprint=frozenset([Cell(10, 11)]),
        schedule=MotionSchedule(waypoints=cells((10, 11), (10, 0)), speed=0.5),
    )


def parking_blocker():
    # Drives onto (10,6) at tick 2 and dwells there for the whole mission.
    return Obstacle(
        id="parker", kind=ObstacleKind.DYNAMIC,
        footprint=frozenset([Cell(10, 8)]),
        schedule=MotionSchedule(
            waypoints=cells((10, 8), (10, 6)), dwell_ticks=(0, 10**6), speed=1.0
        ),
    )


def run_corridor(obstacles, reactive=True, mission=None):
    world = corridor_world(obstacles)
    engine = MissionEngine(
        world, mission or corridor_mission(), astar_plan_fn(), reactive=reactive
    )
    return engine.run()


def kinds(log: MissionLog) -> list[str]:
    return [e.kind for e in log.events]


class TestMissionEngine:
    def test_static_world_clean_success(self):
        log = run_corridor([])
        assert log.outcome == "success"
        assert kinds(log) == ["success"]
        assert log.replan_count == 0
        assert log.distance == pytest.approx(19.0)
        assert log.ticks == 19

    def test_transient_obstacle_pause_resume(self):
        log = run_corridor([crossing_mover()])
        assert log.outcome == "success"
        pauses = [e for e in log.events if e.kind == "pause"]
        resumes = [e for e in log.events if e.kind == "resume"]
        assert len(pauses) == 1 and len(resumes) == 1
        assert log.replan_count == 0
        assert pauses[0].tick == 10
        assert resumes[0].tick == 12
        # two held ticks cost two extra ticks over the clean run
        assert log.ticks == 21

    def test_persistent_obstacle_replans_after_timeout(self):
        log = run_corridor([parking_blocker()])
        assert log.outcome == "success"
        pauses = [e for e in log.events if e.kind == "pause"]
        replans = [e for e in log.events if e.kind == "replan"]
        assert len(pauses) == 1 and len(replans) == 1
        assert replans[0].tick - pauses[0].tick == 5  # exactly wait_timeout
        assert log.replan_count == 1
        # the detour never walks through the parked obstacle
        assert Cell(10, 6) not in log.trajectory

    def test_blind_replay_collides(self):
        log = run_corridor([parking_blocker()], reactive=False)
        assert log.outcome == "collision"
        assert "success" not in kinds(log)
        assert log.trajectory[-1] == Cell(10, 6)

    def test_budget_timeout(self):
        log = run_corridor([], mission=corridor_mission(max_ticks=1))
        assert log.outcome == "timeout"
        assert log.events[-1].info.get("reason") == "budget"

    def test_unreachable_destination_times_out(self):
        mask = np.zeros((12, 20), dtype=bool)
        mask[:, 15] = True
        world = make_world(mask)
        engine = MissionEngine(world, corridor_mission(), astar_plan_fn())
        log = engine.run()
        assert log.outcome == "timeout"
        assert log.events[-1].info.get("reason") == "no_path"

    def test_survivors_visited_greedily(self):
        world = empty_world(10, 10)
        mission = Mission(
            source=Cell(0, 0), destination=Cell(9, 9),
            survivors=cells((9, 0), (0, 9)), max_ticks=400,
        )
        engine = MissionEngine(world, mission, astar_plan_fn())
        log = engine.run()
        assert log.outcome == "success"
        reached = [tuple(e.info["cell"]) for e in log.events if e.kind == "survivor_reached"]
        assert reached == [(9, 0), (0, 9)]
        assert log.trajectory[-1] == Cell(9, 9)

    def test_trajectory_adjacency_outside_pauses(self):
        log = run_corridor([crossing_mover(), parking_blocker()])
        pauses = {e.tick for e in log.events if e.kind == "pause"}
        for t, (a, b) in enumerate(zip(log.trajectory, log.trajectory[1:]), start=1):
            dx, dy = abs(b.x - a.x), abs(b.y - a.y)
            if (a, b) == (b, b) or (dx, dy) == (0, 0):
                continue  # held during a pause or replan tick
            assert max(dx, dy) == 1

    def test_never_success_and_collision(self):
        for obstacles, reactive in [([], True), ([parking_blocker()], False)]:
            log = run_corridor(obstacles, reactive=reactive)
            ks = kinds(log)
            assert not ("success" in ks and "collision" in ks)

    def test_deterministic_logs(self):
        world = corridor_world([crossing_mover()])
        tables = trained(world, Cell(19, 6))
        cfg = PlannerConfig()
        a = execute_mission(world, tables, corridor_mission(), cfg)
        b = execute_mission(world, tables, corridor_mission(), cfg)
        assert a.to_jsonl() == b.to_jsonl()

    def test_hybrid_execution_pauses_like_astar(self):
        world = corridor_world([parking_blocker()])
        tables = trained(world, Cell(19, 6))
        log = execute_mission(world, tables, corridor_mission(), PlannerConfig())
        assert log.outcome == "success"
        assert "pause" in kinds(log) and "replan" in kinds(log)


class TestMissionLogSerialization:
    def test_roundtrip(self, tmp_path):
        log = run_corridor([parking_blocker()])
        path = tmp_path / "mission.jsonl"
        log.save(path)
        back = load_mission_log(path)
        assert back.trajectory == log.trajectory
        assert back.events == log.events
        assert back.outcome == log.outcome
        assert back.distance == log.distance
        assert back.replan_count == log.replan_count

    def test_one_tick_line_per_tick(self, tmp_path):
        log = run_corridor([])
        lines = log.to_jsonl().splitlines()
        tick_lines = [l for l in lines if '"type": "tick"' in l]
        assert len(tick_lines) == log.ticks + 1


class TestPathType:
    def test_from_cells_costs(self):
        p = Path.from_cells([Cell(0, 0), Cell(1, 1), Cell(2, 2), Cell(3, 2)])
        assert p.cost == pytest.approx(2 * SQRT2 + 1)

    def test_rejects_non_adjacent(self):
        with pytest.raises(ValueError):
            Path.from_cells([Cell(0, 0), Cell(2, 0)])
