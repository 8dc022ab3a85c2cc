"""Performance metrics and the batch comparison harness.

Runs each requested planner over a scenario suite with isolated seeded RNG
streams, aggregates success rate, distance, smoothness, replanning
frequency, and training effort, and writes both a CSV and an aligned text
table. Per-scenario failures are recorded, never fatal, and aggregates are
independent of execution order and parallelism.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Optional, Sequence

import numpy as np

from .classical import ClassicalConfig, ClassicalQTable, train_classical_q
from .errors import IoError, NoPathError, ParseError
from .grid import ACTION_OFFSETS, Cell, OccupancyWorld
from .planner import (
    Mission,
    MissionEngine,
    MissionLog,
    Path,
    PlannerConfig,
    astar_plan_fn,
    hybrid_plan_fn,
)
from .qrl import TrainConfig, train
from .qsim import CircuitParams
from .scenario import ScenarioSpec, build_world, load_scenario

log = logging.getLogger(__name__)

PLANNER_IDS = ("hybrid", "astar_static", "astar_replan", "classical_q")


@dataclass(frozen=True)
class MetricsRow:
    planner: str
    success_rate: float
    mean_distance: float
    mean_turn_count: float
    mean_replans: float
    train_time_ms: float
    mean_exec_ticks: float


@dataclass(frozen=True)
class MissionResult:
    success: bool
    distance: float
    turn_count: int
    replans: int
    ticks: int
    train_ms: float
    error: Optional[str] = None


def path_length(path: Path) -> float:
    """Accumulated geometric length: 1 per cardinal step, sqrt(2) per
    diagonal step."""
    return Path.from_cells(list(path.cells)).cost


def smoothness(path: Path) -> int:
    """Number of heading changes along the path (0 for a straight line)."""
    headings = []
    for a, b in zip(path.cells, path.cells[1:]):
        headings.append((b.x - a.x, b.y - a.y))
    return sum(1 for h0, h1 in zip(headings, headings[1:]) if h0 != h1)


def _classical_plan_fn(table: ClassicalQTable):
    """Greedy path extraction from a classical table (may dead-end)."""

    def plan(world: OccupancyWorld, tick: int, src: Cell, dst: Cell, heading, visited):
        occ = world.occupancy_grid(tick)
        height, width = occ.shape
        cells = [src]
        seen = {src}
        s = src
        for _ in range(4 * (width + height)):
            if s == dst:
                return Path.from_cells(cells)
            a = int(np.argmax(table.q[s.y, s.x]))
            ox, oy = ACTION_OFFSETS[a]
            nxt = Cell(s.x + ox, s.y + oy)
            if (
                not (0 <= nxt.x < width and 0 <= nxt.y < height)
                or occ[nxt.y, nxt.x]
                or nxt in seen
            ):
                raise NoPathError(f"greedy policy stuck at {tuple(s)}")
            cells.append(nxt)
            seen.add(nxt)
            s = nxt
        raise NoPathError("greedy policy exceeded its step budget")

    return plan


def run_mission(
    spec: ScenarioSpec, planner: str, collect_timings: bool = False
) -> tuple[MissionLog, float]:
    """Execute one scenario under one planner; returns (log, train_ms)."""
    world = build_world(spec)
    mission = Mission.from_scenario(spec)
    hp = spec.hyperparams
    train_ms = 0.0

    if planner == "hybrid":
        t0 = time.perf_counter()
        tables = train(
            world,
            spec.destination,
            TrainConfig.from_hyperparams(hp, spec.seed),
            CircuitParams(layers=hp.layers, seed=hp.circuit_seed),
        )
        if collect_timings:
            train_ms = (time.perf_counter() - t0) * 1000.0
        engine = MissionEngine(
            world, mission, hybrid_plan_fn(tables, PlannerConfig.from_hyperparams(hp))
        )
    elif planner == "astar_static":
        engine = MissionEngine(world, mission, astar_plan_fn(), reactive=False)
    elif planner == "astar_replan":
        engine = MissionEngine(world, mission, astar_plan_fn(), reactive=True)
    elif planner == "classical_q":
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed & (2**64 - 1), 3]))
        t0 = time.perf_counter()
        table = train_classical_q(
            world, spec.destination, hp.classical_episodes, ClassicalConfig(epsilon=hp.epsilon), rng
        )
        if collect_timings:
            train_ms = (time.perf_counter() - t0) * 1000.0
        engine = MissionEngine(world, mission, _classical_plan_fn(table), reactive=True)
    else:
        raise ValueError(f"unknown planner {planner!r}; expected one of {PLANNER_IDS}")

    return engine.run(), train_ms


def _run_result(spec: ScenarioSpec, planner: str, collect_timings: bool) -> MissionResult:
    try:
        mission_log, train_ms = run_mission(spec, planner, collect_timings)
    except Exception as exc:  # per-scenario failures never abort the batch
        log.warning("scenario failed under %s: %s", planner, exc)
        return MissionResult(False, 0.0, 0, 0, 0, 0.0, error=str(exc))
    return MissionResult(
        success=mission_log.outcome == "success",
        distance=mission_log.distance,
        turn_count=mission_log.turn_count,
        replans=mission_log.replan_count,
        ticks=mission_log.ticks,
        train_ms=train_ms,
        error=None,
    )


def run_batch(
    scenarios: Sequence[ScenarioSpec],
    planners: Sequence[str],
    parallelism: int = 1,
    collect_timings: bool = False,
) -> list[MetricsRow]:
    """Run every planner over every scenario and aggregate per planner.

    Aggregation always reduces in (planner, scenario) input order, so the
    rows are identical whatever the parallelism. Scenario errors count as
    failures and are excluded from the means.
    """
    if not scenarios:
        raise ValueError("need at least one scenario")
    jobs = [(p, s) for p in planners for s in scenarios]
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(
                pool.map(lambda job: _run_result(job[1], job[0], collect_timings), jobs)
            )
    else:
        results = [_run_result(s, p, collect_timings) for p, s in jobs]

    rows = []
    n = len(scenarios)
    for i, planner in enumerate(planners):
        chunk = results[i * n : (i + 1) * n]
        completed = [r for r in chunk if r.error is None]
        successes = sum(1 for r in chunk if r.success)

        def mean(values: list[float]) -> float:
            return sum(values) / len(values) if values else 0.0

        rows.append(
            MetricsRow(
                planner=planner,
                success_rate=successes / n,
                mean_distance=mean([r.distance for r in completed]),
                mean_turn_count=mean([float(r.turn_count) for r in completed]),
                mean_replans=mean([float(r.replans) for r in completed]),
                train_time_ms=mean([r.train_ms for r in completed]),
                mean_exec_ticks=mean([float(r.ticks) for r in completed]),
            )
        )
    return rows


# --------------------------------------------------------------------------
# reporting

_COLUMNS = (
    "planner",
    "success_rate",
    "mean_distance",
    "mean_turn_count",
    "mean_replans",
    "train_time_ms",
    "mean_exec_ticks",
)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_report(rows: Sequence[MetricsRow], path: str | FsPath) -> FsPath:
    """Write ``<path>`` as CSV plus an aligned ``<path>.txt`` twin.

    Float cells use shortest round-trip formatting, so parsing the CSV back
    recovers the rows exactly.
    """
    if not rows:
        raise ValueError("cannot report zero rows")
    csv_path = FsPath(path)
    lines = [",".join(_COLUMNS)]
    for row in rows:
        lines.append(
            ",".join(
                [row.planner]
                + [_fmt(getattr(row, col)) for col in _COLUMNS[1:]]
            )
        )
    try:
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        txt_path = csv_path.with_suffix(".txt")
        txt_path.write_text(render_table(rows), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"{path}: {exc}")
    return csv_path


def render_table(rows: Sequence[MetricsRow]) -> str:
    """Text table with one line per metric and one column per planner."""
    headers = ["parameter"] + [r.planner for r in rows]
    body = []
    for col in _COLUMNS[1:]:
        body.append([col] + [f"{getattr(r, col):.4f}" for r in rows])
    widths = [max(len(line[i]) for line in [headers] + body) for i in range(len(headers))]
    out = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    out.append("  ".join("-" * w for w in widths))
    for line in body:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)))
    return "\n".join(out) + "\n"


def read_report(path: str | FsPath) -> list[MetricsRow]:
    text = FsPath(path).read_text(encoding="utf-8")
    lines = text.strip().splitlines()
    if not lines or lines[0].split(",") != list(_COLUMNS):
        raise ParseError(f"{path}: unexpected CSV header")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        rows.append(
            MetricsRow(
                planner=cells[0],
                **{col: float(v) for col, v in zip(_COLUMNS[1:], cells[1:])},
            )
        )
    return rows


# --------------------------------------------------------------------------
# suite files


@dataclass(frozen=True)
class Suite:
    scenarios: tuple[ScenarioSpec, ...]
    scenario_paths: tuple[str, ...]
    planners: tuple[str, ...]
    skipped: tuple[tuple[str, str], ...] = ()  # (path, reason)


def load_suite(path: str | FsPath) -> Suite:
    """Load a benchmark suite file: scenario paths plus planner ids.

    Unloadable scenarios are skipped with a reason, not fatal, as long as at
    least one loads.
    """
    p = FsPath(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"{p}: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ParseError(f"{p}: expected an object")
    unknown = set(doc) - {"scenarios", "planners"}
    if unknown:
        raise ParseError(f"{p}: unknown field(s) {sorted(unknown)!r}")
    for fld in ("scenarios", "planners"):
        if fld not in doc or not isinstance(doc[fld], list) or not doc[fld]:
            raise ParseError(f"{p}: missing or empty field '{fld}'")
    for planner in doc["planners"]:
        if planner not in PLANNER_IDS:
            raise ParseError(f"{p}: unknown planner {planner!r}")
    specs: list[ScenarioSpec] = []
    paths: list[str] = []
    skipped: list[tuple[str, str]] = []
    for rel in doc["scenarios"]:
        spath = FsPath(rel)
        if not spath.is_absolute():
            spath = p.parent / spath
        try:
            specs.append(load_scenario(spath))
            paths.append(str(rel))
        except ParseError as exc:
            skipped.append((str(rel), str(exc)))
    if not specs:
        raise ParseError(f"{p}: no loadable scenarios")
    return Suite(
        scenarios=tuple(specs),
        scenario_paths=tuple(paths),
        planners=tuple(doc["planners"]),
        skipped=tuple(skipped),
    )
