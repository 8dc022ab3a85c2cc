"""Mission execution: hybrid search, A* baseline, pause/replan machinery.

Planning runs on an occupancy snapshot at a fixed tick. The hybrid search
ranks candidate actions by their trained action values and prices edges with
``accumulated + movecost - q_weight * qval`` where qval rewards keeping the
current heading; an octile heuristic term keeps the search goal-directed.
Execution advances obstacles tick by tick and pauses, resumes, or replans
when something crosses the agent's safety radius on its projected path.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Callable, Optional

import numpy as np

from .errors import BlockedError, NoPathError, ParseError
from .grid import (
    ACTION_COSTS,
    ACTION_OFFSETS,
    Cell,
    OccupancyWorld,
    octile,
)
from .qrl import _LIVE, QTables
from .scenario import Hyperparams, ScenarioSpec

_STEP_ACTION = {off: a for a, off in enumerate(ACTION_OFFSETS)}


@dataclass(frozen=True)
class PlannerConfig:
    q_weight: float = 1.0
    heuristic_weight: float = 1.0
    visited_penalty: float = 0.0

    @classmethod
    def from_hyperparams(cls, hp: Hyperparams) -> "PlannerConfig":
        return cls(
            q_weight=hp.q_weight,
            heuristic_weight=hp.heuristic_weight,
            visited_penalty=hp.visited_penalty,
        )


@dataclass(frozen=True)
class Path:
    """A connected 8-adjacent cell sequence with its geometric cost."""

    cells: tuple[Cell, ...]
    cost: float

    @classmethod
    def from_cells(cls, cells: list[Cell]) -> "Path":
        cost = 0.0
        for a, b in zip(cells, cells[1:]):
            step = (b.x - a.x, b.y - a.y)
            if step not in _STEP_ACTION:
                raise ValueError(f"cells {tuple(a)} -> {tuple(b)} are not 8-adjacent")
            cost += ACTION_COSTS[_STEP_ACTION[step]]
        return cls(cells=tuple(cells), cost=cost)

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class Mission:
    source: Cell
    destination: Cell
    survivors: tuple[Cell, ...] = ()
    safety_radius: float = 3.0
    wait_timeout: int = 5
    max_ticks: int = 1000

    @classmethod
    def from_scenario(cls, spec: ScenarioSpec) -> "Mission":
        return cls(
            source=spec.source,
            destination=spec.destination,
            survivors=spec.survivors,
            safety_radius=spec.safety_radius,
            wait_timeout=spec.hyperparams.wait_timeout,
            max_ticks=spec.hyperparams.max_ticks,
        )


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str  # pause | resume | replan | survivor_reached | collision | success | timeout
    info: dict = field(default_factory=dict)


TERMINAL_KINDS = {"success", "timeout", "collision"}


@dataclass
class MissionLog:
    trajectory: list[Cell]
    events: list[Event]
    replan_count: int
    distance: float
    turn_count: int
    outcome: str
    ticks: int

    def to_jsonl(self) -> str:
        lines = []
        event_iter = iter(sorted(self.events, key=lambda e: e.tick))
        pending = next(event_iter, None)
        for t, cell in enumerate(self.trajectory):
            lines.append(
                json.dumps({"tick": t, "type": "tick", "agent": [cell.x, cell.y]}, sort_keys=True)
            )
            while pending is not None and pending.tick == t:
                lines.append(
                    json.dumps(
                        {"tick": pending.tick, "type": pending.kind, **pending.info},
                        sort_keys=True,
                    )
                )
                pending = next(event_iter, None)
        lines.append(
            json.dumps(
                {
                    "type": "summary",
                    "outcome": self.outcome,
                    "ticks": self.ticks,
                    "distance": self.distance,
                    "turn_count": self.turn_count,
                    "replan_count": self.replan_count,
                },
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"

    def save(self, path: str | FsPath) -> None:
        FsPath(path).write_text(self.to_jsonl(), encoding="utf-8")


def load_mission_log(path: str | FsPath) -> MissionLog:
    trajectory: list[Cell] = []
    events: list[Event] = []
    summary: Optional[dict] = None
    text = FsPath(path).read_text(encoding="utf-8")
    for i, line in enumerate(text.splitlines()):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{i + 1}: {exc.msg}")
        kind = obj.get("type")
        if kind == "tick":
            trajectory.append(Cell(*obj["agent"]))
        elif kind == "summary":
            summary = obj
        else:
            info = {k: v for k, v in obj.items() if k not in ("tick", "type")}
            events.append(Event(tick=obj["tick"], kind=kind, info=info))
    if summary is None:
        raise ParseError(f"{path}: missing summary line")
    return MissionLog(
        trajectory=trajectory,
        events=events,
        replan_count=summary["replan_count"],
        distance=summary["distance"],
        turn_count=summary["turn_count"],
        outcome=summary["outcome"],
        ticks=summary["ticks"],
    )


# --------------------------------------------------------------------------
# cost model


def qval(tables: QTables, s: Cell, a: int, prev_heading: Optional[int]) -> float:
    """Density-turn value of taking ``a`` from ``s``: the target cell's
    straight entry when the heading is kept (or on the first step), its turn
    entry otherwise."""
    ox, oy = ACTION_OFFSETS[a]
    target = Cell(s.x + ox, s.y + oy)
    if not (0 <= target.x < tables.width and 0 <= target.y < tables.height):
        raise BlockedError(f"action {a} from {tuple(s)} leaves the grid")
    if not tables.is_free(target):
        raise BlockedError(f"action {a} from {tuple(s)} targets a blocked cell")
    straight = prev_heading is None or a == prev_heading
    return float(tables.q_density[target.y, target.x, 0 if straight else 1])


def total_cost(g: float, movecost: float, qv: float, config: PlannerConfig) -> float:
    """Composite edge metric: accumulated cost plus move cost minus the
    weighted density-turn value."""
    return g + movecost - config.q_weight * qv


def _reconstruct(parents: dict[Cell, Cell], src: Cell, dst: Cell) -> list[Cell]:
    cells = [dst]
    while cells[-1] != src:
        cells.append(parents[cells[-1]])
    cells.reverse()
    return cells


def plan_astar(
    world: OccupancyWorld, src: Cell, dst: Cell, tick: Optional[int] = None
) -> Path:
    """Optimal 8-connected path on the occupancy snapshot at ``tick``.

    Octile-heuristic A*; ties pop in insertion order. Raises NoPathError
    when the frontier empties.
    """
    occ = world.occupancy_grid(tick)
    height, width = occ.shape
    if occ[src.y, src.x] or occ[dst.y, dst.x]:
        raise NoPathError(f"endpoint occupied at tick {tick if tick is not None else world.tick}")
    counter = 0
    best_g: dict[Cell, float] = {src: 0.0}
    parents: dict[Cell, Cell] = {}
    closed: set[Cell] = set()
    frontier: list[tuple[float, int, Cell]] = [(octile(src, dst), 0, src)]
    while frontier:
        _, _, cell = heapq.heappop(frontier)
        if cell in closed:
            continue
        if cell == dst:
            return Path.from_cells(_reconstruct(parents, src, dst))
        closed.add(cell)
        g = best_g[cell]
        for a, (ox, oy) in enumerate(ACTION_OFFSETS):
            nxt = Cell(cell.x + ox, cell.y + oy)
            if not (0 <= nxt.x < width and 0 <= nxt.y < height):
                continue
            if occ[nxt.y, nxt.x] or nxt in closed:
                continue
            ng = g + ACTION_COSTS[a]
            if ng < best_g.get(nxt, math.inf):
                best_g[nxt] = ng
                parents[nxt] = cell
                counter += 1
                heapq.heappush(frontier, (ng + octile(nxt, dst), counter, nxt))
    raise NoPathError(f"no path from {tuple(src)} to {tuple(dst)}")


def plan_hybrid(
    world: OccupancyWorld,
    tables: QTables,
    src: Cell,
    dst: Cell,
    config: PlannerConfig,
    tick: Optional[int] = None,
    prev_heading: Optional[int] = None,
    visited: Optional[set[Cell]] = None,
) -> Path:
    """Best-first search driven by the trained tables.

    At each expansion candidate actions are ranked by the cell's action
    values; edges are priced by :func:`total_cost` and the frontier is
    ordered by that price plus the weighted octile heuristic. A closed set
    prevents re-expansion, so loops are impossible by construction.
    """
    occ = world.occupancy_grid(tick)
    height, width = occ.shape
    if occ[src.y, src.x] or occ[dst.y, dst.x]:
        raise NoPathError(f"endpoint occupied at tick {tick if tick is not None else world.tick}")
    counter = 0
    best_g: dict[Cell, float] = {src: 0.0}
    headings: dict[Cell, Optional[int]] = {src: prev_heading}
    parents: dict[Cell, Cell] = {}
    closed: set[Cell] = set()
    h0 = config.heuristic_weight * octile(src, dst)
    frontier: list[tuple[float, int, Cell]] = [(h0, 0, src)]
    while frontier:
        _, _, cell = heapq.heappop(frontier)
        if cell in closed:
            continue
        if cell == dst:
            return Path.from_cells(_reconstruct(parents, src, dst))
        closed.add(cell)
        g = best_g[cell]
        heading = headings[cell]
        row = tables.q_action[cell.y, cell.x]
        # The candidate list: actions in descending action-value order.
        order = np.argsort(-row, kind="stable")
        for a in order:
            if row[a] <= _LIVE:
                break  # blocked actions sort last
            ox, oy = ACTION_OFFSETS[a]
            nxt = Cell(cell.x + ox, cell.y + oy)
            if not (0 <= nxt.x < width and 0 <= nxt.y < height):
                continue
            if occ[nxt.y, nxt.x] or nxt in closed:
                continue
            straight = heading is None or a == heading
            qv = float(tables.q_density[nxt.y, nxt.x, 0 if straight else 1])
            ng = total_cost(g, ACTION_COSTS[a], qv, config)
            if visited and nxt in visited:
                ng += config.visited_penalty
            if ng < best_g.get(nxt, math.inf):
                best_g[nxt] = ng
                parents[nxt] = cell
                headings[nxt] = int(a)
                counter += 1
                priority = ng + config.heuristic_weight * octile(nxt, dst)
                heapq.heappush(frontier, (priority, counter, nxt))
    raise NoPathError(f"no path from {tuple(src)} to {tuple(dst)}")


# --------------------------------------------------------------------------
# mission engine

PlanFn = Callable[[OccupancyWorld, int, Cell, Cell, Optional[int], set[Cell]], Path]


def hybrid_plan_fn(tables: QTables, config: PlannerConfig) -> PlanFn:
    def plan(world, tick, src, dst, heading, visited):
        return plan_hybrid(
            world, tables, src, dst, config,
            tick=tick, prev_heading=heading, visited=visited,
        )

    return plan


def astar_plan_fn() -> PlanFn:
    def plan(world, tick, src, dst, heading, visited):
        return plan_astar(world, src, dst, tick=tick)

    return plan


class MissionEngine:
    """Tick-stepped mission execution with pause/resume/replan semantics.

    Each tick: obstacles advance; a collision is recorded if the agent's
    cell is now occupied; when an obstacle sits within the safety radius and
    on the next cells of the planned path the agent pauses, resumes if the
    threat clears before the wait timeout, and replans from its current cell
    once the timeout elapses. Non-reactive engines (static-replay baselines)
    skip the threat machinery and follow their initial plan blindly.
    """

    def __init__(
        self,
        world: OccupancyWorld,
        mission: Mission,
        plan_fn: PlanFn,
        reactive: bool = True,
    ):
        self.world = world
        self.mission = mission
        self.plan_fn = plan_fn
        self.reactive = reactive
        self.tick = 0
        self.agent = mission.source
        self.heading: Optional[int] = None
        self.paused_since: Optional[int] = None
        self.pause_cause = ""
        self.replan_count = 0
        self.distance = 0.0
        self.turn_count = 0
        self.events: list[Event] = []
        self.trajectory: list[Cell] = [mission.source]
        self.outcome: Optional[str] = None
        self.unvisited: list[Cell] = list(mission.survivors)
        self.visited_cells: set[Cell] = {mission.source}
        self.target = self._pick_target()
        self.path: tuple[Cell, ...] = ()
        self.path_pos = 0
        self._check_arrival()
        if self.outcome is None:
            self._plan_leg()

    # -- helpers ----------------------------------------------------------

    def _emit(self, kind: str, **info) -> None:
        self.events.append(Event(tick=self.tick, kind=kind, info=info))

    def _terminate(self, outcome: str, **info) -> None:
        self.outcome = outcome
        self._emit(outcome, **info)

    def _pick_target(self) -> Cell:
        if not self.unvisited:
            return self.mission.destination
        return min(
            self.unvisited,
            key=lambda c: (octile(self.agent, c), c.y, c.x),
        )

    def _plan_leg(self) -> None:
        try:
            path = self.plan_fn(
                self.world, self.tick, self.agent, self.target,
                self.heading, self.visited_cells,
            )
        except NoPathError:
            self._terminate("timeout", reason="no_path")
            return
        self.path = path.cells
        self.path_pos = 0

    def _threat(self, occ: np.ndarray) -> Optional[Cell]:
        """First upcoming path cell that is occupied and inside the safety
        radius, if any."""
        lookahead = int(math.ceil(self.mission.safety_radius))
        upcoming = self.path[self.path_pos + 1 : self.path_pos + 1 + lookahead]
        for cell in upcoming:
            if occ[cell.y, cell.x] and math.dist(self.agent, cell) <= self.mission.safety_radius:
                return cell
        return None

    def _check_arrival(self) -> None:
        """Handle survivor touchpoints and mission completion at the agent's
        cell; crossing an unvisited survivor en route counts as a visit."""
        retarget = False
        if self.agent in self.unvisited:
            self._emit("survivor_reached", cell=[self.agent.x, self.agent.y])
            self.unvisited.remove(self.agent)
            retarget = self.agent == self.target
        if (
            self.agent == self.mission.destination
            and self.target == self.mission.destination
            and not self.unvisited
        ):
            self._terminate("success")
            return
        if retarget:
            self.target = self._pick_target()
            if self.agent == self.target:
                self._check_arrival()
            else:
                self._plan_leg()

    def move_destination(self, cell: Cell, plan_fn: Optional[PlanFn] = None) -> None:
        """Redirect the mission to a new destination mid-run.

        Accepts a fresh plan function (e.g. one backed by retrained tables);
        retargets immediately when the old destination was the active leg.
        """
        was_target = self.target == self.mission.destination
        self.mission = Mission(
            source=self.mission.source,
            destination=cell,
            survivors=self.mission.survivors,
            safety_radius=self.mission.safety_radius,
            wait_timeout=self.mission.wait_timeout,
            max_ticks=self.mission.max_ticks,
        )
        if plan_fn is not None:
            self.plan_fn = plan_fn
        if was_target and self.outcome is None:
            self.target = cell
            self.paused_since = None
            self._check_arrival()
            if self.outcome is None:
                self._plan_leg()

    # -- stepping ---------------------------------------------------------

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def step(self) -> list[Event]:
        """Advance one tick; returns the events emitted during it."""
        if self.done:
            return []
        before = len(self.events)
        self.tick += 1
        occ = self.world.occupancy_grid(self.tick)

        if occ[self.agent.y, self.agent.x]:
            self.trajectory.append(self.agent)
            self._terminate("collision", cell=[self.agent.x, self.agent.y])
            return self.events[before:]

        hold = False
        if self.reactive:
            threat = self._threat(occ)
            if self.paused_since is None:
                if threat is not None:
                    self.paused_since = self.tick
                    self._emit("pause", cause="obstacle", cell=[threat.x, threat.y])
                    hold = True
            else:
                if threat is None:
                    self._emit("resume")
                    self.paused_since = None
                elif self.tick - self.paused_since >= self.mission.wait_timeout:
                    self._emit("replan")
                    self.replan_count += 1
                    self.paused_since = None
                    self._plan_leg()
                    hold = True
                else:
                    hold = True

        if self.outcome is None and not hold:
            if self.path_pos + 1 < len(self.path):
                nxt = self.path[self.path_pos + 1]
                step = (nxt.x - self.agent.x, nxt.y - self.agent.y)
                action = _STEP_ACTION[step]
                if self.heading is not None and action != self.heading:
                    self.turn_count += 1
                self.heading = action
                self.distance += ACTION_COSTS[action]
                self.agent = nxt
                self.path_pos += 1
                self.visited_cells.add(nxt)
                self.trajectory.append(self.agent)
                if occ[nxt.y, nxt.x]:
                    self._terminate("collision", cell=[nxt.x, nxt.y])
                    return self.events[before:]
                self._check_arrival()
            else:
                # Plan exhausted without arrival: replan in place.
                self.trajectory.append(self.agent)
                self._plan_leg()
        else:
            self.trajectory.append(self.agent)

        if self.outcome is None and self.tick >= self.mission.max_ticks:
            self._terminate("timeout", reason="budget")
        return self.events[before:]

    def run(self) -> MissionLog:
        while not self.done:
            self.step()
        return self.log()

    def log(self) -> MissionLog:
        return MissionLog(
            trajectory=list(self.trajectory),
            events=list(self.events),
            replan_count=self.replan_count,
            distance=self.distance,
            turn_count=self.turn_count,
            outcome=self.outcome or "running",
            ticks=self.tick,
        )


def execute_mission(
    world: OccupancyWorld,
    tables: QTables,
    mission: Mission,
    config: PlannerConfig,
    rng: Optional[np.random.Generator] = None,
) -> MissionLog:
    """Run a full hybrid mission to its terminal event.

    ``rng`` is accepted for interface symmetry with the batch harness;
    execution itself is deterministic and consumes no randomness.
    """
    del rng
    engine = MissionEngine(world, mission, hybrid_plan_fn(tables, config), reactive=True)
    return engine.run()
