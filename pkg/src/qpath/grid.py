"""Grid environment: occupancy, obstacle motion, movement model.

The world is a W x H grid of unit cells. Cells are addressed by integer
(x, y) with x the column and y the row; y grows northward. Obstacles come
in three kinds: static (never move), dynamic (move with stationary dwell
phases), and moving (continuous waypoint traversal). Occupancy at any tick
is a pure function of the obstacle set, so worlds can be re-simulated or
queried at arbitrary ticks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .errors import BlockedError, ValidationError


class Cell(NamedTuple):
    x: int
    y: int


class ObstacleKind(Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"
    MOVING = "moving"


# 8-connected action table, fixed order: E, NE, N, NW, W, SW, S, SE.
# Index i pairs with the i-th offset; diagonals are the odd indices.
ACTION_OFFSETS: tuple[tuple[int, int], ...] = (
    (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1),
)
NUM_ACTIONS = len(ACTION_OFFSETS)
SQRT2 = math.sqrt(2.0)
ACTION_COSTS: tuple[float, ...] = tuple(
    math.hypot(dx, dy) for dx, dy in ACTION_OFFSETS
)


def move_cost(s: Cell, a: int) -> float:
    """Geometric cost of action ``a``: 1 for cardinal, sqrt(2) for diagonal.

    State-independent; ``s`` is accepted for signature symmetry with
    :func:`next_state`.
    """
    return ACTION_COSTS[a]


def octile(a: Cell, b: Cell) -> float:
    """Shortest 8-connected distance on an empty grid."""
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class MotionSchedule:
    """Waypoint itinerary for a non-static obstacle.

    The obstacle dwells ``dwell_ticks[i]`` ticks at waypoint i, then travels
    to the next waypoint at ``speed`` cells per tick along the straight
    segment, its position rounded to the nearest cell. With ``loop`` the
    final waypoint connects back to the first and the itinerary repeats;
    otherwise the obstacle holds at the final waypoint forever.
    """

    waypoints: tuple[Cell, ...]
    dwell_ticks: tuple[int, ...] = ()
    speed: float = 1.0
    loop: bool = False

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValidationError("schedule needs at least one waypoint")
        dwells = self.dwell_ticks or tuple(0 for _ in self.waypoints)
        if len(dwells) != len(self.waypoints):
            raise ValidationError("dwell_ticks must match waypoints length")
        if any(d < 0 for d in dwells):
            raise ValidationError("dwell_ticks must be nonnegative")
        if not (self.speed > 0.0 and math.isfinite(self.speed)):
            raise ValidationError("speed must be positive")
        object.__setattr__(self, "dwell_ticks", tuple(int(d) for d in dwells))
        object.__setattr__(
            self, "waypoints", tuple(Cell(int(x), int(y)) for x, y in self.waypoints)
        )

    def _segments(self) -> list[tuple[float, Cell, Optional[Cell]]]:
        """(duration, from, to) segments; ``to`` is None for a dwell."""
        segs: list[tuple[float, Cell, Optional[Cell]]] = []
        n = len(self.waypoints)
        for i, wp in enumerate(self.waypoints):
            if self.dwell_ticks[i] > 0:
                segs.append((float(self.dwell_ticks[i]), wp, None))
            nxt = None
            if i + 1 < n:
                nxt = self.waypoints[i + 1]
            elif self.loop and n > 1:
                nxt = self.waypoints[0]
            if nxt is not None:
                dist = math.hypot(nxt[0] - wp[0], nxt[1] - wp[1])
                if dist > 0.0:
                    segs.append((dist / self.speed, wp, nxt))
        return segs

    def period(self) -> float:
        """Total itinerary duration (one cycle when looping)."""
        return sum(d for d, _, _ in self._segments())

    def position_at(self, tick: float) -> Cell:
        """Rounded cell position at ``tick`` (ticks count from 0)."""
        segs = self._segments()
        total = sum(d for d, _, _ in segs)
        if total <= 0.0:
            return self.waypoints[0]
        t = float(tick)
        if self.loop:
            t = math.fmod(t, total)
        elif t >= total:
            return self.waypoints[-1]
        for dur, start, end in segs:
            if t < dur:
                if end is None:
                    return start
                frac = t / dur
                px = start[0] + (end[0] - start[0]) * frac
                py = start[1] + (end[1] - start[1]) * frac
                return Cell(_round_half_up(px), _round_half_up(py))
            t -= dur
        return self.waypoints[0] if self.loop else self.waypoints[-1]

    def sample_positions(self) -> set[Cell]:
        """Every rounded cell the anchor can occupy, for validation.

        Samples each travel leg finely enough (0.2 cells) that no rounded
        cell along the segment is skipped.
        """
        cells: set[Cell] = set(self.waypoints)
        for dur, start, end in self._segments():
            if end is None:
                continue
            dist = dur * self.speed
            steps = max(1, int(math.ceil(dist / 0.2)))
            for k in range(steps + 1):
                frac = k / steps
                px = start[0] + (end[0] - start[0]) * frac
                py = start[1] + (end[1] - start[1]) * frac
                cells.add(Cell(_round_half_up(px), _round_half_up(py)))
        return cells


@dataclass(frozen=True)
class Obstacle:
    """A grid obstacle: identity, kind, footprint, and optional motion.

    The footprint is the set of occupied cells at the schedule anchor
    (waypoint 0); it translates rigidly as the anchor moves. Static
    obstacles carry no schedule and their footprint is absolute.
    """

    id: str
    kind: ObstacleKind
    footprint: frozenset[Cell]
    schedule: Optional[MotionSchedule] = None

    def __post_init__(self) -> None:
        if not self.footprint:
            raise ValidationError(f"obstacle {self.id!r}: empty footprint")
        object.__setattr__(
            self, "footprint", frozenset(Cell(int(x), int(y)) for x, y in self.footprint)
        )
        if self.kind is ObstacleKind.STATIC:
            if self.schedule is not None:
                raise ValidationError(f"obstacle {self.id!r}: static obstacles have no schedule")
        else:
            if self.schedule is None:
                raise ValidationError(f"obstacle {self.id!r}: {self.kind.value} obstacle needs a schedule")
            if self.kind is ObstacleKind.MOVING and any(
                d != 0 for d in self.schedule.dwell_ticks
            ):
                raise ValidationError(
                    f"obstacle {self.id!r}: moving obstacles cannot dwell"
                )

    def cells_at(self, tick: float) -> frozenset[Cell]:
        if self.schedule is None:
            return self.footprint
        anchor = self.schedule.waypoints[0]
        pos = self.schedule.position_at(tick)
        dx, dy = pos[0] - anchor[0], pos[1] - anchor[1]
        if dx == 0 and dy == 0:
            return self.footprint
        return frozenset(Cell(c.x + dx, c.y + dy) for c in self.footprint)


@dataclass(frozen=True)
class OccupancyWorld:
    """Immutable snapshot of the environment at a given tick.

    ``static_mask[y, x]`` is True where static occupancy lies (the base
    grid plus static obstacle footprints). Occupancy at a tick is the
    static mask unioned with every scheduled obstacle's footprint at that
    tick, so ``occupied`` is pure in (obstacles, static_mask, tick).
    """

    width: int
    height: int
    static_mask: np.ndarray = field(repr=False)
    obstacles: tuple[Obstacle, ...] = ()
    tick: int = 0

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def occupied(self, cell: Cell, tick: Optional[int] = None) -> bool:
        """True iff the static mask or any obstacle covers ``cell`` at ``tick``."""
        if tick is None:
            tick = self.tick
        if self.static_mask[cell[1], cell[0]]:
            return True
        return any(cell in obs.cells_at(tick) for obs in self.obstacles)

    def occupancy_grid(self, tick: Optional[int] = None) -> np.ndarray:
        """Boolean (H, W) occupancy at ``tick``; shares the static mask when
        there are no scheduled obstacles."""
        if tick is None:
            tick = self.tick
        if not self.obstacles:
            return self.static_mask
        grid = self.static_mask.copy()
        for obs in self.obstacles:
            for c in obs.cells_at(tick):
                if 0 <= c.x < self.width and 0 <= c.y < self.height:
                    grid[c.y, c.x] = True
        return grid

    def free_cells(self) -> Iterator[Cell]:
        """Statically free cells in row-major order."""
        ys, xs = np.nonzero(~self.static_mask)
        for y, x in zip(ys.tolist(), xs.tolist()):
            yield Cell(x, y)

    def static_snapshot(self) -> "OccupancyWorld":
        """The world reduced to static occupancy at tick 0 (training view)."""
        return OccupancyWorld(
            width=self.width,
            height=self.height,
            static_mask=self.static_mask,
            obstacles=(),
            tick=0,
        )


def step_obstacles(world: OccupancyWorld) -> OccupancyWorld:
    """Advance simulation time by one tick.

    Obstacle positions are derived from their schedules, so stepping is a
    tick increment; dwells are consumed before motion and non-looping
    schedules hold at their final waypoint.
    """
    return replace(world, tick=world.tick + 1)


def occupied(world: OccupancyWorld, cell: Cell, tick: Optional[int] = None) -> bool:
    return world.occupied(cell, tick)


def next_state(world: OccupancyWorld, s: Cell, a: int, tick: Optional[int] = None) -> Cell:
    """Apply action ``a`` (0-7 per the fixed table) to state ``s``.

    Raises BlockedError when the target is outside the grid or occupied at
    ``tick``; targets are never clamped.
    """
    dx, dy = ACTION_OFFSETS[a]
    target = Cell(s[0] + dx, s[1] + dy)
    if not world.in_bounds(target):
        raise BlockedError(f"action {a} from {tuple(s)} leaves the grid")
    if world.occupied(target, tick):
        raise BlockedError(f"action {a} from {tuple(s)} hits an obstacle")
    return target


def turn_feature(world: OccupancyWorld, s: Cell, window_radius: int = 2) -> float:
    """Local obstacle density around ``s`` in [0, 1].

    Fraction of cells occupied at the current tick within the
    (2w+1)^2 window centred on ``s``, excluding ``s`` itself and
    clipping the window at the grid border.
    """
    grid = world.occupancy_grid()
    x, y = s
    x0, x1 = max(0, x - window_radius), min(world.width - 1, x + window_radius)
    y0, y1 = max(0, y - window_radius), min(world.height - 1, y + window_radius)
    count = (x1 - x0 + 1) * (y1 - y0 + 1) - 1
    if count <= 0:
        return 0.0
    occ = int(grid[y0 : y1 + 1, x0 : x1 + 1].sum()) - int(grid[y, x])
    return occ / count
