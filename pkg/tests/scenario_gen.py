"""Seeded scenario generators for the test and acceptance suites."""

from __future__ import annotations

import math

import numpy as np

from oracles import reachable
from qpath.grid import Cell, MotionSchedule, Obstacle, ObstacleKind
from qpath.scenario import Hyperparams, InlineGrid, ScenarioSpec


def _pick_free(rng: np.random.Generator, mask: np.ndarray) -> Cell:
    height, width = mask.shape
    while True:
        x = int(rng.integers(width))
        y = int(rng.integers(height))
        if not mask[y, x]:
            return Cell(x, y)


def random_static_scenario(
    seed: int,
    width: int = 50,
    height: int = 50,
    density: float = 0.25,
    min_separation: float = 0.0,
    hyperparams: Hyperparams = Hyperparams(),
) -> ScenarioSpec:
    """A solvable random static map with distinct free endpoints."""
    rng = np.random.default_rng(seed)
    min_separation = min_separation or (width + height) / 4
    while True:
        mask = rng.random((height, width)) < density
        src = _pick_free(rng, mask)
        dst = _pick_free(rng, mask)
        if math.dist(src, dst) < min_separation:
            continue
        if reachable(mask, src, dst):
            return ScenarioSpec(
                grid=InlineGrid(mask=mask),
                source=src,
                destination=dst,
                seed=seed,
                hyperparams=hyperparams,
            )


def _perpendicular(dx: int, dy: int) -> tuple[int, int]:
    if abs(dx) >= abs(dy):
        return (0, 1)
    return (1, 0)


def crossing_obstacle_scenario(
    seed: int,
    width: int = 30,
    height: int = 30,
    density: float = 0.08,
    hyperparams: Hyperparams = Hyperparams(),
    parked: bool = False,
) -> ScenarioSpec:
    """A dynamic scenario whose obstacle crosses (or parks on) the corridor
    between source and destination.

    The obstacle sweeps perpendicularly through a cell midway along the
    straight source-destination line, timed so it is in the corridor while
    the agent approaches. With ``parked`` it instead drives onto that cell
    and dwells there for the rest of the mission, forcing a replan detour.
    """
    rng = np.random.default_rng(seed)
    while True:
        mask = rng.random((height, width)) < density
        src = _pick_free(rng, mask)
        dst = _pick_free(rng, mask)
        if math.dist(src, dst) < (width + height) / 3:
            continue
        if not reachable(mask, src, dst):
            continue
        frac = 0.4 + 0.2 * float(rng.random())
        mid = Cell(
            int(round(src.x + (dst.x - src.x) * frac)),
            int(round(src.y + (dst.y - src.y) * frac)),
        )
        if mask[mid.y, mid.x]:
            continue
        px, py = _perpendicular(dst.x - src.x, dst.y - src.y)
        reach = 6
        start = Cell(mid.x + px * reach, mid.y + py * reach)
        end = Cell(mid.x - px * reach, mid.y - py * reach)
        if not (0 <= start.x < width and 0 <= start.y < height):
            continue
        if not (0 <= end.x < width and 0 <= end.y < height):
            continue
        if parked:
            schedule = MotionSchedule(
                waypoints=(start, mid),
                dwell_ticks=(0, 10**6),
                speed=1.0,
            )
            kind = ObstacleKind.DYNAMIC
        else:
            dist_to_mid = math.dist(src, mid)
            # Arrive at the corridor roughly when the agent does.
            speed = max(0.3, min(1.0, reach / max(dist_to_mid, 1.0)))
            schedule = MotionSchedule(waypoints=(start, end), speed=speed)
            kind = ObstacleKind.MOVING
        obstacle = Obstacle(
            id="crosser",
            kind=kind,
            footprint=frozenset([start]),
            schedule=schedule,
        )
        spec = ScenarioSpec(
            grid=InlineGrid(mask=mask),
            source=src,
            destination=dst,
            obstacles=(obstacle,),
            seed=seed,
            hyperparams=hyperparams,
        )
        # Endpoints must stay clear of the sweep at tick 0.
        if start == src or start == dst:
            continue
        return spec
