"""Scenario files: schema, validation, world construction.

A scenario is a UTF-8 JSON document describing the grid (inline mask or a
map image to ingest), the obstacle set, mission endpoints, seed, and every
tunable hyperparameter. Parsing is strict: unknown fields are rejected and
errors name the offending field. ``load_scenario(save_scenario(spec))`` is
the identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .errors import (
    EndpointBlockedError,
    OutOfBoundsError,
    ParseError,
    ValidationError,
)
from .grid import Cell, MotionSchedule, Obstacle, ObstacleKind, OccupancyWorld
from .mapio import ingest_map_image, load_image

SCHEMA_VERSION = 1

# (default, min, max) per tunable; None bounds are open.
_HYPER_RANGES: dict[str, tuple[Any, Any, Any]] = {
    "alpha_initial": (0.1, 0.0, None),
    "beta_density": (0.05, 0.0, None),
    "beta_smooth": (0.3, 0.0, 1.0),
    "epsilon": (0.2, 0.0, 1.0),
    "smooth_radius": (2.0, 0.0, None),
    "episodes": (1, 1, None),
    "init_scale": (0.1, 0.0, None),
    "window_radius": (2, 1, None),
    "layers": (2, 1, None),
    "circuit_seed": (130, None, None),
    "train_mode": ("sweep", None, None),
    "trajectory_max_steps": (200, 1, None),
    "q_weight": (1.0, 0.0, None),
    "heuristic_weight": (1.0, 0.0, None),
    "visited_penalty": (0.0, 0.0, None),
    "wait_timeout": (5, 1, None),
    "max_ticks": (1000, 1, None),
    "classical_episodes": (500, 0, None),
    "tick_ms": (100, 1, None),
}


@dataclass(frozen=True)
class Hyperparams:
    """Every tunable in one place; all defaults are artifact choices."""

    alpha_initial: float = 0.1
    beta_density: float = 0.05
    beta_smooth: float = 0.3
    epsilon: float = 0.2
    smooth_radius: float = 2.0
    episodes: int = 1
    init_scale: float = 0.1
    window_radius: int = 2
    layers: int = 2
    circuit_seed: int = 130
    train_mode: str = "sweep"
    trajectory_max_steps: int = 200
    q_weight: float = 1.0
    heuristic_weight: float = 1.0
    visited_penalty: float = 0.0
    wait_timeout: int = 5
    max_ticks: int = 1000
    classical_episodes: int = 500
    tick_ms: int = 100

    def __post_init__(self) -> None:
        for name, (_, lo, hi) in _HYPER_RANGES.items():
            val = getattr(self, name)
            if name == "train_mode":
                if val not in ("sweep", "trajectory"):
                    raise ValidationError("hyperparams.train_mode must be 'sweep' or 'trajectory'")
                continue
            if lo is not None and val < lo:
                raise ValidationError(f"hyperparams.{name} must be >= {lo}, got {val}")
            if hi is not None and val > hi:
                raise ValidationError(f"hyperparams.{name} must be <= {hi}, got {val}")
        if not (0.0 < self.beta_smooth < 1.0):
            raise ValidationError("hyperparams.beta_smooth must lie in (0, 1)")

    def to_json(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class InlineGrid:
    """Grid given directly as a 0/1 mask (1 = obstacle)."""

    mask: np.ndarray = field(repr=False)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, InlineGrid) and np.array_equal(self.mask, other.mask)


@dataclass(frozen=True)
class ImageGrid:
    """Grid ingested from a map image at load time."""

    path: str
    threshold: int
    dims: tuple[int, int]


GridSource = Union[InlineGrid, ImageGrid]


@dataclass(frozen=True)
class ScenarioSpec:
    grid: GridSource
    source: Cell
    destination: Cell
    obstacles: tuple[Obstacle, ...] = ()
    survivors: tuple[Cell, ...] = ()
    safety_radius: float = 3.0
    seed: int = 0
    hyperparams: Hyperparams = Hyperparams()
    # Resolution root for relative image paths; not part of the document.
    base_dir: Optional[Path] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.safety_radius < 1:
            raise ValidationError("safety_radius must be >= 1")


# --------------------------------------------------------------------------
# parsing


def _require(obj: dict, ctx: str, required: dict[str, type], optional: dict[str, type]):
    if not isinstance(obj, dict):
        raise ParseError(f"{ctx}: expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ParseError(f"{ctx}: unknown field(s) {sorted(unknown)!r}")
    for name in required:
        if name not in obj:
            raise ParseError(f"{ctx}: missing field '{name}'")
    for name, typ in {**required, **optional}.items():
        if name in obj and obj[name] is not None and not isinstance(obj[name], typ):
            raise ParseError(f"{ctx}.{name}: expected {typ.__name__}")


def _cell(v: Any, ctx: str) -> Cell:
    if (
        not isinstance(v, (list, tuple))
        or len(v) != 2
        or not all(isinstance(c, int) and not isinstance(c, bool) for c in v)
    ):
        raise ParseError(f"{ctx}: expected [x, y] integer pair")
    return Cell(v[0], v[1])


def _cells(v: Any, ctx: str) -> tuple[Cell, ...]:
    if not isinstance(v, list):
        raise ParseError(f"{ctx}: expected a list of [x, y] pairs")
    return tuple(_cell(item, f"{ctx}[{i}]") for i, item in enumerate(v))


def _parse_grid(obj: Any) -> GridSource:
    _require(obj, "grid", {}, {"inline": list, "image": dict})
    if ("inline" in obj) == ("image" in obj):
        raise ParseError("grid: exactly one of 'inline' or 'image' is required")
    if "inline" in obj:
        rows = obj["inline"]
        if not rows or not all(isinstance(r, list) and r for r in rows):
            raise ParseError("grid.inline: expected nonempty rows of 0/1")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ParseError("grid.inline: ragged rows")
        for y, row in enumerate(rows):
            for x, v in enumerate(row):
                if v not in (0, 1):
                    raise ParseError(f"grid.inline[{y}][{x}]: expected 0 or 1")
        return InlineGrid(mask=np.array(rows, dtype=bool))
    img = obj["image"]
    _require(img, "grid.image", {"path": str, "threshold": int, "dims": list}, {})
    dims = img["dims"]
    if len(dims) != 2 or not all(isinstance(d, int) for d in dims):
        raise ParseError("grid.image.dims: expected [W, H]")
    if not 0 <= img["threshold"] <= 255:
        raise ParseError("grid.image.threshold: expected 0-255")
    return ImageGrid(path=img["path"], threshold=img["threshold"], dims=(dims[0], dims[1]))


def _parse_schedule(obj: Any, ctx: str) -> MotionSchedule:
    _require(
        obj,
        ctx,
        {"waypoints": list},
        {"dwell_ticks": list, "speed": (int, float), "loop": bool},
    )
    waypoints = _cells(obj["waypoints"], f"{ctx}.waypoints")
    dwells = obj.get("dwell_ticks", [0] * len(waypoints))
    if not all(isinstance(d, int) and d >= 0 for d in dwells):
        raise ParseError(f"{ctx}.dwell_ticks: expected nonnegative integers")
    try:
        return MotionSchedule(
            waypoints=waypoints,
            dwell_ticks=tuple(dwells),
            speed=float(obj.get("speed", 1.0)),
            loop=bool(obj.get("loop", False)),
        )
    except ValidationError as exc:
        raise ParseError(f"{ctx}: {exc}")


def _parse_obstacle(obj: Any, ctx: str) -> Obstacle:
    _require(
        obj,
        ctx,
        {"id": str, "kind": str, "footprint": list},
        {"schedule": dict},
    )
    try:
        kind = ObstacleKind(obj["kind"])
    except ValueError:
        raise ParseError(f"{ctx}.kind: expected one of static/dynamic/moving")
    schedule = None
    if obj.get("schedule") is not None:
        schedule = _parse_schedule(obj["schedule"], f"{ctx}.schedule")
    try:
        return Obstacle(
            id=obj["id"],
            kind=kind,
            footprint=frozenset(_cells(obj["footprint"], f"{ctx}.footprint")),
            schedule=schedule,
        )
    except ValidationError as exc:
        raise ParseError(f"{ctx}: {exc}")


def _parse_hyperparams(obj: Any) -> Hyperparams:
    _require(obj, "hyperparams", {}, {k: object for k in _HYPER_RANGES})
    kwargs: dict[str, Any] = {}
    for name, (default, _, _) in _HYPER_RANGES.items():
        if name not in obj:
            continue
        val = obj[name]
        if isinstance(default, bool) or isinstance(val, bool):
            raise ParseError(f"hyperparams.{name}: unexpected boolean")
        if isinstance(default, int) and not isinstance(val, int):
            raise ParseError(f"hyperparams.{name}: expected integer")
        if isinstance(default, float) and not isinstance(val, (int, float)):
            raise ParseError(f"hyperparams.{name}: expected number")
        if isinstance(default, str) and not isinstance(val, str):
            raise ParseError(f"hyperparams.{name}: expected string")
        kwargs[name] = float(val) if isinstance(default, float) else val
    try:
        return Hyperparams(**kwargs)
    except ValidationError as exc:
        raise ParseError(str(exc))


def scenario_from_json(doc: Any, base_dir: Optional[Path] = None) -> ScenarioSpec:
    _require(
        doc,
        "scenario",
        {"grid": dict, "source": list, "destination": list},
        {
            "version": int,
            "obstacles": list,
            "survivors": list,
            "safety_radius": (int, float),
            "seed": int,
            "hyperparams": dict,
        },
    )
    if doc.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ParseError(f"version: unsupported schema version {doc['version']}")
    obstacles = tuple(
        _parse_obstacle(o, f"obstacles[{i}]") for i, o in enumerate(doc.get("obstacles", []))
    )
    try:
        return ScenarioSpec(
            grid=_parse_grid(doc["grid"]),
            source=_cell(doc["source"], "source"),
            destination=_cell(doc["destination"], "destination"),
            obstacles=obstacles,
            survivors=_cells(doc.get("survivors", []), "survivors"),
            safety_radius=float(doc.get("safety_radius", 3.0)),
            seed=int(doc.get("seed", 0)),
            hyperparams=_parse_hyperparams(doc.get("hyperparams", {})),
            base_dir=base_dir,
        )
    except ValidationError as exc:
        raise ParseError(str(exc))


def scenario_to_json(spec: ScenarioSpec) -> dict[str, Any]:
    if isinstance(spec.grid, InlineGrid):
        grid: dict[str, Any] = {"inline": spec.grid.mask.astype(int).tolist()}
    else:
        grid = {
            "image": {
                "path": spec.grid.path,
                "threshold": spec.grid.threshold,
                "dims": list(spec.grid.dims),
            }
        }
    obstacles = []
    for obs in spec.obstacles:
        entry: dict[str, Any] = {
            "id": obs.id,
            "kind": obs.kind.value,
            "footprint": [[c.x, c.y] for c in sorted(obs.footprint, key=lambda c: (c.y, c.x))],
        }
        if obs.schedule is not None:
            entry["schedule"] = {
                "waypoints": [[c.x, c.y] for c in obs.schedule.waypoints],
                "dwell_ticks": list(obs.schedule.dwell_ticks),
                "speed": obs.schedule.speed,
                "loop": obs.schedule.loop,
            }
        obstacles.append(entry)
    return {
        "version": SCHEMA_VERSION,
        "grid": grid,
        "obstacles": obstacles,
        "source": [spec.source.x, spec.source.y],
        "destination": [spec.destination.x, spec.destination.y],
        "survivors": [[c.x, c.y] for c in spec.survivors],
        "safety_radius": spec.safety_radius,
        "seed": spec.seed,
        "hyperparams": spec.hyperparams.to_json(),
    }


def load_scenario(path: str | Path) -> ScenarioSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{p}: {exc}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return scenario_from_json(doc, base_dir=p.parent)


def save_scenario(spec: ScenarioSpec, path: str | Path) -> None:
    doc = scenario_to_json(spec)
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# --------------------------------------------------------------------------
# world construction


def _resolve_mask(spec: ScenarioSpec) -> np.ndarray:
    if isinstance(spec.grid, InlineGrid):
        return spec.grid.mask.copy()
    img_path = Path(spec.grid.path)
    if not img_path.is_absolute() and spec.base_dir is not None:
        img_path = spec.base_dir / img_path
    return ingest_map_image(load_image(img_path), spec.grid.threshold, spec.grid.dims)


def build_world(spec: ScenarioSpec) -> OccupancyWorld:
    """Materialize the world at tick 0, validating the whole spec.

    Raises OutOfBoundsError when an obstacle (at any scheduled position) or
    an endpoint leaves the grid, EndpointBlockedError when source,
    destination, or a survivor is occupied at tick 0.
    """
    mask = _resolve_mask(spec)
    height, width = mask.shape

    def check_bounds(cell: Cell, what: str) -> None:
        if not (0 <= cell.x < width and 0 <= cell.y < height):
            raise OutOfBoundsError(f"{what} {tuple(cell)} outside {width}x{height} grid")

    for obs in spec.obstacles:
        if obs.schedule is None:
            for c in obs.footprint:
                check_bounds(c, f"obstacle {obs.id!r} footprint cell")
                mask[c.y, c.x] = True
        else:
            anchor = obs.schedule.waypoints[0]
            for pos in sorted(obs.schedule.sample_positions()):
                dx, dy = pos.x - anchor.x, pos.y - anchor.y
                for c in obs.footprint:
                    check_bounds(
                        Cell(c.x + dx, c.y + dy),
                        f"obstacle {obs.id!r} footprint cell (at schedule position {tuple(pos)})",
                    )

    # Static footprints live in the mask; the world's obstacle list keeps
    # only scheduled obstacles (and, later, runtime-placed ones).
    world = OccupancyWorld(
        width=width,
        height=height,
        static_mask=mask,
        obstacles=tuple(o for o in spec.obstacles if o.schedule is not None),
        tick=0,
    )

    endpoints = [("source", spec.source), ("destination", spec.destination)]
    endpoints += [(f"survivor[{i}]", s) for i, s in enumerate(spec.survivors)]
    for what, cell in endpoints:
        check_bounds(cell, what)
        if world.occupied(cell, 0):
            raise EndpointBlockedError(f"{what} {tuple(cell)} is occupied at tick 0")
    return world


def random_obstacle_mask(
    width: int, height: int, density: float, rng: np.random.Generator
) -> np.ndarray:
    """Random static mask helper used by benchmarks and tests."""
    return rng.random((height, width)) < density


def spawn_rngs(seed: int, *labels: str) -> dict[str, np.random.Generator]:
    """Independent, reproducible RNG streams derived from a scenario seed."""
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(labels))
    return {label: np.random.default_rng(child) for label, child in zip(labels, children)}
