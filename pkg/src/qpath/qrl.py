"""Quantum-assisted Q-table training.

Holds the per-cell action table (8 values) and density turn table (2 values:
straight, turn) plus the one-shot training sweep: every statically free cell
is visited once per episode, its rows are fed through the turn critic, the
measurement vector is expanded onto the action/density deltas, and the
result is smoothed over k-d tree neighbors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DeadEndError, EndpointBlockedError, ParseError
from .grid import (
    ACTION_OFFSETS,
    NUM_ACTIONS,
    Cell,
    OccupancyWorld,
    octile,
    turn_feature,
)
from .qsim import CircuitParams, TurnCritic
from .scenario import Hyperparams
from .spatial import SpatialIndex, neighbors_within

# Blocked actions carry a large negative sentinel so no argmax or blend can
# ever prefer them; anything above the threshold is a live entry.
SENTINEL = -1.0e6
_LIVE = -1.0e5

# bit i of action a, least significant first; pairs measurement m_i with the
# i-th bitplane of the 8 action indices.
_BITS = np.array([[(a >> i) & 1 for i in range(3)] for a in range(NUM_ACTIONS)])
_BIT_SIGNS = 1.0 - 2.0 * _BITS  # (8, 3)


@dataclass
class TrainConfig:
    alpha_initial: float = 0.1
    beta_density: float = 0.05
    beta_smooth: float = 0.3
    epsilon: float = 0.2
    smooth_radius: float = 2.0
    episodes: int = 1
    init_scale: float = 0.1
    window_radius: int = 2
    seed: int = 0
    mode: str = "sweep"
    trajectory_max_steps: int = 200

    @classmethod
    def from_hyperparams(cls, hp: Hyperparams, seed: int) -> "TrainConfig":
        return cls(
            alpha_initial=hp.alpha_initial,
            beta_density=hp.beta_density,
            beta_smooth=hp.beta_smooth,
            epsilon=hp.epsilon,
            smooth_radius=hp.smooth_radius,
            episodes=hp.episodes,
            init_scale=hp.init_scale,
            window_radius=hp.window_radius,
            seed=seed,
            mode=hp.train_mode,
            trajectory_max_steps=hp.trajectory_max_steps,
        )


@dataclass
class QTables:
    """Per-cell action and density-turn tables over the statically free grid.

    ``q_action[y, x]`` holds 8 action values (sentinel where blocked),
    ``q_density[y, x]`` holds [straight_value, turn_value]. Rows exist only
    for free cells; occupied cells are all-sentinel and excluded from
    serialization.
    """

    width: int
    height: int
    goal: Cell
    q_action: np.ndarray = field(repr=False)
    q_density: np.ndarray = field(repr=False)
    free: np.ndarray = field(repr=False)
    index: SpatialIndex = field(repr=False)
    update_counts: np.ndarray = field(repr=False)
    selection_counts: np.ndarray = field(repr=False)

    def is_free(self, s: Cell) -> bool:
        return bool(self.free[s[1], s[0]])

    def action_row(self, s: Cell) -> np.ndarray:
        return self.q_action[s[1], s[0]]

    def density_row(self, s: Cell) -> np.ndarray:
        return self.q_density[s[1], s[0]]

    def free_cells(self) -> list[Cell]:
        ys, xs = np.nonzero(self.free)
        return [Cell(int(x), int(y)) for y, x in zip(ys, xs)]


def _max_octile_from(goal: Cell, width: int, height: int) -> float:
    corners = [Cell(0, 0), Cell(width - 1, 0), Cell(0, height - 1), Cell(width - 1, height - 1)]
    d = max(octile(goal, c) for c in corners)
    return d if d > 0 else 1.0


def init_tables(world: OccupancyWorld, goal: Cell, config: TrainConfig) -> QTables:
    """Fresh tables: small uniform random values, goal-potential shaping on
    each feasible action's target, sentinel on blocked actions."""
    free = ~world.static_mask
    if not free[goal[1], goal[0]]:
        raise EndpointBlockedError(f"goal {tuple(goal)} is statically occupied")
    height, width = free.shape
    rng = np.random.default_rng(config.seed & (2**64 - 1))
    q_action = rng.uniform(0.0, config.init_scale, size=(height, width, NUM_ACTIONS))

    # Octile distance to goal for every cell, as the shaping potential
    # phi(target) = -dist(target)/D_max * init_scale.
    xs = np.arange(width)[None, :]
    ys = np.arange(height)[:, None]
    dx = np.abs(xs - goal.x)
    dy = np.abs(ys - goal.y)
    dist = np.maximum(dx, dy) + (np.sqrt(2.0) - 1.0) * np.minimum(dx, dy)
    phi = -dist / _max_octile_from(goal, width, height) * config.init_scale

    for a, (ox, oy) in enumerate(ACTION_OFFSETS):
        feasible = np.zeros((height, width), dtype=bool)
        tx0, tx1 = max(0, -ox), min(width, width - ox)
        ty0, ty1 = max(0, -oy), min(height, height - oy)
        feasible[ty0:ty1, tx0:tx1] = free[ty0 + oy : ty1 + oy, tx0 + ox : tx1 + ox]
        plane = q_action[:, :, a]
        plane[feasible] += phi[ty0 + oy : ty1 + oy, tx0 + ox : tx1 + ox][
            feasible[ty0:ty1, tx0:tx1]
        ]
        plane[~feasible] = SENTINEL

    q_action[~free] = SENTINEL
    q_density = np.full((height, width, 2), config.init_scale / 2.0)
    q_density[~free] = 0.0

    return QTables(
        width=width,
        height=height,
        goal=goal,
        q_action=q_action,
        q_density=q_density,
        free=free,
        index=SpatialIndex.from_world(world),
        update_counts=np.zeros((height, width), dtype=np.int64),
        selection_counts=np.zeros(NUM_ACTIONS, dtype=np.int64),
    )


def quantum_delta(
    m: np.ndarray, config: TrainConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Expand the 5 Z-measurements onto table updates.

    The first three measurements drive the 8 action deltas through the
    bitplane expansion (zero-mean over the action set); the last two scale
    directly into the density pair.
    """
    m = np.asarray(m, dtype=np.float64)
    delta_action = config.alpha_initial * (_BIT_SIGNS @ m[:3]) / 3.0
    delta_density = config.beta_density * m[3:5].copy()
    return delta_action, delta_density


def apply_update(tables: QTables, s: Cell, deltas: tuple[np.ndarray, np.ndarray]) -> None:
    """Add deltas to the rows at ``s``; sentinel entries stay untouched."""
    delta_action, delta_density = deltas
    row = tables.q_action[s[1], s[0]]
    live = row > _LIVE
    row[live] += delta_action[live]
    tables.q_density[s[1], s[0]] += delta_density


def select_action(
    tables: QTables, s: Cell, epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy over the feasible actions; greedy ties break to the
    lowest action index."""
    row = tables.action_row(s)
    feasible = np.nonzero(row > _LIVE)[0]
    if len(feasible) == 0:
        raise DeadEndError(f"no feasible action at {tuple(s)}")
    if rng.random() < epsilon:
        return int(feasible[rng.integers(len(feasible))])
    return int(feasible[np.argmax(row[feasible])])


def smooth_neighbors(tables: QTables, s: Cell, config: TrainConfig) -> None:
    """Blend neighbor rows toward the row at ``s`` (Q-value smoothing).

    Only entries live on both sides take part, so blocked-action sentinels
    are never a blend source or target. Neighbors come back from the spatial
    index in row-major order.
    """
    beta = config.beta_smooth
    if beta == 0.0:
        return
    src = tables.q_action[s[1], s[0]]
    src_live = src > _LIVE
    for n in neighbors_within(tables.index, s, config.smooth_radius):
        row = tables.q_action[n[1], n[0]]
        mask = src_live & (row > _LIVE)
        row[mask] = (1.0 - beta) * row[mask] + beta * src[mask]


def _normalized_action_row(row: np.ndarray) -> np.ndarray:
    """Min-max the live entries to [0, 1]; sentinels map to 0; degenerate
    rows fall back to a uniform vector."""
    live = row > _LIVE
    if not live.any():
        return np.ones(NUM_ACTIONS)
    vals = row[live]
    lo, hi = vals.min(), vals.max()
    out = np.zeros(NUM_ACTIONS)
    if hi > lo:
        out[live] = (vals - lo) / (hi - lo)
    else:
        out[live] = 1.0
    if not out.any():
        out[live] = 1.0
    return out


def _normalized_density_row(row: np.ndarray) -> np.ndarray:
    lo, hi = row.min(), row.max()
    if hi > lo:
        return (row - lo) / (hi - lo)
    return np.ones(2)


class _SweepContext:
    """Per-training caches: the compiled critic and the neighbor lists
    (index arrays) every smoothing pass reuses."""

    def __init__(self, tables: QTables, config: TrainConfig, params: CircuitParams):
        self.critic = TurnCritic(params)
        self.config = config
        self._neighbor_idx: dict[Cell, tuple[np.ndarray, np.ndarray]] = {}
        self._tables = tables

    def neighbor_indices(self, s: Cell) -> tuple[np.ndarray, np.ndarray]:
        cached = self._neighbor_idx.get(s)
        if cached is None:
            cells = neighbors_within(self._tables.index, s, self.config.smooth_radius)
            cached = (
                np.fromiter((c.y for c in cells), dtype=np.intp, count=len(cells)),
                np.fromiter((c.x for c in cells), dtype=np.intp, count=len(cells)),
            )
            self._neighbor_idx[s] = cached
        return cached


def _smooth_fast(tables: QTables, s: Cell, ctx: _SweepContext) -> None:
    """Vectorized :func:`smooth_neighbors`: identical arithmetic, with the
    neighbor rows gathered and written back in one fancy-indexed batch."""
    beta = ctx.config.beta_smooth
    src = tables.q_action[s[1], s[0]]
    src_live = src > _LIVE
    ys, xs = ctx.neighbor_indices(s)
    if len(ys) == 0:
        return
    rows = tables.q_action[ys, xs]
    mask = src_live[None, :] & (rows > _LIVE)
    blended = np.where(mask, (1.0 - beta) * rows + beta * src[None, :], rows)
    tables.q_action[ys, xs] = blended


def _update_cell(
    tables: QTables,
    world: OccupancyWorld,
    s: Cell,
    config: TrainConfig,
    ctx: _SweepContext,
    rng: np.random.Generator,
) -> Optional[int]:
    """Run the per-cell pipeline; returns the auxiliary action choice, or
    None for isolated cells where no action is feasible."""
    tf = turn_feature(world, s, config.window_radius)
    q_row = _normalized_action_row(tables.action_row(s))
    d_row = _normalized_density_row(tables.density_row(s))
    m = ctx.critic.measure(q_row, d_row, tf)
    apply_update(tables, s, quantum_delta(m, config))
    try:
        a = select_action(tables, s, config.epsilon, rng)
        tables.selection_counts[a] += 1
    except DeadEndError:
        a = None
    _smooth_fast(tables, s, ctx)
    tables.update_counts[s[1], s[0]] += 1
    return a


def train(
    world: OccupancyWorld,
    goal: Cell,
    config: TrainConfig,
    params: Optional[CircuitParams] = None,
) -> QTables:
    """One-shot quantum-assisted training against a static snapshot.

    Sweep mode (default) visits every free cell once per episode in
    row-major order; trajectory mode instead walks epsilon-greedy episodes
    from random free starts. Deterministic for a given config seed.
    """
    params = params or CircuitParams()
    static = world.static_snapshot()
    tables = init_tables(static, goal, config)
    ctx = _SweepContext(tables, config, params)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed & (2**64 - 1), 1]))
    cells = tables.free_cells()
    for _ in range(config.episodes):
        if config.mode == "sweep":
            for s in cells:
                _update_cell(tables, static, s, config, ctx, rng)
        else:
            s = cells[int(rng.integers(len(cells)))]
            for _ in range(config.trajectory_max_steps):
                a = _update_cell(tables, static, s, config, ctx, rng)
                if a is None:
                    break  # isolated start, nowhere to walk
                ox, oy = ACTION_OFFSETS[a]
                s = Cell(s.x + ox, s.y + oy)
                if s == goal:
                    break
    return tables


# --------------------------------------------------------------------------
# serialization

TABLES_VERSION = 1


def save_tables(tables: QTables, path: str | Path) -> None:
    cells = tables.free_cells()
    doc = {
        "version": TABLES_VERSION,
        "width": tables.width,
        "height": tables.height,
        "goal": [tables.goal.x, tables.goal.y],
        "cells": [[c.x, c.y] for c in cells],
        "q_action": [tables.q_action[c.y, c.x].tolist() for c in cells],
        "q_density": [tables.q_density[c.y, c.x].tolist() for c in cells],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_tables(path: str | Path) -> QTables:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"{p}: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}")
    for key in ("version", "width", "height", "goal", "cells", "q_action", "q_density"):
        if key not in doc:
            raise ParseError(f"{p}: missing field '{key}'")
    if doc["version"] != TABLES_VERSION:
        raise ParseError(f"{p}: unsupported tables version {doc['version']}")
    width, height = doc["width"], doc["height"]
    free = np.zeros((height, width), dtype=bool)
    q_action = np.full((height, width, NUM_ACTIONS), SENTINEL)
    q_density = np.zeros((height, width, 2))
    cells = [Cell(x, y) for x, y in doc["cells"]]
    if len(doc["q_action"]) != len(cells) or len(doc["q_density"]) != len(cells):
        raise ParseError(f"{p}: row count does not match cell count")
    for c, qa, qd in zip(cells, doc["q_action"], doc["q_density"]):
        free[c.y, c.x] = True
        q_action[c.y, c.x] = qa
        q_density[c.y, c.x] = qd
    return QTables(
        width=width,
        height=height,
        goal=Cell(*doc["goal"]),
        q_action=q_action,
        q_density=q_density,
        free=free,
        index=SpatialIndex.from_cells(cells),
        update_counts=np.zeros((height, width), dtype=np.int64),
        selection_counts=np.zeros(NUM_ACTIONS, dtype=np.int64),
    )
