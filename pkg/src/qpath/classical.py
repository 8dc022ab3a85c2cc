"""Classical tabular Q-learning baseline.

Standard temporal-difference training over epsilon-greedy trajectories from
random free starts. No action masking: attempts into walls or obstacles are
penalized and leave the agent in place, exactly the failure mode that makes
this baseline slow to converge compared to the one-shot sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ACTION_COSTS, ACTION_OFFSETS, NUM_ACTIONS, Cell, OccupancyWorld


@dataclass(frozen=True)
class ClassicalConfig:
    learning_rate: float = 0.1
    discount: float = 0.95
    epsilon: float = 0.2
    reward_goal: float = 100.0
    penalty_collision: float = 10.0
    init_scale: float = 0.1
    max_steps: int = 0  # 0 = derive from grid size


@dataclass
class ClassicalQTable:
    """Action-value table plus the number of TD updates spent building it."""

    q: np.ndarray = field(repr=False)
    updates: int = 0
    goal: Cell = Cell(0, 0)


def _derive_max_steps(world: OccupancyWorld, config: ClassicalConfig) -> int:
    return config.max_steps or 4 * (world.width + world.height)


def train_classical_q(
    world: OccupancyWorld,
    goal: Cell,
    episodes: int,
    config: ClassicalConfig,
    rng: np.random.Generator,
) -> ClassicalQTable:
    """Train against the static snapshot for ``episodes`` trajectories."""
    static = world.static_snapshot()
    free = ~static.static_mask
    height, width = free.shape
    q = rng.uniform(0.0, config.init_scale, size=(height, width, NUM_ACTIONS))
    ys, xs = np.nonzero(free)
    starts = np.column_stack([xs, ys])
    max_steps = _derive_max_steps(world, config)
    updates = 0

    for _ in range(episodes):
        sx, sy = starts[rng.integers(len(starts))]
        s = Cell(int(sx), int(sy))
        for _ in range(max_steps):
            if rng.random() < config.epsilon:
                a = int(rng.integers(NUM_ACTIONS))
            else:
                a = int(np.argmax(q[s.y, s.x]))
            ox, oy = ACTION_OFFSETS[a]
            target = Cell(s.x + ox, s.y + oy)
            blocked = not (0 <= target.x < width and 0 <= target.y < height) or not free[
                target.y, target.x
            ]
            if blocked:
                reward, nxt = -config.penalty_collision, s
            elif target == goal:
                reward, nxt = config.reward_goal, target
            else:
                reward, nxt = -ACTION_COSTS[a], target
            td_target = reward + config.discount * float(np.max(q[nxt.y, nxt.x]))
            q[s.y, s.x, a] += config.learning_rate * (td_target - q[s.y, s.x, a])
            updates += 1
            s = nxt
            if s == goal:
                break
    return ClassicalQTable(q=q, updates=updates, goal=goal)


def greedy_rollout(
    table: ClassicalQTable, world: OccupancyWorld, start: Cell, max_steps: int = 0
) -> bool:
    """Follow the greedy policy from ``start``; True iff the goal is reached.

    Blocked attempts hold the agent in place, so a policy that points into a
    wall (or loops) simply burns its step budget and fails.
    """
    static = world.static_snapshot()
    free = ~static.static_mask
    height, width = free.shape
    budget = max_steps or 4 * (width + height)
    s = start
    for _ in range(budget):
        if s == table.goal:
            return True
        a = int(np.argmax(table.q[s.y, s.x]))
        ox, oy = ACTION_OFFSETS[a]
        target = Cell(s.x + ox, s.y + oy)
        if 0 <= target.x < width and 0 <= target.y < height and free[target.y, target.x]:
            s = target
    return s == table.goal
