import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qpath.grid import Cell, OccupancyWorld


def make_world(mask, obstacles=()) -> OccupancyWorld:
    mask = np.asarray(mask, dtype=bool)
    return OccupancyWorld(
        width=mask.shape[1],
        height=mask.shape[0],
        static_mask=mask,
        obstacles=tuple(obstacles),
        tick=0,
    )


def empty_world(width: int, height: int, obstacles=()) -> OccupancyWorld:
    return make_world(np.zeros((height, width), dtype=bool), obstacles)


@pytest.fixture
def world_10x10():
    return empty_world(10, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def cells(*pairs):
    return tuple(Cell(x, y) for x, y in pairs)
