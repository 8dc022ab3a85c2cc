"""k-d tree over the statically free cells, for radius neighbor queries.

Q-value smoothing repeatedly asks "which free cells sit within radius r of
this one"; a 2-d tree answers that without scanning the whole grid. Results
are returned in row-major order so every consumer sees a deterministic
sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import Cell, OccupancyWorld


class _Node:
    __slots__ = ("point", "left", "right")

    def __init__(self, point: Cell, left: "Optional[_Node]", right: "Optional[_Node]"):
        self.point = point
        self.left = left
        self.right = right


def _build(points: np.ndarray, depth: int) -> Optional[_Node]:
    n = len(points)
    if n == 0:
        return None
    axis = depth % 2
    order = np.argsort(points[:, axis], kind="stable")
    points = points[order]
    mid = n // 2
    return _Node(
        Cell(int(points[mid, 0]), int(points[mid, 1])),
        _build(points[:mid], depth + 1),
        _build(points[mid + 1 :], depth + 1),
    )


@dataclass
class SpatialIndex:
    """2-d tree over all statically free cells of a world."""

    root: Optional[_Node]
    size: int

    @classmethod
    def from_world(cls, world: OccupancyWorld) -> "SpatialIndex":
        ys, xs = np.nonzero(~world.static_mask)
        pts = np.column_stack([xs, ys]).astype(np.int64)
        return cls(root=_build(pts, 0), size=len(pts))

    @classmethod
    def from_cells(cls, cells: list[Cell]) -> "SpatialIndex":
        pts = np.array([[c.x, c.y] for c in cells], dtype=np.int64).reshape(-1, 2)
        return cls(root=_build(pts, 0), size=len(pts))

    def within_radius(self, center: Cell, radius: float) -> list[Cell]:
        """All indexed cells with Euclidean distance <= radius of ``center``
        (the center itself included when indexed), unordered."""
        out: list[Cell] = []
        r2 = radius * radius
        cx, cy = center

        def visit(node: Optional[_Node], depth: int) -> None:
            if node is None:
                return
            px, py = node.point
            if (px - cx) ** 2 + (py - cy) ** 2 <= r2:
                out.append(node.point)
            axis = depth % 2
            delta = (cx - px) if axis == 0 else (cy - py)
            near, far = (node.left, node.right) if delta < 0 else (node.right, node.left)
            visit(near, depth + 1)
            if delta * delta <= r2:
                visit(far, depth + 1)

        visit(self.root, 0)
        return out


def neighbors_within(index: SpatialIndex, s: Cell, r: float) -> list[Cell]:
    """Free cells c != s with Euclidean distance(c, s) <= r, row-major order."""
    if r <= 0:
        raise ValueError("radius must be positive")
    found = [c for c in index.within_radius(s, r) if c != s]
    found.sort(key=lambda c: (c.y, c.x))
    return found
