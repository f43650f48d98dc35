"""Grid world with orientation-aware kinematics.

Coordinates: origin at the top-left corner of the bordered area, ``x`` grows
east and ``y`` grows south. The interior occupies
``[border, border + interior_width) x [border, border + interior_height)``.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, Iterator, List, NamedTuple, Optional, Tuple

Cell = Tuple[int, int]


class Heading(enum.IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3

    def cw(self) -> "Heading":
        return Heading((self + 1) % 4)

    def ccw(self) -> "Heading":
        return Heading((self + 3) % 4)

    @property
    def vector(self) -> Cell:
        return _STEP[self]


_STEP: Tuple[Cell, ...] = ((0, -1), (1, 0), (0, 1), (-1, 0))


class Action(enum.IntEnum):
    WAIT = 0
    FORWARD = 1
    ROTATE_CW = 2
    ROTATE_CCW = 3


class Pose(NamedTuple):
    cell: Cell
    heading: Heading

    def __repr__(self) -> str:
        return f"Pose({self.cell}, {self.heading.name})"


@dataclass(frozen=True)
class GridMap:
    interior_width: int
    interior_height: int
    border_width: int = 1
    blocked: FrozenSet[Cell] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.interior_width < 1 or self.interior_height < 1:
            raise ValueError("interior dimensions must be positive")
        if self.border_width < 0:
            raise ValueError("border_width must be non-negative")
        object.__setattr__(self, "blocked", frozenset(tuple(c) for c in self.blocked))
        for c in self.blocked:
            if not self.in_bounds(c):
                raise ValueError(f"blocked cell {c} outside the map")

    @property
    def width(self) -> int:
        return self.interior_width + 2 * self.border_width

    @property
    def height(self) -> int:
        return self.interior_height + 2 * self.border_width

    @property
    def area(self) -> int:
        return self.width * self.height - len(self.blocked)

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def traversable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.blocked

    def in_interior(self, cell: Cell) -> bool:
        x, y = cell
        b = self.border_width
        return b <= x < b + self.interior_width and b <= y < b + self.interior_height

    def cells(self) -> Iterator[Cell]:
        for y in range(self.height):
            for x in range(self.width):
                if (x, y) not in self.blocked:
                    yield (x, y)

    def interior_cells(self) -> List[Cell]:
        return [c for c in self.cells() if self.in_interior(c)]

    def poses(self) -> Iterator[Pose]:
        for c in self.cells():
            for h in Heading:
                yield Pose(c, h)


def ahead(cell: Cell, heading: int) -> Cell:
    dx, dy = _STEP[heading]
    return (cell[0] + dx, cell[1] + dy)


def apply_action(pose: Pose, action: Action) -> Pose:
    """Pose after ``action``; does not check traversability."""
    if action == Action.WAIT:
        return pose
    if action == Action.FORWARD:
        return Pose(ahead(pose.cell, pose.heading), pose.heading)
    if action == Action.ROTATE_CW:
        return Pose(pose.cell, pose.heading.cw())
    return Pose(pose.cell, pose.heading.ccw())


def successors(grid: GridMap, pose: Pose) -> List[Tuple[Action, Pose]]:
    """Legal one-step moves in the fixed order Wait, Forward, RotateCW, RotateCCW."""
    out = [(Action.WAIT, pose)]
    nxt = ahead(pose.cell, pose.heading)
    if grid.traversable(nxt):
        out.append((Action.FORWARD, Pose(nxt, pose.heading)))
    out.append((Action.ROTATE_CW, Pose(pose.cell, pose.heading.cw())))
    out.append((Action.ROTATE_CCW, Pose(pose.cell, pose.heading.ccw())))
    return out


def action_between(a: Pose, b: Pose) -> Optional[Action]:
    """The single action taking ``a`` to ``b``, or None if there is none."""
    if a == b:
        return Action.WAIT
    if a.cell == b.cell:
        if b.heading == a.heading.cw():
            return Action.ROTATE_CW
        if b.heading == a.heading.ccw():
            return Action.ROTATE_CCW
        return None
    if a.heading == b.heading and ahead(a.cell, a.heading) == b.cell:
        return Action.FORWARD
    return None


def free_space_cost(cell: Cell, heading: int, goal: Cell) -> int:
    """Exact step count to reach ``goal`` on an obstacle-free unbounded grid.

    Manhattan distance plus the rotations needed to cover every required
    travel direction. A lower bound on any map, hence an admissible and
    consistent A* heuristic.
    """
    dx = goal[0] - cell[0]
    dy = goal[1] - cell[1]
    if dx == 0 and dy == 0:
        return 0
    need = []
    if dx > 0:
        need.append(1)
    elif dx < 0:
        need.append(3)
    if dy > 0:
        need.append(2)
    elif dy < 0:
        need.append(0)
    dist = abs(dx) + abs(dy)
    if len(need) == 1:
        turn = (need[0] - heading) % 4
        return dist + (2 if turn == 2 else 1 if turn else 0)
    return dist + (1 if heading in need else 2)


@lru_cache(maxsize=4096)
def _distance_field(grid: GridMap, goal: Cell) -> Dict[Pose, int]:
    # reverse BFS: predecessors of (c, h) are (c, h) [wait], (c - v(h), h), (c, h +/- 1)
    dist: Dict[Pose, int] = {}
    queue: deque = deque()
    for h in Heading:
        p = Pose(goal, h)
        dist[p] = 0
        queue.append(p)
    while queue:
        p = queue.popleft()
        d = dist[p] + 1
        dx, dy = _STEP[p.heading]
        back = (p.cell[0] - dx, p.cell[1] - dy)
        preds = [Pose(p.cell, p.heading.ccw()), Pose(p.cell, p.heading.cw())]
        if grid.traversable(back):
            preds.insert(0, Pose(back, p.heading))
        for q in preds:
            if q not in dist:
                dist[q] = d
                queue.append(q)
    return dist


def unconstrained_cost(grid: GridMap, start: Pose, goal_cell: Cell) -> Optional[int]:
    """Fewest time steps from ``start`` to any pose on ``goal_cell``, ignoring other agents.

    Returns None when the goal cannot be reached.
    """
    if not grid.traversable(goal_cell):
        return None
    return _distance_field(grid, tuple(goal_cell)).get(Pose(tuple(start.cell), Heading(start.heading)))
