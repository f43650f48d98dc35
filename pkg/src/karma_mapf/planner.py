"""Space-time A* over the kinematic grid graph with reservation constraints."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional, Protocol, Tuple

from .conflicts import INF, ReservationTable, Trajectory
from .world import Cell, GridMap, Heading, Pose, free_space_cost

_DX = (0, 1, 0, -1)
_DY = (-1, 0, 1, 0)


class Blocker(Protocol):
    def vertex_free(self, cell: Cell, t: int) -> bool: ...

    def edge_free(self, u: Cell, v: Cell, t: int) -> bool: ...

    def goal_clear_from(self, cell: Cell) -> float: ...

    @property
    def static_from(self) -> int: ...


class AstarCounter:
    """Counts planner invocations, the runtime metric of an episode."""

    def __init__(self) -> None:
        self.count = 0

    def tick(self) -> None:
        self.count += 1

    def __repr__(self) -> str:
        return f"AstarCounter({self.count})"


def default_horizon(grid: GridMap) -> int:
    return 4 * (grid.width + grid.height)


@dataclass(frozen=True)
class SearchQuery:
    start: Pose
    start_time: int
    goal_cell: Cell
    avoid: Tuple[Trajectory, ...] = ()
    horizon: int = 0  # 0 -> default_horizon(map)

    def __post_init__(self) -> None:
        object.__setattr__(self, "avoid", tuple(self.avoid))
        object.__setattr__(self, "goal_cell", tuple(self.goal_cell))
        if self.horizon < 0:
            raise ValueError("horizon must be >= 1")


def plan(grid: GridMap, query: SearchQuery, counter: Optional[AstarCounter] = None,
         agent_id: int = -1) -> Optional[Trajectory]:
    """Minimum-cost conflict-free trajectory to ``query.goal_cell``, or None (no path).

    The counter is incremented exactly once per call.
    """
    if counter is not None:
        counter.tick()
    table = ReservationTable.from_trajectories(
        (tr for tr in query.avoid if tr.agent_id != agent_id or agent_id < 0), since=query.start_time
    )
    horizon = query.horizon or default_horizon(grid)
    return search(grid, query.start, query.start_time, query.goal_cell, horizon, table, agent_id)


def search(grid: GridMap, start: Pose, start_time: int, goal: Cell, horizon: int,
           blocker: Blocker, agent_id: int = -1) -> Optional[Trajectory]:
    """A* on (cell, heading, time) with the free-space kinematic heuristic.

    Ties on f prefer deeper nodes, then action order, then insertion order.
    Past ``blocker.static_from`` nothing changes, so states collapse their
    time coordinate there: an earlier arrival at a pose dominates a later one.
    """
    goal = tuple(goal)
    clear_from = blocker.goal_clear_from(goal)
    if clear_from == INF or not grid.traversable(goal):
        return None
    static_from = blocker.static_from
    traversable = grid.traversable
    vertex_free = blocker.vertex_free
    edge_free = blocker.edge_free
    t_limit = start_time + horizon

    sx, sy = start.cell
    sh = int(start.heading)
    start_key = (sx, sy, sh, start_time if start_time < static_from else static_from)
    parents = {}
    heap = [(free_space_cost((sx, sy), sh, goal), 0, 0, start_key, start_time, None)]
    tie = 0
    while heap:
        _, _, _, key, t, parent = heapq.heappop(heap)
        if key in parents:
            continue
        parents[key] = parent
        x, y, h, _ = key
        if x == goal[0] and y == goal[1] and t >= clear_from:
            return _rebuild(parents, key, start_time, agent_id)
        if t >= t_limit:
            continue
        nt = t + 1
        tk = nt if nt < static_from else static_from
        g = nt - start_time
        cell = (x, y)
        fx, fy = x + _DX[h], y + _DY[h]
        # fixed action order: Wait, Forward, RotateCW, RotateCCW
        for i, nx, ny, nh in ((0, x, y, h), (1, fx, fy, h), (2, x, y, (h + 1) % 4), (3, x, y, (h + 3) % 4)):
            ncell = (nx, ny)
            if i == 1 and (not traversable(ncell) or not edge_free(cell, ncell, t)):
                continue
            nkey = (nx, ny, nh, tk)
            if nkey in parents or not vertex_free(ncell, nt):
                continue
            tie += 1
            heapq.heappush(heap, (g + free_space_cost(ncell, nh, goal), -g, tie, nkey, nt, key))
    return None


def _rebuild(parents, key, start_time: int, agent_id: int) -> Trajectory:
    keys = []
    while key is not None:
        keys.append(key)
        key = parents[key]
    keys.reverse()
    poses = tuple(Pose((k[0], k[1]), Heading(k[2])) for k in keys)
    return Trajectory(agent_id, start_time, poses)
