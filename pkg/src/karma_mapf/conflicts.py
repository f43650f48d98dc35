"""Timed trajectories, space-time occupancy, and vertex/edge conflict detection.

An agent occupies its first cell before ``start_time`` and its final cell
forever after the last pose (stay-at-target).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Set, Tuple, Union

from .world import Cell, GridMap, Pose, action_between

INF = float("inf")


@dataclass(frozen=True)
class Trajectory:
    agent_id: int
    start_time: int
    poses: Tuple[Pose, ...]

    def __post_init__(self) -> None:
        if not self.poses:
            raise ValueError("trajectory needs at least one pose")
        object.__setattr__(self, "poses", tuple(self.poses))

    @property
    def cost(self) -> int:
        return len(self.poses) - 1

    @property
    def end_time(self) -> int:
        return self.start_time + len(self.poses) - 1

    @property
    def first(self) -> Pose:
        return self.poses[0]

    @property
    def last(self) -> Pose:
        return self.poses[-1]

    def pose_at(self, t: int) -> Pose:
        i = t - self.start_time
        if i <= 0:
            return self.poses[0]
        if i >= len(self.poses):
            return self.poses[-1]
        return self.poses[i]

    def cell_at(self, t: int) -> Cell:
        return self.pose_at(t).cell

    def advance(self) -> "Trajectory":
        """Drop the executed first step; a finished trajectory just shifts in time."""
        return Trajectory(self.agent_id, self.start_time + 1, self.poses[1:] or self.poses)

    def is_valid(self, grid: GridMap) -> bool:
        if not all(grid.traversable(p.cell) for p in self.poses):
            return False
        return all(action_between(a, b) is not None for a, b in zip(self.poses, self.poses[1:]))

    @classmethod
    def parked(cls, agent_id: int, pose: Pose, t: int) -> "Trajectory":
        return cls(agent_id, t, (pose,))


class VertexConflict(NamedTuple):
    cell: Cell


class EdgeConflict(NamedTuple):
    cell_from: Cell
    cell_to: Cell


@dataclass(frozen=True)
class Conflict:
    """``agent_a`` is the trajectory under test; edge cells are given in ``agent_a``'s direction."""

    agent_a: int
    agent_b: int
    time: int
    kind: Union[VertexConflict, EdgeConflict]

    @property
    def is_vertex(self) -> bool:
        return isinstance(self.kind, VertexConflict)


def _pair_conflicts(a: Trajectory, b: Trajectory) -> List[Conflict]:
    lo = min(a.start_time, b.start_time)
    hi = max(a.end_time, b.end_time)
    out = []
    prev_a = a.cell_at(lo)
    prev_b = b.cell_at(lo)
    if prev_a == prev_b:
        out.append(Conflict(a.agent_id, b.agent_id, lo, VertexConflict(prev_a)))
    for t in range(lo + 1, hi + 1):
        ca = a.cell_at(t)
        cb = b.cell_at(t)
        if ca == prev_b and cb == prev_a and ca != cb:
            out.append(Conflict(a.agent_id, b.agent_id, t - 1, EdgeConflict(prev_a, ca)))
        if ca == cb:
            out.append(Conflict(a.agent_id, b.agent_id, t, VertexConflict(ca)))
        prev_a, prev_b = ca, cb
    return out


def detect_conflicts(candidate: Trajectory, others: Iterable[Trajectory]) -> List[Conflict]:
    """All vertex and edge conflicts of ``candidate`` against ``others``, sorted by (time, other id).

    Time runs over the union of each pair's active ranges; a shared parking
    cell after both finish is reported once, at the first time it is shared.
    """
    out: List[Conflict] = []
    for other in others:
        if other.agent_id == candidate.agent_id:
            continue
        out.extend(_pair_conflicts(candidate, other))
    out.sort(key=lambda c: (c.time, c.agent_b, 0 if c.is_vertex else 1))
    return out


class ReservationTable:
    """Space-time occupancy index of registered trajectories.

    ``vertex`` maps (cell, t) to the agents there, ``edge`` maps
    (from, to, t) to agents moving from ``from`` at t to ``to`` at t+1, and
    ``terminal`` maps a cell to the agents parked there with their arrival
    time. Vertex entries cover ``[since, end_time]`` where ``since`` defaults
    to the trajectory's start time.
    """

    def __init__(self) -> None:
        self.vertex: Dict[Tuple[Cell, int], Set[int]] = {}
        self.edge: Dict[Tuple[Cell, Cell, int], Set[int]] = {}
        self.terminal: Dict[Cell, Dict[int, int]] = {}
        self._registered: Dict[int, Tuple[Trajectory, int]] = {}
        self._static_from = 0

    def __contains__(self, agent_id: int) -> bool:
        return agent_id in self._registered

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReservationTable):
            return NotImplemented
        return (self.vertex, self.edge, self.terminal) == (other.vertex, other.edge, other.terminal)

    @classmethod
    def from_trajectories(cls, trajs: Iterable[Trajectory], since: Optional[int] = None) -> "ReservationTable":
        table = cls()
        for tr in trajs:
            table.register(tr, since)
        return table

    def register(self, traj: Trajectory, since: Optional[int] = None) -> None:
        aid = traj.agent_id
        if aid in self._registered:
            raise ValueError(f"agent {aid} already registered")
        lo = traj.start_time if since is None else min(since, traj.start_time)
        self._registered[aid] = (traj, lo)
        for t in range(lo, traj.end_time + 1):
            self.vertex.setdefault((traj.cell_at(t), t), set()).add(aid)
        for t in range(traj.start_time, traj.end_time):
            u, v = traj.cell_at(t), traj.cell_at(t + 1)
            if u != v:
                self.edge.setdefault((u, v, t), set()).add(aid)
        self.terminal.setdefault(traj.last.cell, {})[aid] = traj.end_time
        self._static_from = max(self._static_from, traj.end_time)

    def deregister(self, agent_id: int) -> Trajectory:
        if agent_id not in self._registered:
            raise KeyError(f"agent {agent_id} not registered")
        traj, lo = self._registered.pop(agent_id)
        for t in range(lo, traj.end_time + 1):
            key = (traj.cell_at(t), t)
            self.vertex[key].discard(agent_id)
            if not self.vertex[key]:
                del self.vertex[key]
        for t in range(traj.start_time, traj.end_time):
            key = (traj.cell_at(t), traj.cell_at(t + 1), t)
            if key in self.edge:
                self.edge[key].discard(agent_id)
                if not self.edge[key]:
                    del self.edge[key]
        parked = self.terminal[traj.last.cell]
        del parked[agent_id]
        if not parked:
            del self.terminal[traj.last.cell]
        self._static_from = max((tr.end_time for tr, _ in self._registered.values()), default=0)
        return traj

    # --- queries used by the planner -------------------------------------------------

    def vertex_free(self, cell: Cell, t: int) -> bool:
        if (cell, t) in self.vertex:
            return False
        parked = self.terminal.get(cell)
        return not parked or t < min(parked.values())

    def edge_free(self, u: Cell, v: Cell, t: int) -> bool:
        """Moving u -> v during (t, t+1) does not swap with anyone."""
        return (v, u, t) not in self.edge

    def is_free(self, cell: Cell, t: int) -> bool:
        return self.vertex_free(cell, t)

    def goal_clear_from(self, cell: Cell) -> float:
        """Earliest time from which ``cell`` stays free forever (inf if someone parks there)."""
        if cell in self.terminal:
            return INF
        last = -1
        for tr, lo in self._registered.values():
            for t in range(lo, tr.end_time + 1):
                if tr.cell_at(t) == cell:
                    last = max(last, t)
        return last + 1

    @property
    def static_from(self) -> int:
        """From this time on the occupancy no longer changes."""
        return self._static_from
