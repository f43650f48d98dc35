"""Centralised Conflict-Based Search and a joint-state brute-force checker.

Both solve one-shot instances (all agents start at t=0) under the same
semantics as the decentralised planners: an agent's cost is the time it
reaches its goal for good, after which it keeps occupying the goal cell.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

from .conflicts import EdgeConflict, Trajectory, detect_conflicts
from .planner import AstarCounter, search
from .world import Cell, GridMap, Pose, ahead, unconstrained_cost


class GuardViolation(ValueError):
    """Instance too large for exhaustive joint search."""


class CbsConstraint(NamedTuple):
    """Agent must not be on ``cell`` at ``t`` (vertex) or move ``cell`` -> ``to`` during (t, t+1) (edge)."""

    agent: int
    cell: Cell
    t: int
    to: Optional[Cell] = None

    @property
    def is_edge(self) -> bool:
        return self.to is not None


class _AgentConstraints:
    def __init__(self, constraints: Sequence[CbsConstraint]):
        self.vertex = {(c.cell, c.t) for c in constraints if not c.is_edge}
        self.edges = {(c.cell, c.to, c.t) for c in constraints if c.is_edge}
        self.static_from = max((c.t + 1 for c in constraints), default=0)

    def vertex_free(self, cell: Cell, t: int) -> bool:
        return (cell, t) not in self.vertex

    def edge_free(self, u: Cell, v: Cell, t: int) -> bool:
        return (u, v, t) not in self.edges

    def goal_clear_from(self, cell: Cell) -> float:
        return max((t + 1 for c, t in self.vertex if c == cell), default=0)


@dataclass
class CtNode:
    constraints: FrozenSet[CbsConstraint]
    solution: Dict[int, Trajectory]
    cost: int
    parent: Optional["CtNode"] = None

    def first_conflict(self):
        """Earliest conflict over all agent pairs, ties by agent ids."""
        best = None
        ids = sorted(self.solution)
        for a, b in itertools.combinations(ids, 2):
            cs = detect_conflicts(self.solution[a], [self.solution[b]])
            if cs and (best is None or (cs[0].time, a, b) < (best.time, best.agent_a, best.agent_b)):
                best = cs[0]
        return best


@dataclass
class CbsResult:
    status: str  # "optimal", "no_solution" or "node_limit"
    solution: Optional[List[Trajectory]] = None
    cost: Optional[int] = None
    expanded: int = 0
    generated: int = 0
    cost_pairs: List[Tuple[int, int]] = field(default_factory=list)  # (parent cost, child cost)

    @property
    def solved(self) -> bool:
        return self.status == "optimal"


def _low_level(grid: GridMap, agent: int, start: Pose, goal: Cell, horizon: int,
               constraints: FrozenSet[CbsConstraint], counter: Optional[AstarCounter]) -> Optional[Trajectory]:
    if counter is not None:
        counter.tick()
    mine = [c for c in constraints if c.agent == agent]
    return search(grid, start, 0, goal, horizon, _AgentConstraints(mine), agent)


def cbs_solve(grid: GridMap, starts: Sequence[Pose], goals: Sequence[Cell], horizon: int = 16,
              counter: Optional[AstarCounter] = None, max_nodes: int = 200_000) -> CbsResult:
    """Sum-of-costs optimal joint plan by best-first search over the constraint tree.

    Branches on the earliest conflict; equal-cost nodes are ordered by fewer
    constraints, then creation order.
    """
    starts = [Pose(tuple(s.cell), s.heading) for s in starts]
    goals = [tuple(g) for g in goals]
    if len(set(s.cell for s in starts)) != len(starts):
        raise ValueError("start cells must be distinct")
    root_sol = {}
    for a, (s, g) in enumerate(zip(starts, goals)):
        tr = _low_level(grid, a, s, g, horizon, frozenset(), counter)
        if tr is None:
            return CbsResult("no_solution")
        root_sol[a] = tr
    root = CtNode(frozenset(), root_sol, sum(t.cost for t in root_sol.values()))
    fifo = itertools.count()
    open_list = [(root.cost, 0, next(fifo), root)]
    result = CbsResult("no_solution", generated=1)
    while open_list:
        _, _, _, node = heapq.heappop(open_list)
        result.expanded += 1
        conflict = node.first_conflict()
        if conflict is None:
            result.status = "optimal"
            result.solution = [node.solution[a] for a in sorted(node.solution)]
            result.cost = node.cost
            return result
        if result.expanded >= max_nodes:
            result.status = "node_limit"
            return result
        a, b, t = conflict.agent_a, conflict.agent_b, conflict.time
        if isinstance(conflict.kind, EdgeConflict):
            u, v = conflict.kind
            branches = [CbsConstraint(a, u, t, v), CbsConstraint(b, v, t, u)]
        else:
            cell = conflict.kind.cell
            branches = [CbsConstraint(a, cell, t), CbsConstraint(b, cell, t)]
        for con in branches:
            if con in node.constraints:
                continue
            cons = node.constraints | {con}
            ag = con.agent
            tr = _low_level(grid, ag, starts[ag], goals[ag], horizon, cons, counter)
            if tr is None:
                continue
            sol = dict(node.solution)
            sol[ag] = tr
            child = CtNode(cons, sol, node.cost - node.solution[ag].cost + tr.cost, node)
            result.generated += 1
            result.cost_pairs.append((node.cost, child.cost))
            heapq.heappush(open_list, (child.cost, len(cons), next(fifo), child))
    return result


def joint_brute_force(grid: GridMap, starts: Sequence[Pose], goals: Sequence[Cell], horizon: int = 16,
                      max_agents: int = 3, max_cells: int = 36) -> Optional[int]:
    """Optimal sum-of-costs by search over the joint (time, poses, finished) space.

    Each step every unfinished agent picks an action; an agent standing on
    its goal may finish (zero cost) and then never moves again. Step cost is
    the number of unfinished agents. The heuristic (sum of single-agent
    shortest paths of unfinished agents) is consistent, so the first goal
    popped is optimal. Returns None when no joint plan exists within horizon.
    """
    n = len(starts)
    if n > max_agents or grid.area > max_cells:
        raise GuardViolation(f"joint search limited to {max_agents} agents and {max_cells} cells "
                             f"(got {n} agents, {grid.area} cells)")
    goals = [tuple(g) for g in goals]
    init = tuple((tuple(s.cell), int(s.heading)) for s in starts)
    if len({p[0] for p in init}) != n:
        raise ValueError("start cells must be distinct")
    hcache: Dict[Tuple[int, Tuple], int] = {}

    def h_agent(k, pose):
        key = (k, pose)
        if key not in hcache:
            d = unconstrained_cost(grid, Pose(pose[0], pose[1]), goals[k])
            hcache[key] = 10 ** 6 if d is None else d
        return hcache[key]

    def heuristic(poses, done):
        return sum(h_agent(k, p) for k, p in enumerate(poses) if not done[k])

    def options(k, pose):
        cell, hd = pose
        out = [pose]
        fwd = ahead(cell, hd)
        if grid.traversable(fwd):
            out.append((fwd, hd))
        out.append((cell, (hd + 1) % 4))
        out.append((cell, (hd + 3) % 4))
        return out

    start = (0, init, (False,) * n)
    tie = itertools.count()
    heap = [(heuristic(init, start[2]), 0, next(tie), start)]
    best_g = {start: 0}
    while heap:
        f, g, _, state = heapq.heappop(heap)
        if best_g.get(state, None) != g:
            continue
        t, poses, done = state
        if all(done):
            return g
        # finishing is a zero-cost move for any unfinished agent on its goal
        for k in range(n):
            if not done[k] and poses[k][0] == goals[k]:
                nd = done[:k] + (True,) + done[k + 1:]
                ns = (t, poses, nd)
                if g < best_g.get(ns, 10 ** 9):
                    best_g[ns] = g
                    heapq.heappush(heap, (g + heuristic(poses, nd), g, next(tie), ns))
        if t >= horizon:
            continue
        active = n - sum(done)
        per_agent = [[poses[k]] if done[k] else options(k, poses[k]) for k in range(n)]
        for combo in itertools.product(*per_agent):
            cells = [p[0] for p in combo]
            if len(set(cells)) != n:
                continue
            swap = False
            for x in range(n):
                for y in range(x + 1, n):
                    if cells[x] == poses[y][0] and cells[y] == poses[x][0] and cells[x] != cells[y]:
                        swap = True
            if swap:
                continue
            ns = (t + 1, combo, done)
            ng = g + active
            if ng < best_g.get(ns, 10 ** 9):
                best_g[ns] = ng
                heapq.heappush(heap, (ng + heuristic(combo, done), ng, next(tie), ns))
    return None
