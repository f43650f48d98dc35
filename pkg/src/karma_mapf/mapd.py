"""Lifelong multi-agent pickup-and-delivery simulation.

One step: spawn tasks, assign them, plan agents that need a plan, execute
one action per agent, register pickups and deliveries (planning the next
leg right away), advance the clock.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .conflicts import Trajectory
from .negotiation import (
    Mechanism,
    MechanismKind,
    NegotiationContext,
    reset_karma,
    resolve_agent,
    token_passing_plan,
)
from .planner import AstarCounter, default_horizon
from .world import Cell, GridMap, Heading, Pose, unconstrained_cost

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    """Executed moves collided. Never expected; signals a planning bug."""


class Phase(str, enum.Enum):
    IDLE = "idle"
    TO_PICKUP = "to_pickup"
    TO_DELIVERY = "to_delivery"


@dataclass
class Task:
    id: int
    pickup_cell: Cell
    delivery_cell: Cell
    spawn_t: int
    assign_t: Optional[int] = None
    pickup_t: Optional[int] = None
    deliver_t: Optional[int] = None
    agent_id: Optional[int] = None
    baseline: Optional[int] = None  # unconstrained pickup -> delivery cost

    @property
    def delivered(self) -> bool:
        return self.deliver_t is not None

    @property
    def task_time(self) -> Optional[int]:
        return None if self.deliver_t is None else self.deliver_t - self.assign_t

    @property
    def service_time(self) -> Optional[int]:
        return None if self.deliver_t is None else self.deliver_t - self.pickup_t

    @property
    def service_time_increase(self) -> Optional[int]:
        return None if self.deliver_t is None else self.service_time - self.baseline


@dataclass
class AgentRecord:
    id: int
    pose: Pose
    phase: Phase = Phase.IDLE
    task: Optional[Task] = None
    queued: Optional[Task] = None

    @property
    def target(self) -> Optional[Cell]:
        if self.phase == Phase.TO_PICKUP:
            return self.task.pickup_cell
        if self.phase == Phase.TO_DELIVERY:
            return self.task.delivery_cell
        return None


@dataclass
class SimConfig:
    interior_width: int = 10
    interior_height: int = 10
    agents: int = 8
    mechanism: str = "karma"
    tau: float = 0.5
    episode_length: int = 100
    task_rate: Optional[float] = None  # tasks per step; None -> 0.5 * agents
    seed: int = 0
    horizon: int = 0  # 0 -> 4 * (width + height) of the bordered map
    planning_order: str = "ascending"  # or "shuffle"
    max_pending: Optional[int] = None  # cap on unassigned tasks; None -> agents
    border_width: int = 1

    def __post_init__(self) -> None:
        if self.agents < 0 or self.episode_length < 0:
            raise ValueError("agents and episode_length must be non-negative")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.planning_order not in ("ascending", "shuffle"):
            raise ValueError(f"unknown planning_order {self.planning_order!r}")
        MechanismKind(self.mechanism)

    @property
    def grid(self) -> GridMap:
        return GridMap(self.interior_width, self.interior_height, self.border_width)

    @property
    def rate(self) -> float:
        return 0.5 * self.agents if self.task_rate is None else self.task_rate

    @property
    def pending_cap(self) -> int:
        return self.agents if self.max_pending is None else self.max_pending

    def build_mechanism(self) -> Mechanism:
        kind = MechanismKind(self.mechanism)
        return Mechanism(kind, self.tau if kind == MechanismKind.KARMA else 0.0)


# --- tasks and assignment ------------------------------------------------------------


def spawn_tasks(rng: np.random.Generator, rate: float, t: int, grid: GridMap,
                first_id: int = 0) -> List[Task]:
    """Poisson number of tasks with uniform, distinct interior pickup/delivery cells."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if rate == 0:
        return []
    cells = grid.interior_cells()
    if len(cells) < 2:
        return []
    n = int(rng.poisson(rate))
    out = []
    for k in range(n):
        p = int(rng.integers(len(cells)))
        d = int(rng.integers(len(cells) - 1))
        if d >= p:
            d += 1
        out.append(Task(first_id + k, cells[p], cells[d], t))
    return out


def hungarian(cost: Sequence[Sequence[float]]) -> List[Tuple[int, int]]:
    """Minimum-total-cost matching of min(m, n) (row, col) pairs, sorted by row."""
    m = np.asarray(cost, dtype=float)
    if m.size == 0:
        return []
    rows, cols = linear_sum_assignment(m)
    return [(int(r), int(c)) for r, c in zip(rows, cols)]


def availability(agent: AgentRecord, traj: Trajectory) -> Optional[Tuple[int, Pose]]:
    """(delay, pose) at which ``agent`` can start a new task, or None if it cannot take one."""
    if agent.phase == Phase.IDLE and agent.queued is None:
        return 0, agent.pose
    if agent.phase == Phase.TO_DELIVERY and agent.queued is None:
        return traj.cost, traj.last
    return None


def assignment_matrix(tasks: Sequence[Task], agents: Sequence[AgentRecord],
                      trajectories: Dict[int, Trajectory], grid: GridMap) -> Tuple[List[AgentRecord], np.ndarray]:
    avail = []
    for a in agents:
        av = availability(a, trajectories[a.id])
        if av is not None:
            avail.append((a, av))
    big = 10 * grid.area * 4
    cost = np.zeros((len(avail), len(tasks)))
    for r, (a, (delay, pose)) in enumerate(avail):
        for c, task in enumerate(tasks):
            d = unconstrained_cost(grid, pose, task.pickup_cell)
            cost[r, c] = big if d is None else delay + d
    return [a for a, _ in avail], cost


def assign_tasks(tasks: Sequence[Task], agents: Sequence[AgentRecord],
                 trajectories: Dict[int, Trajectory], grid: GridMap) -> List[Tuple[AgentRecord, Task]]:
    """Match queued tasks to available agents minimising total time-to-pickup.

    Entry (agent, task) is the agent's availability delay plus its
    unconstrained cost from the availability pose to the pickup cell. Tasks
    left unmatched stay queued.
    """
    if not tasks:
        return []
    avail, cost = assignment_matrix(tasks, agents, trajectories, grid)
    if not avail:
        return []
    return [(avail[r], tasks[c]) for r, c in hungarian(cost)]


# --- metrics -------------------------------------------------------------------------


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


TASK_COLUMNS = ("task_id", "spawn_t", "assign_t", "pickup_t", "deliver_t", "agent_id",
                "task_time", "service_time", "service_time_increase")


def task_row(task: Task) -> dict:
    return {
        "task_id": task.id,
        "spawn_t": task.spawn_t,
        "assign_t": task.assign_t,
        "pickup_t": task.pickup_t,
        "deliver_t": task.deliver_t,
        "agent_id": task.agent_id,
        "task_time": task.task_time,
        "service_time": task.service_time,
        "service_time_increase": task.service_time_increase,
    }


@dataclass
class MetricsSummary:
    completed_tasks: int
    mean_task_time: float
    std_task_time: float
    mean_service_time: float
    std_service_time: float
    mean_service_time_increase: float
    std_service_time_increase: float
    astar_calls: int
    plan_events: int
    tasks: List[dict] = field(default_factory=list)

    @classmethod
    def from_tasks(cls, tasks: Sequence[Task], astar_calls: int, plan_events: int) -> "MetricsSummary":
        done = [t for t in tasks if t.delivered]
        mt, st = _mean_std([t.task_time for t in done])
        ms, ss = _mean_std([t.service_time for t in done])
        mi, si = _mean_std([t.service_time_increase for t in done])
        return cls(len(done), mt, st, ms, ss, mi, si, astar_calls, plan_events,
                   [task_row(t) for t in sorted(tasks, key=lambda t: t.id)])

    def scalars(self) -> dict:
        d = asdict(self)
        d.pop("tasks")
        return d


# --- simulation ----------------------------------------------------------------------


class Simulation:
    """Single-threaded, fully seeded episode.

    Randomness comes from independent sub-streams (placement, spawning,
    negotiation ties, planning order) of one seed, so switching mechanism
    never changes the task sequence.
    """

    def __init__(self, config: SimConfig, record_trace: bool = True):
        self.config = config
        self.grid = config.grid
        self.mechanism = config.build_mechanism()
        self.horizon = config.horizon or default_horizon(self.grid)
        streams = np.random.SeedSequence(config.seed).spawn(4)
        self.rng_place, self.rng_spawn, self.rng_negotiate, self.rng_order = (
            np.random.default_rng(s) for s in streams)
        self.t = 0
        self.counter = AstarCounter()
        self.plan_events = 0
        self.tasks: List[Task] = []
        self.unassigned: List[Task] = []
        self.karma: Dict[int, int] = {}
        self.trajectories: Dict[int, Trajectory] = {}
        self.pending: List[int] = []  # agents waiting for a plan
        self.record_trace = record_trace
        self.trace: List[dict] = []
        self.agents: List[AgentRecord] = self._place_agents()
        self._record({"type": "config", **asdict(config)})
        self._record_state()

    def _place_agents(self) -> List[AgentRecord]:
        cells = list(self.grid.cells())
        n = self.config.agents
        if n > len(cells):
            raise ValueError("more agents than traversable cells")
        idx = self.rng_place.choice(len(cells), size=n, replace=False) if n else []
        heads = self.rng_place.integers(4, size=n) if n else []
        agents = []
        for k, (ci, h) in enumerate(zip(idx, heads)):
            pose = Pose(cells[int(ci)], Heading(int(h)))
            agents.append(AgentRecord(k, pose))
            self.karma[k] = 0
            self.trajectories[k] = Trajectory.parked(k, pose, 0)
        return agents

    # --- tracing ---

    def _record(self, rec: dict) -> None:
        if self.record_trace:
            self.trace.append(rec)

    def _record_state(self) -> None:
        if not self.record_trace:
            return
        self.trace.append({
            "type": "step",
            "t": self.t,
            "agents": [[a.id, a.pose.cell[0], a.pose.cell[1], a.pose.heading.name, a.phase.value,
                        self.karma[a.id]] for a in self.agents],
        })

    # --- phases ---

    def _spawn(self) -> None:
        new = spawn_tasks(self.rng_spawn, self.config.rate, self.t, self.grid, first_id=len(self.tasks))
        room = max(0, self.config.pending_cap - len(self.unassigned))
        for task in new[:room]:
            task.id = len(self.tasks)
            self.tasks.append(task)
            self.unassigned.append(task)
            self._record({"type": "spawn", "t": self.t, "task": task.id,
                          "pickup": list(task.pickup_cell), "delivery": list(task.delivery_cell)})

    def _assign(self) -> None:
        taken = set()
        for agent, task in assign_tasks(self.unassigned, self.agents, self.trajectories, self.grid):
            task.assign_t = self.t
            task.agent_id = agent.id
            taken.add(task.id)
            if agent.phase == Phase.IDLE:
                self._start_task(agent, task)
            else:
                agent.queued = task
            self._record({"type": "assign", "t": self.t, "task": task.id, "agent": agent.id})
        self.unassigned = [t for t in self.unassigned if t.id not in taken]

    def _start_task(self, agent: AgentRecord, task: Task) -> None:
        agent.phase = Phase.TO_PICKUP
        agent.task = task
        agent.queued = None
        self.pending.append(agent.id)

    def _negotiable(self, waiting: Sequence[int]) -> set:
        wait = set(waiting) | set(self.pending)
        return {a.id for a in self.agents if a.phase != Phase.IDLE and a.id not in wait}

    def _plan_pending(self, only: Optional[Sequence[int]] = None) -> None:
        """Give every pending agent (or the ``only`` subset) one planning turn."""
        chosen = set(self.pending) if only is None else set(only) & set(self.pending)
        if not chosen:
            return
        order = sorted(chosen)
        if self.config.planning_order == "shuffle":
            order = [order[k] for k in self.rng_order.permutation(len(order))]
        self.pending = [a for a in self.pending if a not in chosen]
        goals = {a.id: a.target for a in self.agents if a.target is not None}
        ctx = NegotiationContext(self.grid, self.t, self.trajectories, goals, self.karma,
                                 counter=self.counter, horizon=self.horizon)
        if self.mechanism.kind == MechanismKind.TOKEN_PASSING:
            self.plan_events += len(order)
            results = token_passing_plan(order, ctx)
            resolutions = [results[a] for a in order]
        else:
            resolutions = []
            for k, a in enumerate(order):
                ctx.negotiable = self._negotiable(order[k:])
                self.plan_events += 1
                resolutions.append(resolve_agent(a, ctx, self.mechanism, self.rng_negotiate))
        for res in resolutions:
            for out in res.outcomes:
                self._record(out.to_record())
            if res.waited:
                self.pending.append(res.agent)
                self._record({"type": "wait", "t": self.t, "agent": res.agent, "reason": res.reason})

    def _execute(self) -> None:
        before = {a.id: a.pose.cell for a in self.agents}
        for a in self.agents:
            tr = self.trajectories[a.id].advance()
            self.trajectories[a.id] = tr
            a.pose = tr.pose_at(self.t + 1)
        after = {a.id: a.pose.cell for a in self.agents}
        seen: Dict[Cell, int] = {}
        for aid, c in after.items():
            if c in seen:
                raise SimulationError(f"vertex collision of agents {seen[c]} and {aid} at {c}, t={self.t + 1}")
            seen[c] = aid
        for aid, c in after.items():
            other = seen.get(before[aid])
            if other is not None and other != aid and after[aid] == before[other] and c != before[aid]:
                raise SimulationError(f"edge collision of agents {aid} and {other} at t={self.t}")

    def _arrivals(self) -> List[int]:
        """Handle pickups and deliveries at t+1; returns the agents that now need a plan."""
        t = self.t + 1
        waiting = set(self.pending)
        fresh = []
        for a in self.agents:
            if a.phase == Phase.IDLE or a.id in waiting:
                continue
            if self.trajectories[a.id].cost or a.pose.cell != a.target:
                continue
            task = a.task
            if a.phase == Phase.TO_PICKUP:
                task.pickup_t = t
                task.baseline = unconstrained_cost(self.grid, a.pose, task.delivery_cell)
                if self.mechanism.kind == MechanismKind.KARMA:
                    reset_karma(self.karma, a.id)
                a.phase = Phase.TO_DELIVERY
                self.pending.append(a.id)
                fresh.append(a.id)
                self._record({"type": "pickup", "t": t, "task": task.id, "agent": a.id,
                              "karma": self.karma[a.id], "baseline": task.baseline})
            else:
                task.deliver_t = t
                a.phase = Phase.IDLE
                a.task = None
                self._record({"type": "deliver", "t": t, "task": task.id, "agent": a.id})
                if a.queued is not None:
                    self._start_task(a, a.queued)
                    fresh.append(a.id)
        return fresh

    def step(self) -> None:
        self._spawn()
        self._assign()
        self._plan_pending()
        self._execute()
        fresh = self._arrivals()
        self.t += 1
        self._plan_pending(fresh)
        self._record_state()

    def run(self) -> MetricsSummary:
        for _ in range(self.config.episode_length):
            self.step()
        summary = self.summary()
        self._record({"type": "end", "t": self.t, "astar_calls": self.counter.count,
                      "plan_events": self.plan_events})
        return summary

    def summary(self) -> MetricsSummary:
        return MetricsSummary.from_tasks(self.tasks, self.counter.count, self.plan_events)


def run(config: SimConfig) -> MetricsSummary:
    return Simulation(config, record_trace=False).run()
