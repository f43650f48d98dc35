"""Bilateral conflict negotiation: token passing, egoistic, altruistic and Karma rules.

``resolve_agent`` runs the iterative loop for one initiating agent: plan a
candidate, find its conflicts, pick the counterpart whose avoidance would be
most expensive, let the mechanism decide who gives way, replan, repeat until
the candidate is conflict-free.

Two interpretation choices worth knowing about:

* a counterpart that gives way replans against *every* committed trajectory
  plus the initiator's candidate, not only against the initiator, so the
  committed set stays mutually conflict-free;
* under the egoistic rule the counterpart yields iff its cost change is
  <= 0, i.e. only when giving way is free.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .conflicts import Conflict, Trajectory, detect_conflicts
from .planner import AstarCounter, SearchQuery, default_horizon, plan
from .world import Cell, GridMap

log = logging.getLogger(__name__)

INFEASIBLE = float("inf")
DeltaCost = Union[int, float]

I, J = "i", "j"


class MechanismKind(str, enum.Enum):
    TOKEN_PASSING = "token"
    EGOISTIC = "egoistic"
    ALTRUISTIC = "altruistic"
    KARMA = "karma"


@dataclass(frozen=True)
class Mechanism:
    kind: MechanismKind
    tau: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MechanismKind(self.kind))
        if self.tau < 0:
            raise ValueError("tau must be >= 0")

    @classmethod
    def token(cls) -> "Mechanism":
        return cls(MechanismKind.TOKEN_PASSING)

    @classmethod
    def egoistic(cls) -> "Mechanism":
        return cls(MechanismKind.EGOISTIC)

    @classmethod
    def altruistic(cls) -> "Mechanism":
        return cls(MechanismKind.ALTRUISTIC)

    @classmethod
    def karma(cls, tau: float = 0.5) -> "Mechanism":
        return cls(MechanismKind.KARMA, tau)

    @property
    def negotiates(self) -> bool:
        return self.kind != MechanismKind.TOKEN_PASSING

    def decide(self, di: DeltaCost, dj: DeltaCost, ki: int, kj: int, rng) -> Optional[str]:
        if self.kind == MechanismKind.EGOISTIC:
            return negotiate_egoistic(di, dj)
        if self.kind == MechanismKind.ALTRUISTIC:
            return negotiate_altruistic(di, dj, rng)
        if self.kind == MechanismKind.KARMA:
            return negotiate_karma(di, dj, ki, kj, self.tau, rng)
        raise ValueError("token passing does not negotiate")


# --- decision rules ------------------------------------------------------------------


def negotiate_egoistic(di: DeltaCost, dj: DeltaCost) -> str:
    """Counterpart ``j`` yields only if replanning does not cost it anything."""
    return J if dj <= 0 else I


def _coin(rng) -> str:
    return J if int(rng.integers(2)) else I


def negotiate_altruistic(di: DeltaCost, dj: DeltaCost, rng) -> Optional[str]:
    """Cheaper side replans; uniform coin on ties. None if both sides are infeasible."""
    if di == INFEASIBLE and dj == INFEASIBLE:
        return None
    if dj < di:
        return J
    if dj > di:
        return I
    return _coin(rng)


def negotiate_karma(di: DeltaCost, dj: DeltaCost, ki: int, kj: int, tau: float, rng) -> Optional[str]:
    """Compare ``delta + tau * karma``; the lower composite replans.

    Arithmetic is exact (``tau`` is taken as the rational value of the float)
    so ties are genuine ties. An infeasible delta makes its composite maximal.
    """
    if di == INFEASIBLE and dj == INFEASIBLE:
        return None
    if di == INFEASIBLE:
        return J
    if dj == INFEASIBLE:
        return I
    w = Fraction(tau)
    ci = di + w * ki
    cj = dj + w * kj
    if cj < ci:
        return J
    if cj > ci:
        return I
    return _coin(rng)


def apply_karma_update(ki: int, kj: int, replanner: str, delta_r: int) -> Tuple[int, int]:
    """The replanner is credited its cost increase, paid by the other side."""
    if delta_r == INFEASIBLE:
        raise ValueError("karma transfer needs a finite delta")
    d = int(delta_r)
    if replanner == I:
        return ki + d, kj - d
    if replanner == J:
        return ki - d, kj + d
    raise ValueError(f"replanner must be 'i' or 'j', got {replanner!r}")


def reset_karma(karma: Dict[int, int], agent: int) -> None:
    if agent not in karma:
        raise KeyError(agent)
    karma[agent] = 0


def select_priority_conflict(conflicts: Sequence[Conflict], deltas: Mapping[int, DeltaCost]) -> Conflict:
    """Conflict whose counterpart is most expensive to avoid.

    Ties: earliest conflict time, then smallest counterpart id.
    """
    if not conflicts:
        raise ValueError("no conflicts to choose from")
    return min(conflicts, key=lambda c: (-deltas[c.agent_b], c.time, c.agent_b))


# --- negotiation state ----------------------------------------------------------------


@dataclass
class NegotiationOutcome:
    time: int
    initiator: int
    counterpart: int
    replanner: int
    delta_initiator: DeltaCost
    delta_counterpart: DeltaCost
    delta_replanner: DeltaCost
    karma_transfer: int
    karma_before: Tuple[int, int]
    karma_after: Tuple[int, int]
    new_trajectory: Optional[Trajectory]

    def to_record(self) -> dict:
        def enc(d):
            return None if d == INFEASIBLE else int(d)

        return {
            "type": "negotiation",
            "t": self.time,
            "initiator": self.initiator,
            "counterpart": self.counterpart,
            "replanner": self.replanner,
            "delta_initiator": enc(self.delta_initiator),
            "delta_counterpart": enc(self.delta_counterpart),
            "delta_replanner": enc(self.delta_replanner),
            "karma_transfer": self.karma_transfer,
            "karma_before": list(self.karma_before),
            "karma_after": list(self.karma_after),
        }


@dataclass
class Resolution:
    """Result of one agent's planning turn. ``trajectory`` is None for a wait fallback."""

    agent: int
    trajectory: Optional[Trajectory]
    outcomes: List[NegotiationOutcome] = field(default_factory=list)
    reason: str = ""

    @property
    def waited(self) -> bool:
        return self.trajectory is None


@dataclass
class NegotiationContext:
    """Shared state of one planning round.

    ``trajectories`` holds every agent's committed trajectory (parked agents
    hold a single-pose one). Only agents in ``negotiable`` can be asked to
    give way; everyone else is a fixed obstacle.
    """

    grid: GridMap
    time: int
    trajectories: Dict[int, Trajectory]
    goals: Dict[int, Cell]
    karma: Dict[int, int]
    negotiable: Set[int] = field(default_factory=set)
    counter: AstarCounter = field(default_factory=AstarCounter)
    horizon: int = 0
    iteration_cap: int = 0
    versions: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.horizon:
            self.horizon = default_horizon(self.grid)

    @property
    def cap(self) -> int:
        return self.iteration_cap or 10 * max(1, len(self.trajectories))

    def version(self, agent: int) -> int:
        return self.versions.get(agent, 0)

    def commit(self, agent: int, traj: Trajectory) -> None:
        self.trajectories[agent] = traj
        self.versions[agent] = self.version(agent) + 1

    def plan_for(self, agent: int, avoid: Iterable[Trajectory]) -> Optional[Trajectory]:
        start = self.trajectories[agent].pose_at(self.time)
        query = SearchQuery(start, self.time, self.goals[agent], tuple(avoid), self.horizon)
        return plan(self.grid, query, self.counter, agent_id=agent)


def delta_cost(agent: int, extra_avoid: int, ctx: NegotiationContext,
               avoid_ids: Optional[Iterable[int]] = None,
               overrides: Optional[Mapping[int, Trajectory]] = None) -> Tuple[DeltaCost, Optional[Trajectory]]:
    """Cost change for ``agent`` replanning to also avoid ``extra_avoid``.

    ``avoid_ids`` defaults to every other committed agent; ``overrides``
    substitutes trajectories (e.g. an initiator's uncommitted candidate).
    """
    overrides = overrides or {}
    ids = set(ctx.trajectories) - {agent} if avoid_ids is None else set(avoid_ids)
    ids.add(extra_avoid)
    ids.discard(agent)
    avoid = [overrides.get(a, ctx.trajectories.get(a)) for a in sorted(ids)]
    current = overrides.get(agent, ctx.trajectories[agent])
    cand = ctx.plan_for(agent, (tr for tr in avoid if tr is not None))
    if cand is None:
        return INFEASIBLE, None
    return cand.cost - current.cost, cand


def resolve_agent(i: int, ctx: NegotiationContext, mechanism: Mechanism, rng) -> Resolution:
    """Plan agent ``i`` by iterative bilateral negotiation and commit the result.

    Everything the loop changed (counterpart trajectories, karma) is rolled
    back if ``i`` ends up waiting, because counterparts replanned against a
    candidate that will not be executed.
    """
    snap_traj = dict(ctx.trajectories)
    snap_karma = dict(ctx.karma)
    snap_versions = dict(ctx.versions)
    considered: Dict[int, Set[int]] = {i: set()}
    cache: Dict[tuple, Tuple[DeltaCost, Optional[Trajectory]]] = {}
    karma_on = mechanism.kind == MechanismKind.KARMA

    def plan_initiator(ids: Set[int]) -> Optional[Trajectory]:
        key = ("i", tuple((a, ctx.version(a)) for a in sorted(ids)))
        if key not in cache:
            cand = ctx.plan_for(i, (ctx.trajectories[a] for a in sorted(ids)))
            cache[key] = (0, cand)
        return cache[key][1]

    def fallback(reason: str) -> Resolution:
        ctx.trajectories.clear()
        ctx.trajectories.update(snap_traj)
        ctx.karma.clear()
        ctx.karma.update(snap_karma)
        ctx.versions.clear()
        ctx.versions.update(snap_versions)
        log.debug("agent %d waits at t=%d: %s", i, ctx.time, reason)
        return Resolution(i, None, [], reason)

    pi = plan_initiator(considered[i])
    if pi is None:
        return fallback("no path")
    outcomes: List[NegotiationOutcome] = []
    iterations = 0
    while True:
        others = [tr for a, tr in sorted(ctx.trajectories.items()) if a != i]
        conflicts = detect_conflicts(pi, others)
        if not conflicts:
            break
        iterations += 1
        if iterations > ctx.cap:
            return fallback("iteration cap")
        deltas: Dict[int, DeltaCost] = {}
        for j in sorted({c.agent_b for c in conflicts}):
            alt = plan_initiator(considered[i] | {j})
            deltas[j] = INFEASIBLE if alt is None else alt.cost - pi.cost
        j = select_priority_conflict(conflicts, deltas).agent_b
        di = deltas[j]
        if j in ctx.negotiable:
            key = ("j", j, pi.poses, tuple(sorted(ctx.versions.items())))
            if key not in cache:
                cache[key] = delta_cost(j, i, ctx, overrides={i: pi})
            dj, cand_j = cache[key]
        else:
            dj, cand_j = INFEASIBLE, None
        ki, kj = ctx.karma.get(i, 0), ctx.karma.get(j, 0)
        side = mechanism.decide(di, dj, ki, kj, rng)
        if side is None or (side == I and di == INFEASIBLE):
            return fallback("unresolvable conflict")
        r, r_bar = (i, j) if side == I else (j, i)
        delta_r = di if side == I else dj
        considered.setdefault(r, set()).add(r_bar)
        if side == J:
            ctx.commit(j, cand_j)
        ki_new, kj_new = apply_karma_update(ki, kj, side, delta_r) if karma_on else (ki, kj)
        if karma_on:
            ctx.karma[i], ctx.karma[j] = ki_new, kj_new
        outcomes.append(NegotiationOutcome(
            time=ctx.time, initiator=i, counterpart=j, replanner=r,
            delta_initiator=di, delta_counterpart=dj, delta_replanner=delta_r,
            karma_transfer=int(delta_r) if karma_on else 0,
            karma_before=(ki, kj), karma_after=(ki_new, kj_new),
            new_trajectory=None if side == I else cand_j,
        ))
        pi = plan_initiator(considered[i])
        if pi is None:
            return fallback("no path after negotiation")
        if side == I:
            outcomes[-1].new_trajectory = pi
    ctx.commit(i, pi)
    return Resolution(i, pi, outcomes)


def token_passing_plan(order: Sequence[int], ctx: NegotiationContext) -> Dict[int, Resolution]:
    """Each agent in ``order`` plans once against everything already committed."""
    out: Dict[int, Resolution] = {}
    for a in order:
        others = [tr for b, tr in sorted(ctx.trajectories.items()) if b != a]
        traj = ctx.plan_for(a, others)
        if traj is None:
            out[a] = Resolution(a, None, [], "no path")
        else:
            ctx.commit(a, traj)
            out[a] = Resolution(a, traj)
    return out


def plan_one_shot(grid: GridMap, starts: Sequence, goals: Sequence[Cell], mechanism: Mechanism,
                  rng=None, horizon: int = 0, counter: Optional[AstarCounter] = None) -> Optional[List[Trajectory]]:
    """Plan a one-shot instance decentrally in ascending agent order.

    Agents not yet planned sit on their start cells. Returns None if any
    agent would have to wait (the instance is then unsolved at t=0).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = len(starts)
    ctx = NegotiationContext(
        grid, 0, {a: Trajectory.parked(a, starts[a], 0) for a in range(n)},
        {a: tuple(goals[a]) for a in range(n)}, {a: 0 for a in range(n)},
        counter=counter or AstarCounter(), horizon=horizon,
    )
    if not mechanism.negotiates:
        results = token_passing_plan(range(n), ctx)
        if any(r.waited for r in results.values()):
            return None
    else:
        for a in range(n):
            ctx.negotiable = set(range(a))
            if resolve_agent(a, ctx, mechanism, rng).waited:
                return None
    return [ctx.trajectories[a] for a in range(n)]
