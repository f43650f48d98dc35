import random
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from karma_mapf.conflicts import Conflict, EdgeConflict, Trajectory, VertexConflict, detect_conflicts
from karma_mapf.negotiation import (
    I,
    INFEASIBLE,
    J,
    Mechanism,
    NegotiationContext,
    apply_karma_update,
    delta_cost,
    negotiate_altruistic,
    negotiate_egoistic,
    negotiate_karma,
    plan_one_shot,
    reset_karma,
    resolve_agent,
    select_priority_conflict,
    token_passing_plan,
)
from karma_mapf.world import GridMap, Heading, Pose, unconstrained_cost

from oracles import spacetime_bfs

E, N, S, W = Heading.E, Heading.N, Heading.S, Heading.W

# a three-cell corridor with a single nook below its middle cell
NOOK = GridMap(3, 2, border_width=0, blocked=frozenset({(0, 1), (2, 1)}))


class FixedCoin:
    def __init__(self, value):
        self.value = value
        self.calls = 0

    def integers(self, n):
        self.calls += 1
        return self.value


# --- decision rules -------------------------------------------------------------------


@pytest.mark.parametrize("di,dj,expected", [
    (3, 0, J), (3, -1, J), (0, 1, I), (5, 2, I), (INFEASIBLE, 0, J), (0, INFEASIBLE, I),
])
def test_egoistic_examples(di, dj, expected):
    assert negotiate_egoistic(di, dj) == expected


def test_egoistic_depends_only_on_counterpart_cost():
    for di, dj in product(range(-3, 6), range(-3, 6)):
        assert negotiate_egoistic(di, dj) == (J if dj <= 0 else I)


@pytest.mark.parametrize("di,dj,expected", [
    (4, 2, J), (2, 4, I), (INFEASIBLE, 7, J), (7, INFEASIBLE, I), (INFEASIBLE, INFEASIBLE, None),
])
def test_altruistic_examples(di, dj, expected):
    coin = FixedCoin(0)
    assert negotiate_altruistic(di, dj, coin) == expected
    assert coin.calls == 0


def test_altruistic_tie_uses_coin():
    assert negotiate_altruistic(3, 3, FixedCoin(1)) == J
    assert negotiate_altruistic(3, 3, FixedCoin(0)) == I


def test_tie_coin_is_fair():
    rng = np.random.default_rng(1234)
    draws = [negotiate_altruistic(2, 2, rng) for _ in range(10_000)]
    counts = [draws.count(I), draws.count(J)]
    assert chisquare(counts).pvalue > 0.001


@pytest.mark.parametrize("di,ki,dj,kj,tau,expected", [
    (4, 0, 2, 6, 0.5, I),    # 4 + 0 vs 2 + 3
    (4, 0, 2, 2, 0.5, J),    # 4 vs 3
    (1, 0, 1, -2, 1.0, J),   # 1 vs -1
    (3, 0, 2, 2, 0.5, None),  # 3 vs 3: coin
    (INFEASIBLE, -50, 0, 50, 2.0, J),
    (0, 50, INFEASIBLE, -50, 2.0, I),
])
def test_karma_examples(di, ki, dj, kj, tau, expected):
    coin = FixedCoin(1)
    got = negotiate_karma(di, dj, ki, kj, tau, coin)
    if expected is None:
        assert coin.calls == 1 and got == J
    else:
        assert got == expected and coin.calls == 0


def test_karma_comparison_is_exact():
    # in floats 0 + 0.1 * 10 == 1.0 would tie; as rationals the binary 0.1 is slightly above 1/10
    coin = FixedCoin(1)
    assert negotiate_karma(1, 0, 0, 10, 0.1, coin) == I
    assert coin.calls == 0


def test_karma_both_infeasible():
    assert negotiate_karma(INFEASIBLE, INFEASIBLE, 0, 0, 0.5, FixedCoin(0)) is None


_deltas = st.one_of(st.integers(-10, 30), st.just(INFEASIBLE))
_karma = st.integers(-200, 200)


@given(_deltas, _deltas, _karma, _karma, st.integers(0, 2**31))
def test_karma_with_zero_weight_is_altruistic(di, dj, ki, kj, seed):
    a = negotiate_karma(di, dj, ki, kj, 0.0, np.random.default_rng(seed))
    b = negotiate_altruistic(di, dj, np.random.default_rng(seed))
    assert a == b


@given(_deltas, _deltas, _karma, _karma, st.integers(-100, 100), st.sampled_from([0.25, 0.5, 1.0, 3.0]))
def test_karma_invariant_to_common_shift(di, dj, ki, kj, shift, tau):
    assert (negotiate_karma(di, dj, ki, kj, tau, FixedCoin(1))
            == negotiate_karma(di, dj, ki + shift, kj + shift, tau, FixedCoin(1)))


@given(_karma, _karma, st.sampled_from([I, J]), st.integers(-10, 30))
def test_karma_update_conserves_pair_sum(ki, kj, side, d):
    ni, nj = apply_karma_update(ki, kj, side, d)
    assert ni + nj == ki + kj
    assert (ni - ki if side == I else nj - kj) == d


def test_karma_update_rejects_bad_input():
    with pytest.raises(ValueError):
        apply_karma_update(0, 0, "k", 1)
    with pytest.raises(ValueError):
        apply_karma_update(0, 0, I, INFEASIBLE)


def test_reset_karma():
    karma = {0: 5, 1: -5}
    reset_karma(karma, 0)
    assert karma == {0: 0, 1: -5}
    with pytest.raises(KeyError):
        reset_karma(karma, 3)


def test_select_priority_conflict():
    cs = [
        Conflict(0, 1, 4, VertexConflict((1, 1))),
        Conflict(0, 2, 2, VertexConflict((2, 1))),
        Conflict(0, 3, 1, EdgeConflict((0, 0), (1, 0))),
    ]
    assert select_priority_conflict(cs, {1: 5, 2: 5, 3: 1}).agent_b == 2
    assert select_priority_conflict(cs, {1: INFEASIBLE, 2: 5, 3: 1}).agent_b == 1
    assert select_priority_conflict(cs, {1: 0, 2: 0, 3: 0}).agent_b == 3
    with pytest.raises(ValueError):
        select_priority_conflict([], {})


# --- cost change and the resolution loop ----------------------------------------------


def _nook_context(b_heading):
    trajs = {0: Trajectory.parked(0, Pose((0, 0), E), 0), 1: Trajectory.parked(1, Pose((1, 0), b_heading), 0)}
    return NegotiationContext(NOOK, 0, trajs, {0: (2, 0), 1: (1, 0)}, {0: 0, 1: 0}, negotiable={1})


def test_delta_cost_steps_aside_into_nook():
    ctx = _nook_context(N)
    passing = Trajectory(0, 0, (Pose((0, 0), E),) * 4 + (Pose((1, 0), E), Pose((2, 0), E)))
    assert spacetime_bfs(NOOK, (1, 0), int(N), 0, (1, 0), [passing], 30) == 6
    d, cand = delta_cost(1, 0, ctx, overrides={0: passing})
    assert d == 6
    assert [p.cell for p in cand.poses] == [(1, 0)] * 3 + [(1, 1)] * 3 + [(1, 0)]
    assert detect_conflicts(cand, [passing]) == []


def test_delta_cost_infeasible():
    ctx = _nook_context(N)
    rushing = Trajectory(0, 0, (Pose((0, 0), E), Pose((1, 0), E), Pose((2, 0), E)))
    d, cand = delta_cost(1, 0, ctx, overrides={0: rushing})
    assert d == INFEASIBLE and cand is None


@pytest.mark.parametrize("mechanism", [Mechanism.altruistic(), Mechanism.karma(0.5)])
def test_resolve_head_on_counterpart_gives_way(mechanism):
    ctx = _nook_context(S)
    res = resolve_agent(0, ctx, mechanism, np.random.default_rng(0))
    assert not res.waited
    assert res.trajectory.cost == 2
    (out,) = res.outcomes
    assert (out.initiator, out.counterpart, out.replanner) == (0, 1, 1)
    assert out.delta_initiator == INFEASIBLE and out.delta_counterpart == 4
    assert ctx.trajectories[1].cost == 4
    assert detect_conflicts(ctx.trajectories[0], [ctx.trajectories[1]]) == []
    if mechanism.kind == "karma":
        assert out.karma_after == (-4, 4) and ctx.karma == {0: -4, 1: 4}
    else:
        assert ctx.karma == {0: 0, 1: 0}


def test_resolve_egoistic_waits_and_rolls_back():
    ctx = _nook_context(S)
    before = dict(ctx.trajectories)
    res = resolve_agent(0, ctx, Mechanism.egoistic(), np.random.default_rng(0))
    assert res.waited and res.outcomes == []
    assert ctx.trajectories == before and ctx.karma == {0: 0, 1: 0}


def test_non_negotiable_counterpart_is_an_obstacle():
    ctx = _nook_context(S)
    ctx.negotiable = set()
    res = resolve_agent(0, ctx, Mechanism.altruistic(), np.random.default_rng(0))
    assert res.waited


def test_initiator_replans_when_cheaper():
    g = GridMap(3, 3)
    # agent 1 sits in the middle of row 2; agent 0 crosses that row
    trajs = {0: Trajectory.parked(0, Pose((0, 2), E), 0), 1: Trajectory.parked(1, Pose((2, 2), N), 0)}
    # detouring costs 0 five extra steps, stepping aside costs 1 four; low karma tips it
    ctx = NegotiationContext(g, 0, trajs, {0: (4, 2), 1: (2, 2)}, {0: -10, 1: 0}, negotiable={1})
    res = resolve_agent(0, ctx, Mechanism.karma(0.5), np.random.default_rng(0))
    (out,) = res.outcomes
    assert (out.delta_initiator, out.delta_counterpart) == (5, 4)
    assert out.replanner == 0
    assert res.trajectory.cost == unconstrained_cost(g, Pose((0, 2), E), (4, 2)) + 5
    assert out.karma_after == (-5, -5)
    assert ctx.trajectories[1] == trajs[1]


def test_token_passing_plans_in_order():
    g = GridMap(3, 1, border_width=0)
    trajs = {0: Trajectory.parked(0, Pose((0, 0), E), 0), 1: Trajectory.parked(1, Pose((2, 0), W), 0)}
    ctx = NegotiationContext(g, 0, trajs, {0: (1, 0), 1: (1, 0)}, {0: 0, 1: 0})
    res = token_passing_plan([0, 1], ctx)
    assert res[0].trajectory.cost == 1
    assert res[1].waited
    assert ctx.counter.count == 2


def _random_one_shot(rng, n):
    g = GridMap(rng.randint(3, 4), rng.randint(3, 4))
    cells = list(g.cells())
    rng.shuffle(cells)
    starts = [Pose(cells[k], Heading(rng.randrange(4))) for k in range(n)]
    goals = rng.sample(list(g.cells()), n)
    return g, starts, goals


@pytest.mark.parametrize("mechanism", [Mechanism.egoistic(), Mechanism.altruistic(), Mechanism.karma(0.5),
                                       Mechanism.token()])
def test_one_shot_plans_are_conflict_free(mechanism):
    rng = random.Random(17)
    solved = 0
    for _ in range(60):
        g, starts, goals = _random_one_shot(rng, rng.randint(2, 4))
        plans = plan_one_shot(g, starts, goals, mechanism, np.random.default_rng(0))
        if plans is None:
            continue
        solved += 1
        for k, tr in enumerate(plans):
            assert tr.first == starts[k] and tr.last.cell == goals[k]
            assert detect_conflicts(tr, plans[:k] + plans[k + 1:]) == []
    assert solved >= 40


def test_karma_is_conserved_over_a_resolution_round():
    rng = random.Random(8)
    for _ in range(40):
        g, starts, goals = _random_one_shot(rng, 4)
        n = len(starts)
        ctx = NegotiationContext(g, 0, {a: Trajectory.parked(a, starts[a], 0) for a in range(n)},
                                 {a: goals[a] for a in range(n)}, {a: rng.randint(-5, 5) for a in range(n)})
        total = sum(ctx.karma.values())
        for a in range(n):
            ctx.negotiable = set(range(a))
            res = resolve_agent(a, ctx, Mechanism.karma(1.0), np.random.default_rng(a))
            for out in res.outcomes:
                assert sum(out.karma_before) == sum(out.karma_after)
            assert sum(ctx.karma.values()) == total
