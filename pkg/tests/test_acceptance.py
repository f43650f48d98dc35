"""End-to-end acceptance checks.

Each test records a one-line verdict (``criterion N: PASS|FAIL ...``) that is
printed immediately and again in the terminal summary. Tolerances are the
stated ones; nothing is relaxed to make a criterion pass.
"""
import random
import time
from itertools import product

import numpy as np
import pytest
from scipy.stats import binomtest, wilcoxon

from karma_mapf.cbs import cbs_solve, joint_brute_force
from karma_mapf.mapd import SimConfig, Simulation, hungarian
from karma_mapf.negotiation import Mechanism, plan_one_shot
from karma_mapf.planner import SearchQuery, plan
from karma_mapf.results import check_karma, check_trace, write_tasks_csv
from karma_mapf.world import GridMap

from conftest import VERDICTS
from instances import random_one_shot, random_query
from oracles import assignment_brute_force, spacetime_bfs

pytestmark = pytest.mark.acceptance

SEEDS = range(1, 21)
MECHANISMS = ("token", "egoistic", "altruistic", "karma")
SIZES = {5: 4, 10: 8, 15: 12}  # interior side -> agents
ALPHA = 0.05


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    VERDICTS[n] = line
    print(line)
    assert ok, line


def _config(side, mechanism, seed, tau=0.5):
    return SimConfig(interior_width=side, interior_height=side, agents=SIZES[side], mechanism=mechanism,
                     tau=tau, episode_length=100, seed=seed)


def _episode(cfg):
    """Run with a trace, keep only what the criteria need."""
    sim = Simulation(cfg)
    summary = sim.run()
    return {
        "summary": summary,
        "collisions": check_trace(sim.trace),
        "karma_problems": check_karma(sim.trace) if cfg.mechanism == "karma" else [],
        "outcomes": sum(r["type"] == "negotiation" for r in sim.trace),
    }


@pytest.fixture(scope="session")
def grid_runs():
    start = time.perf_counter()
    runs = {(side, mech, seed): _episode(_config(side, mech, seed))
            for side, mech, seed in product(SIZES, MECHANISMS, SEEDS)}
    return runs, time.perf_counter() - start


@pytest.fixture(scope="session")
def one_shot_instances():
    rng = random.Random(2024)
    return [random_one_shot(rng, interior=4) for _ in range(100)]


def _paired(runs, mech, attr, side=10):
    return np.array([getattr(runs[(side, mech, s)]["summary"], attr) for s in SEEDS], dtype=float)


# --- 1 ----------------------------------------------------------------------------------


def test_criterion_1_no_collisions(grid_runs):
    runs, elapsed = grid_runs
    bad = {k: v["collisions"] for k, v in runs.items() if v["collisions"]}
    ok = len(runs) == 240 and not bad and elapsed < 300
    verdict(1, ok, f"{len(runs)} episodes, {len(bad)} with conflicts, {elapsed:.1f}s (limit 300s)")


# --- 2 and 4 ----------------------------------------------------------------------------


def test_criterion_2_cbs_matches_brute_force(one_shot_instances):
    start = time.perf_counter()
    mismatches = solved = 0
    for grid, starts, goals in one_shot_instances:
        res = cbs_solve(grid, starts, goals, horizon=16)
        ref = joint_brute_force(grid, starts, goals, horizon=16)
        mismatches += res.cost != ref
        solved += res.solved
    elapsed = time.perf_counter() - start
    ok = len(one_shot_instances) >= 100 and mismatches == 0 and elapsed < 120
    verdict(2, ok, f"{len(one_shot_instances)} instances ({solved} solvable), {mismatches} mismatches, "
                   f"{elapsed:.1f}s (limit 120s)")


def test_criterion_4_decentralised_cost_is_bounded_by_optimum(one_shot_instances):
    mechanisms = [Mechanism.token(), Mechanism.egoistic(), Mechanism.altruistic(), Mechanism.karma(0.5)]
    compared = violations = 0
    for grid, starts, goals in one_shot_instances:
        res = cbs_solve(grid, starts, goals, horizon=16)
        if not res.solved:
            continue
        for mech in mechanisms:
            plans = plan_one_shot(grid, starts, goals, mech, np.random.default_rng(0), horizon=16)
            if plans is None:
                continue
            compared += 1
            violations += sum(tr.cost for tr in plans) < res.cost
    verdict(4, compared > 0 and violations == 0,
            f"{compared} solved (instance, mechanism) pairs, {violations} below the optimum")


# --- 3 ----------------------------------------------------------------------------------


def test_criterion_3_planner_matches_exhaustive_search():
    rng = random.Random(77)
    start = time.perf_counter()
    mismatches = 0
    n = 250
    for _ in range(n):
        g = GridMap(rng.randint(2, 5), rng.randint(2, 5))
        s, goal, avoid = random_query(rng, g, rng.randint(1, 4))
        t0 = rng.randint(0, 3)
        ref = spacetime_bfs(g, s.cell, int(s.heading), t0, goal, avoid, 16)
        got = plan(g, SearchQuery(s, t0, goal, tuple(avoid), 16))
        mismatches += (None if got is None else got.cost) != ref
    elapsed = time.perf_counter() - start
    verdict(3, mismatches == 0 and elapsed < 60, f"{n} queries, {mismatches} mismatches, {elapsed:.1f}s (limit 60s)")


# --- 5 ----------------------------------------------------------------------------------


def test_criterion_5_karma_at_zero_weight_is_altruistic(tmp_path):
    differing = []
    for seed in SEEDS:
        files = []
        for mech, tau in (("karma", 0.0), ("altruistic", 0.5)):
            summary = Simulation(_config(10, mech, seed, tau), record_trace=False).run()
            path = tmp_path / f"{mech}_{seed}.csv"
            write_tasks_csv(path, summary.tasks)
            files.append(path.read_bytes())
        if files[0] != files[1]:
            differing.append(seed)
    verdict(5, not differing, f"20 seeds, byte-identical tasks.csv except seeds {differing}")


# --- 6 ----------------------------------------------------------------------------------


def test_criterion_6_token_passing_completes_fewer_tasks(grid_runs):
    runs, _ = grid_runs
    token = _paired(runs, "token", "completed_tasks")
    parts, ok = [], True
    for mech in ("egoistic", "altruistic", "karma"):
        other = _paired(runs, mech, "completed_tasks")
        p = wilcoxon(token, other, alternative="less").pvalue
        trend = token.mean() < other.mean() and p < ALPHA
        ok &= trend
        parts.append(f"{mech}: {token.mean():.2f} vs {other.mean():.2f} p={p:.4f}")
    calls_match = all(runs[(10, "token", s)]["summary"].astar_calls == runs[(10, "token", s)]["summary"].plan_events
                      for s in SEEDS)
    ok &= calls_match
    verdict(6, ok, "; ".join(parts) + f"; token astar_calls == plan_events: {calls_match}")


# --- 7 ----------------------------------------------------------------------------------


def test_criterion_7_large_tau_raises_service_time_increase(grid_runs):
    runs, _ = grid_runs
    base = _paired(runs, "karma", "mean_service_time_increase")
    high = np.array([Simulation(_config(10, "karma", s, tau=100.0), record_trace=False).run()
                     .mean_service_time_increase for s in SEEDS])
    p = wilcoxon(high, base, alternative="greater").pvalue
    verdict(7, high.mean() > base.mean() and p < ALPHA,
            f"tau=100 {high.mean():.3f} vs tau=0.5 {base.mean():.3f}, p={p:.5f}")


# --- 8 ----------------------------------------------------------------------------------


def test_criterion_8_karma_reduces_service_time_dispersion(grid_runs):
    runs, _ = grid_runs
    karma_std = _paired(runs, "karma", "std_service_time")
    parts, ok = [], True
    for mech in ("egoistic", "altruistic"):
        other = _paired(runs, mech, "std_service_time")
        diff = karma_std - other
        wins, n = int((diff < 0).sum()), int((diff != 0).sum())
        p = binomtest(wins, n, 0.5, alternative="greater").pvalue if n else 1.0
        ok &= np.median(diff) < 0 and p < ALPHA
        parts.append(f"vs {mech}: karma lower in {wins}/{n}, median diff {np.median(diff):+.3f}, p={p:.4f}")
    karma_mean = _paired(runs, "karma", "mean_service_time").mean()
    best = min(_paired(runs, m, "mean_service_time").mean() for m in ("egoistic", "altruistic"))
    within = karma_mean <= 1.1 * best
    ok &= within
    parts.append(f"mean service time {karma_mean:.3f} vs best {best:.3f} (within 10%: {within})")
    verdict(8, ok, "; ".join(parts))


# --- 9 ----------------------------------------------------------------------------------


def test_criterion_9_karma_accounting(grid_runs):
    runs, _ = grid_runs
    karma = [v for (side, mech, seed), v in runs.items() if mech == "karma"]
    problems = sum(len(v["karma_problems"]) for v in karma)
    outcomes = sum(v["outcomes"] for v in karma)
    verdict(9, problems == 0 and outcomes > 0,
            f"{len(karma)} karma traces, {outcomes} negotiation outcomes, {problems} accounting violations")


# --- 10 ---------------------------------------------------------------------------------


def test_criterion_10_hungarian_matches_brute_force():
    rng = np.random.default_rng(10)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        m, n = rng.integers(1, 7, size=2)
        matrix = rng.integers(0, 100, size=(m, n)).tolist()
        got = sum(matrix[r][c] for r, c in hungarian(matrix))
        mismatches += got != assignment_brute_force(matrix)
    elapsed = time.perf_counter() - start
    verdict(10, mismatches == 0 and elapsed < 30, f"1000 matrices up to 6x6, {mismatches} mismatches, "
                                                  f"{elapsed:.1f}s (limit 30s)")
