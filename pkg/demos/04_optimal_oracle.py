"""Optimal joint plans with CBS, and how far decentralised planning is from them.

Run: python3 demos/04_optimal_oracle.py
"""
import random

import numpy as np

from karma_mapf import GridMap, Heading, Mechanism, Pose, cbs_solve, joint_brute_force, plan_one_shot

# %% Two agents swap ends of a corridor; only the nook lets them pass
corridor = GridMap(4, 2, border_width=0, blocked=frozenset({(0, 1), (2, 1), (3, 1)}))
starts, goals = [Pose((0, 0), Heading.E), Pose((3, 0), Heading.W)], [(3, 0), (0, 0)]
res = cbs_solve(corridor, starts, goals, horizon=14)
print("CBS", res.status, "sum of costs", res.cost, "nodes expanded", res.expanded)
print("joint brute force:", joint_brute_force(corridor, starts, goals, horizon=14))
for k, tr in enumerate(res.solution):
    print(f"  agent {k}:", [p.cell for p in tr.poses])

# %% Random one-shot instances: decentralised cost never beats the optimum
rng = random.Random(0)
gaps = {m: [] for m in ("token", "egoistic", "altruistic", "karma")}
for _ in range(30):
    grid = GridMap(4, 4)
    cells = list(grid.cells())
    n = rng.randint(2, 3)
    s = [Pose(c, Heading(rng.randrange(4))) for c in rng.sample(cells, n)]
    g = rng.sample(cells, n)
    opt = cbs_solve(grid, s, g, horizon=16)
    for name in gaps:
        mech = Mechanism.karma(0.5) if name == "karma" else getattr(Mechanism, name)()
        plans = plan_one_shot(grid, s, g, mech, np.random.default_rng(0), horizon=16)
        if plans is not None and opt.solved:
            gaps[name].append(sum(tr.cost for tr in plans) - opt.cost)
for name, gap in gaps.items():
    print(f"{name:>10}: solved {len(gap)}/30, mean gap to optimum {np.mean(gap):.2f}, max {max(gap)}")
