"""One bilateral negotiation in a corridor with a side nook.

Agent 0 wants to cross the corridor; agent 1 sits in the middle of it.
Agent 0 has no way round, so agent 1 must step into the nook and come back.
Each mechanism decides differently who gives way.

Run: python3 demos/02_negotiation.py
"""
import numpy as np

from karma_mapf import GridMap, Heading, Mechanism, NegotiationContext, Pose, Trajectory, resolve_agent

# %% Three corridor cells, one nook below the middle
#   (0,0) (1,0) (2,0)
#         (1,1)
grid = GridMap(3, 2, border_width=0, blocked=frozenset({(0, 1), (2, 1)}))


def fresh_context(karma):
    trajs = {0: Trajectory.parked(0, Pose((0, 0), Heading.E), 0),
             1: Trajectory.parked(1, Pose((1, 0), Heading.S), 0)}
    return NegotiationContext(grid, 0, trajs, {0: (2, 0), 1: (1, 0)}, dict(karma), negotiable={1})


# %% Let each mechanism resolve the same conflict
for mech in [Mechanism.egoistic(), Mechanism.altruistic(), Mechanism.karma(0.5)]:
    ctx = fresh_context({0: 0, 1: 0})
    res = resolve_agent(0, ctx, mech, np.random.default_rng(0))
    print(f"\n{mech.kind.value}:")
    if res.waited:
        print("  agent 0 waits:", res.reason)
        continue
    for out in res.outcomes:
        print(f"  replanner={out.replanner}  delta_i={out.delta_initiator}  delta_j={out.delta_counterpart}"
              f"  karma {out.karma_before} -> {out.karma_after}")
    print("  agent 0 path:", [p.cell for p in ctx.trajectories[0].poses])
    print("  agent 1 path:", [p.cell for p in ctx.trajectories[1].poses])

# %% The egoistic counterpart only yields for free, so the initiator is stuck.
# Under karma the counterpart is credited its 4 extra steps, paid by agent 0.
