"""Grid world, kinematics and space-time A*.

Run: python3 demos/01_planning_basics.py
"""
# %% A 5x5 interior with a one-cell border is a 7x7 map
from karma_mapf import GridMap, Heading, Pose, SearchQuery, Trajectory, detect_conflicts, plan, unconstrained_cost

grid = GridMap(5, 5)
print("map", grid.width, "x", grid.height, "traversable cells:", grid.area)

# %% Turning costs a step, so facing the wrong way is more expensive
start = Pose((1, 1), Heading.N)
for goal in [(4, 1), (1, 4), (1, 0)]:
    print(f"{start.cell} facing {start.heading.name} -> {goal}: cost {unconstrained_cost(grid, start, goal)}")

# %% Plan around an agent that is parked on the direct route
parked = Trajectory.parked(7, Pose((2, 1), Heading.S), 0)
traj = plan(grid, SearchQuery(Pose((1, 1), Heading.E), 0, (3, 1), (parked,)), agent_id=0)
print("\ndetour cost", traj.cost, "instead of", unconstrained_cost(grid, Pose((1, 1), Heading.E), (3, 1)))
for t, pose in enumerate(traj.poses):
    print(f"  t={t}  {pose.cell}  {pose.heading.name}")
print("conflicts with the parked agent:", detect_conflicts(traj, [parked]))

# %% A straight dash through the parked agent collides at t=1
dash = Trajectory(0, 0, (Pose((1, 1), Heading.E), Pose((2, 1), Heading.E), Pose((3, 1), Heading.E)))
print("dash conflicts:", detect_conflicts(dash, [parked]))
