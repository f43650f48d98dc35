"""Independent brute-force references for the test-suite.

Nothing here imports the planner, the conflict detector or the distance
tables; moves and occupancy are re-derived from first principles.
"""
from collections import deque
from itertools import permutations

_VEC = {0: (0, -1), 1: (1, 0), 2: (0, 1), 3: (-1, 0)}


def legal(grid, cell):
    x, y = cell
    return 0 <= x < grid.width and 0 <= y < grid.height and cell not in grid.blocked


def moves(grid, cell, heading):
    """All (cell, heading) reachable in one step, any order."""
    out = [(cell, heading), (cell, (heading + 1) % 4), (cell, (heading - 1) % 4)]
    dx, dy = _VEC[heading]
    nxt = (cell[0] + dx, cell[1] + dy)
    if legal(grid, nxt):
        out.append((nxt, heading))
    return out


def kinematic_bfs(grid, cell, heading, goal):
    """Forward BFS over (cell, heading); None if unreachable."""
    seen = {(cell, heading): 0}
    q = deque([(cell, heading)])
    while q:
        c, h = q.popleft()
        if c == goal:
            return seen[(c, h)]
        for n in moves(grid, c, h):
            if n not in seen:
                seen[n] = seen[(c, h)] + 1
                q.append(n)
    return None


def where(traj, t):
    """Cell of a trajectory at time t, with pre-start and stay-at-target occupancy."""
    k = t - traj.start_time
    k = max(0, min(k, len(traj.poses) - 1))
    return tuple(traj.poses[k].cell)


def naive_conflicts(a, b, t_lo, t_hi):
    """Set of (time, kind, payload) by scanning every time step."""
    out = set()
    for t in range(t_lo, t_hi + 1):
        if where(a, t) == where(b, t):
            out.add((t, "v", where(a, t)))
        if t < t_hi:
            a0, a1, b0, b1 = where(a, t), where(a, t + 1), where(b, t), where(b, t + 1)
            if a0 == b1 and a1 == b0 and a0 != a1:
                out.add((t, "e", (a0, a1)))
    return out


def spacetime_bfs(grid, cell, heading, t0, goal, avoid, horizon):
    """Uniform-cost (BFS) search over (cell, heading, t) without any pruning by dominance.

    A step into (c', t+1) is allowed when no avoided agent is on c' at t+1 and
    no avoided agent swaps with us. Accepting: on ``goal`` and no avoided
    agent is ever on ``goal`` at that time or later (checked by scanning far
    enough past every trajectory's end).
    """
    t_end = max([t0] + [tr.start_time + len(tr.poses) for tr in avoid]) + 1

    def goal_ok(t):
        return all(where(tr, s) != goal for tr in avoid for s in range(t, t_end + 1))

    start = (cell, heading, t0)
    seen = {start}
    frontier = [start]
    for depth in range(horizon + 1):
        nxt = []
        for c, h, t in frontier:
            if c == goal and goal_ok(t):
                return depth
        if depth == horizon:
            break
        for c, h, t in frontier:
            for nc, nh in moves(grid, c, h):
                if any(where(tr, t + 1) == nc for tr in avoid):
                    continue
                if any(where(tr, t) == nc and where(tr, t + 1) == c and nc != c for tr in avoid):
                    continue
                s = (nc, nh, t + 1)
                if s not in seen:
                    seen.add(s)
                    nxt.append(s)
        frontier = nxt
    return None


def assignment_brute_force(matrix):
    m = len(matrix)
    n = len(matrix[0]) if m else 0
    if m == 0 or n == 0:
        return 0
    if m <= n:
        return min(sum(matrix[r][p[r]] for r in range(m)) for p in permutations(range(n), m))
    return min(sum(matrix[p[c]][c] for c in range(n)) for p in permutations(range(m), n))
