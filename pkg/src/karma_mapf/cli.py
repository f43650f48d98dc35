"""Command line: ``karma-mapf {run,sweep,oracle,check-trace}``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from typing import List, Optional

from .cbs import GuardViolation, cbs_solve, joint_brute_force
from .mapd import Simulation
from .results import check_karma, check_trace, read_trace, write_episode
from .scenario import ScenarioError, Scenario, load_document, load_scenario, parse_sweep
from .world import GridMap, Heading, Pose

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_NO_SOLUTION = 3
EXIT_REFUSED = 4

_FLAG_KEYS = {
    "interior_width": "grid.interior_width",
    "interior_height": "grid.interior_height",
    "agents": "agents",
    "mechanism": "mechanism",
    "tau": "tau",
    "steps": "steps",
    "task_rate": "task_rate",
    "seed": "seed",
    "horizon": "horizon",
    "output_dir": "output_dir",
}


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.config) if args.config else Scenario()
        overrides = {dotted: getattr(args, flag) for flag, dotted in _FLAG_KEYS.items()
                     if getattr(args, flag) is not None}
        if overrides:
            scenario = scenario.with_values(overrides)
    except ScenarioError as exc:
        _err(f"invalid scenario key {exc}")
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    config = scenario.to_config()
    sim = Simulation(config)
    summary = sim.run()
    echo = scenario.to_dict()
    echo["resolved"] = {k: v for k, v in asdict(config).items()}
    echo["resolved"]["task_rate"] = config.rate
    echo["resolved"]["horizon"] = sim.horizon
    write_episode(scenario.output_dir, sim, summary, echo)
    print(f"mechanism={scenario.mechanism} tau={scenario.tau} seed={scenario.seed} "
          f"completed={summary.completed_tasks} mean_task_time={summary.mean_task_time:.3f} "
          f"mean_service_time={summary.mean_service_time:.3f} "
          f"std_service_time={summary.std_service_time:.3f} astar_calls={summary.astar_calls}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    from .sweep import run_sweep

    try:
        spec = parse_sweep(load_document(args.spec))
    except ScenarioError as exc:
        _err(f"invalid sweep key {exc}")
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    print(f"sweep: {len(spec.combinations())} combinations x {len(spec.seeds)} seeds = {spec.size()} runs")
    path, failed = run_sweep(spec, args.output_dir, jobs=args.jobs)
    print(f"wrote {path}")
    if failed:
        _err(f"{failed} run(s) failed; see the status column")
        return EXIT_FAILED
    return EXIT_OK


def parse_instance(data: dict):
    """``{"grid": {...}, "agents": [{"start": [x, y], "heading": "E", "goal": [x, y]}], "horizon": 16}``."""
    g = data["grid"]
    grid = GridMap(g["interior_width"], g["interior_height"], g.get("border_width", 1),
                   frozenset(tuple(c) for c in g.get("blocked", [])))
    starts, goals = [], []
    for a in data["agents"]:
        starts.append(Pose(tuple(a["start"]), Heading[a.get("heading", "N")]))
        goals.append(tuple(a["goal"]))
    for c in [s.cell for s in starts] + goals:
        if not grid.traversable(c):
            raise ValueError(f"cell {list(c)} is not traversable")
    return grid, starts, goals, int(data.get("horizon", 16))


def cmd_oracle(args: argparse.Namespace) -> int:
    try:
        grid, starts, goals, horizon = parse_instance(load_document(args.instance))
    except (OSError, KeyError, ValueError, TypeError) as exc:
        _err(f"invalid instance: {exc}")
        return EXIT_USAGE
    if args.horizon:
        horizon = args.horizon
    brute = None
    if args.brute_force:
        try:
            brute = joint_brute_force(grid, starts, goals, horizon)
        except GuardViolation as exc:
            _err(f"refusing brute-force check: {exc}")
            return EXIT_REFUSED
    res = cbs_solve(grid, starts, goals, horizon)
    if not res.solved:
        print(f"no solution ({res.status}) within horizon {horizon}")
        return EXIT_NO_SOLUTION
    out = {
        "sum_of_costs": res.cost,
        "expanded": res.expanded,
        "paths": [{"agent": k, "cost": tr.cost,
                   "poses": [[p.cell[0], p.cell[1], p.heading.name] for p in tr.poses]}
                  for k, tr in enumerate(res.solution)],
    }
    if args.brute_force:
        out["brute_force_sum_of_costs"] = brute
    print(json.dumps(out, indent=None if args.compact else 2))
    if args.brute_force and brute != res.cost:
        _err(f"CBS cost {res.cost} differs from brute force {brute}")
        return EXIT_FAILED
    return EXIT_OK


def cmd_check_trace(args: argparse.Namespace) -> int:
    try:
        records = read_trace(args.trace)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    problems = check_trace(records)
    if args.karma:
        problems += check_karma(records)
    for p in problems:
        print(p)
    steps = sum(r["type"] == "step" for r in records)
    print(f"{len(problems)} violation(s) in {steps} step records")
    return EXIT_FAILED if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="karma-mapf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one episode and write tasks.csv, summary.json, trace.jsonl")
    r.add_argument("config", nargs="?", help="scenario file (.json or .yaml)")
    r.add_argument("--interior-width", type=int)
    r.add_argument("--interior-height", type=int)
    r.add_argument("--agents", type=int)
    r.add_argument("--mechanism", choices=["token", "egoistic", "altruistic", "karma"])
    r.add_argument("--tau", type=float)
    r.add_argument("--steps", type=int)
    r.add_argument("--task-rate", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--horizon", type=int)
    r.add_argument("--output-dir")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a parameter sweep and write aggregate.csv")
    s.add_argument("spec", help="sweep spec (.json or .yaml)")
    s.add_argument("--output-dir", default="sweep_out")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="solve a one-shot instance optimally with CBS")
    o.add_argument("instance", help="instance file (.json or .yaml)")
    o.add_argument("--brute-force", action="store_true", help="cross-check against joint-state search")
    o.add_argument("--horizon", type=int)
    o.add_argument("--compact", action="store_true")
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("check-trace", help="check an executed trace for collisions")
    c.add_argument("trace")
    c.add_argument("--karma", action="store_true", help="also audit karma bookkeeping")
    c.set_defaults(func=cmd_check_trace)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
