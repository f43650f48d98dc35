"""Result files of an episode and checks that run on the files alone.

* ``tasks.csv`` -- one row per spawned task, unset timestamps left empty;
* ``summary.json`` -- scalar metrics, config echo and ``schema_version``;
* ``trace.jsonl`` -- one JSON record per line: a ``config`` header, one
  ``step`` record per time step (agent id, x, y, heading, phase, karma),
  task events (``spawn``, ``assign``, ``pickup``, ``deliver``), ``wait``
  and ``negotiation`` records, and a final ``end`` record.
"""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from .mapd import TASK_COLUMNS, MetricsSummary, Simulation, Task
from .world import Heading, Pose, action_between

SCHEMA_VERSION = 1
PathLike = Union[str, os.PathLike]


def _clean(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def summary_dict(summary: MetricsSummary, config: Optional[dict] = None) -> dict:
    out = {"schema_version": SCHEMA_VERSION}
    out.update({k: _clean(v) for k, v in summary.scalars().items()})
    if config is not None:
        out["config"] = config
    return out


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_tasks_csv(path: PathLike, rows: Sequence[dict]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TASK_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: "" if row[k] is None else row[k] for k in TASK_COLUMNS})
    os.replace(tmp, path)


def write_trace(path: PathLike, records: Iterable[dict]) -> None:
    text = "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)
    _atomic_write(Path(path), text)


def read_trace(path: PathLike) -> List[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_episode(out_dir: PathLike, sim: Simulation, summary: MetricsSummary, config: dict) -> Dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"tasks": out / "tasks.csv", "summary": out / "summary.json", "trace": out / "trace.jsonl"}
    write_tasks_csv(paths["tasks"], summary.tasks)
    _atomic_write(paths["summary"], json.dumps(summary_dict(summary, config), indent=2, sort_keys=True) + "\n")
    write_trace(paths["trace"], sim.trace)
    return paths


def replay_summary(records: Sequence[dict]) -> MetricsSummary:
    """Rebuild the episode metrics from trace records only."""
    tasks: Dict[int, Task] = {}
    astar_calls = plan_events = 0
    for r in records:
        kind = r["type"]
        if kind == "spawn":
            tasks[r["task"]] = Task(r["task"], tuple(r["pickup"]), tuple(r["delivery"]), r["t"])
        elif kind == "assign":
            tasks[r["task"]].assign_t = r["t"]
            tasks[r["task"]].agent_id = r["agent"]
        elif kind == "pickup":
            tasks[r["task"]].pickup_t = r["t"]
            tasks[r["task"]].baseline = r["baseline"]
        elif kind == "deliver":
            tasks[r["task"]].deliver_t = r["t"]
        elif kind == "end":
            astar_calls, plan_events = r["astar_calls"], r["plan_events"]
    return MetricsSummary.from_tasks(list(tasks.values()), astar_calls, plan_events)


def check_trace(records: Sequence[dict]) -> List[str]:
    """Vertex, swap and kinematic violations between consecutive step records."""
    problems = []
    prev = None
    for r in records:
        if r["type"] != "step":
            continue
        t = r["t"]
        poses = {a[0]: Pose((a[1], a[2]), Heading[a[3]]) for a in r["agents"]}
        where: Dict[tuple, int] = {}
        for aid, p in sorted(poses.items()):
            if p.cell in where:
                problems.append(f"t={t}: vertex conflict between agents {where[p.cell]} and {aid} at {p.cell}")
            where[p.cell] = aid
        if prev is not None:
            pt, ppos = prev
            if t != pt + 1:
                problems.append(f"step records jump from t={pt} to t={t}")
            for aid, p in poses.items():
                if action_between(ppos[aid], p) is None:
                    problems.append(f"t={pt}: agent {aid} made an illegal move {ppos[aid]} -> {p}")
            ids = sorted(poses)
            for x in ids:
                for y in ids:
                    if x < y and poses[x].cell == ppos[y].cell and poses[y].cell == ppos[x].cell \
                            and poses[x].cell != poses[y].cell:
                        problems.append(f"t={pt}: edge conflict, agents {x} and {y} swap cells")
        prev = (t, poses)
    return problems


def check_karma(records: Sequence[dict]) -> List[str]:
    """Karma bookkeeping of a karma-mechanism trace: transfer = delta of the replanner,
    conserved pair sums, zero balance right after every pickup."""
    problems = []
    for r in records:
        if r["type"] == "negotiation":
            if r["karma_transfer"] != r["delta_replanner"]:
                problems.append(f"t={r['t']}: transfer {r['karma_transfer']} != delta {r['delta_replanner']}")
            if sum(r["karma_before"]) != sum(r["karma_after"]):
                problems.append(f"t={r['t']}: pair karma sum changed {r['karma_before']} -> {r['karma_after']}")
            ki, kj = r["karma_before"]
            d = r["delta_replanner"]
            want = [ki + d, kj - d] if r["replanner"] == r["initiator"] else [ki - d, kj + d]
            if r["karma_after"] != want:
                problems.append(f"t={r['t']}: karma update {r['karma_before']} -> {r['karma_after']}, expected {want}")
        elif r["type"] == "pickup" and r["karma"] != 0:
            problems.append(f"t={r['t']}: agent {r['agent']} has karma {r['karma']} right after pickup")
    return problems
