"""Parameter sweeps: isolated episodes per (combination, seed), one aggregate CSV."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .mapd import run
from .scenario import SweepSpec, parse_scenario

METRICS = ("completed_tasks", "mean_task_time", "std_task_time", "mean_service_time", "std_service_time",
           "mean_service_time_increase", "std_service_time_increase", "astar_calls", "plan_events")


def _run_row(index: int, scenario_dict: Dict[str, Any], rows_dir: str) -> Dict[str, Any]:
    try:
        summary = run(parse_scenario(scenario_dict).to_config())
        row = {"status": "ok", **summary.scalars()}
    except Exception as exc:  # recorded per row, reported through the exit status
        row = {"status": f"error: {type(exc).__name__}: {exc}"}
    path = Path(rows_dir) / f"row_{index:05d}.json"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(row, sort_keys=True))
    os.replace(tmp, path)
    return row


def _fmt(v: Any) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _seed_stats(values: List[Optional[float]]) -> Tuple[Optional[float], Optional[float]]:
    vals = [float(v) for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    if not vals:
        return None, None
    arr = np.asarray(vals)
    return float(arr.mean()), float(arr.std())


def columns(spec: SweepSpec) -> List[str]:
    return ["row_type", *spec.keys, "seed", "status", *METRICS, *[f"{m}_seed_std" for m in METRICS]]


def run_sweep(spec: SweepSpec, out_dir: str, jobs: int = 1) -> Tuple[Path, int]:
    """Run every row, then write ``aggregate.csv``; returns (path, failed row count).

    Each combination contributes its seed rows followed by one ``aggregate``
    row holding the across-seed mean (metric columns) and population std
    (``*_seed_std`` columns) over the successful rows.
    """
    out = Path(out_dir)
    rows_dir = out / "rows"
    rows_dir.mkdir(parents=True, exist_ok=True)
    todo = spec.rows()
    args = [(k, scen.to_dict(), str(rows_dir)) for k, (_, _, scen) in enumerate(todo)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_row, *zip(*args)))
    else:
        results = [_run_row(*a) for a in args]

    lines: List[Dict[str, str]] = []
    failed = 0
    n_seeds = len(spec.seeds)
    for c, combo in enumerate(spec.combinations()):
        block = results[c * n_seeds:(c + 1) * n_seeds]
        for seed, row in zip(spec.seeds, block):
            failed += row["status"] != "ok"
            line = {"row_type": "data", **{k: _fmt(v) for k, v in combo.items()}, "seed": str(seed),
                    "status": row["status"]}
            line.update({m: _fmt(row.get(m)) for m in METRICS})
            lines.append(line)
        ok = [r for r in block if r["status"] == "ok"]
        agg = {"row_type": "aggregate", **{k: _fmt(v) for k, v in combo.items()}, "seed": "",
               "status": f"{len(ok)}/{len(block)} ok"}
        for m in METRICS:
            mean, std = _seed_stats([r.get(m) for r in ok])
            agg[m] = _fmt(mean)
            agg[f"{m}_seed_std"] = _fmt(std)
        lines.append(agg)

    path = out / "aggregate.csv"
    tmp = path.with_name("aggregate.csv.tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns(spec), restval="", lineterminator="\n")
        w.writeheader()
        w.writerows(lines)
    os.replace(tmp, path)
    return path, failed
