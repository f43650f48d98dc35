"""Scenario files (one episode) and sweep specs (cross products of scenarios).

A scenario is a JSON or YAML mapping::

    grid: {interior_width: 10, interior_height: 10}
    agents: 8
    mechanism: karma        # token | egoistic | altruistic | karma
    tau: 0.5
    steps: 100
    task_rate: null         # tasks per step, null -> 0.5 * agents
    seed: 0
    horizon: null           # null -> 4 * (width + height) of the bordered map
    output_dir: out

Unknown keys are rejected; missing keys take the defaults above.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .mapd import SimConfig
from .negotiation import MechanismKind


class ScenarioError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_TOP_KEYS = ("grid", "agents", "mechanism", "tau", "steps", "task_rate", "seed", "horizon", "output_dir")
_GRID_KEYS = ("interior_width", "interior_height")


@dataclass(frozen=True)
class Scenario:
    interior_width: int = 10
    interior_height: int = 10
    agents: int = 8
    mechanism: str = "karma"
    tau: float = 0.5
    steps: int = 100
    task_rate: Optional[float] = None
    seed: int = 0
    horizon: Optional[int] = None
    output_dir: str = "out"

    def to_config(self) -> SimConfig:
        return SimConfig(
            interior_width=self.interior_width,
            interior_height=self.interior_height,
            agents=self.agents,
            mechanism=self.mechanism,
            tau=self.tau,
            episode_length=self.steps,
            task_rate=self.task_rate,
            seed=self.seed,
            horizon=self.horizon or 0,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": {"interior_width": self.interior_width, "interior_height": self.interior_height},
            "agents": self.agents,
            "mechanism": self.mechanism,
            "tau": self.tau,
            "steps": self.steps,
            "task_rate": self.task_rate,
            "seed": self.seed,
            "horizon": self.horizon,
            "output_dir": self.output_dir,
        }

    def with_values(self, values: Dict[str, Any]) -> "Scenario":
        """Copy with dotted-key overrides (``grid.interior_width`` or ``agents``)."""
        merged = self.to_dict()
        for key, val in values.items():
            if key.startswith("grid."):
                merged["grid"][key[5:]] = val
            else:
                merged[key] = val
        return parse_scenario(merged)


def _int(key: str, v: Any, minimum: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(key, f"expected an integer, got {v!r}")
    if v < minimum:
        raise ScenarioError(key, f"must be >= {minimum}")
    return v


def _num(key: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(key, f"expected a number, got {v!r}")
    if v < 0:
        raise ScenarioError(key, "must be >= 0")
    return float(v)


def parse_scenario(data: Dict[str, Any]) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "scenario must be a mapping")
    for key in data:
        if key not in _TOP_KEYS:
            raise ScenarioError(key, "unknown key")
    grid = data.get("grid", {}) or {}
    if not isinstance(grid, dict):
        raise ScenarioError("grid", "expected a mapping")
    for key in grid:
        if key not in _GRID_KEYS:
            raise ScenarioError(f"grid.{key}", "unknown key")
    d = Scenario()
    kw: Dict[str, Any] = {}
    if "interior_width" in grid:
        kw["interior_width"] = _int("grid.interior_width", grid["interior_width"], 1)
    if "interior_height" in grid:
        kw["interior_height"] = _int("grid.interior_height", grid["interior_height"], 1)
    if "agents" in data:
        kw["agents"] = _int("agents", data["agents"], 0)
    if "mechanism" in data:
        try:
            kw["mechanism"] = MechanismKind(data["mechanism"]).value
        except ValueError:
            raise ScenarioError("mechanism", f"expected one of token|egoistic|altruistic|karma, "
                                             f"got {data['mechanism']!r}") from None
    if data.get("tau") is not None:
        kw["tau"] = _num("tau", data["tau"])
    if "steps" in data:
        kw["steps"] = _int("steps", data["steps"], 0)
    if data.get("task_rate") is not None:
        kw["task_rate"] = _num("task_rate", data["task_rate"])
    if "seed" in data:
        kw["seed"] = _int("seed", data["seed"], 0)
    if data.get("horizon") is not None:
        kw["horizon"] = _int("horizon", data["horizon"], 1)
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str):
            raise ScenarioError("output_dir", "expected a string")
        kw["output_dir"] = data["output_dir"]
    return replace(d, **kw)


def load_document(path: str) -> Any:
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        return yaml.safe_load(text)
    return json.loads(text)


def load_scenario(path: str) -> Scenario:
    return parse_scenario(load_document(path) or {})


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario.to_dict(), indent=2) + "\n"


@dataclass(frozen=True)
class SweepSpec:
    """Cross product of ``values`` (key -> list, in the given order) times ``seeds``.

    Rows are ordered by the listed values of each key in turn, then by seed.
    """

    base: Scenario = field(default_factory=Scenario)
    values: Tuple[Tuple[str, Tuple[Any, ...]], ...] = ()
    seeds: Tuple[int, ...] = tuple(range(1, 21))

    @property
    def keys(self) -> List[str]:
        return [k for k, _ in self.values]

    def combinations(self) -> List[Dict[str, Any]]:
        lists = [v for _, v in self.values]
        return [dict(zip(self.keys, combo)) for combo in itertools.product(*lists)]

    def size(self) -> int:
        return len(self.combinations()) * len(self.seeds)

    def rows(self) -> List[Tuple[Dict[str, Any], int, Scenario]]:
        out = []
        for combo in self.combinations():
            for seed in self.seeds:
                out.append((combo, seed, self.base.with_values({**combo, "seed": seed})))
        return out


def parse_sweep(data: Dict[str, Any]) -> SweepSpec:
    """``{"base": {...scenario...}, "sweep": {"tau": [0, 0.5]}, "seeds": [1, 2] | 20}``."""
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "sweep spec must be a mapping")
    for key in data:
        if key not in ("base", "sweep", "seeds"):
            raise ScenarioError(key, "unknown key")
    base = parse_scenario(data.get("base", {}) or {})
    values = []
    for key, vals in (data.get("sweep") or {}).items():
        if key == "seed":
            raise ScenarioError("sweep.seed", "use the top-level 'seeds' key")
        if not isinstance(vals, list) or not vals:
            raise ScenarioError(f"sweep.{key}", "expected a non-empty list")
        for v in vals:
            base.with_values({key: v})  # validates key and value
        values.append((key, tuple(vals)))
    seeds = data.get("seeds", 20)
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = list(range(1, seeds + 1))
    if not isinstance(seeds, list) or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ScenarioError("seeds", "expected a count or a list of non-negative integers")
    return SweepSpec(base, tuple(values), tuple(seeds))
