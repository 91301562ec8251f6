"""Run configuration: one JSON document, dataclass sections, unknown keys rejected."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Tuple

from .fragmentation import FragConfig
from .model import ContractError, ProfitParams
from .search import SearchParams


@dataclass
class TopologyConfig:
    kind: str = "random"  # "random" | "file" (NODES/LINKS text) | "edges" (bare edge pairs)
    n_nodes: int = 30
    n_links: int = 60
    cpu_range: Tuple[int, int] = (100, 150)
    bw_range: Tuple[int, int] = (100, 150)
    path: Optional[str] = None
    seed: Optional[int] = None  # None: use the run seed

    def __post_init__(self):
        if self.kind not in ("random", "file", "edges"):
            raise ContractError("topology.kind must be random, file or edges")
        if self.kind != "random" and not self.path:
            raise ContractError(f"topology.kind={self.kind} needs topology.path")


@dataclass
class WorkloadConfig:
    n_requests: int = 300
    arrival_rate: float = 0.1
    mean_lifetime: float = 500.0
    size_range: Tuple[int, int] = (5, 15)
    density: float = 0.5
    demand_range: Tuple[int, int] = (1, 20)
    bw_range: Tuple[int, int] = (1, 20)
    path: Optional[str] = None  # a workload JSONL file overrides generation
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n_requests < 0:
            raise ContractError("workload.n_requests must be >= 0")
        if self.arrival_rate <= 0 or self.mean_lifetime <= 0:
            raise ContractError("workload rates must be positive")


@dataclass
class RoutingConfig:
    k_paths: int = 5

    def __post_init__(self):
        if self.k_paths < 1:
            raise ContractError("routing.k_paths must be >= 1")


@dataclass
class BaselineConfig:
    damping: float = 0.85
    iters: int = 50


@dataclass
class RunConfig:
    seed: int = 0
    solver: str = "abs"  # "abs" | "rwbfs"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    profit: ProfitParams = field(default_factory=ProfitParams)
    frag: FragConfig = field(default_factory=FragConfig)
    search: SearchParams = field(default_factory=SearchParams)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)

    def __post_init__(self):
        if self.solver not in ("abs", "rwbfs"):
            raise ContractError("solver must be abs or rwbfs")
        if self.search.k_paths != self.routing.k_paths:
            self.search = dataclasses.replace(self.search, k_paths=self.routing.k_paths)

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["search"].pop("k_paths")  # routing.k_paths is the single source
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


_SECTIONS = {"topology": TopologyConfig, "workload": WorkloadConfig, "routing": RoutingConfig,
             "profit": ProfitParams, "frag": FragConfig, "search": SearchParams,
             "baseline": BaselineConfig}


def _build(cls, data: Mapping[str, Any], where: str, skip=()):
    if not isinstance(data, Mapping):
        raise ContractError(f"{where} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - (set(fields) - set(skip)))
    if unknown:
        raise ContractError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if isinstance(v, list):
            v = tuple(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ContractError(f"{where}: {exc}") from None


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    if not isinstance(data, Mapping):
        raise ContractError("config must be a JSON object")
    top = {k: v for k, v in data.items() if k not in _SECTIONS}
    unknown = sorted(set(top) - {"seed", "solver"})
    if unknown:
        raise ContractError(f"unknown key(s) in config: {', '.join(unknown)}")
    sections = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            skip = ("k_paths",) if name == "search" else ()
            sections[name] = _build(cls, data[name], name, skip)
    return RunConfig(**top, **sections)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ContractError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(data)
