"""Dataclass configuration objects shared across the package.

Defaults follow the small-cell simulation setup: a 200 m square served by four
SBSs, 30 users, 10 MHz split into 64 subcarriers, three task classes.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a configuration value is out of its valid range."""


@dataclass(frozen=True)
class GeometryConfig:
    area_side: float = 200.0          # m
    num_sbs: int = 4
    num_users: int = 30
    min_user_sbs_distance: float = 10.0  # m
    carrier_ghz: float = 3.5
    data_range: tuple[float, float] = (120.0, 400.0)  # kilobits

    def __post_init__(self):
        if not self.area_side > 0:
            raise ConfigError("area_side must be positive")
        if self.num_sbs < 1 or self.num_users < 1:
            raise ConfigError("need at least one SBS and one user")
        if self.min_user_sbs_distance < 0:
            raise ConfigError("min_user_sbs_distance must be non-negative")
        if not self.carrier_ghz > 0:
            raise ConfigError("carrier_ghz must be positive")
        lo, hi = self.data_range
        if not 0 < lo <= hi:
            raise ConfigError("data_range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class SystemParams:
    bandwidth: float = 1e7             # Hz
    num_subcarriers: int = 64
    tx_power: float = 0.1              # W per user per subcarrier
    noise_power: float = 1e-13         # W (-100 dBm)
    mec_capacity: float = 2e11         # cycles/s per SBS
    local_capacity: float = 1.4e9      # cycles/s
    cycles_per_unit: float = 2e5       # cycles per kilobit
    degradation: float = 0.2
    max_parallel: int = 5
    fit_p: float = 100.0
    fit_q: float = 80.0
    fit_r: float = 0.6
    weight: float = 1.0

    def __post_init__(self):
        positive = ("bandwidth", "tx_power", "noise_power", "mec_capacity",
                    "local_capacity", "cycles_per_unit", "fit_p", "fit_q", "weight")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.num_subcarriers < 1 or self.max_parallel < 1:
            raise ConfigError("num_subcarriers and max_parallel must be >= 1")
        if self.degradation < 0:
            raise ConfigError("degradation must be non-negative")
        if not 0 <= self.fit_r <= 1:
            raise ConfigError("fit_r must lie in [0, 1]")

    @property
    def subcarrier_bandwidth(self) -> float:
        return self.bandwidth / self.num_subcarriers

    def min_volume(self, accuracy_limit):
        """Smallest data volume (kilobits) whose fitted accuracy reaches the limit."""
        return (self.fit_q / (self.fit_p - accuracy_limit)) ** (1.0 / self.fit_r)


@dataclass(frozen=True)
class TaskTypeSpec:
    delay_limit: float      # s
    accuracy_limit: float   # percent
    parallelism: int = 1

    def check(self, params: SystemParams) -> None:
        if not self.delay_limit > 0:
            raise ConfigError("delay_limit must be positive")
        if not 0 < self.accuracy_limit < params.fit_p:
            raise ConfigError("accuracy_limit must lie in (0, fit_p)")
        if not 1 <= self.parallelism <= params.max_parallel:
            raise ConfigError("parallelism must lie in [1, max_parallel]")


TABLE_LIMITS = ((0.020, 85.0), (0.040, 90.0), (0.060, 95.0))


def default_task_table(max_parallel: int = 5) -> tuple[TaskTypeSpec, ...]:
    """Three task classes; class m requests ceil(Q*m/M) parallel units."""
    return with_max_parallel(tuple(TaskTypeSpec(t, y) for t, y in TABLE_LIMITS), max_parallel)


def with_max_parallel(table, max_parallel: int) -> tuple[TaskTypeSpec, ...]:
    """Reassign parallelism ceil(Q*m/M) to the m-th of M task classes (1-based)."""
    m_total = len(table)
    return tuple(replace(t, parallelism=max(1, math.ceil(max_parallel * (m + 1) / m_total)))
                 for m, t in enumerate(table))


@dataclass(frozen=True)
class OuterConfig:
    tol: float = 1e-4
    max_outer: int = 10
    sub1_tol: float = 1e-4
    sub3_tol: float = 1e-4
    max_sca: int = 10         # SCA steps per block and outer iteration
    rounding: str = "final"   # "final" | "every"
    subcarrier_rounding: str = "quota"  # "quota" | "argmax"

    def __post_init__(self):
        if min(self.tol, self.sub1_tol, self.sub3_tol) <= 0:
            raise ConfigError("tolerances must be positive")
        if self.max_outer < 1 or self.max_sca < 1:
            raise ConfigError("iteration caps must be >= 1")
        if self.rounding not in ("final", "every"):
            raise ConfigError("rounding must be 'final' or 'every'")
        if self.subcarrier_rounding not in ("quota", "argmax"):
            raise ConfigError("subcarrier_rounding must be 'quota' or 'argmax'")


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs besides the seed; the unit of the config file."""
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    params: SystemParams = field(default_factory=SystemParams)
    tasks: tuple[TaskTypeSpec, ...] = field(default_factory=default_task_table)
    outer: OuterConfig = field(default_factory=OuterConfig)

    def to_dict(self) -> dict[str, Any]:
        return {
            "geometry": asdict(self.geometry),
            "params": asdict(self.params),
            "tasks": [asdict(t) for t in self.tasks],
            "outer": asdict(self.outer),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        base = cls()
        geometry = _merge(base.geometry, data.get("geometry", {}))
        params = _merge(base.params, data.get("params", {}))
        outer = _merge(base.outer, data.get("outer", {}))
        if "tasks" in data:
            tasks = tuple(TaskTypeSpec(**t) for t in data["tasks"])
        else:
            tasks = default_task_table(params.max_parallel)
        for t in tasks:
            t.check(params)
        return cls(geometry, params, tasks, outer)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _merge(obj, overrides: dict[str, Any]):
    known = {f.name for f in fields(obj)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown keys for {type(obj).__name__}: {sorted(unknown)}")
    if "data_range" in overrides:
        overrides = {**overrides, "data_range": tuple(overrides["data_range"])}
    return replace(obj, **overrides)
