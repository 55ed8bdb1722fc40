"""Random network instances and the UMi channel model.

A :class:`Scenario` bundles SBS/user geometry, nearest-SBS association, linear
channel gains and per-user task requests. Generation is fully determined by
``(config, task_table, seed)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import GeometryConfig, TaskTypeSpec, default_task_table

SCENARIO_FORMAT = "mecoffload-scenario"
SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    """Instance generation failed (bad geometry, malformed file, ...)."""


@dataclass(frozen=True)
class Position:
    x: float
    y: float


@dataclass(frozen=True)
class ChannelRealization:
    gain: np.ndarray        # (U, N) own-link gain per subcarrier
    cross_gain: np.ndarray  # (U, K) gain from each user to every SBS
    distance: np.ndarray    # (U, K) metres


@dataclass(frozen=True)
class TaskAssignment:
    task_type: np.ndarray       # (U,) index into table
    table: tuple[TaskTypeSpec, ...]
    raw_data: np.ndarray        # (U,) kilobits

    @property
    def num_types(self) -> int:
        return len(self.table)

    @property
    def request_indicator(self) -> np.ndarray:
        z = np.zeros((len(self.task_type), self.num_types), dtype=int)
        z[np.arange(len(self.task_type)), self.task_type] = 1
        return z

    @property
    def delay_limit(self) -> np.ndarray:
        return np.array([self.table[m].delay_limit for m in self.task_type])

    @property
    def accuracy_limit(self) -> np.ndarray:
        return np.array([self.table[m].accuracy_limit for m in self.task_type])

    @property
    def parallelism(self) -> np.ndarray:
        return np.array([self.table[m].parallelism for m in self.task_type])

    def with_table(self, table) -> "TaskAssignment":
        if len(table) != self.num_types:
            raise ScenarioError("replacement table must keep the number of task types")
        return TaskAssignment(self.task_type, tuple(table), self.raw_data)


@dataclass(frozen=True)
class Scenario:
    config: GeometryConfig
    seed: int
    sbs_positions: np.ndarray   # (K, 2)
    user_positions: np.ndarray  # (U, 2)
    association: np.ndarray     # (U,) serving SBS index
    channel: ChannelRealization
    tasks: TaskAssignment

    @property
    def num_users(self) -> int:
        return len(self.association)

    @property
    def num_sbs(self) -> int:
        return len(self.sbs_positions)

    @property
    def num_subcarriers(self) -> int:
        return self.channel.gain.shape[1]

    def users_of(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.association == k)

    def positions(self) -> list[Position]:
        return [Position(float(x), float(y)) for x, y in self.user_positions]

    def with_tasks(self, tasks: TaskAssignment) -> "Scenario":
        return Scenario(self.config, self.seed, self.sbs_positions, self.user_positions,
                        self.association, self.channel, tasks)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": SCENARIO_FORMAT,
            "version": SCENARIO_VERSION,
            "seed": self.seed,
            "config": asdict(self.config),
            "sbs_positions": self.sbs_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
            "association": self.association.tolist(),
            "gain": self.channel.gain.tolist(),
            "cross_gain": self.channel.cross_gain.tolist(),
            "distance": self.channel.distance.tolist(),
            "task_type": self.tasks.task_type.tolist(),
            "task_table": [asdict(t) for t in self.tasks.table],
            "raw_data": self.tasks.raw_data.tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if d.get("format") != SCENARIO_FORMAT:
            raise ScenarioError("not a scenario file")
        if d.get("version") != SCENARIO_VERSION:
            raise ScenarioError(f"unsupported scenario version {d.get('version')}")
        cfg = dict(d["config"])
        cfg["data_range"] = tuple(cfg["data_range"])
        channel = ChannelRealization(
            np.array(d["gain"], dtype=float),
            np.array(d["cross_gain"], dtype=float),
            np.array(d["distance"], dtype=float),
        )
        tasks = TaskAssignment(
            np.array(d["task_type"], dtype=int),
            tuple(TaskTypeSpec(**t) for t in d["task_table"]),
            np.array(d["raw_data"], dtype=float),
        )
        return cls(GeometryConfig(**cfg), int(d["seed"]),
                   np.array(d["sbs_positions"], dtype=float),
                   np.array(d["user_positions"], dtype=float),
                   np.array(d["association"], dtype=int), channel, tasks)

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- channel model -------------------------------------------------------

def los_probability(d):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    decay = np.exp(-d / 36.0)
    p = np.minimum(18.0 / d, 1.0) * (1.0 - decay) + decay
    return np.clip(p, 0.0, 1.0)


def path_loss_db(d, fq, los: bool):
    """UMi path loss in dB; ``fq`` is the carrier frequency in GHz."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0) or fq <= 0:
        raise ValueError("distance and frequency must be positive")
    if los:
        return 22.0 * np.log10(d) + 28.0 + 20.0 * math.log10(fq)
    return 36.7 * np.log10(d) + 22.7 + 26.0 * math.log10(fq)


def expected_channel_gain(d, fq):
    """Linear gain: inverse of the LoS/NLoS-weighted linear path loss."""
    p_los = los_probability(d)
    loss = (p_los * 10.0 ** (path_loss_db(d, fq, True) / 10.0)
            + (1.0 - p_los) * 10.0 ** (path_loss_db(d, fq, False) / 10.0))
    return 1.0 / loss


# -- generation ----------------------------------------------------------

def hex_sites(num_sbs: int, side: float) -> np.ndarray:
    """Offset-grid SBS layout; alternate rows are shifted by half a column."""
    ncols = math.ceil(math.sqrt(num_sbs))
    nrows = math.ceil(num_sbs / ncols)
    sx, sy = side / ncols, side / nrows
    sites = []
    for i in range(num_sbs):
        r, c = divmod(i, ncols)
        shift = 0.0 if nrows == 1 else (0.25 if r % 2 else -0.25) * sx
        sites.append(((c + 0.5) * sx + shift, (r + 0.5) * sy))
    return np.array(sites)


def _place_users(rng, config: GeometryConfig, sites: np.ndarray) -> np.ndarray:
    side, dmin = config.area_side, config.min_user_sbs_distance
    if config.num_sbs * math.pi * dmin ** 2 >= side ** 2:
        raise ScenarioError("exclusion disks cover the whole area")
    users = np.empty((0, 2))
    for _ in range(1000):
        cand = rng.uniform(0.0, side, size=(2 * config.num_users, 2))
        dist = np.linalg.norm(cand[:, None, :] - sites[None, :, :], axis=2)
        users = np.vstack([users, cand[dist.min(axis=1) >= dmin]])
        if len(users) >= config.num_users:
            return users[:config.num_users]
    raise ScenarioError("could not place users outside the exclusion radius")


def place_network(config: GeometryConfig, seed: int, num_subcarriers: int = 64):
    """SBS sites, user positions, association and channel gains (no tasks yet).

    Returns ``(sbs_positions, user_positions, association, channel)``.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    sites = hex_sites(config.num_sbs, config.area_side)
    users = _place_users(rng, config, sites)
    distance = np.linalg.norm(users[:, None, :] - sites[None, :, :], axis=2)
    association = np.argmin(distance, axis=1)
    cross = expected_channel_gain(distance, config.carrier_ghz)
    own = cross[np.arange(len(users)), association]
    gain = np.repeat(own[:, None], num_subcarriers, axis=1)
    return sites, users, association, ChannelRealization(gain, cross, distance)


def assign_tasks(num_users: int, task_table, seed: int,
                 data_range=(120.0, 400.0)) -> TaskAssignment:
    table = tuple(task_table)
    if not table:
        raise ScenarioError("task table is empty")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    task_type = rng.integers(0, len(table), size=num_users)
    raw = rng.uniform(data_range[0], data_range[1], size=num_users)
    return TaskAssignment(task_type, table, raw)


def make_scenario(config: GeometryConfig | None = None, seed: int = 0,
                  task_table=None, num_subcarriers: int = 64) -> Scenario:
    config = config or GeometryConfig()
    table = tuple(task_table) if task_table is not None else default_task_table()
    sites, users, assoc, channel = place_network(config, seed, num_subcarriers)
    tasks = assign_tasks(config.num_users, table, seed, config.data_range)
    return Scenario(config, seed, sites, users, assoc, channel, tasks)
