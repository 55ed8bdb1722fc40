"""Experiment sweeps over seeds, schemes and one swept parameter.

Each run is identified by (scheme, sweep value, bandwidth, seed). Results are
collected into a :class:`ResultTable` whose CSV is byte-identical across
reruns of the same spec; wall times go to a separate timing CSV for that
reason. Runs may fan out over worker processes and are merged by key.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import SCHEMES, run_scheme
from .config import RunConfig, with_max_parallel
from .orchestrator import RunError
from .scenario import Scenario, make_scenario

log = logging.getLogger(__name__)

EXPERIMENTS = ("convergence", "sweep_users", "sweep_capacity", "sweep_parallel", "sweep_weight")
ALL_SCHEMES = ("proposed", "FC", "AC", "WCR")
DEFAULT_VALUES: dict[str, tuple[float, ...]] = {
    "convergence": (30,),
    "sweep_users": (10, 15, 20, 25, 30, 35, 40, 45),
    "sweep_capacity": tuple(float(v) * 1e9 for v in range(50, 401, 50)),
    "sweep_parallel": (1, 2, 3, 4, 5),
    "sweep_weight": (1, 2, 5, 10, 20),
}
SWEPT = {"convergence": "num_users", "sweep_users": "num_users",
         "sweep_capacity": "mec_capacity", "sweep_parallel": "max_parallel",
         "sweep_weight": "weight"}
CACHE_VERSION = 1


class SpecError(ValueError):
    """Invalid experiment specification."""


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    values: tuple[float, ...] = ()                 # empty -> the experiment's default grid
    bandwidths: tuple[float, ...] = (1e7,)
    seeds: tuple[int, ...] = tuple(range(10))
    schemes: tuple[str, ...] = ALL_SCHEMES
    base: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise SpecError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if not self.values:
            object.__setattr__(self, "values", DEFAULT_VALUES[self.experiment])
        if not self.seeds or not self.bandwidths or not self.schemes:
            raise SpecError("seeds, bandwidths and schemes must be nonempty")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise SpecError(f"unknown schemes {sorted(unknown)}; choose from {ALL_SCHEMES}")
        if any(not b > 0 for b in self.bandwidths):
            raise SpecError("bandwidths must be positive")
        if self.experiment in ("convergence", "sweep_users", "sweep_parallel"):
            if any(v != int(v) or v < 1 for v in self.values):
                raise SpecError(f"{self.experiment} values must be positive integers")
        elif any(not v > 0 for v in self.values):
            raise SpecError(f"{self.experiment} values must be positive")

    def point_config(self, value: float, bandwidth: float) -> RunConfig:
        """Run configuration at one sweep point."""
        cfg = self.base
        params = replace(cfg.params, bandwidth=float(bandwidth))
        geometry, tasks = cfg.geometry, cfg.tasks
        if self.experiment in ("convergence", "sweep_users"):
            geometry = replace(geometry, num_users=int(value))
        elif self.experiment == "sweep_capacity":
            params = replace(params, mec_capacity=float(value))
        elif self.experiment == "sweep_parallel":
            params = replace(params, max_parallel=int(value))
            tasks = with_max_parallel(tasks, int(value))
        else:
            params = replace(params, weight=float(value))
        return RunConfig(geometry, params, tasks, cfg.outer)

    def tasks(self) -> list["RunTask"]:
        return [RunTask(self.experiment, s, float(v), float(b), int(seed), self.point_config(v, b))
                for s in self.schemes for v in self.values for b in self.bandwidths
                for seed in self.seeds]


@dataclass(frozen=True)
class RunTask:
    experiment: str
    scheme: str
    value: float
    bandwidth: float
    seed: int
    config: RunConfig

    @property
    def key(self):
        return (ALL_SCHEMES.index(self.scheme), self.value, self.bandwidth, self.seed)

    def digest(self) -> str:
        blob = json.dumps({"v": CACHE_VERSION, "scheme": self.scheme, "seed": self.seed,
                           "config": self.config.to_dict()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:24]


@dataclass
class ResultRow:
    experiment: str
    scheme: str
    value: float
    bandwidth: float
    seed: int
    status: str              # ok | run_error | violation | error:<type>
    utility: float
    revenue: float           # sum of ln(accuracy) over counted users
    cost: float              # negative system cost, -sum of ln(delay)
    counted: int             # users in the objective
    infeasible: int          # users violating a delay/accuracy limit (all flagged)
    converged: bool
    outer_iterations: int
    wall_time: float = 0.0


COLUMNS = tuple(f.name for f in fields(ResultRow) if f.name != "wall_time")
TIMING_COLUMNS = ("experiment", "scheme", "value", "bandwidth", "seed", "wall_time")
TRACE_COLUMNS = ("experiment", "scheme", "value", "bandwidth", "seed", "iteration",
                 "relaxed_value", "rounded_value")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


def _write(path: Path | None, columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)
    traces: list[tuple] = field(default_factory=list)

    def to_csv(self, path=None) -> str:
        return _write(path, COLUMNS, ([getattr(r, c) for c in COLUMNS] for r in self.rows))

    def timing_csv(self, path=None) -> str:
        return _write(path, TIMING_COLUMNS,
                      ([getattr(r, c) for c in TIMING_COLUMNS] for r in self.rows))

    def traces_csv(self, path=None) -> str:
        return _write(path, TRACE_COLUMNS, self.traces)

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        types = {f.name: f.type for f in fields(ResultRow)}
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                kw = {}
                for k, v in rec.items():
                    t = types[k]
                    kw[k] = (v if t == "str" else int(v) if t == "int"
                             else bool(int(v)) if t == "bool" else float(v))
                rows.append(ResultRow(**kw))
        return cls(rows)

    def select(self, scheme=None, bandwidth=None, status_ok=True) -> list[ResultRow]:
        return [r for r in self.rows
                if (scheme is None or r.scheme == scheme)
                and (bandwidth is None or r.bandwidth == bandwidth)
                and (not status_ok or r.status == "ok")]

    def means(self, column: str, scheme: str, bandwidth: float | None = None) -> dict[float, float]:
        """Mean of ``column`` per sweep value over the successful runs."""
        groups: dict[float, list[float]] = {}
        for r in self.select(scheme, bandwidth):
            groups.setdefault(r.value, []).append(getattr(r, column))
        return {v: float(np.mean(xs)) for v, xs in sorted(groups.items())}


# -- running -------------------------------------------------------------

def build_scenario(config: RunConfig, seed: int) -> Scenario:
    return make_scenario(config.geometry, seed, config.tasks, config.params.num_subcarriers)


def execute(task: RunTask) -> tuple[ResultRow, list[tuple]]:
    """One run; failures become rows with a status instead of exceptions."""
    head = (task.experiment, task.scheme, task.value, task.bandwidth, task.seed)
    start = time.perf_counter()
    nan = float("nan")
    try:
        scenario = build_scenario(task.config, task.seed)
        res = run_scheme(task.scheme, scenario, task.config.params, task.config.outer)
    except RunError:
        return ResultRow(*head, "run_error", nan, nan, nan, 0, task.config.geometry.num_users,
                         False, 0, time.perf_counter() - start), []
    except Exception as exc:  # recorded, never aborts a sweep
        log.exception("run %s failed", head)
        return ResultRow(*head, f"error:{type(exc).__name__}", nan, nan, nan, 0, 0, False, 0,
                         time.perf_counter() - start), []
    rep = res.report
    silent = ({v.user for v in rep.violations if v.constraint in ("C6", "C7")} - set(res.flagged)
              or any(v.constraint not in ("C6", "C7") for v in rep.violations))
    row = ResultRow(*head, "violation" if silent else "ok", rep.value, rep.revenue, rep.cost,
                    rep.num_counted, len(rep.infeasible_users), res.trace.converged,
                    res.trace.iterations, time.perf_counter() - start)
    traces = [(*head, 0, res.trace.initial_value, nan)]
    traces += [(*head, r.iteration, r.relaxed_value, r.rounded_value) for r in res.trace.records]
    return row, traces


def _cached(task: RunTask, cache_dir: Path | None):
    if cache_dir is None:
        return execute(task)
    path = cache_dir / f"{task.digest()}.json"
    if path.exists():
        # the same configuration may recur under another experiment label
        d = json.loads(path.read_text())
        head = dict(experiment=task.experiment, scheme=task.scheme, value=task.value,
                    bandwidth=task.bandwidth, seed=task.seed)
        row = ResultRow(**{**d["row"], **head})
        return row, [(*head.values(), *t[5:]) for t in d["traces"]]
    row, traces = execute(task)
    if row.status == "ok":
        path.write_text(json.dumps({"row": asdict(row), "traces": traces}))
    return row, traces


def run_experiment(spec: ExperimentSpec, out_dir: str | Path | None = None, workers: int = 1,
                   cache_dir: str | Path | None = None, progress=None) -> ResultTable:
    """Run every (scheme, value, bandwidth, seed) of ``spec``.

    Writes ``<experiment>.csv``, ``<experiment>_timing.csv``,
    ``<experiment>_summary.csv`` and ``<experiment>.svg`` (plus
    ``<experiment>_traces.csv`` for the convergence study) when ``out_dir``
    is given. ``cache_dir`` memoises successful runs by configuration hash.
    """
    tasks = spec.tasks()
    cache = Path(cache_dir) if cache_dir is not None else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for task, out in zip(tasks, pool.map(_cached, tasks, [cache] * len(tasks))):
                results.append((task.key, out))
                if progress:
                    progress(out[0])
    else:
        for task in tasks:
            out = _cached(task, cache)
            results.append((task.key, out))
            if progress:
                progress(out[0])
    results.sort(key=lambda kv: kv[0])
    table = ResultTable([out[0] for _, out in results],
                        [t for _, out in results for t in out[1]])
    if out_dir is not None:
        write_outputs(spec, table, out_dir)
    return table


def write_outputs(spec: ExperimentSpec, table: ResultTable, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = spec.experiment
    table.to_csv(out / f"{name}.csv")
    table.timing_csv(out / f"{name}_timing.csv")
    write_summary(summarize(table), out / f"{name}_summary.csv")
    if name == "convergence":
        table.traces_csv(out / f"{name}_traces.csv")
    from .plotting import plot_experiment
    plot_experiment(spec, table, out / f"{name}.svg")


# -- summaries -----------------------------------------------------------

SUMMARY_COLUMNS = ("experiment", "scheme", "value", "bandwidth", "seeds", "failed",
                   "utility_mean", "utility_std", "revenue_mean", "cost_mean",
                   "infeasible_mean", "utility_diff")


def summarize(table: ResultTable) -> list[tuple]:
    """Per (scheme, value, bandwidth): successful seed count, failures, means,
    population std of the utility, and the first difference of the mean
    utility along the sweep (nan at the first point)."""
    if not table.rows:
        raise SpecError("cannot summarise an empty table")
    groups: dict[tuple, list[ResultRow]] = {}
    for r in table.rows:
        groups.setdefault((r.experiment, r.scheme, r.bandwidth, r.value), []).append(r)
    out, prev = [], {}
    order = sorted(groups, key=lambda k: (k[0], ALL_SCHEMES.index(k[1])
                                          if k[1] in ALL_SCHEMES else 99, k[1], k[2], k[3]))
    for key in order:
        rows = groups[key]
        ok = [r for r in rows if r.status == "ok"]
        u = np.array([r.utility for r in ok])
        mean = float(u.mean()) if len(u) else float("nan")
        series = key[:3]                       # (experiment, scheme, bandwidth)
        diff = mean - prev[series] if series in prev else float("nan")
        prev[series] = mean
        out.append((key[0], key[1], key[3], key[2], len(ok), len(rows) - len(ok), mean,
                    float(u.std()) if len(u) else float("nan"),
                    float(np.mean([r.revenue for r in ok])) if ok else float("nan"),
                    float(np.mean([r.cost for r in ok])) if ok else float("nan"),
                    float(np.mean([r.infeasible for r in ok])) if ok else float("nan"),
                    diff))
    return out


def write_summary(summary: list[tuple], path=None) -> str:
    return _write(path, SUMMARY_COLUMNS, summary)


def acceptance_specs(seeds=tuple(range(10)), base: RunConfig | None = None) -> list[ExperimentSpec]:
    """Sweeps behind the shape checks: all schemes at the default point, the
    proposed scheme alone along the users, parallelism and weight grids."""
    base = base or RunConfig()
    seeds = tuple(seeds)
    return [ExperimentSpec("convergence", seeds=seeds, base=base),
            ExperimentSpec("sweep_users", seeds=seeds, schemes=("proposed",), base=base),
            ExperimentSpec("sweep_parallel", seeds=seeds, schemes=("proposed",), base=base),
            ExperimentSpec("sweep_weight", seeds=seeds, schemes=("proposed",), base=base)]
