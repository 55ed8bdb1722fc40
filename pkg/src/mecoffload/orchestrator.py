"""Alternating optimisation over subcarriers, capacity and offloading.

Each outer iteration solves the subcarrier block (SCA), the capacity block
(exact) and the offloading/compression block (SCA) on the relaxed problem,
then evaluates the relaxed system utility. After the loop the relaxed state
is rounded and repaired into a binary, feasible-or-flagged allocation.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import OuterConfig, SystemParams
from .cvxcore import SolverSettings
from .model import AllocationState, UtilityReport, system_utility, total_delay, uplink_rates
from .scenario import Scenario
from .subsolvers import (equal_split, offload_data, round_offload, round_robin,
                         round_subcarriers, solve_capacity, solve_offload_sca,
                         solve_subcarrier_sca, subcarrier_data)

log = logging.getLogger(__name__)


class RunError(RuntimeError):
    """No user can be served feasibly."""


@dataclass(frozen=True)
class Scheme:
    """Which blocks are optimised and what the decision model knows about."""
    name: str = "proposed"
    optimize_subcarriers: bool = True
    optimize_capacity: bool = True
    compression: bool = True
    parallel_aware: bool = True


PROPOSED = Scheme()

# barrier settings per block. Subcarrier steps get a bounded Newton budget per
# stage: an inexact step is still accepted only if the true objective improves.
SUBCARRIER_SETTINGS = SolverSettings(t0=1e4, max_newton=15, stage_tol=1e-3,
                                     duality_gap_tol=1e-5, center_accuracy=1e-7)
OFFLOAD_SETTINGS = SolverSettings(duality_gap_tol=1e-8)


@dataclass
class OuterRecord:
    iteration: int
    relaxed_value: float
    rounded_value: float
    sub1_iterations: int
    sub1_status: str
    sub3_iterations: int
    sub3_status: str
    capacity_flags: int
    sub1_trace: list[float] = field(default_factory=list)
    sub3_trace: list[float] = field(default_factory=list)
    sub1_time: float = 0.0
    capacity_time: float = 0.0
    sub3_time: float = 0.0


@dataclass
class SolveTrace:
    initial_value: float
    records: list[OuterRecord] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0

    @property
    def values(self) -> list[float]:
        """Relaxed objective N^0, N^1, ... ."""
        return [self.initial_value] + [r.relaxed_value for r in self.records]

    @property
    def iterations(self) -> int:
        return len(self.records)


@dataclass
class RunResult:
    scheme: str
    state: AllocationState
    relaxed_state: AllocationState
    report: UtilityReport
    trace: SolveTrace
    flagged: list[int]

    @property
    def value(self) -> float:
        return self.report.value

    def to_dict(self, config=None) -> dict:
        return {
            "scheme": self.scheme,
            "config": None if config is None else config.to_dict(),
            "value": self.value,
            "flagged": self.flagged,
            "state": self.state.to_dict(),
            "trace": {"initial_value": self.trace.initial_value,
                      "converged": self.trace.converged,
                      "records": [asdict(r) for r in self.trace.records]},
            "users": self.report.to_csv(self.state).splitlines(),
        }

    def save(self, path: str | Path, config=None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(config), indent=1))


# -- helpers -------------------------------------------------------------

def decision_params(params: SystemParams, scheme: Scheme) -> SystemParams:
    """Model the scheme optimises against (degradation ignored if not parallel-aware)."""
    return params if scheme.parallel_aware else replace(params, degradation=0.0)


def objective_of_state(scenario: Scenario, params: SystemParams, state: AllocationState,
                       relaxed: bool = False) -> float:
    """System utility of a state; relaxed states are scored over every user."""
    return system_utility(scenario, params, state, relaxed=relaxed,
                          exclude_infeasible=not relaxed).value


def _eta_floor(scenario: Scenario, params: SystemParams) -> np.ndarray:
    return params.min_volume(scenario.tasks.accuracy_limit) / scenario.tasks.raw_data


def initial_state(scenario: Scenario, params: SystemParams, scheme: Scheme = PROPOSED):
    """Everyone offloads on round-robin subcarriers with an equal capacity split."""
    floor = _eta_floor(scenario, params)
    x = np.where(floor < 1.0, 1.0, 0.0)
    eta = np.clip(np.maximum(floor, 0.5), None, 1.0) if scheme.compression else np.ones_like(x)
    eps = np.where(x > 0, 1.0 / eta, 1.0)
    f = equal_split(scenario, params, x > 0)
    return AllocationState(x, round_robin(scenario), f, eps), np.where(x > 0, eta, 1.0)


def _eta_of(state: AllocationState) -> np.ndarray:
    return 1.0 - state.x + state.x / state.eps


def _allocate_capacity(scenario, params, state, rates, scheme, enforce=None):
    if scheme.optimize_capacity:
        res = solve_capacity(scenario, params, state, rates, enforce, scheme.parallel_aware)
        return res.f, res.infeasible
    return equal_split(scenario, params, state.x > 0), []


def _meets_deadline(scenario, params, state, rates, scheme) -> np.ndarray:
    eps = state.eps if scheme.compression else np.ones_like(state.eps)
    t = total_delay(scenario, params, AllocationState(state.x, state.rho, state.f, eps), rates)
    return t <= scenario.tasks.delay_limit * (1 + 1e-9)


# -- rounding ------------------------------------------------------------

def finalize(scenario: Scenario, params: SystemParams, relaxed: AllocationState,
             scheme: Scheme = PROPOSED, config: OuterConfig | None = None):
    """Round a relaxed state and repair it; returns (binary state, flagged users).

    Decisions use the scheme's decision model; the repair pass checks the
    delay and accuracy limits under the true ``params``. A user that fits in
    neither mode is flagged and left local without resources.
    """
    config = config or OuterConfig()
    dp = decision_params(params, scheme)
    cells = [scenario.users_of(k) for k in range(scenario.num_sbs)]
    rates = uplink_rates(scenario, dp, relaxed.rho)
    data = offload_data(scenario, dp, rates, relaxed.f, scheme.parallel_aware, scheme.compression)
    x, eps, flagged = round_offload(relaxed.x, _eta_of(relaxed), data)
    offl = x == 1
    if scheme.optimize_subcarriers:
        rho = round_subcarriers(relaxed.rho, cells, method=config.subcarrier_rounding,
                                eligible=offl)
    else:
        rho = round_robin(scenario) * offl[:, None]
    state = AllocationState(x, rho, np.zeros_like(x), eps)
    for _ in range(scenario.num_users + 1):
        rates = uplink_rates(scenario, dp, state.rho)
        state.f, _ = _allocate_capacity(scenario, dp, state, rates, scheme)
        report = system_utility(scenario, params, state)
        bad = [u for u in report.infeasible_users if not flagged[u]]
        if not bad:
            break
        local_ok = data.local_ok()
        for u in bad:
            # an offloader that misses its limits falls back to local computing
            flagged[u] = not (state.x[u] == 1 and local_ok[u])
            state.x[u], state.eps[u] = 0.0, 1.0
            state.rho[u] = 0.0
    for u in np.flatnonzero(flagged):
        state.x[u], state.eps[u], state.f[u] = 0.0, 1.0, 0.0
        state.rho[u] = 0.0
    return state, sorted(int(u) for u in np.flatnonzero(flagged))


# -- Algorithm 1 ---------------------------------------------------------

def run_algorithm1(scenario: Scenario, params: SystemParams, config: OuterConfig | None = None,
                   scheme: Scheme = PROPOSED) -> RunResult:
    """Alternate the three blocks until the relaxed utility settles, then round."""
    config = config or OuterConfig()
    start = time.perf_counter()
    dp = decision_params(params, scheme)
    state, eta = initial_state(scenario, dp, scheme)
    value = objective_of_state(scenario, dp, state, relaxed=True)
    trace = SolveTrace(value)
    for q in range(1, config.max_outer + 1):
        t0 = time.perf_counter()
        if scheme.optimize_subcarriers:
            res1 = solve_subcarrier_sca(subcarrier_data(scenario, dp, state, scheme.parallel_aware),
                                        state.rho, config.sub1_tol, config.max_sca,
                                        SUBCARRIER_SETTINGS)
            state.rho = res1.rho
            sub1 = (res1.iterations, res1.status, res1.trace)
        else:
            sub1 = (0, "fixed", [])
        t1 = time.perf_counter()
        rates = uplink_rates(scenario, dp, state.rho)
        enforce = _meets_deadline(scenario, dp, state, rates, scheme)
        state.f, cap_flags = _allocate_capacity(scenario, dp, state, rates, scheme, enforce)
        t2 = time.perf_counter()
        data = offload_data(scenario, dp, rates, state.f, scheme.parallel_aware, scheme.compression)
        res3 = solve_offload_sca(data, state.x, eta, config.sub3_tol, config.max_sca,
                                 OFFLOAD_SETTINGS)
        state.x, eta = res3.x, res3.eta
        state.eps = res3.eps if scheme.compression else np.ones_like(res3.x)
        t3 = time.perf_counter()
        new = objective_of_state(scenario, dp, state, relaxed=True)
        rounded, _ = finalize(scenario, params, state, scheme, config)
        rounded_value = objective_of_state(scenario, params, rounded)
        trace.records.append(OuterRecord(q, new, rounded_value, *sub1[:2], res3.iterations,
                                         res3.status, len(cap_flags), list(sub1[2]),
                                         list(res3.trace), t1 - t0, t2 - t1, t3 - t2))
        log.info("%s outer %d: N=%.6f rounded=%.6f", scheme.name, q, new, rounded_value)
        if config.rounding == "every":
            state = rounded
            eta = _eta_of(state)
        done = abs(new - value) <= config.tol
        value = new
        if done:
            trace.converged = True
            break
    relaxed = state.copy()
    final, flagged = finalize(scenario, params, relaxed, scheme, config)
    if len(flagged) == scenario.num_users:
        raise RunError("every user is infeasible under both computing modes")
    report = system_utility(scenario, params, final)
    trace.wall_time = time.perf_counter() - start
    return RunResult(scheme.name, final, relaxed, report, trace, flagged)
