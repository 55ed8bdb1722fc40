"""Comparison schemes and an exhaustive oracle for tiny instances.

FC keeps the round-robin subcarrier assignment, AC splits every MEC server
equally among its offloading users, and WCR decides without compression and
without the parallel-degradation model (its result is scored under the true
model like every other scheme).
"""
from __future__ import annotations

import enum
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .config import OuterConfig, SystemParams
from .model import (BITS_PER_UNIT, AllocationState, degradation_multiplier, local_delay,
                    system_utility, uplink_rates)
from .orchestrator import PROPOSED, RunResult, Scheme, run_algorithm1
from .scenario import Scenario


class BaselineKind(enum.Enum):
    FC = "FC"
    AC = "AC"
    WCR = "WCR"

    @property
    def scheme(self) -> Scheme:
        return SCHEMES[self.value]


SCHEMES: dict[str, Scheme] = {
    "proposed": PROPOSED,
    "FC": Scheme("FC", optimize_subcarriers=False),
    "AC": Scheme("AC", optimize_capacity=False),
    "WCR": Scheme("WCR", compression=False, parallel_aware=False),
}


def run_baseline(kind: BaselineKind | str, scenario: Scenario, params: SystemParams,
                 config: OuterConfig | None = None) -> RunResult:
    """Run one comparison scheme; ``result.state`` and ``result.report`` hold the outcome."""
    kind = BaselineKind(kind) if isinstance(kind, str) else kind
    return run_algorithm1(scenario, params, config, kind.scheme)


def run_scheme(name: str, scenario: Scenario, params: SystemParams,
               config: OuterConfig | None = None) -> RunResult:
    try:
        scheme = SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}") from None
    return run_algorithm1(scenario, params, config, scheme)


# -- brute-force oracle --------------------------------------------------

class OracleCapError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class BruteForceGrid:
    eps: tuple[float, ...] = (1.0, 1.5, 2.0, 3.0, 4.0)
    f_steps: int = 20          # capacity in multiples of F_k / f_steps
    max_users: int = 4
    max_subcarriers: int = 4

    def __post_init__(self):
        if not self.eps or min(self.eps) < 1.0:
            raise ValueError("eps grid must be nonempty with values >= 1")
        if self.f_steps < 1:
            raise ValueError("f_steps must be >= 1")


@dataclass
class OracleResult:
    state: AllocationState | None   # None when nothing on the grid is feasible
    value: float
    candidates: int                 # joint grid points covered by the enumeration
    wall_time: float


def _compositions(total: int, parts: int) -> np.ndarray:
    """All vectors of positive integers with ``parts`` entries summing to <= total."""
    if parts == 0:
        return np.zeros((1, 0), dtype=int)
    rows = [c for c in itertools.product(range(1, total + 1), repeat=parts) if sum(c) <= total]
    return np.array(rows, dtype=int).reshape(-1, parts)


def _assignments(scenario: Scenario, offloading: np.ndarray):
    """Every rho that gives each subcarrier of each SBS to at most one of its offloaders."""
    n_sub = scenario.num_subcarriers
    per_sbs = []
    for k in range(scenario.num_sbs):
        users = [int(u) for u in scenario.users_of(k) if offloading[u]]
        per_sbs.append(list(itertools.product([-1] + users, repeat=n_sub)))
    for combo in itertools.product(*per_sbs):
        rho = np.zeros((scenario.num_users, n_sub))
        for owners in combo:
            for n, u in enumerate(owners):
                if u >= 0:
                    rho[u, n] = 1.0
        yield rho


def brute_force(scenario: Scenario, params: SystemParams, grid: BruteForceGrid | None = None,
                include_state: AllocationState | None = None) -> OracleResult:
    """Exhaustive maximum of the system utility over a finite decision grid.

    Enumerates x in {0,1}^U, every C4-respecting subcarrier assignment, eps on
    the grid and f on the simplex grid of each SBS. Only allocations meeting
    every delay and accuracy limit count. Given the subcarriers and
    capacities the utility separates over users, so the eps choice is
    maximised per user, which gives the same maximum as enumerating eps
    jointly. ``include_state`` adds one extra candidate (e.g. a solver's
    own answer).
    """
    grid = grid or BruteForceGrid()
    u_count, n_sub = scenario.num_users, scenario.num_subcarriers
    if u_count > grid.max_users or n_sub > grid.max_subcarriers:
        raise OracleCapError(f"oracle is limited to {grid.max_users} users and "
                             f"{grid.max_subcarriers} subcarriers (got {u_count}, {n_sub})")
    start = time.perf_counter()
    tasks = scenario.tasks
    a, t_lim, y_lim = tasks.raw_data, tasks.delay_limit, tasks.accuracy_limit
    t_lim_eff = t_lim * (1 + 1e-9)
    y_lim_eff = y_lim * (1 - 1e-9)
    eps = np.asarray(grid.eps, dtype=float)
    mult = degradation_multiplier(params, tasks.parallelism)
    # per-user, per-eps quantities for the offloading branch
    b = a[:, None] / eps[None, :]                                    # (U, E)
    y_off = params.fit_p - params.fit_q * b ** (-params.fit_r)
    y_ok = y_off >= y_lim_eff[:, None]
    work = params.cycles_per_unit * b * mult[:, None]
    t_loc = local_delay(params, a)
    y_loc = params.fit_p - params.fit_q * a ** (-params.fit_r)
    loc_val = np.where((t_loc <= t_lim_eff) & (y_loc >= y_lim_eff),
                       np.log(params.weight * y_loc / t_loc), -np.inf)
    f_unit = params.mec_capacity / grid.f_steps

    best, best_state, count = -np.inf, None, 0
    for xs in itertools.product((0, 1), repeat=u_count):
        x = np.array(xs, dtype=float)
        off = x == 1
        local_sum = float(np.sum(loc_val[~off]))
        # joint (eps, f) points per assignment; local users have eps, f and rho pinned
        per_rho = math.prod(math.comb(grid.f_steps, int(off[scenario.users_of(k)].sum()))
                            * len(eps) ** int(off[scenario.users_of(k)].sum())
                            for k in range(scenario.num_sbs))
        for rho in _assignments(scenario, off):
            count += per_rho
            if not np.isfinite(local_sum):
                continue
            rates = uplink_rates(scenario, params, rho)
            if np.any(rates[off] <= 0):
                continue
            total, f, e_idx = local_sum, np.zeros(u_count), np.zeros(u_count, dtype=int)
            for k in range(scenario.num_sbs):
                users = np.array([u for u in scenario.users_of(k) if off[u]], dtype=int)
                if not len(users):
                    continue
                comp = _compositions(grid.f_steps, len(users))        # (F, |O|)
                comm = BITS_PER_UNIT * b[users] / rates[users, None]  # (|O|, E)
                t = comm[None] + work[users][None] / (comp[:, :, None] * f_unit)
                val = np.log(params.weight * y_off[users][None] / t)
                val[(t > t_lim_eff[users][None, :, None]) | ~y_ok[users][None]] = -np.inf
                choice = np.argmax(val, axis=2)                      # best eps per user
                per_f = np.take_along_axis(val, choice[:, :, None], axis=2)[:, :, 0].sum(axis=1)
                j = int(np.argmax(per_f))
                if not np.isfinite(per_f[j]):
                    total = -np.inf
                    break
                total += per_f[j]
                f[users] = comp[j] * f_unit
                e_idx[users] = choice[j]
            if total > best:
                best = total
                best_state = AllocationState(x.copy(), rho, f, np.where(off, eps[e_idx], 1.0))
    if include_state is not None:
        count += 1
        rep = system_utility(scenario, params, include_state, exclude_infeasible=False)
        if not rep.violations and rep.value > best:
            best, best_state = rep.value, include_state.copy()
    return OracleResult(best_state, float(best), count, time.perf_counter() - start)
