"""Computing-capacity allocation among offloading users of each SBS."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import SystemParams
from ..cvxcore import bisect_capacity, capacity_objective
from ..model import BITS_PER_UNIT, AllocationState, degradation_multiplier, local_delay
from ..scenario import Scenario


@dataclass
class CapacityResult:
    f: np.ndarray
    objective: float
    infeasible: list[int] = field(default_factory=list)  # users whose deadline is out of reach


def capacity_terms(scenario: Scenario, params: SystemParams, state: AllocationState,
                   rates: np.ndarray, parallel_aware: bool = True):
    """Effective cost (cycles) and fixed delay offset (s) per user.

    The delay of user u as a function of its capacity is offset + cost / f,
    with cost = x * kappa * b * (1+d)^(i-1) and
    offset = (1-x) T_local + x * t_comm.
    """
    x = state.x
    b = scenario.tasks.raw_data / state.eps
    mult = degradation_multiplier(params, scenario.tasks.parallelism) if parallel_aware else 1.0
    cost = x * params.cycles_per_unit * b * mult
    with np.errstate(divide="ignore", invalid="ignore"):
        comm = np.where(x > 0, BITS_PER_UNIT * b / rates, 0.0)
    offset = (1.0 - x) * local_delay(params, scenario.tasks.raw_data) + x * comm
    return cost, offset


def equal_split(scenario: Scenario, params: SystemParams, members: np.ndarray) -> np.ndarray:
    """Average-computing allocation: F_k shared equally by the flagged users of SBS k."""
    f = np.zeros(scenario.num_users)
    for k in range(scenario.num_sbs):
        users = scenario.users_of(k)
        users = users[members[users]]
        if len(users):
            f[users] = params.mec_capacity / len(users)
    return f


def solve_capacity(scenario: Scenario, params: SystemParams, state: AllocationState,
                   rates: np.ndarray, enforce: np.ndarray | None = None,
                   parallel_aware: bool = True) -> CapacityResult:
    """Exact per-SBS solve of the capacity block.

    Users with x = 0 get nothing. Deadline lower bounds f >= cost/(t_lim - offset)
    are imposed for users selected by ``enforce`` (default: all offloaders);
    users whose offset already exceeds the deadline are reported infeasible
    and left unbounded. If the remaining bounds overflow the budget, the
    largest bounds are dropped (and reported) until they fit.
    """
    cost, offset = capacity_terms(scenario, params, state, rates, parallel_aware)
    limits = scenario.tasks.delay_limit
    offloading = (state.x > 0) & np.isfinite(offset)
    if enforce is None:
        enforce = offloading
    f = np.zeros(scenario.num_users)
    infeasible: list[int] = []
    total = 0.0
    for k in range(scenario.num_sbs):
        users = scenario.users_of(k)
        users = users[offloading[users]]
        if not len(users):
            continue
        c, o = cost[users], offset[users]
        lb = np.zeros(len(users))
        for j, u in enumerate(users):
            if not enforce[u] or c[j] == 0:
                continue
            if o[j] < limits[u]:
                lb[j] = c[j] / (limits[u] - o[j])
            else:
                infeasible.append(int(u))
        while lb.sum() > params.mec_capacity:
            j = int(np.argmax(lb))
            infeasible.append(int(users[j]))
            lb[j] = 0.0
        f[users] = bisect_capacity(c, o, lb, params.mec_capacity)
        total += capacity_objective(c, o, f[users])
    return CapacityResult(f, total, sorted(infeasible))
