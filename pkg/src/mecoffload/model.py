"""System model: rates, delays, accuracy, utility and the feasibility check.

All quantities are vectorised over users. Data volumes are in kilobits, rates
in bit/s, delays in seconds, computing in cycles and cycles/s.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .config import SystemParams
from .scenario import Scenario

INFEASIBLE_DELAY = "infeasible"
BITS_PER_UNIT = 1e3
_REL_TOL = 1e-9


@dataclass
class AllocationState:
    """Decision variables: offloading x, subcarriers rho, capacity f, compression eps."""
    x: np.ndarray     # (U,)
    rho: np.ndarray   # (U, N)
    f: np.ndarray     # (U,) cycles/s
    eps: np.ndarray   # (U,)

    def copy(self) -> "AllocationState":
        return AllocationState(self.x.copy(), self.rho.copy(), self.f.copy(), self.eps.copy())

    @classmethod
    def all_local(cls, num_users: int, num_subcarriers: int) -> "AllocationState":
        return cls(np.zeros(num_users), np.zeros((num_users, num_subcarriers)),
                   np.zeros(num_users), np.ones(num_users))

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "rho": self.rho.tolist(),
                "f": self.f.tolist(), "eps": self.eps.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AllocationState":
        return cls(*(np.array(d[k], dtype=float) for k in ("x", "rho", "f", "eps")))


@dataclass(frozen=True)
class Violation:
    constraint: str
    user: int | None = None
    sbs: int | None = None
    subcarrier: int | None = None
    amount: float = 0.0


# -- communication -------------------------------------------------------

def interference_matrix(scenario: Scenario, params: SystemParams) -> np.ndarray:
    """M[u, v] = P * gain(v -> SBS of u) for v in another cell, else 0."""
    assoc = scenario.association
    m = params.tx_power * scenario.channel.cross_gain[:, assoc].T
    m[assoc[:, None] == assoc[None, :]] = 0.0
    return m


def interference(scenario: Scenario, params: SystemParams, rho: np.ndarray) -> np.ndarray:
    return interference_matrix(scenario, params) @ rho


def spectral_efficiency(scenario: Scenario, params: SystemParams, rho: np.ndarray) -> np.ndarray:
    """log2(1 + SINR) per (user, subcarrier) under the interference implied by rho."""
    sig = params.tx_power * scenario.channel.gain
    return np.log2(1.0 + sig / (interference(scenario, params, rho) + params.noise_power))


def uplink_rates(scenario: Scenario, params: SystemParams, rho: np.ndarray) -> np.ndarray:
    se = spectral_efficiency(scenario, params, rho)
    return params.subcarrier_bandwidth * np.sum(rho * se, axis=1)


def uplink_rate(scenario, params, state: AllocationState, user: int) -> float:
    return float(uplink_rates(scenario, params, state.rho)[user])


# -- computing -----------------------------------------------------------

def local_delay(params: SystemParams, raw_data):
    return params.cycles_per_unit * np.asarray(raw_data, dtype=float) / params.local_capacity


def compressed_volume(raw_data, eps):
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 1.0):
        raise ValueError("compression ratio must be >= 1 (C5)")
    return np.asarray(raw_data, dtype=float) / eps


def degradation_multiplier(params: SystemParams, parallelism):
    return (1.0 + params.degradation) ** (np.asarray(parallelism, dtype=float) - 1.0)


def mec_delay(params: SystemParams, volume, f, parallelism):
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("allocated MEC capacity must be positive")
    work = params.cycles_per_unit * np.asarray(volume, dtype=float)
    return work / f * degradation_multiplier(params, parallelism)


def accuracy(params: SystemParams, alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("effective data volume must be positive")
    return params.fit_p - params.fit_q * alpha ** (-params.fit_r)


def user_utility(params: SystemParams, y, t):
    y, t = np.asarray(y, dtype=float), np.asarray(t, dtype=float)
    if np.any(y <= 0) or np.any(t <= 0):
        raise ValueError("utility needs positive accuracy and delay")
    return np.log(params.weight * y / t)


def effective_volume(x, raw_data, eps):
    b = compressed_volume(raw_data, eps)
    return (1.0 - x) * raw_data + x * b


def offload_delay(scenario, params, state: AllocationState, rates=None) -> np.ndarray:
    """t_comm + t_comp for each user (inf where rate or capacity is zero)."""
    a = scenario.tasks.raw_data
    if rates is None:
        rates = uplink_rates(scenario, params, state.rho)
    b = compressed_volume(a, state.eps)
    out = np.full(len(a), np.inf)
    ok = (rates > 0) & (state.f > 0)
    out[ok] = (BITS_PER_UNIT * b[ok] / rates[ok]
               + mec_delay(params, b[ok], state.f[ok], scenario.tasks.parallelism[ok]))
    return out


def total_delay(scenario, params, state: AllocationState, rates=None) -> np.ndarray:
    t_loc = local_delay(params, scenario.tasks.raw_data)
    t_off = offload_delay(scenario, params, state, rates)
    x = state.x
    with np.errstate(invalid="ignore"):
        t = (1.0 - x) * t_loc + x * t_off
    return np.where(x > 0, t, t_loc)


# -- utility and feasibility ---------------------------------------------

@dataclass
class UtilityReport:
    rate: np.ndarray
    delay: np.ndarray
    accuracy: np.ndarray
    utility: np.ndarray          # nan where undefined
    counted: np.ndarray          # bool mask of users in the objective
    violations: list[Violation] = field(default_factory=list)
    weight: float = 1.0

    @property
    def value(self) -> float:
        return float(np.sum(self.utility[self.counted]))

    @property
    def revenue(self) -> float:
        """Sum of ln(accuracy) over counted users."""
        return float(np.sum(np.log(self.accuracy[self.counted])))

    @property
    def cost(self) -> float:
        """Negative system cost: -sum of ln(delay) over counted users."""
        return float(-np.sum(np.log(self.delay[self.counted])))

    @property
    def num_counted(self) -> int:
        return int(np.sum(self.counted))

    def user_violations(self, user: int) -> list[str]:
        return sorted({v.constraint for v in self.violations if v.user == user})

    @property
    def infeasible_users(self) -> list[int]:
        return sorted({v.user for v in self.violations
                       if v.user is not None and v.constraint in ("C6", "C7")})

    def to_csv(self, state: AllocationState | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["user", "x", "rate", "delay", "accuracy", "utility", "counted", "violations"])
        for u in range(len(self.rate)):
            x = "" if state is None else repr(float(state.x[u]))
            delay = INFEASIBLE_DELAY if not np.isfinite(self.delay[u]) else repr(float(self.delay[u]))
            w.writerow([u, x, repr(float(self.rate[u])), delay, repr(float(self.accuracy[u])),
                        repr(float(self.utility[u])), int(self.counted[u]),
                        ";".join(self.user_violations(u))])
        return buf.getvalue()


def check_feasible(scenario: Scenario, params: SystemParams, state: AllocationState,
                   relaxed: bool = False, _delay=None, _acc=None) -> list[Violation]:
    """Evaluate C1-C8 of the joint problem; empty list iff feasible.

    With ``relaxed`` the binary constraints C1/C2 are checked as box
    constraints [0, 1] instead.
    """
    out: list[Violation] = []
    x, rho, f, eps = state.x, state.rho, state.f, state.eps
    for u in range(len(x)):
        if relaxed:
            if x[u] < 0 or x[u] > 1:
                out.append(Violation("C1", user=u, amount=float(x[u])))
        elif x[u] not in (0.0, 1.0):
            out.append(Violation("C1", user=u, amount=float(x[u])))
        if x[u] > 1:  # single association: C3 reduces to x <= 1
            out.append(Violation("C3", user=u, amount=float(x[u] - 1)))
    bad = (rho < 0) | (rho > 1) if relaxed else ~np.isin(rho, (0.0, 1.0))
    for u, n in zip(*np.nonzero(bad)):
        out.append(Violation("C2", user=int(u), subcarrier=int(n), amount=float(rho[u, n])))
    for k in range(scenario.num_sbs):
        users = scenario.users_of(k)
        load = rho[users].sum(axis=0)
        for n in np.flatnonzero(load > 1.0 + _REL_TOL):
            out.append(Violation("C4", sbs=k, subcarrier=int(n), amount=float(load[n] - 1)))
        used = f[users].sum()
        if used > params.mec_capacity * (1 + _REL_TOL) or np.any(f[users] < 0):
            out.append(Violation("C8", sbs=k, amount=float(used - params.mec_capacity)))
    for u in np.flatnonzero(eps < 1.0 - _REL_TOL):
        out.append(Violation("C5", user=int(u), amount=float(1 - eps[u])))
    safe = state if np.all(eps >= 1) else AllocationState(x, rho, f, np.maximum(eps, 1.0))
    t = total_delay(scenario, params, safe) if _delay is None else _delay
    y = (accuracy(params, effective_volume(x, scenario.tasks.raw_data, safe.eps))
         if _acc is None else _acc)
    t_lim = scenario.tasks.delay_limit
    y_lim = scenario.tasks.accuracy_limit
    for u in np.flatnonzero(~(t <= t_lim * (1 + _REL_TOL))):
        out.append(Violation("C6", user=int(u), amount=float(t[u] - t_lim[u])))
    for u in np.flatnonzero(y < y_lim - _REL_TOL * y_lim):
        out.append(Violation("C7", user=int(u), amount=float(y_lim[u] - y[u])))
    return out


def system_utility(scenario: Scenario, params: SystemParams, state: AllocationState,
                   relaxed: bool = False, exclude_infeasible: bool = True) -> UtilityReport:
    """Per-user breakdown and the system utility.

    Users whose utility is undefined are never counted; with
    ``exclude_infeasible`` users violating C6 or C7 are left out as well and
    appear only through the report's violation list.
    """
    a = scenario.tasks.raw_data
    eps = np.maximum(state.eps, 1.0)
    rates = uplink_rates(scenario, params, state.rho)
    safe = AllocationState(state.x, state.rho, state.f, eps)
    t = total_delay(scenario, params, safe, rates)
    y = accuracy(params, effective_volume(state.x, a, eps))
    util = np.full(len(a), np.nan)
    ok = np.isfinite(t) & (t > 0) & (y > 0)
    util[ok] = user_utility(params, y[ok], t[ok])
    violations = check_feasible(scenario, params, state, relaxed, _delay=t, _acc=y)
    counted = ok.copy()
    if exclude_infeasible:
        for v in violations:
            if v.constraint in ("C6", "C7"):
                counted[v.user] = False
    return UtilityReport(rates, t, y, util, counted, violations, params.weight)
