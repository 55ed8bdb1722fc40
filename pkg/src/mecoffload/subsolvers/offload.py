"""Offloading and compression by variable substitution and SCA.

With ``eta = 1 - x + x/eps`` the effective volume is ``a * eta`` and the
delay becomes ``D(x, eta) = (1-x)(C_loc - C_off) + C_off * eta``, affine in
(x, eta). The objective sum[ln y(a*eta) - ln D] is concave minus concave; each
SCA step replaces ln D by its tangent plane (an upper bound, so the step
maximises a lower bound of the true objective) through an epigraph variable.

Besides the limits of the original problem, each step requires the
compressed volume itself to meet the accuracy floor (eps <= a / a_min, i.e.
eta >= 1 - x (1 - a_min/a)). Binary solutions satisfy this anyway; without
it a fractional x could ship an arbitrarily compressed share at no delay.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..config import SystemParams
from ..cvxcore import INFEASIBLE, ConvexProgram, SolverSettings, minimize
from ..model import BITS_PER_UNIT, degradation_multiplier, local_delay
from ..scenario import Scenario

log = logging.getLogger(__name__)


def delay_log_surrogate(x, eta, x_j, eta_j, c_loc, c_off):
    """Tangent plane of ln D(x, eta) at (x_j, eta_j); never below ln D."""
    d_j = (1 - x_j) * (c_loc - c_off) + c_off * eta_j
    return np.log(d_j) + ((c_off - c_loc) * (x - x_j) + c_off * (eta - eta_j)) / d_j


@dataclass
class OffloadProblemData:
    local: np.ndarray        # C_loc: local delay (s)
    remote: np.ndarray       # C_off: uncompressed offload delay (s), inf without link/capacity
    raw_data: np.ndarray
    delay_limit: np.ndarray
    accuracy_limit: np.ndarray
    fit: tuple[float, float, float]
    weight: float = 1.0
    compression: bool = True

    @property
    def num_users(self) -> int:
        return len(self.local)

    @property
    def eta_floor(self) -> np.ndarray:
        """Smallest admissible eta (accuracy limit), a_min / a."""
        p, q, r = self.fit
        return (q / (p - self.accuracy_limit)) ** (1.0 / r) / self.raw_data

    def delay(self, x, eta):
        with np.errstate(invalid="ignore"):
            return np.where(x > 0, (1 - x) * (self.local - self.remote) + self.remote * eta,
                            self.local)

    def accuracy(self, eta):
        p, q, r = self.fit
        return p - q * (self.raw_data * eta) ** (-r)

    def utilities(self, x, eta) -> np.ndarray:
        return np.log(self.weight * self.accuracy(eta) / self.delay(x, eta))

    def objective(self, x, eta) -> float:
        return float(np.sum(self.utilities(x, eta)))

    def local_ok(self) -> np.ndarray:
        return ((self.local <= self.delay_limit * (1 + 1e-9))
                & (self.accuracy(np.ones_like(self.local)) >= self.accuracy_limit * (1 - 1e-9)))

    def offload_ok(self, eps) -> np.ndarray:
        eta = 1.0 / eps
        with np.errstate(invalid="ignore"):
            return ((self.remote * eta <= self.delay_limit * (1 + 1e-9))
                    & (self.accuracy(eta) >= self.accuracy_limit * (1 - 1e-9)))

    def max_compression(self) -> np.ndarray:
        if not self.compression:
            return np.ones(self.num_users)
        return np.maximum(1.0 / self.eta_floor, 1.0)


def offload_data(scenario: Scenario, params: SystemParams, rates: np.ndarray, f: np.ndarray,
                 parallel_aware: bool = True, compression: bool = True) -> OffloadProblemData:
    a = scenario.tasks.raw_data
    mult = degradation_multiplier(params, scenario.tasks.parallelism) if parallel_aware else 1.0
    ok = (rates > 0) & (f > 0)
    remote = np.full(len(a), np.inf)
    remote[ok] = (BITS_PER_UNIT * a[ok] / rates[ok]
                  + params.cycles_per_unit * a[ok] * np.broadcast_to(mult, a.shape)[ok] / f[ok])
    return OffloadProblemData(local_delay(params, a), remote, a, scenario.tasks.delay_limit,
                              scenario.tasks.accuracy_limit,
                              (params.fit_p, params.fit_q, params.fit_r), params.weight,
                              compression)


class OffloadStep(ConvexProgram):
    """min sum(-ln y(a*eta) + v) s.t. v >= tangent of ln D, box and deadline rows.

    Variables are (x, eta, v) per participating user, or (x, v) when
    compression is disabled (eta fixed at 1).
    """

    def __init__(self, data: OffloadProblemData, users: np.ndarray, x_j, eta_j):
        self.data = data
        self.users = users
        self.p = len(users)
        self.free_eta = data.compression
        self.n = (3 if self.free_eta else 2) * self.p
        self.x_j, self.eta_j = x_j[users], eta_j[users]
        self.c_loc, self.c_off = data.local[users], data.remote[users]
        self.d_j = (1 - self.x_j) * (self.c_loc - self.c_off) + self.c_off * self.eta_j
        self.floor = data.eta_floor[users]
        self.a = data.raw_data[users]
        d_lim = data.delay_limit[users]
        enforce = self.d_j <= d_lim * (1 + 1e-9)
        self.enf = np.flatnonzero(enforce)
        self.lim = np.maximum(d_lim[self.enf], self.d_j[self.enf] * (1 + 1e-9))
        self._jac = self._build_jacobian()

    def split(self, z):
        p = self.p
        x = z[:p]
        if self.free_eta:
            return x, z[p:2 * p], z[2 * p:]
        return x, np.ones(p), z[p:]

    def join(self, x, eta, v):
        return np.concatenate([x, eta, v] if self.free_eta else [x, v])

    def _build_jacobian(self):
        p = self.p
        eye = np.eye(p)
        zero = np.zeros((p, p))
        gx = (self.c_off - self.c_loc) / self.d_j
        ge = self.c_off / self.d_j
        if self.free_eta:
            rows = [np.hstack([np.diag(gx), np.diag(ge), -eye]),
                    np.hstack([-eye, zero, zero]),
                    np.hstack([eye, zero, zero]),
                    np.hstack([-eye, -eye, zero]),
                    np.hstack([zero, eye, zero]),
                    np.hstack([zero, -eye, zero]),
                    np.hstack([-np.diag(1.0 - self.floor), -eye, zero])]
            if len(self.enf):
                rows.append(np.hstack([np.diag(self.c_off - self.c_loc),
                                       np.diag(self.c_off), zero])[self.enf])
        else:
            rows = [np.hstack([np.diag(gx), -eye]), np.hstack([-eye, zero]),
                    np.hstack([eye, zero])]
            if len(self.enf):
                rows.append(np.hstack([np.diag(self.c_off - self.c_loc), zero])[self.enf])
        return np.vstack(rows)

    def constraint_values(self, z):
        x, eta, v = self.split(z)
        t = ((self.c_off - self.c_loc) * (x - self.x_j) + self.c_off * (eta - self.eta_j)) / self.d_j
        parts = [np.log(self.d_j) + t - v, -x, x - 1.0]
        if self.free_eta:
            # last row: the compressed volume alone must reach the accuracy floor
            parts += [1.0 - x - eta, eta - 1.0, self.floor - eta,
                      1.0 - x * (1.0 - self.floor) - eta]
        if len(self.enf):
            d = (1 - x) * (self.c_loc - self.c_off) + self.c_off * eta
            parts.append(d[self.enf] - self.lim)
        return np.concatenate(parts)

    def constraint_derivatives(self, z):
        return self._jac, None

    def _log_acc_parts(self, eta):
        p_, q, r = self.data.fit
        qa = q * self.a ** (-r)
        y = p_ - qa * eta ** (-r)
        y1 = qa * r * eta ** (-r - 1)
        y2 = -qa * r * (r + 1) * eta ** (-r - 2)
        return y, y1, y2

    def objective(self, z):
        x, eta, v = self.split(z)
        if np.any(eta <= 0):
            return np.inf
        y = self._log_acc_parts(eta)[0]
        if np.any(y <= 0):
            return np.inf
        return float(np.sum(-np.log(y) + v))

    def objective_derivatives(self, z):
        x, eta, v = self.split(z)
        p = self.p
        grad = np.zeros(self.n)
        hess = np.zeros((self.n, self.n))
        grad[-p:] = 1.0
        if self.free_eta:
            y, y1, y2 = self._log_acc_parts(eta)
            grad[p:2 * p] = -y1 / y
            idx = np.arange(p, 2 * p)
            hess[idx, idx] = -(y2 * y - y1 ** 2) / y ** 2
        return grad, hess

    def interior_start(self):
        for delta in (1e-2, 1e-4, 1e-6, 1e-8, 1e-10):
            x = np.clip((1 - delta) * self.x_j + 0.5 * delta, delta / 4, 1 - delta / 4)
            if self.free_eta:
                lo = 1 - x * (1 - self.floor)
                eta = (1 - delta) * np.clip(self.eta_j, lo, 1.0) + delta * 0.5 * (lo + 1.0)
            else:
                eta = np.ones(self.p)
            d = (1 - x) * (self.c_loc - self.c_off) + self.c_off * eta
            v = np.log(d) + ((self.c_off - self.c_loc) * (x - self.x_j)
                             + self.c_off * (eta - self.eta_j)) / self.d_j
            v = v + np.maximum(np.abs(v), 1.0) * delta
            z = self.join(x, eta, v)
            if np.all(self.constraint_values(z) < 0):
                return z
        return z


@dataclass
class OffloadResult:
    x: np.ndarray
    eta: np.ndarray
    objective: float
    pinned: np.ndarray                 # users held at local computing
    trace: list[float] = field(default_factory=list)
    statuses: list[str] = field(default_factory=list)
    status: str = "optimal"

    @property
    def iterations(self) -> int:
        return len(self.statuses)

    @property
    def eps(self) -> np.ndarray:
        """Compression ratios recovered from (x, eta); 1 for local users."""
        with np.errstate(divide="ignore", invalid="ignore"):
            e = self.x / (self.eta - 1.0 + self.x)
        return np.where(self.x > 0, np.maximum(np.nan_to_num(e, nan=1.0, posinf=1e12), 1.0), 1.0)


def solve_offload_sca(data: OffloadProblemData, x0, eta0, tol: float = 1e-4, max_iter: int = 30,
                      settings: SolverSettings | None = None) -> OffloadResult:
    """Maximise the relaxed utility over (x, eta) from (x0, eta0).

    Users that cannot offload (no link or capacity) or whose accuracy limit
    is out of reach even without compression are held at x = 0, eta = 1.
    """
    settings = settings or SolverSettings()
    x = np.array(x0, dtype=float)
    eta = np.array(eta0, dtype=float)
    floor = data.eta_floor
    pinned = ~np.isfinite(data.remote) | (floor >= 1.0 - 1e-12)
    x[pinned], eta[pinned] = 0.0, 1.0
    if not data.compression:
        eta[:] = 1.0
    value = data.objective(x, eta)
    res = OffloadResult(x, eta, value, pinned, [value])
    users = np.flatnonzero(~pinned)
    if not len(users):
        return res
    for _ in range(max_iter):
        step = OffloadStep(data, users, x, eta)
        sol = minimize(step, step.interior_start(), settings)
        res.statuses.append(sol.status)
        if sol.status == INFEASIBLE:
            res.status = INFEASIBLE
            break
        xs, es, _ = step.split(sol.z)
        cand_x, cand_eta = x.copy(), eta.copy()
        cand_x[users] = np.clip(xs, 0.0, 1.0)
        cand_eta[users] = np.clip(es, 1.0 - cand_x[users] * (1.0 - floor[users]), 1.0)
        new = data.objective(cand_x, cand_eta)
        if not new >= value:
            log.debug("offload step rejected (%.3e -> %.3e)", value, new)
            break
        done = new - value <= tol
        x, eta, value = cand_x, cand_eta, new
        res.trace.append(value)
        if done:
            break
    res.x, res.eta, res.objective = x, eta, value
    return res


def round_offload(x, eta, data: OffloadProblemData):
    """Binary offloading decision and compression ratio.

    Returns ``(x_hat, eps, flagged)``. Offload when x >= 0.5 with
    eps = 1/eta clipped to the admissible range; a branch that breaks the
    delay or accuracy limit is swapped for the other one when that one is
    feasible. Users feasible in neither branch are flagged and kept local.
    """
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    eps_max = data.max_compression()
    x_hat = (x >= 0.5).astype(float)
    with np.errstate(divide="ignore"):
        eps = np.where(x_hat == 1, np.clip(1.0 / eta, 1.0, eps_max), 1.0)
    if not data.compression:
        eps = np.ones_like(eps)
    local_ok = data.local_ok()
    flagged = np.zeros(len(x), dtype=bool)
    for u in range(len(x)):
        if x_hat[u] == 1 and not data.offload_ok(eps)[u]:
            alt = eps.copy()
            alt[u] = eps_max[u]
            if data.offload_ok(alt)[u]:
                eps[u] = eps_max[u]
            elif local_ok[u]:
                x_hat[u], eps[u] = 0.0, 1.0
            else:
                x_hat[u], eps[u], flagged[u] = 0.0, 1.0, True
        elif x_hat[u] == 0 and not local_ok[u]:
            alt = np.ones_like(eps)
            alt[u] = eps_max[u]
            if np.isfinite(data.remote[u]) and data.offload_ok(alt)[u]:
                x_hat[u], eps[u] = 1.0, eps_max[u]
            else:
                flagged[u] = True
    return x_hat, eps, flagged
