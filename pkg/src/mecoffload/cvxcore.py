"""Log-barrier Newton method for smooth convex programs, plus the KKT
bisection used for computing-capacity allocation.

Programs subclass :class:`ConvexProgram` and supply derivatives; the default
Newton system is assembled densely (or sparsely when the Jacobian is a scipy
sparse matrix). Programs with exploitable structure may override
:meth:`ConvexProgram.barrier_system` and :meth:`ConvexProgram.solve_newton`.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

log = logging.getLogger(__name__)

OPTIMAL, MAX_ITER, INFEASIBLE = "optimal", "max_iter", "infeasible"


class NumericalError(ArithmeticError):
    """Non-finite derivative or Newton system encountered."""


class CapacityInfeasible(ValueError):
    """Lower bounds on capacity exceed the budget."""


@dataclass
class SolverSettings:
    barrier_mu: float = 10.0
    newton_tol: float = 1e-8
    max_newton: int = 100           # per centering step
    duality_gap_tol: float = 1e-8
    ls_alpha: float = 0.25
    ls_beta: float = 0.5
    t0: float | None = None
    max_stages: int = 80
    stage_tol: float | None = None  # looser centering before the last stage
    # stop centering once the Newton decrement implies an objective error below this
    center_accuracy: float | None = None
    debug: bool = False
    trace_file: str | None = None

    def __post_init__(self):
        if not (self.barrier_mu > 1 and self.newton_tol > 0 and self.max_newton > 0
                and self.duality_gap_tol > 0 and 0 < self.ls_alpha < 0.5
                and 0 < self.ls_beta < 1):
            raise ValueError("invalid solver settings")


@dataclass
class Solution:
    z: np.ndarray
    value: float
    status: str
    kkt_residual: float
    newton_steps: int = 0
    stage_values: list[float] = field(default_factory=list)


class ConvexProgram:
    """min f(z) s.t. g_i(z) <= 0, A z = c.

    ``objective`` returns +inf outside the objective's domain.
    ``constraint_derivatives`` returns the Jacobian (dense or sparse) and a
    callable mapping weights w to sum_i w_i * Hess g_i (or None if all g_i are
    affine).
    """
    n: int
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None

    def objective(self, z) -> float:
        raise NotImplementedError

    def objective_derivatives(self, z):
        raise NotImplementedError

    def constraint_values(self, z) -> np.ndarray:
        return np.zeros(0)

    def constraint_derivatives(self, z):
        return np.zeros((0, self.n)), None

    # -- barrier machinery -------------------------------------------------
    def barrier_value(self, z, t) -> float:
        g = self.constraint_values(z)
        if not np.all(g < 0):  # also rejects NaN rows
            return np.inf
        f = self.objective(z)
        if not np.isfinite(f):
            return np.inf
        return t * f - np.sum(np.log(-g))

    def barrier_system(self, z, t):
        """Gradient and Hessian of t*f - sum log(-g) at z."""
        inv = 1.0 / -self.constraint_values(z)
        return self.weighted_system(z, t, inv, inv, inv ** 2)

    def weighted_system(self, z, t, grad_w, curv_w=None, outer_w=None):
        """t grad f + J^T grad_w and, if ``curv_w`` is given, the matrix
        t hess f + sum_i curv_w_i hess g_i + J^T diag(outer_w) J.

        The barrier system uses grad_w = curv_w = 1/(-g) and outer_w = 1/g^2.
        """
        grad, hess = self.objective_derivatives(z)
        jac, curv = self.constraint_derivatives(z)
        grad = np.asarray(t * grad + jac.T @ grad_w).ravel()
        if curv_w is None:
            return grad, None
        if sp.issparse(jac):
            h = jac.T @ sp.diags(outer_w) @ jac
            if curv is not None:
                h = h + curv(curv_w)
            hess = (sp.csr_matrix(hess) * t if hess is not None else 0) + h
        else:
            h = (jac.T * outer_w) @ jac
            if curv is not None:
                h = h + curv(curv_w)
            hess = t * np.asarray(hess) + h
        return grad, hess

    def solve_newton(self, hess, rhs):
        """Solve hess @ dz = rhs (no equality constraints)."""
        if sp.issparse(hess):
            return scipy.sparse.linalg.spsolve(sp.csc_matrix(hess), rhs)
        try:
            c = scipy.linalg.cho_factor(hess, check_finite=False)
            return scipy.linalg.cho_solve(c, rhs, check_finite=False)
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(hess, rhs, rcond=None)[0]


class FunctionalProgram(ConvexProgram):
    """Convex program assembled from plain callables.

    ``objective`` is a triple (value, gradient, hessian) of callables and each
    constraint a triple for g_i(z) <= 0. ``lower``/``upper`` add box bounds.
    """

    def __init__(self, n: int, objective: Sequence[Callable],
                 constraints: Sequence[Sequence[Callable]] = (),
                 eq_matrix=None, eq_rhs=None, lower=None, upper=None):
        self.n = n
        self._f, self._df, self._d2f = objective
        self._cons = list(constraints)
        self.eq_matrix = None if eq_matrix is None else np.atleast_2d(np.asarray(eq_matrix, float))
        self.eq_rhs = None if eq_rhs is None else np.atleast_1d(np.asarray(eq_rhs, float))
        self.lower = None if lower is None else np.broadcast_to(np.asarray(lower, float), (n,))
        self.upper = None if upper is None else np.broadcast_to(np.asarray(upper, float), (n,))

    def objective(self, z):
        try:
            v = float(self._f(z))
        except (ValueError, FloatingPointError):
            return np.inf
        return v if np.isfinite(v) else np.inf

    def objective_derivatives(self, z):
        return np.asarray(self._df(z), float), np.atleast_2d(np.asarray(self._d2f(z), float))

    def constraint_values(self, z):
        vals = [float(g(z)) for g, _, _ in self._cons]
        if self.lower is not None:
            vals.extend(self.lower - z)
        if self.upper is not None:
            vals.extend(z - self.upper)
        return np.array(vals)

    def constraint_derivatives(self, z):
        rows = [np.asarray(dg(z), float) for _, dg, _ in self._cons]
        eye = np.eye(self.n)
        if self.lower is not None:
            rows.extend(-eye)
        if self.upper is not None:
            rows.extend(eye)
        jac = np.array(rows).reshape(-1, self.n)
        hess_fns = [h for _, _, h in self._cons]

        def curv(w):
            out = np.zeros((self.n, self.n))
            for wi, h in zip(w, hess_fns):
                out += wi * np.atleast_2d(h(z))
            return out
        return jac, (curv if hess_fns else None)


class _PhaseOne(ConvexProgram):
    """min s + (prox/2)|z - z0|^2  s.t. g_i(z) <= s, over (z, s).

    The small proximal term keeps the problem bounded when the constraints
    alone do not bound z.
    """

    def __init__(self, base: ConvexProgram, anchor, prox=1e-6):
        self.base = base
        self.n = base.n + 1
        self.anchor = np.asarray(anchor, dtype=float)
        self.prox = prox
        if base.eq_matrix is not None:
            self.eq_matrix = np.hstack([base.eq_matrix, np.zeros((len(base.eq_matrix), 1))])
            self.eq_rhs = base.eq_rhs

    def objective(self, w):
        d = w[:-1] - self.anchor
        return float(w[-1] + 0.5 * self.prox * d @ d)

    def objective_derivatives(self, w):
        grad = np.append(self.prox * (w[:-1] - self.anchor), 1.0)
        diag = np.append(np.full(self.base.n, self.prox), 0.0)
        return grad, (sp.diags(diag) if self._sparse else np.diag(diag))

    def constraint_values(self, w):
        # floor on s keeps the phase-I problem bounded
        return np.append(self.base.constraint_values(w[:-1]) - w[-1], -1.0 - w[-1])

    def constraint_derivatives(self, w):
        jac, curv = self.base.constraint_derivatives(w[:-1])
        m = jac.shape[0]
        if sp.issparse(jac):
            jac = sp.vstack([sp.hstack([jac, -np.ones((m, 1))]),
                             sp.csr_matrix(([-1.0], ([0], [self.n - 1])), shape=(1, self.n))])
            jac = sp.csr_matrix(jac)
        else:
            last = np.zeros((1, self.n))
            last[0, -1] = -1.0
            jac = np.vstack([np.hstack([jac, -np.ones((m, 1))]), last])
        if curv is None:
            return jac, None

        def curv1(wts):
            c = curv(wts[:m])
            if sp.issparse(c):
                return sp.block_diag([c, sp.csr_matrix((1, 1))], format="csr")
            out = np.zeros((self.n, self.n))
            out[:-1, :-1] = c
            return out
        return jac, curv1

    def barrier_value(self, w, t):
        g = self.constraint_values(w)
        if not np.all(g < 0):  # also rejects NaN rows
            return np.inf
        return t * self.objective(w) - np.sum(np.log(-g))

    def barrier_system(self, w, t):
        grad, hess = ConvexProgram.barrier_system(self, w, t)
        if sp.issparse(hess):
            return grad, hess
        return grad, hess + 1e-12 * np.eye(self.n)


def _newton_direction(program: ConvexProgram, grad, hess):
    a = program.eq_matrix
    if a is None:
        return program.solve_newton(hess, -grad)
    if sp.issparse(hess):
        hess = hess.toarray()
    p = a.shape[0]
    kkt = np.block([[hess, a.T], [a, np.zeros((p, p))]])
    rhs = np.concatenate([-grad, np.zeros(p)])
    try:
        sol = scipy.linalg.solve(kkt, rhs, assume_a="sym", check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:program.n]


def _center(program: ConvexProgram, z, t, settings: SolverSettings, tol=None):
    """Damped Newton on the barrier problem at parameter t."""
    tol = settings.newton_tol if tol is None else tol
    value = program.barrier_value(z, t)
    steps = 0
    for steps in range(1, settings.max_newton + 1):
        grad, hess = program.barrier_system(z, t)
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite barrier gradient")
        dz = _newton_direction(program, grad, hess)
        if not np.all(np.isfinite(dz)):
            raise NumericalError("non-finite Newton step")
        slope = float(grad @ dz)
        if -slope / 2.0 <= tol:
            return z, steps, True
        s = 1.0
        while True:
            cand = z + s * dz
            v = program.barrier_value(cand, t)
            if v <= value + settings.ls_alpha * s * slope:
                break
            s *= settings.ls_beta
            if s < 1e-16:
                return z, steps, False
        z, value = cand, v
    return z, steps, False


def _strictly_feasible(program: ConvexProgram, z) -> bool:
    g = program.constraint_values(z)
    return bool(np.all(g < 0)) and np.isfinite(program.objective(z))


def _project_affine(program: ConvexProgram, z):
    a = program.eq_matrix
    if a is None:
        return z
    r = program.eq_rhs - a @ z
    return z + a.T @ np.linalg.lstsq(a @ a.T, r, rcond=None)[0]


def find_strictly_feasible(program: ConvexProgram, start, settings: SolverSettings | None = None):
    """Phase I: returns a strictly feasible point or None."""
    settings = settings or SolverSettings()
    z = _project_affine(program, np.asarray(start, dtype=float))
    if _strictly_feasible(program, z):
        return z
    g = program.constraint_values(z)
    w = np.append(z, max(float(np.max(g)), 0.0) + 1.0)
    p1 = _PhaseOne(program, z)
    p1._sparse = sp.issparse(program.constraint_derivatives(z)[0])
    m = len(p1.constraint_values(w))
    t = 1.0
    for _ in range(settings.max_stages):
        w, _, _ = _center(p1, w, t, settings)
        if w[-1] < 0 and _strictly_feasible(program, w[:-1]):
            return w[:-1]
        if m / t < 1e-10:
            break
        t *= settings.barrier_mu
    return None


def minimize(program: ConvexProgram, start, settings: SolverSettings | None = None) -> Solution:
    """Log-barrier method. ``start`` need not be strictly feasible (phase I)."""
    settings = settings or SolverSettings()
    z = find_strictly_feasible(program, start, settings)
    if z is None:
        z0 = np.asarray(start, dtype=float)
        return Solution(z0, program.objective(z0), INFEASIBLE, np.inf)
    if settings.debug:
        _check_psd(program, z)
    m = len(program.constraint_values(z))
    if m == 0:
        z, steps, ok = _center(program, z, 1.0, settings)
        val = program.objective(z)
        return Solution(z, val, OPTIMAL if ok else MAX_ITER, 0.0 if ok else np.inf, steps, [val])
    t = settings.t0 if settings.t0 is not None else 1.0
    total = 0
    values: list[float] = []
    rows = []
    status = MAX_ITER
    for stage in range(settings.max_stages):
        last = m / t <= settings.duality_gap_tol
        tol = settings.newton_tol if last or settings.stage_tol is None else settings.stage_tol
        if settings.center_accuracy is not None:
            tol = max(tol, settings.center_accuracy * t)
        z, steps, ok = _center(program, z, t, settings, tol)
        total += steps
        values.append(program.objective(z))
        rows.append((stage, values[-1], m / t))
        if m / t <= settings.duality_gap_tol:
            status = OPTIMAL if ok else MAX_ITER
            break
        t *= settings.barrier_mu
    if settings.trace_file:
        with open(settings.trace_file, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "residual"])
            w.writerows(rows)
    return Solution(z, values[-1], status, m / t, total, values)


def _check_psd(program: ConvexProgram, z, tol=1e-8):
    _, hess = program.objective_derivatives(z)
    if hess is None:
        return
    h = hess.toarray() if sp.issparse(hess) else np.asarray(hess)
    if h.size and h.shape[0] <= 2000:
        lo = np.linalg.eigvalsh((h + h.T) / 2).min()
        if lo < -tol * max(1.0, np.abs(h).max()):
            raise NumericalError(f"objective Hessian not PSD (min eigenvalue {lo:.3g})")


# -- capacity allocation -------------------------------------------------

def capacity_objective(costs, offsets, f) -> float:
    """sum_u ln(offset_u + cost_u / f_u)."""
    costs, offsets, f = map(np.asarray, (costs, offsets, f))
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(offsets + np.where(costs > 0, costs / f, 0.0))))


def _capacity_response(costs, offsets, lower, lam):
    # positive root of offset*f^2 + cost*f = cost/lam, rationalised for offset -> 0
    c = costs / lam
    root = 2.0 * c / (costs + np.sqrt(costs ** 2 + 4.0 * offsets * c))
    root = np.where(costs > 0, root, 0.0)
    return np.maximum(lower, root)


def bisect_capacity(costs, offsets, lower_bounds, budget: float) -> np.ndarray:
    """Minimise sum ln(offset_u + cost_u/f_u) s.t. sum f <= budget, f >= lower.

    Stationarity for users above their bound reads
    cost/(offset*f^2 + cost*f) = lam; lam is found by bisection in log-space so
    that the budget is exhausted (the objective is strictly decreasing in f).
    """
    costs = np.asarray(costs, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    lower = np.asarray(lower_bounds, dtype=float)
    if np.any(costs < 0) or np.any(offsets < 0) or np.any(lower < 0):
        raise ValueError("costs, offsets and lower bounds must be non-negative")
    if lower.sum() > budget * (1 + 1e-12):
        raise CapacityInfeasible(f"lower bounds sum {lower.sum():.4g} exceeds budget {budget:.4g}")
    if not np.any(costs > 0):
        return lower.copy()

    def total(lam):
        return _capacity_response(costs, offsets, lower, lam).sum()

    lo = hi = max(costs[costs > 0].max() / budget ** 2, 1e-300)
    while total(lo) < budget:
        lo /= 16.0
    while total(hi) > budget:
        hi *= 16.0
    for _ in range(300):
        mid = np.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        if total(mid) > budget:
            lo = mid
        else:
            hi = mid
    f = _capacity_response(costs, offsets, lower, hi)
    excess = f.sum() - budget
    if excess > 0:  # rounding at the last ulp
        free = f > lower
        f[free] -= excess * f[free] / f[free].sum()
    return f
