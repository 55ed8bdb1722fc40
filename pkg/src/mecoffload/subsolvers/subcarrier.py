"""Subcarrier allocation by successive convex approximation.

For fixed offloading, compression and capacity, the delay of an offloading
user is ``base_u + load_u / s_u`` where ``s_u = sum_n rho_un * l_un`` is its
spectral-efficiency sum and ``l_un = log2(1 + snr_un / (1 + I_un))``. Each SCA
step replaces the bilinear product rho*l by a concave minorant and the
difference-of-concave rate by its concave lower bound, both tight at the
current iterate, and minimises ``sum_u ln(base_u + load_u / s_u)``.

Variables of one convex step are ``rho`` (U, N) and ``l`` (A, N) for the A
active users; the interference is an affine function of ``rho`` and is
substituted rather than carried as a variable. The Newton system is
block-diagonal over subcarriers plus one rank-one term per active user, and
is solved with the Woodbury identity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..config import SystemParams
from ..cvxcore import INFEASIBLE, ConvexProgram, SolverSettings, minimize
from ..model import (BITS_PER_UNIT, AllocationState, degradation_multiplier,
                     interference_matrix, local_delay)
from ..scenario import Scenario

log = logging.getLogger(__name__)
LN2 = np.log(2.0)


# -- surrogates ----------------------------------------------------------

def product_surrogate(rho, l, rho_i, l_i, scale=1.0):
    """Concave minorant of rho*l, tight at (rho_i, l_i).

    Uses rho*l = ((rho/c + c*l)^2 - (rho/c - c*l)^2)/4 with c = sqrt(scale)
    and linearises the first (convex) square at the expansion point.
    """
    c = np.sqrt(scale)
    w_i = rho_i / c + c * l_i
    return 0.5 * w_i * (rho / c + c * l) - 0.25 * w_i ** 2 - 0.25 * (rho / c - c * l) ** 2


def rate_surrogate(interf, interf_i, snr):
    """Concave lower bound on log2(1 + snr/(1+I)) in I, tight at ``interf_i``.

    Interference and SNR are normalised by the noise power.
    """
    with np.errstate(invalid="ignore", divide="ignore"):  # NaN outside the domain
        return (np.log2(snr + interf + 1.0)
                - (np.log(interf_i + 1.0) + (interf - interf_i) / (interf_i + 1.0)) / LN2)


def round_robin(scenario: Scenario) -> np.ndarray:
    """Subcarrier n of SBS k goes to its (n mod U_k)-th user."""
    rho = np.zeros((scenario.num_users, scenario.num_subcarriers))
    for k in range(scenario.num_sbs):
        users = scenario.users_of(k)
        if len(users):
            n = np.arange(scenario.num_subcarriers)
            rho[users[n % len(users)], n] = 1.0
    return rho


def round_subcarriers(rho: np.ndarray, cells, threshold: float = 1e-3,
                      method: str = "quota", eligible=None) -> np.ndarray:
    """Binary subcarrier assignment from a relaxed one; one winner per (SBS, subcarrier).

    ``method="argmax"`` grants each subcarrier to the user with the largest
    relaxed share (lowest index on ties) when that share reaches
    ``threshold``. ``method="quota"`` first gives every user a whole number of
    subcarriers close to its relaxed total (largest remainder) and then fills
    the quotas greedily by relaxed share; this keeps the rate split of a
    relaxed solution that spreads users evenly across subcarriers.
    """
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    if eligible is None:
        eligible = np.ones(rho.shape[0], dtype=bool)
    for users in cells:
        users = np.asarray(users)[eligible[np.asarray(users, dtype=int)]] if len(users) else users
        if not len(users):
            continue
        block = rho[users]
        if method == "argmax":
            win = np.argmax(block, axis=0)
            ok = block[win, np.arange(block.shape[1])] >= threshold
            out[users[win[ok]], np.flatnonzero(ok)] = 1.0
        elif method == "quota":
            out[users] = _quota_assign(block, threshold)
        else:
            raise ValueError(f"unknown rounding method {method!r}")
    return out


def _quota_assign(block: np.ndarray, threshold: float) -> np.ndarray:
    nu, nsub = block.shape
    total = block.sum(axis=1)
    quota = np.floor(total + 1e-9).astype(int)
    spare = int(round(min(nsub, block.sum()))) - quota.sum()
    if spare > 0:
        frac = total - quota
        order = sorted(range(nu), key=lambda u: (-frac[u], u))
        for u in order[:spare]:
            if total[u] >= threshold:
                quota[u] += 1
    out = np.zeros_like(block)
    taken = np.zeros(nsub, dtype=bool)
    # strongest claims first; ties by user then subcarrier index
    order = np.lexsort((np.tile(np.arange(nsub), nu), np.repeat(np.arange(nu), nsub),
                        -block.ravel()))
    for idx in order:
        u, n = divmod(int(idx), nsub)
        if quota[u] > 0 and not taken[n] and block[u, n] >= threshold:
            out[u, n] = 1.0
            taken[n] = True
            quota[u] -= 1
    return out


# -- problem data --------------------------------------------------------

@dataclass
class SubcarrierProblemData:
    """Constants of the subcarrier block.

    ``base`` is the rate-independent part of each user's delay (local share
    plus MEC compute time), ``load`` the offloaded bits per Hz of one
    subcarrier so that ``delay = base + load / s``. Interference and SNR are
    normalised by the noise power.
    """
    cross: np.ndarray       # (U, U) interference coupling into user u's link
    snr: np.ndarray         # (U, N)
    cells: list             # users of each SBS
    base: np.ndarray        # (U,) seconds
    load: np.ndarray        # (U,) seconds * (bit/s/Hz)
    limits: np.ndarray      # (U,) deadlines

    @property
    def num_users(self) -> int:
        return self.snr.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.snr.shape[1]

    @property
    def active(self) -> np.ndarray:
        return (self.load > 0) & np.isfinite(self.base)

    def spectral_efficiency(self, rho):
        return np.log2(1.0 + self.snr / (1.0 + self.cross @ rho))

    def delays(self, rho) -> np.ndarray:
        s = np.sum(rho * self.spectral_efficiency(rho), axis=1)
        with np.errstate(divide="ignore"):
            return np.where(self.active, self.base + self.load / s, np.nan)

    def objective(self, rho) -> float:
        """Sum of log-delays of the active users (to be minimised)."""
        d = self.delays(rho)[self.active]
        return float(np.sum(np.log(d))) if np.all(np.isfinite(d)) else np.inf


def subcarrier_data(scenario: Scenario, params: SystemParams, state: AllocationState,
                    parallel_aware: bool = True) -> SubcarrierProblemData:
    a = scenario.tasks.raw_data
    x, b = state.x, a / state.eps
    mult = degradation_multiplier(params, scenario.tasks.parallelism) if parallel_aware else 1.0
    with np.errstate(divide="ignore"):
        comp = np.where(state.f > 0, params.cycles_per_unit * b * mult / np.where(state.f > 0, state.f, 1.0),
                        np.inf)
    with np.errstate(invalid="ignore"):
        base = np.where(x > 0, (1 - x) * local_delay(params, a) + x * comp, 0.0)
    load = x * BITS_PER_UNIT * b / params.subcarrier_bandwidth
    cross = interference_matrix(scenario, params) / params.noise_power
    snr = params.tx_power * scenario.channel.gain / params.noise_power
    cells = [scenario.users_of(k) for k in range(scenario.num_sbs)]
    return SubcarrierProblemData(cross, snr, cells, base, load, scenario.tasks.delay_limit)


# -- one convex step -----------------------------------------------------

@dataclass
class _BlockLowRank:
    """Per-subcarrier blocks [[P, Q], [Q^T, diag(h)]] plus sum_a w_a v_a v_a^T.

    Only the Schur complement S = P - Q diag(1/h) Q^T is stored. v_a is
    nonzero in two places per subcarrier: psi_r at the rho entry of the a-th
    active user and psi_l at its l entry.
    """
    schur: np.ndarray    # (N, U, U)
    prl: np.ndarray      # (N, U, A)
    dll: np.ndarray      # (N, A)
    act: np.ndarray      # (A,)
    psi_r: np.ndarray    # (A, N)
    psi_l: np.ndarray    # (A, N)
    weights: np.ndarray  # (A,)

    @property
    def vecs(self) -> np.ndarray:
        n_sub, u, na = self.prl.shape
        v = np.zeros((n_sub, u + na, na))
        v[:, self.act, np.arange(na)] = self.psi_r.T
        v[:, u + np.arange(na), np.arange(na)] = self.psi_l.T
        return v

    def block_solve(self, rhs):
        """Solve every block against rhs (N, U + A, k)."""
        u = self.schur.shape[1]
        scaled = self.prl / self.dll[:, None, :]
        y_r = np.linalg.solve(self.schur, rhs[:, :u] - scaled @ rhs[:, u:])
        y_l = (rhs[:, u:] - self.prl.transpose(0, 2, 1) @ y_r) / self.dll[:, :, None]
        return np.concatenate([y_r, y_l], axis=1)

    def project(self, y):
        """V^T y for y (N, U + A, k), giving (A, k)."""
        u = self.schur.shape[1]
        return (np.einsum("an,nak->ak", self.psi_r, y[:, self.act])
                + np.einsum("an,nak->ak", self.psi_l, y[:, u:]))

    def dense(self, layout) -> np.ndarray:
        """Materialise in z-ordering (for tests on small instances)."""
        n = layout.size
        h = np.zeros((n, n))
        vecs = self.vecs
        v = np.zeros((n, vecs.shape[2]))
        for b in range(layout.shape[0]):
            prr = self.schur[b] + (self.prl[b] / self.dll[b]) @ self.prl[b].T
            blk = np.block([[prr, self.prl[b]], [self.prl[b].T, np.diag(self.dll[b])]])
            h[np.ix_(layout[b], layout[b])] += blk
            v[layout[b]] += vecs[b]
        return h + (v * self.weights) @ v.T


class SubcarrierStep(ConvexProgram):
    """Convex surrogate problem at expansion point ``rho_i``."""

    def __init__(self, data: SubcarrierProblemData, rho_i: np.ndarray, enforce=None,
                 scale=1.0):
        self.data = data
        u_count, n_sub = data.snr.shape
        self.act = np.flatnonzero(data.active)
        na = len(self.act)
        self.shape = (u_count, n_sub, na)
        self.n = (u_count + na) * n_sub
        self.rho_i = np.asarray(rho_i, dtype=float)
        self.interf_i = data.cross[self.act] @ self.rho_i
        self.l_i = np.log2(1.0 + data.snr[self.act] / (1.0 + self.interf_i))
        self.scale = np.broadcast_to(np.asarray(scale, dtype=float), self.l_i.shape)
        self.w_i = self.rho_i[self.act] / np.sqrt(self.scale) + np.sqrt(self.scale) * self.l_i
        self.m_act = data.cross[self.act]
        self.cell_of = np.full(u_count, -1)
        for k, users in enumerate(data.cells):
            self.cell_of[users] = k
        self.cell_mat = np.zeros((len(data.cells), u_count))
        for k, users in enumerate(data.cells):
            self.cell_mat[k, users] = 1.0
        self.same_cell = self.cell_mat.T @ self.cell_mat
        # deadlines are kept only for users meeting them at the expansion point;
        # a hair of slack keeps that point strictly inside
        d_i = data.delays(self.rho_i)[self.act]
        ok = np.isfinite(d_i) & (d_i <= data.limits[self.act] * (1 + 1e-9))
        if enforce is not None:
            ok &= np.asarray(enforce, bool)[self.act]
        self.enf = np.flatnonzero(ok)
        self.lim = np.maximum(data.limits[self.act][self.enf], d_i[self.enf] * (1 + 1e-9))
        self.layout = (np.concatenate([np.arange(u_count)[:, None] * n_sub,
                                       u_count * n_sub + np.arange(na)[:, None] * n_sub])
                       + np.arange(n_sub)[None, :]).T

    # -- variable handling -------------------------------------------------
    def split(self, z):
        u_count, n_sub, na = self.shape
        return z[:u_count * n_sub].reshape(u_count, n_sub), z[u_count * n_sub:].reshape(na, n_sub)

    def join(self, rho, l):
        return np.concatenate([rho.ravel(), l.ravel()])

    def interior_start(self):
        """Strictly feasible point next to the expansion point."""
        d = self.data
        share = np.zeros(self.shape[0])
        for users in d.cells:
            if len(users):
                share[users] = 1.0 / len(users)
        for delta in (1e-3, 1e-5, 1e-7, 1e-9, 1e-11):
            rho = (1 - 2 * delta) * self.rho_i + delta * share[:, None]
            rhs = rate_surrogate(self.m_act @ rho, self.interf_i, d.snr[self.act])
            l = np.where(rhs > 2 * delta, rhs - delta * np.maximum(rhs, 1.0), 0.5 * rhs)
            z = self.join(rho, l)
            if np.all(self.constraint_values(z) < 0) and np.isfinite(self.objective(z)):
                return z
        return self.join(self.rho_i, self.l_i)

    def _s(self, rho, l):
        return product_surrogate(rho[self.act], l, self.rho_i[self.act], self.l_i,
                                 self.scale).sum(axis=1)

    # -- ConvexProgram interface -------------------------------------------
    def objective(self, z):
        rho, l = self.split(z)
        s = self._s(rho, l)
        if np.any(s <= 0):
            return np.inf
        d = self.data
        return float(np.sum(np.log(d.base[self.act] + d.load[self.act] / s)))

    def constraint_values(self, z):
        rho, l = self.split(z)
        d = self.data
        gb = l - rate_surrogate(self.m_act @ rho, self.interf_i, d.snr[self.act])
        gc = self.cell_mat @ rho - 1.0
        parts = [gb.ravel(), -l.ravel(), -rho.ravel(), gc.ravel()]
        if len(self.enf):
            s = self._s(rho, l)[self.enf]
            with np.errstate(divide="ignore"):
                g6 = np.where(s > 0, d.base[self.act][self.enf]
                              + d.load[self.act][self.enf] / s - self.lim, np.inf)
            parts.append(g6)
        return np.concatenate(parts)

    def _pieces(self, z):
        rho, l = self.split(z)
        d = self.data
        act = self.act
        c = np.sqrt(self.scale)
        diff = rho[act] / c - c * l
        s = self._s(rho, l)
        base, load = d.base[act], d.load[act]
        q = base * s + load
        interf = self.m_act @ rho
        snr = d.snr[act]
        return dict(
            rho=rho, l=l, s=s,
            psi_r=0.5 * (self.w_i - diff) / c, psi_l=0.5 * c * (self.w_i + diff),
            phi1=-load / (s * q), phi2=load * (2 * base * s + load) / (s ** 2 * q ** 2),
            # first and second derivative of the deadline rows in s
            d6=-load[self.enf] / s[self.enf] ** 2, dd6=2 * load[self.enf] / s[self.enf] ** 3,
            gamma=(1.0 / (snr + interf + 1.0) - 1.0 / (self.interf_i + 1.0)) / LN2,
            curv_b=1.0 / ((snr + interf + 1.0) ** 2 * LN2))

    def _groups(self, w):
        """Split a per-constraint vector into its (rate, l, rho, cell, deadline) parts."""
        u_count, n_sub, na = self.shape
        sizes = np.cumsum([na * n_sub, na * n_sub, u_count * n_sub, len(self.cell_mat) * n_sub])
        wb, wl, wr, wc, w6 = np.split(w, sizes)
        return (wb.reshape(na, n_sub), wl.reshape(na, n_sub), wr.reshape(u_count, n_sub),
                wc.reshape(-1, n_sub), w6)

    def weighted_system(self, z, t, grad_w, curv_w=None, outer_w=None):
        p = self._pieces(z)
        act, e = self.act, self.enf
        u_count, n_sub, na = self.shape
        gamma, psi_r, psi_l = p["gamma"], p["psi_r"], p["psi_l"]
        wb, wl, wr, wc, w6 = self._groups(grad_w)
        beta = t * p["phi1"]
        beta[e] += w6 * p["d6"]
        g_rho = -wr + self.cell_mat.T @ wc - self.m_act.T @ (wb * gamma)
        g_rho[act] += beta[:, None] * psi_r
        grad = self.join(g_rho, wb - wl + beta[:, None] * psi_l)
        if curv_w is None:
            return grad, None
        cb, _, _, _, c6 = self._groups(curv_w)
        ob, ol, orr, oc, o6 = self._groups(outer_w)
        beta = t * p["phi1"]
        beta[e] += c6 * p["d6"]
        wlow = t * p["phi2"]
        wlow[e] += o6 * p["d6"] ** 2 + c6 * p["dd6"]
        # Schur complement of each subcarrier block on its rho part, written
        # out so that no difference of large terms is formed
        kappa = ob * gamma                                              # (A, N)
        dll = ob + ol - 0.5 * beta[:, None] * self.scale
        omega = gamma ** 2 * ob * (dll - ob) / dll + cb * p["curv_b"]
        schur = (self.m_act.T[None, :, :] * omega.T[:, None, :]) @ self.m_act
        schur += self.same_cell[None] * oc.T[:, self.cell_of][:, :, None]
        ar_u = np.arange(u_count)
        ar_a = np.arange(na)
        schur[:, ar_u, ar_u] += orr.T
        schur[:, act, act] += (-0.5 * beta[:, None] / self.scale * (ob + ol) / dll).T
        cross = (0.5 * beta[:, None] * kappa / dll).T[:, :, None] * self.m_act[None]  # (N, A, U)
        schur[:, act, :] += cross
        schur[:, :, act] += cross.transpose(0, 2, 1)
        prl = -kappa.T[:, None, :] * self.m_act.T[None, :, :]          # (N, U, A)
        prl[:, act, ar_a] += 0.5 * beta[None, :]
        return grad, _BlockLowRank(schur, prl, dll.T, act, psi_r, psi_l, wlow)

    def solve_newton(self, hess: _BlockLowRank, rhs):
        r = rhs[self.layout]                                    # (N, nb)
        y = hess.block_solve(np.concatenate([r[:, :, None], hess.vecs], axis=2))
        y0, yv = y[:, :, :1], y[:, :, 1:]
        gram = hess.project(yv)
        h = hess.project(y0)[:, 0]
        w = hess.weights
        coef = np.linalg.solve(np.eye(len(w)) + w[:, None] * gram, w * h)
        out = np.empty_like(rhs)
        out[self.layout] = y0[:, :, 0] - yv @ coef
        return out

    # generic sparse derivatives, used by phase I and for verification
    def objective_derivatives(self, z):
        p = self._pieces(z)
        grad_s, hess_s = self._surrogate_sum_derivatives(p)
        phi1, phi2 = self._phi1(z), self._phi2(z)
        grad = grad_s.T @ phi1
        hess = grad_s.T @ sp.diags(phi2) @ grad_s + _weighted(hess_s, phi1, self.n, self.scale)
        return np.asarray(grad).ravel(), sp.csr_matrix(hess)

    def _phi1(self, z):
        rho, l = self.split(z)
        s = self._s(rho, l)
        base, load = self.data.base[self.act], self.data.load[self.act]
        return -load / (s * (base * s + load))

    def _phi2(self, z):
        rho, l = self.split(z)
        s = self._s(rho, l)
        base, load = self.data.base[self.act], self.data.load[self.act]
        return load * (2 * base * s + load) / (s ** 2 * (base * s + load) ** 2)

    def _surrogate_sum_derivatives(self, p):
        """Jacobian of s (A x n, sparse) and the (shared) Hessian pattern of each s_a."""
        u_count, n_sub, na = self.shape
        rows = np.repeat(np.arange(na), n_sub)
        cols_r = (self.act[:, None] * n_sub + np.arange(n_sub)[None, :]).ravel()
        cols_l = (u_count * n_sub + np.arange(na)[:, None] * n_sub + np.arange(n_sub)[None, :]).ravel()
        jac = sp.csr_matrix((np.concatenate([p["psi_r"].ravel(), p["psi_l"].ravel()]),
                             (np.concatenate([rows, rows]), np.concatenate([cols_r, cols_l]))),
                            shape=(na, self.n))
        return jac, (rows, cols_r, cols_l)

    def constraint_derivatives(self, z):
        p = self._pieces(z)
        u_count, n_sub, na = self.shape
        rho, l = p["rho"], p["l"]
        blocks = []
        # gb rows (a, n)
        r_idx, c_idx, vals = [], [], []
        row = np.arange(na * n_sub).reshape(na, n_sub)
        for a in range(na):
            for n in range(n_sub):
                nz = np.flatnonzero(self.m_act[a])
                r_idx.extend([row[a, n]] * (len(nz) + 1))
                c_idx.extend(list(nz * n_sub + n) + [u_count * n_sub + a * n_sub + n])
                vals.extend(list(-p["gamma"][a, n] * self.m_act[a, nz]) + [1.0])
        blocks.append(sp.csr_matrix((vals, (r_idx, c_idx)), shape=(na * n_sub, self.n)))
        blocks.append(sp.hstack([sp.csr_matrix((na * n_sub, u_count * n_sub)), -sp.eye(na * n_sub)]))
        blocks.append(sp.hstack([-sp.eye(u_count * n_sub), sp.csr_matrix((u_count * n_sub, na * n_sub))]))
        cm = sp.kron(sp.csr_matrix(self.cell_mat), sp.eye(n_sub))
        blocks.append(sp.hstack([cm, sp.csr_matrix((cm.shape[0], na * n_sub))]))
        jac_s, pattern = self._surrogate_sum_derivatives(p)
        if len(self.enf):
            s = self._s(rho, l)[self.enf]
            load = self.data.load[self.act][self.enf]
            blocks.append(sp.diags(-load / s ** 2) @ jac_s[self.enf])
        jac = sp.csr_matrix(sp.vstack(blocks))
        n_b = na * n_sub
        first6 = jac.shape[0] - len(self.enf)

        def curv(w):
            wb = (w[:n_b].reshape(na, n_sub) * p["curv_b"])
            h = sp.csr_matrix((self.n, self.n))
            dense = np.einsum("au,an,av->nuv", self.m_act, wb, self.m_act)
            rr, cc, vv = [], [], []
            for n in range(n_sub):
                iu, iv = np.nonzero(dense[n])
                rr.extend(iu * n_sub + n)
                cc.extend(iv * n_sub + n)
                vv.extend(dense[n][iu, iv])
            h = sp.csr_matrix((vv, (rr, cc)), shape=(self.n, self.n))
            if len(self.enf):
                s = self._s(rho, l)[self.enf]
                load = self.data.load[self.act][self.enf]
                w6 = w[first6:]
                js = jac_s[self.enf]
                h = h + js.T @ sp.diags(w6 * 2 * load / s ** 3) @ js
                coef = np.zeros(na)
                coef[self.enf] = -w6 * load / s ** 2
                h = h + _weighted(pattern, coef, self.n, self.scale)
            return h
        return jac, curv


def _weighted(pattern, coef, n, scale):
    """Sum_a coef_a * Hess(s_a); per (rho, l) pair that is -1/2 [[1/k, -1], [-1, k]]."""
    rows, cols_r, cols_l = pattern
    w = -0.5 * coef[rows]
    k = np.asarray(scale).ravel()
    r = np.concatenate([cols_r, cols_l, cols_r, cols_l])
    c = np.concatenate([cols_r, cols_l, cols_l, cols_r])
    v = np.concatenate([w / k, w * k, -w, -w])
    return sp.csr_matrix((v, (r, c)), shape=(n, n))


# -- SCA loop ------------------------------------------------------------

@dataclass
class SubcarrierResult:
    rho: np.ndarray
    objective: float
    trace: list[float] = field(default_factory=list)
    statuses: list[str] = field(default_factory=list)
    status: str = "optimal"

    @property
    def iterations(self) -> int:
        return len(self.statuses)


def solve_subcarrier_sca(data: SubcarrierProblemData, rho0: np.ndarray, tol: float = 1e-4,
                         max_iter: int = 30, settings: SolverSettings | None = None,
                         enforce=None, scale=1.0) -> SubcarrierResult:
    """Iterate convex surrogate steps from ``rho0`` until the log-delay sum settles.

    Steps that fail to improve the true objective are rejected, so the
    returned trace is non-increasing. A step whose surrogate is infeasible
    ends the loop with status ``"infeasible"`` and keeps the last iterate.
    """
    settings = settings or SolverSettings()
    rho = np.asarray(rho0, dtype=float).copy()
    value = data.objective(rho)
    res = SubcarrierResult(rho, value, [value])
    if not np.any(data.active):
        return res
    for _ in range(max_iter):
        step = SubcarrierStep(data, rho, enforce, scale)
        sol = minimize(step, step.interior_start(), settings)
        res.statuses.append(sol.status)
        if sol.status == INFEASIBLE:
            res.status = INFEASIBLE
            break
        cand, _ = step.split(sol.z)
        cand = np.clip(cand, 0.0, 1.0)
        new = data.objective(cand)
        if not new <= value:
            log.debug("subcarrier step rejected (%.3e -> %.3e)", value, new)
            break
        done = value - new <= tol
        rho, value = cand, new
        res.trace.append(value)
        if done:
            break
    res.rho, res.objective = rho, value
    return res
