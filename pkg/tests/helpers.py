"""Small instances and finite-difference utilities shared by the solver tests."""
from dataclasses import replace

import numpy as np

from mecoffload.config import GeometryConfig, SystemParams
from mecoffload.model import AllocationState, uplink_rates
from mecoffload.scenario import make_scenario
from mecoffload.subsolvers.capacity import equal_split
from mecoffload.subsolvers.offload import OffloadStep, offload_data
from mecoffload.subsolvers.subcarrier import (SubcarrierStep, rate_surrogate, round_robin,
                                              subcarrier_data)


def small_setting(seed=0, users=4, sbs=2, subcarriers=3):
    params = SystemParams(num_subcarriers=subcarriers)
    sc = make_scenario(GeometryConfig(num_users=users, num_sbs=sbs), seed,
                       num_subcarriers=subcarriers)
    x = np.ones(users)
    state = AllocationState(x, round_robin(sc), equal_split(sc, params, x > 0), np.full(users, 1.5))
    return sc, params, state


def random_relaxed_rho(sc, rng, fill=0.9):
    """Random strictly positive rho with every (SBS, subcarrier) load below ``fill``."""
    rho = rng.uniform(0.05, 1.0, size=(sc.num_users, sc.num_subcarriers))
    for k in range(sc.num_sbs):
        users = sc.users_of(k)
        if len(users):
            load = rho[users].sum(axis=0)
            rho[users] *= fill * rng.uniform(0.3, 1.0, size=load.shape) / load
    return rho


def subcarrier_step(seed=0, enforce_deadlines=True):
    rng = np.random.default_rng(seed)
    sc, params, state = small_setting(seed)
    data = subcarrier_data(sc, params, state)
    if enforce_deadlines:
        data = replace(data, limits=np.full(sc.num_users, 10.0))   # every deadline row present
    return SubcarrierStep(data, random_relaxed_rho(sc, rng)), sc, rng


def subcarrier_interior(step, sc, rng, t=10.0):
    """Random point of the barrier domain near the expansion point."""
    for _ in range(1000):
        lam = rng.uniform(0.0, 0.5)
        rho = (1 - lam) * step.rho_i + lam * random_relaxed_rho(sc, rng)
        rhs = rate_surrogate(step.m_act @ rho, step.interf_i, step.data.snr[step.act])
        l = rhs * rng.uniform(0.3, 0.95, size=rhs.shape)
        z = step.join(rho, l)
        if np.isfinite(step.barrier_value(z, t)):
            return z
    raise RuntimeError("no interior point found")


def offload_step(seed=0):
    rng = np.random.default_rng(seed)
    sc, params, state = small_setting(seed, users=5, subcarriers=8)
    rates = uplink_rates(sc, params, state.rho)
    data = offload_data(sc, params, rates, state.f)
    data = replace(data, delay_limit=np.full(sc.num_users, 10.0))
    users = np.flatnonzero((data.eta_floor < 1) & np.isfinite(data.remote))
    floor = data.eta_floor
    x_j = rng.uniform(0.1, 0.9, sc.num_users)
    lo = np.maximum(1 - x_j * (1 - floor), 1 - x_j)
    eta_j = lo + (1 - lo) * rng.uniform(0.2, 0.8, sc.num_users)
    return OffloadStep(data, users, x_j, eta_j), rng


def offload_interior(step, rng):
    x = rng.uniform(0.05, 0.95, step.p)
    lo = np.maximum(1 - x * (1 - step.floor), np.maximum(1 - x, step.floor))
    eta = lo + (1 - lo) * rng.uniform(0.1, 0.9, step.p)
    d = (1 - x) * (step.c_loc - step.c_off) + step.c_off * eta
    tangent = np.log(step.d_j) + ((step.c_off - step.c_loc) * (x - step.x_j)
                                  + step.c_off * (eta - step.eta_j)) / step.d_j
    v = tangent + rng.uniform(0.05, 1.0, step.p)
    assert np.all(d > 0)
    return step.join(x, eta, v)


def fd_gradient(f, z, rel=1e-6):
    g = np.zeros_like(z)
    for i in range(len(z)):
        h = rel * max(abs(z[i]), 1e-3)
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def fd_jacobian(grad, z, rel=1e-6):
    cols = []
    for i in range(len(z)):
        h = rel * max(abs(z[i]), 1e-3)
        e = np.zeros_like(z)
        e[i] = h
        cols.append((grad(z + e) - grad(z - e)) / (2 * h))
    return np.array(cols).T


def rel_err(approx, exact):
    approx, exact = np.asarray(approx), np.asarray(exact)
    return float(np.max(np.abs(approx - exact)) / max(np.max(np.abs(exact)), 1e-300))
