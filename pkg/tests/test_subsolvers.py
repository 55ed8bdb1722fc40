import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mecoffload.config import SystemParams
from mecoffload.cvxcore import ConvexProgram, capacity_objective
from mecoffload.model import AllocationState, uplink_rates
from mecoffload.subsolvers.capacity import capacity_terms, equal_split, solve_capacity
from mecoffload.subsolvers.offload import (OffloadProblemData, delay_log_surrogate,
                                           offload_data, round_offload, solve_offload_sca)
from mecoffload.subsolvers.subcarrier import (product_surrogate, rate_surrogate, round_robin,
                                              round_subcarriers, solve_subcarrier_sca,
                                              subcarrier_data)

from conftest import manual_scenario
from helpers import (fd_gradient, fd_jacobian, offload_interior, offload_step, rel_err,
                     small_setting, subcarrier_interior, subcarrier_step)

UNIT = SystemParams().noise_power / SystemParams().tx_power


# -- surrogates ------------------------------------------------------------

@given(st.floats(0, 1), st.floats(0, 20), st.floats(0, 1), st.floats(0, 20), st.floats(0.1, 10))
def test_product_surrogate_minorant(rho, l, rho_i, l_i, scale):
    assert product_surrogate(rho, l, rho_i, l_i, scale) <= rho * l + 1e-9 * max(1, rho * l)
    assert product_surrogate(rho_i, l_i, rho_i, l_i, scale) == pytest.approx(rho_i * l_i,
                                                                             rel=1e-9, abs=1e-12)


@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(1e-3, 1e6))
def test_rate_surrogate_minorant(interf, interf_i, snr):
    true = np.log2(1 + snr / (1 + interf))
    assert rate_surrogate(interf, interf_i, snr) <= true + 1e-9 * max(1, true)
    exact = np.log2(1 + snr / (1 + interf_i))
    assert rate_surrogate(interf_i, interf_i, snr) == pytest.approx(exact, rel=1e-9, abs=1e-12)


@given(st.floats(0, 1), st.floats(0.05, 1), st.floats(0, 1), st.floats(0.05, 1),
       st.floats(1e-3, 1.0), st.floats(1e-4, 1.0))
def test_delay_tangent_is_upper_bound(x, eta, x_j, eta_j, c_loc, c_off):
    d = (1 - x) * (c_loc - c_off) + c_off * eta
    d_j = (1 - x_j) * (c_loc - c_off) + c_off * eta_j
    if d > 0 and d_j > 0:
        assert delay_log_surrogate(x, eta, x_j, eta_j, c_loc, c_off) >= np.log(d) - 1e-9
        assert delay_log_surrogate(x_j, eta_j, x_j, eta_j, c_loc, c_off) == pytest.approx(
            np.log(d_j), rel=1e-12, abs=1e-12)


# -- derivatives -----------------------------------------------------------

@pytest.mark.parametrize("seed", range(3))
def test_subcarrier_fast_system_matches_generic(seed):
    step, sc, rng = subcarrier_step(seed)
    for _ in range(3):
        z = subcarrier_interior(step, sc, rng)
        t = rng.uniform(1, 1e3)
        g, h = step.barrier_system(z, t)
        inv = 1.0 / -step.constraint_values(z)
        g0, h0 = ConvexProgram.weighted_system(step, z, t, inv, inv, inv ** 2)
        assert rel_err(g, g0) < 1e-10
        assert rel_err(h.dense(step.layout), h0.toarray()) < 1e-10
        rhs = rng.normal(size=step.n)
        dz = step.solve_newton(h, rhs)
        assert rel_err(h0 @ dz, rhs) < 1e-8


def test_subcarrier_barrier_finite_differences():
    step, sc, rng = subcarrier_step(1)
    z = subcarrier_interior(step, sc, rng)
    g, h = step.barrier_system(z, 5.0)
    assert rel_err(g, fd_gradient(lambda w: step.barrier_value(w, 5.0), z)) < 1e-4
    assert rel_err(h.dense(step.layout),
                   fd_jacobian(lambda w: step.barrier_system(w, 5.0)[0], z)) < 1e-4


def test_offload_barrier_finite_differences():
    step, rng = offload_step(2)
    z = offload_interior(step, rng)
    g, h = step.barrier_system(z, 5.0)
    assert rel_err(g, fd_gradient(lambda w: step.barrier_value(w, 5.0), z)) < 1e-4
    assert rel_err(np.asarray(h), fd_jacobian(lambda w: step.barrier_system(w, 5.0)[0], z)) < 1e-4


# -- subcarrier block -------------------------------------------------------

def offloading_state(sc, params, rho=None):
    u = sc.num_users
    x = np.ones(u)
    return AllocationState(x, round_robin(sc) if rho is None else rho,
                           equal_split(sc, params, x > 0), np.ones(u))


def test_lone_user_takes_every_subcarrier():
    params = SystemParams(num_subcarriers=4)
    sc = manual_scenario(np.full((1, 4), 100 * UNIT), [[100 * UNIT]], [0], [200.0])
    rho0 = np.full((1, 4), 0.5)
    state = offloading_state(sc, params, rho0)
    res = solve_subcarrier_sca(subcarrier_data(sc, params, state), rho0)
    assert np.all(res.rho > 0.999)


def test_shared_subcarrier_stays_within_capacity():
    params = SystemParams(num_subcarriers=1)
    sc = manual_scenario(np.full((2, 1), 100 * UNIT), np.full((2, 1), 100 * UNIT), [0, 0],
                         [200.0, 300.0])
    rho0 = np.array([[0.4], [0.4]])
    state = offloading_state(sc, params, rho0)
    res = solve_subcarrier_sca(subcarrier_data(sc, params, state), rho0)
    assert res.rho.sum() <= 1 + 1e-9
    assert res.rho.sum() > 0.99


def test_sca_trace_nonincreasing():
    sc, params, state = small_setting(3, users=4, sbs=2, subcarriers=6)
    res = solve_subcarrier_sca(subcarrier_data(sc, params, state), state.rho, max_iter=8)
    assert np.all(np.diff(res.trace) <= 1e-12)


def test_subcarrier_rounding():
    cells = [np.array([0, 1])]
    out = round_subcarriers(np.array([[0.6, 0.0], [0.4, 0.0]]), cells, method="argmax")
    assert out.tolist() == [[1.0, 0.0], [0.0, 0.0]]
    rng = np.random.default_rng(0)
    for method in ("argmax", "quota"):
        for _ in range(20):
            rho = rng.uniform(0, 1, (5, 7))
            out = round_subcarriers(rho, [np.arange(3), np.arange(3, 5)], method=method)
            assert out[:3].sum(axis=0).max() <= 1 and out[3:].sum(axis=0).max() <= 1
            assert set(np.unique(out)) <= {0.0, 1.0}


def test_round_robin_order():
    sc, _, _ = small_setting(0, users=4, sbs=2, subcarriers=5)
    rho = round_robin(sc)
    for k in range(2):
        users = sc.users_of(k)
        for n in range(5):
            assert rho[users[n % len(users)], n] == 1


# -- capacity block -----------------------------------------------------------

def test_capacity_without_offloaders():
    sc, params, state = small_setting(0)
    state.x[:] = 0
    res = solve_capacity(sc, params, state, np.zeros(sc.num_users))
    assert np.all(res.f == 0)


def test_capacity_symmetric_users_split_equally():
    params = SystemParams(num_subcarriers=2)
    sc = manual_scenario(np.full((2, 2), UNIT), np.full((2, 1), UNIT), [0, 0], [200.0, 200.0])
    state = AllocationState(np.ones(2), np.eye(2), np.zeros(2), np.ones(2))
    rates = uplink_rates(sc, params, state.rho)
    res = solve_capacity(sc, params, state, rates, enforce=np.zeros(2, bool))
    assert res.f == pytest.approx([params.mec_capacity / 2] * 2, rel=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_capacity_beats_equal_split(seed):
    sc, params, state = small_setting(seed, users=8, sbs=2, subcarriers=8)
    rates = uplink_rates(sc, params, state.rho)
    res = solve_capacity(sc, params, state, rates, enforce=np.zeros(8, bool))
    cost, offset = capacity_terms(sc, params, state, rates)
    eq = equal_split(sc, params, state.x > 0)
    ok = np.isfinite(offset)
    assert (capacity_objective(cost[ok], offset[ok], res.f[ok])
            <= capacity_objective(cost[ok], offset[ok], eq[ok]) + 1e-12)
    for k in range(sc.num_sbs):
        assert res.f[sc.users_of(k)].sum() <= params.mec_capacity * (1 + 1e-12)


# -- offloading block ---------------------------------------------------------

def two_point_data(c_loc, c_off, a=300.0, y_lim=50.0, t_lim=10.0):
    one = np.ones(1)
    return OffloadProblemData(c_loc * one, c_off * one, a * one, t_lim * one, y_lim * one,
                              (100.0, 80.0, 0.6))


def test_fast_link_pulls_x_to_one():
    data = two_point_data(c_loc=1.0, c_off=1e-3)
    res = solve_offload_sca(data, np.array([0.5]), np.array([0.9]))
    assert res.x[0] > 0.99
    # enumeration: best offload branch beats local
    eta = np.linspace(data.eta_floor[0], 1, 2001)
    best_off = np.max(np.log(data.accuracy(eta) / (data.remote[0] * eta)))
    assert best_off > data.utilities(np.zeros(1), np.ones(1))[0]
    assert res.objective == pytest.approx(best_off, abs=1e-3)


def test_identity_compression_recovers_remote_delay():
    data = two_point_data(c_loc=1.0, c_off=0.01)
    assert data.delay(np.ones(1), np.ones(1))[0] == pytest.approx(0.01, rel=1e-12)
    res = solve_offload_sca(data, np.ones(1), np.ones(1), max_iter=0)
    assert res.eps[0] == 1.0


def test_unreachable_accuracy_pins_local():
    data = two_point_data(c_loc=0.01, c_off=1e-3, a=90.0, y_lim=95.0)
    assert data.eta_floor[0] > 1
    res = solve_offload_sca(data, np.array([0.5]), np.array([1.0]))
    assert res.pinned[0] and res.x[0] == 0
    x_hat, eps, flagged = round_offload(res.x, res.eta, data)
    assert x_hat[0] == 0 and eps[0] == 1 and flagged[0]


def test_rounding_examples():
    data = two_point_data(c_loc=1.0, c_off=1e-3)
    x_hat, eps, flagged = round_offload(np.array([0.9]), np.array([0.5]), data)
    assert x_hat[0] == 1 and eps[0] == pytest.approx(2.0) and not flagged[0]
    x_hat, eps, _ = round_offload(np.array([0.2]), np.array([0.5]), data)
    assert x_hat[0] == 0 and eps[0] == 1


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0.05, 1)), min_size=1, max_size=6))
def test_rounded_offload_is_binary(pairs):
    x = np.array([p[0] for p in pairs])
    eta = np.array([p[1] for p in pairs])
    n = len(pairs)
    one = np.ones(n)
    data = OffloadProblemData(0.05 * one, 0.01 * one, 300 * one, 0.1 * one, 80 * one,
                              (100.0, 80.0, 0.6))
    x_hat, eps, _ = round_offload(x, eta, data)
    assert set(np.unique(x_hat)) <= {0.0, 1.0}
    assert np.all(eps >= 1) and np.all(eps[x_hat == 0] == 1)


@pytest.mark.parametrize("seed", range(3))
def test_offload_sca_trace_nondecreasing(seed):
    sc, params, state = small_setting(seed, users=6, sbs=2, subcarriers=8)
    rates = uplink_rates(sc, params, state.rho)
    data = offload_data(sc, params, rates, state.f)
    res = solve_offload_sca(data, np.full(6, 0.5), np.ones(6))
    assert np.all(np.diff(res.trace) >= -1e-12)
