import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mecoffload.config import GeometryConfig, default_task_table
from mecoffload.scenario import (Scenario, ScenarioError, assign_tasks, expected_channel_gain,
                                 los_probability, make_scenario, path_loss_db)


def test_los_probability_values():
    assert los_probability(10.0) == pytest.approx(1.0, rel=1e-12)
    assert los_probability(18.0) == pytest.approx(1.0, rel=1e-12)
    assert los_probability(36.0) == pytest.approx(0.5 * (1 - math.exp(-1)) + math.exp(-1), rel=1e-12)
    assert los_probability(36.0) == pytest.approx(0.68394, abs=5e-6)


def test_path_loss_values():
    assert path_loss_db(50.0, 3.5, True) == pytest.approx(
        22 * math.log10(50) + 28 + 20 * math.log10(3.5), rel=1e-12)
    assert path_loss_db(50.0, 3.5, True) == pytest.approx(76.258, abs=1e-3)  # printed value is truncated
    assert path_loss_db(50.0, 3.5, False) == pytest.approx(99.198, abs=5e-4)
    assert path_loss_db(1.0, 1.0, True) == pytest.approx(28.0, rel=1e-12)


def test_gain_close_range_is_pure_los():
    for d in (5.0, 12.0, 18.0):
        assert expected_channel_gain(d, 3.5) == pytest.approx(
            10 ** (-path_loss_db(d, 3.5, True) / 10), rel=1e-12)


def test_gain_mixture_at_50m():
    p = 18 / 50 * (1 - math.exp(-50 / 36)) + math.exp(-50 / 36)
    loss = p * 10 ** (7.6258e0) + (1 - p) * 10 ** (9.9198e0)
    exact_loss = (p * 10 ** (path_loss_db(50, 3.5, True) / 10)
                  + (1 - p) * 10 ** (path_loss_db(50, 3.5, False) / 10))
    assert expected_channel_gain(50.0, 3.5) == pytest.approx(1 / exact_loss, rel=1e-12)
    assert 1 / loss == pytest.approx(1 / exact_loss, rel=1e-3)


@given(st.floats(1.0, 500.0), st.floats(1.0, 500.0))
def test_gain_decreases_with_distance(d1, d2):
    lo, hi = sorted((d1, d2))
    if hi - lo > 1e-6:
        assert expected_channel_gain(hi, 3.5) < expected_channel_gain(lo, 3.5)


@given(st.floats(0.01, 1e4))
def test_los_probability_is_a_probability(d):
    assert 0.0 <= los_probability(d) <= 1.0


def test_nonpositive_distance_rejected():
    with pytest.raises(ValueError):
        los_probability(0.0)
    with pytest.raises(ValueError):
        path_loss_db(-1.0, 3.5, True)


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_default_geometry(seed):
    sc = make_scenario(seed=seed)
    assert sc.num_sbs == 4 and sc.num_users == 30
    assert len({tuple(p) for p in sc.sbs_positions}) == 4
    for pts in (sc.sbs_positions, sc.user_positions):
        assert np.all((pts >= 0) & (pts <= 200))
    assert sum(len(sc.users_of(k)) for k in range(4)) == 30
    assert np.all(sc.channel.distance.min(axis=1) >= 10.0)


def test_same_seed_same_scenario(tmp_path):
    a, b = make_scenario(seed=3), make_scenario(seed=3)
    assert a.dumps() == b.dumps()
    a.save(tmp_path / "s.json")
    assert Scenario.load(tmp_path / "s.json").dumps() == a.dumps()
    assert make_scenario(seed=4).dumps() != a.dumps()


def test_task_shares_approach_uniform():
    tasks = assign_tasks(30000, default_task_table(), seed=0)
    shares = np.bincount(tasks.task_type, minlength=3) / 30000
    assert np.allclose(shares, 1 / 3, atol=0.02)
    z = tasks.request_indicator
    assert np.all(z.sum(axis=1) == 1)


def test_impossible_exclusion_rejected():
    with pytest.raises(ScenarioError):
        make_scenario(GeometryConfig(area_side=20.0, min_user_sbs_distance=10.0))
