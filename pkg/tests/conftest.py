import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mecoffload.config import GeometryConfig, SystemParams, TaskTypeSpec
from mecoffload.scenario import ChannelRealization, Scenario, TaskAssignment

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_VERDICTS = []


def manual_scenario(gain, cross_gain, association, raw_data, task_type=None, table=None,
                    distance=None):
    """Scenario with hand-picked channel gains and tasks (positions are placeholders)."""
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    cross = np.atleast_2d(np.asarray(cross_gain, dtype=float))
    assoc = np.asarray(association, dtype=int)
    u_count, k_count = cross.shape
    table = tuple(table or (TaskTypeSpec(1.0, 50.0, 1),))
    task_type = np.zeros(u_count, dtype=int) if task_type is None else np.asarray(task_type)
    geometry = GeometryConfig(num_sbs=k_count, num_users=u_count)
    dist = np.full((u_count, k_count), 50.0) if distance is None else distance
    return Scenario(geometry, 0, np.zeros((k_count, 2)), np.zeros((u_count, 2)), assoc,
                    ChannelRealization(gain, cross, dist),
                    TaskAssignment(task_type, table, np.asarray(raw_data, dtype=float)))


@pytest.fixture
def unit_params():
    """Defaults with P*g/sigma^2 = 1 for a unit gain of 1e-12."""
    return SystemParams()


@pytest.fixture(scope="session")
def verdicts():
    return _VERDICTS


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
