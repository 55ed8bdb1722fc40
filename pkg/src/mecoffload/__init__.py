"""Joint offloading, compression and resource allocation for multi-cell MEC.

Typical use::

    from mecoffload import RunConfig, make_scenario, run_algorithm1
    cfg = RunConfig()
    scenario = make_scenario(cfg.geometry, seed=0, task_table=cfg.tasks)
    result = run_algorithm1(scenario, cfg.params, cfg.outer)
"""
from .baselines import BaselineKind, BruteForceGrid, brute_force, run_baseline, run_scheme
from .config import GeometryConfig, OuterConfig, RunConfig, SystemParams, TaskTypeSpec
from .model import AllocationState, check_feasible, system_utility
from .orchestrator import RunResult, Scheme, run_algorithm1
from .scenario import Scenario, make_scenario

__all__ = [
    "AllocationState", "BaselineKind", "BruteForceGrid", "GeometryConfig", "OuterConfig",
    "RunConfig", "RunResult", "Scenario", "Scheme", "SystemParams", "TaskTypeSpec",
    "brute_force", "check_feasible", "make_scenario", "run_algorithm1", "run_baseline",
    "run_scheme", "system_utility",
]
