"""Benchmark harness: scenario builders, sweep runner and the CLI."""

from .instances import instance_oracle, random_instance
from .runner import (
    CSV_COLUMNS,
    DEFAULT_SOLVERS,
    ScenarioConfig,
    SolverSpec,
    TrialRecord,
    load_config,
    run_experiment,
    trajectory_set_hash,
)
from .scenarios import (
    Instance,
    build_scenario1,
    build_scenario2,
    scenario1_arena_side,
)

__all__ = [
    "CSV_COLUMNS",
    "DEFAULT_SOLVERS",
    "Instance",
    "ScenarioConfig",
    "SolverSpec",
    "TrialRecord",
    "build_scenario1",
    "build_scenario2",
    "instance_oracle",
    "load_config",
    "random_instance",
    "run_experiment",
    "scenario1_arena_side",
    "trajectory_set_hash",
]
