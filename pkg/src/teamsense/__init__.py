"""Trajectory planning for heterogeneous sensing teams.

Robots pick one candidate trajectory each to maximize the information
their sensors gather about moving targets, net of weighted motion
energy. The objective is submodular but not monotone, so the solvers
here are local search (centralized and distributed over a simulated
bus) with a constant-factor guarantee, plus a coordinate descent
baseline and an exhaustive reference for small instances.
"""

from .filtering import BeliefCov, TargetModel, kf_predict, kf_update_info, mutual_information
from .objective import (
    CountingOracle,
    MatroidViolation,
    ObjectiveEvaluator,
    PartitionMatroid,
    SolutionSet,
    Trajectory,
    build_trajectory,
    make_oracle,
    offset_lambda,
)
from .trajgen import GenConfig, downsample_best, generate_candidates
from .world import (
    ControlInput,
    CostField,
    Region,
    RobotSpec,
    RobotState,
    SensorProfile,
    WorldConfig,
    rollout,
    step_dynamics,
)

__all__ = [
    "BeliefCov",
    "ControlInput",
    "CostField",
    "CountingOracle",
    "GenConfig",
    "MatroidViolation",
    "ObjectiveEvaluator",
    "PartitionMatroid",
    "Region",
    "RobotSpec",
    "RobotState",
    "SensorProfile",
    "SolutionSet",
    "TargetModel",
    "Trajectory",
    "WorldConfig",
    "build_trajectory",
    "downsample_best",
    "generate_candidates",
    "kf_predict",
    "kf_update_info",
    "make_oracle",
    "mutual_information",
    "offset_lambda",
    "rollout",
    "step_dynamics",
]

__version__ = "0.1.0"
