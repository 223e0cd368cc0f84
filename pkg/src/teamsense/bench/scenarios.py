"""Benchmark scenario construction.

Two families: scenario 1 is a homogeneous UGV team tracking as many
moving targets as robots in a small arena, used for computation and
communication measurements; scenario 2 is a mixed ground/air team with
costly mud and wind regions, used for the sensing-versus-energy
trade-off. Robot profiles follow the standard setup table for
differential-drive platforms with range-bearing sensors.

All randomness flows from one seed through a single generator, so a
(builder, seed) pair pins the instance exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..objective import PartitionMatroid
from ..trajgen import GenConfig, generate_candidates
from ..world import (
    ControlInput,
    CostField,
    Region,
    RobotSpec,
    RobotState,
    SensorProfile,
    WorldConfig,
    double_integrator_model,
    static_target_model,
)

TAU = 0.5
HALF_PI = math.pi / 2.0

# nu in {0, 8} m/s crossed with omega in {0, +-pi/2} rad/s
PRIMITIVES = tuple(
    ControlInput(nu, om) for nu in (0.0, 8.0) for om in (0.0, HALF_PI, -HALF_PI)
)

# the (8, 0) entry is absent from the published profile table; 1 for the
# UGV (between idle 0 and arcing 2) and 4 for the UAV (its arcing cost)
# complete the cross product
UGV_CTRL = {
    (0.0, 0.0): 0.0,
    (0.0, HALF_PI): 1.0,
    (0.0, -HALF_PI): 1.0,
    (8.0, 0.0): 1.0,
    (8.0, HALF_PI): 2.0,
    (8.0, -HALF_PI): 2.0,
}
UAV_CTRL = {
    (0.0, 0.0): 2.0,
    (0.0, HALF_PI): 2.0,
    (0.0, -HALF_PI): 2.0,
    (8.0, 0.0): 4.0,
    (8.0, HALF_PI): 4.0,
    (8.0, -HALF_PI): 4.0,
}
UGV_STATE = {"mud": 3.0}
UAV_STATE = {"wind": 3.0}

SIGMA_RANGE = 0.1
SIGMA_BEARING_DEG = 5.0

TARGET_TOP_SPEED = 2.0

# frontier cap for the primitive tree; keeps builds fast at horizon 10+
# while oversampling the kept candidate count several times over
BEAM_WIDTH = 256


@dataclass(frozen=True)
class Instance:
    """A fully built problem: world plus the shared candidate sets."""

    world: WorldConfig
    matroid: PartitionMatroid
    label: str


def _ugv_sensor(range_m: float) -> SensorProfile:
    return SensorProfile(
        fov_deg=160.0,
        range_m=range_m,
        sigma_range_max=SIGMA_RANGE,
        sigma_bearing_max_deg=SIGMA_BEARING_DEG,
    )


def _uav_sensor(range_m: float | None) -> SensorProfile:
    return SensorProfile(
        fov_deg=360.0,
        range_m=range_m,
        sigma_range_max=SIGMA_RANGE,
        sigma_bearing_max_deg=SIGMA_BEARING_DEG,
    )


def scenario1_arena_side(n_robots: int) -> float:
    """Square side in meters: 40 at 2 robots growing to 60 at 10."""
    return 40.0 + 20.0 * (n_robots - 2) / 8.0


def build_scenario1(
    n_robots: int,
    seed: int,
    horizon: int = 10,
    max_candidates: int = 64,
    process_noise: float = 1.0,
    sigma0_pos: float = 16.0,
    sigma0_vel: float = 1.0,
    downsample: float = 1.0,
) -> Instance:
    """Moving-target tracking with n UGVs and n double-integrator targets.

    Robot i carries energy weight i (1-based), so later robots are
    increasingly reluctant to move. State-dependent costs are off here;
    the arena has no regions.
    """
    if n_robots < 2:
        raise ValueError("scenario 1 needs at least 2 robots")
    rng = np.random.default_rng(seed)
    side = scenario1_arena_side(n_robots)
    n_targets = n_robots
    model = double_integrator_model(TAU, process_noise, n_targets)
    means = np.zeros((n_targets, 4))
    means[:, :2] = rng.uniform(0.0, side, (n_targets, 2))
    vel = rng.normal(0.0, 1.0, (n_targets, 2))
    speed = np.linalg.norm(vel, axis=1, keepdims=True)
    over = speed > TARGET_TOP_SPEED
    vel = np.where(over, vel * (TARGET_TOP_SPEED / np.maximum(speed, 1e-12)), vel)
    means[:, 2:] = vel
    sigma0 = np.array(
        [np.diag([sigma0_pos, sigma0_pos, sigma0_vel, sigma0_vel])] * n_targets
    )
    robots = tuple(
        RobotSpec(
            robot_id=i,
            robot_class="ugv",
            state0=RobotState(
                float(rng.uniform(0.0, side)),
                float(rng.uniform(0.0, side)),
                float(rng.uniform(-math.pi, math.pi)),
            ),
            sensor=_ugv_sensor(6.0),
            ctrl_costs=UGV_CTRL,
            state_costs={},
            weight=float(i + 1),
        )
        for i in range(n_robots)
    )
    world = WorldConfig(
        model=model,
        target_means0=means,
        sigma0_blocks=sigma0,
        robots=robots,
        cost_field=CostField(()),
        horizon=horizon,
        tau=TAU,
    )
    cfg = GenConfig(
        primitives=PRIMITIVES,
        max_candidates=max_candidates,
        beam_width=BEAM_WIDTH,
        downsample=downsample,
    )
    partitions = {r.robot_id: generate_candidates(r, cfg, world) for r in robots}
    return Instance(world, PartitionMatroid(partitions), f"s1-n{n_robots}-seed{seed}")


# mud covers the right part of the arena and wind the lower-left block,
# overlapping in the middle; the top-left stays clear for spawning
MUD_REGION = Region(40.0, 0.0, 100.0, 100.0, "mud")
WIND_REGION = Region(0.0, 0.0, 70.0, 60.0, "wind")
CLEAR_X = (0.0, 40.0)
CLEAR_Y = (60.0, 100.0)


def build_scenario2(
    r_weight: float,
    seed: int,
    horizon: int = 20,
    max_candidates: int = 64,
    hold_steps: int = 4,
    sigma0_pos: float = 16.0,
    downsample: float = 1.0,
) -> Instance:
    """Two UGVs and one UAV over mud and wind, ten static targets.

    All robots share the energy weight r; sweeping it trades sensing
    against energy. Robots spawn in the clear corner, targets can land
    anywhere, including inside the costly regions.
    """
    if r_weight < 0:
        raise ValueError("energy weight must be nonnegative")
    rng = np.random.default_rng(seed)
    n_targets = 10
    model = static_target_model(n_targets)
    means = rng.uniform(0.0, 100.0, (n_targets, 2))
    sigma0 = np.array([np.diag([sigma0_pos, sigma0_pos])] * n_targets)

    def clear_spawn() -> RobotState:
        return RobotState(
            float(rng.uniform(*CLEAR_X)),
            float(rng.uniform(*CLEAR_Y)),
            float(rng.uniform(-math.pi, math.pi)),
        )

    robots = (
        RobotSpec(0, "ugv", clear_spawn(), _ugv_sensor(15.0), UGV_CTRL, UGV_STATE, r_weight),
        RobotSpec(1, "ugv", clear_spawn(), _ugv_sensor(15.0), UGV_CTRL, UGV_STATE, r_weight),
        RobotSpec(2, "uav", clear_spawn(), _uav_sensor(20.0), UAV_CTRL, UAV_STATE, r_weight),
    )
    world = WorldConfig(
        model=model,
        target_means0=means,
        sigma0_blocks=sigma0,
        robots=robots,
        cost_field=CostField((MUD_REGION, WIND_REGION)),
        horizon=horizon,
        tau=TAU,
    )
    cfg = GenConfig(
        primitives=PRIMITIVES,
        max_candidates=max_candidates,
        beam_width=BEAM_WIDTH,
        hold_steps=hold_steps,
        downsample=downsample,
    )
    partitions = {r.robot_id: generate_candidates(r, cfg, world) for r in robots}
    return Instance(world, PartitionMatroid(partitions), f"s2-r{r_weight:g}-seed{seed}")
