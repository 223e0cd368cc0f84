"""Random small problem instances for fuzzing and verification.

These are deliberately tiny (a few robots, a handful of candidates
each) so that brute force stays cheap and property suites can run
hundreds of instances. Sensor profiles, costs, priors and placements
are all randomized; a fraction of instances get degenerate features on
purpose: zero-weight robots, empty partitions, sensors that never see
anything.
"""

from __future__ import annotations

import math

import numpy as np

from ..objective import ObjectiveEvaluator, PartitionMatroid
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

ARENA = 14.0


def random_instance(
    seed: int,
    n_robots: int | None = None,
    max_candidates: int = 3,
    horizon: int | None = None,
) -> tuple[WorldConfig, PartitionMatroid]:
    """One random small instance; same seed, same instance."""
    rng = np.random.default_rng(seed)
    n = int(n_robots if n_robots is not None else rng.integers(1, 4))
    horizon_t = int(horizon if horizon is not None else rng.integers(2, 4))
    tau = 0.5
    n_targets = int(rng.integers(1, 3))

    if rng.random() < 0.5:
        model = double_integrator_model(tau, float(rng.uniform(0.05, 0.3)), n_targets)
        means = np.zeros((n_targets, 4))
        means[:, :2] = rng.uniform(0.0, ARENA, (n_targets, 2))
        means[:, 2:] = rng.uniform(-1.5, 1.5, (n_targets, 2))
        sigma0 = np.array(
            [np.diag(np.r_[rng.uniform(1.0, 6.0, 2), rng.uniform(0.3, 1.5, 2)])
             for _ in range(n_targets)]
        )
    else:
        model = static_target_model(n_targets)
        means = rng.uniform(0.0, ARENA, (n_targets, 2))
        sigma0 = np.array([np.diag(rng.uniform(1.0, 6.0, 2)) for _ in range(n_targets)])

    regions = []
    for kind in ("mud", "wind"):
        if rng.random() < 0.4:
            x0, y0 = rng.uniform(0.0, ARENA, 2)
            regions.append(Region(x0, y0, x0 + rng.uniform(2, 8), y0 + rng.uniform(2, 8), kind))

    nu = float(rng.uniform(2.0, 8.0))
    omega = float(rng.choice([math.pi / 2, math.pi / 4]))
    primitives = tuple(
        ControlInput(v, w) for v in (0.0, nu) for w in (0.0, omega, -omega)
    )

    robots = []
    for i in range(n):
        fov = float(rng.uniform(90.0, 360.0))
        sensing_range = None if rng.random() < 0.1 else float(rng.uniform(4.0, 10.0))
        sensor = SensorProfile(
            fov_deg=fov,
            range_m=sensing_range,
            sigma_range_max=float(rng.uniform(0.05, 0.3)),
            sigma_bearing_max_deg=float(rng.uniform(2.0, 10.0)),
        )
        ctrl_costs = {(u.nu, u.omega): float(rng.uniform(0.0, 3.0)) for u in primitives}
        state_costs = {"mud": float(rng.uniform(0.0, 2.0)), "wind": float(rng.uniform(0.0, 2.0))}
        weight = 0.0 if rng.random() < 0.2 else float(rng.uniform(0.1, 2.0))
        robots.append(
            RobotSpec(
                robot_id=i,
                robot_class="ugv" if rng.random() < 0.5 else "uav",
                state0=RobotState(*rng.uniform(0.0, ARENA, 2), float(rng.uniform(-math.pi, math.pi))),
                sensor=sensor,
                ctrl_costs=ctrl_costs,
                state_costs=state_costs,
                weight=weight,
            )
        )

    world = WorldConfig(
        model=model,
        target_means0=means,
        sigma0_blocks=sigma0,
        robots=tuple(robots),
        cost_field=CostField(tuple(regions)),
        horizon=horizon_t,
        tau=tau,
    )
    partitions = {}
    for spec in world.robots:
        cap = 0 if rng.random() < 0.1 else int(rng.integers(1, max_candidates + 1))
        cfg = GenConfig(primitives=primitives, max_candidates=cap,
                        grid_xy=0.4, grid_theta_deg=30.0)
        partitions[spec.robot_id] = generate_candidates(spec, cfg, world)
    return world, PartitionMatroid(partitions)


def instance_oracle(world: WorldConfig, matroid: PartitionMatroid):
    """Fresh counting oracle for an instance; convenience for test loops."""
    from ..objective import make_oracle

    return make_oracle(ObjectiveEvaluator(world, matroid))
