"""Robots, sensors, terrain costs and target models.

A robot is a unicycle driven by a small set of motion primitives held
for a fixed dwell time. Sensing is range and bearing toward each target,
gated by field of view and range, with noise that grows linearly with
distance. Terrain regions (mud for ground robots, wind for aerial ones)
add per-step state costs on top of per-primitive control costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .filtering import TargetModel

UGV = "UGV"
UAV = "UAV"

# distances below this are clamped before dividing, to keep bearing
# Jacobians finite when a robot sits on top of a target
MIN_SENSING_DISTANCE = 1e-6

TWO_PI = 2.0 * math.pi


class RobotState(NamedTuple):
    x: float
    y: float
    theta: float


class ControlInput(NamedTuple):
    nu: float  # forward speed, m/s
    omega: float  # turn rate, rad/s


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - theta) % TWO_PI


def step_dynamics(state: RobotState, u: ControlInput, tau: float) -> RobotState:
    """Integrate the unicycle exactly over one dwell interval.

    Zero turn rate advances in a straight line by nu * tau; otherwise the
    robot follows a circular arc of radius nu / omega. Both cases come out
    of one numerically stable closed form built on sinc, so the arc
    converges to the straight line as omega approaches zero.
    """
    half = 0.5 * u.omega * tau
    # np.sinc(x) = sin(pi x) / (pi x), exact at zero
    chord = u.nu * tau * float(np.sinc(half / math.pi))
    mid = state.theta + half
    return RobotState(
        state.x + chord * math.cos(mid),
        state.y + chord * math.sin(mid),
        wrap_angle(state.theta + u.omega * tau),
    )


def rollout(state0: RobotState, controls: Sequence[ControlInput], tau: float) -> tuple[RobotState, ...]:
    """Apply the whole control sequence, returning states after each step."""
    states = []
    s = state0
    for u in controls:
        s = step_dynamics(s, u, tau)
        states.append(s)
    return tuple(states)


@dataclass(frozen=True)
class SensorProfile:
    """Range-bearing sensor with linear noise growth.

    range_m of None disables range gating entirely; the noise then stays
    saturated at its maximum since there is no range limit to scale by.
    fov_deg of 360 sees in every direction. A target sitting exactly on
    the field-of-view or range boundary counts as visible.
    """

    fov_deg: float
    range_m: float | None
    sigma_range_max: float
    sigma_bearing_max_deg: float
    noise_floor_frac: float = 0.01

    def sigmas_at(self, dist: float) -> tuple[float, float]:
        """Range and bearing standard deviations at the given distance."""
        s_r_max = self.sigma_range_max
        s_b_max = math.radians(self.sigma_bearing_max_deg)
        if self.range_m is None:
            return s_r_max, s_b_max
        frac = min(dist / self.range_m, 1.0)
        floor = self.noise_floor_frac
        s_r = s_r_max * (floor + (1.0 - floor) * frac)
        s_b = s_b_max * (floor + (1.0 - floor) * frac)
        return s_r, s_b


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle with a terrain kind, boundary inclusive."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    kind: str  # "mud" or "wind"

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class CostField:
    """The terrain regions that generate state costs."""

    regions: tuple[Region, ...] = ()

    def kinds_at(self, x: float, y: float) -> tuple[str, ...]:
        return tuple(r.kind for r in self.regions if r.contains(x, y))


@dataclass(frozen=True)
class RobotSpec:
    """One robot: identity, class, start pose, sensor and cost tables.

    ctrl_costs maps each motion primitive to its per-step control cost;
    state_costs maps terrain kinds this class is vulnerable to (mud for
    ground, wind for aerial) to their per-step cost. weight scales the
    whole energy term of this robot in the team objective.
    """

    robot_id: int
    robot_class: str
    state0: RobotState
    sensor: SensorProfile
    ctrl_costs: Mapping[ControlInput, float]
    state_costs: Mapping[str, float]
    weight: float

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError("robot weight must be nonnegative")

    def max_step_cost(self) -> float:
        """Largest possible per-step cost for this robot."""
        c = max(self.ctrl_costs.values()) if self.ctrl_costs else 0.0
        s = max(self.state_costs.values()) if self.state_costs else 0.0
        return c + s


def control_cost(u: ControlInput, spec: RobotSpec) -> float:
    if u not in spec.ctrl_costs:
        raise KeyError(f"robot {spec.robot_id} has no cost entry for primitive {u}")
    return spec.ctrl_costs[u]


def state_cost(state: RobotState, spec: RobotSpec, costs: CostField) -> float:
    """Per-step terrain cost at the given pose.

    Overlapping regions of a kind the robot is vulnerable to contribute
    the maximum matching cost, not the sum.
    """
    best = 0.0
    for kind in costs.kinds_at(state.x, state.y):
        if kind in spec.state_costs:
            best = max(best, spec.state_costs[kind])
    return best


def trajectory_energy(
    spec: RobotSpec,
    controls: Sequence[ControlInput],
    states: Sequence[RobotState],
    costs: CostField,
) -> float:
    """Unweighted energy of one trajectory.

    Control costs cover every applied primitive. State costs cover the
    poses occupied while applying them: the start pose and every state
    except the final one.
    """
    total = 0.0
    poses = (spec.state0,) + tuple(states[:-1])
    for u, x in zip(controls, poses):
        total += control_cost(u, spec) + state_cost(x, spec, costs)
    return total


def double_integrator_model(tau: float, q: float, n_targets: int = 1) -> TargetModel:
    """Constant-velocity targets driven by white noise acceleration.

    Per-target state is (px, py, vx, vy). The process noise is the exact
    discretization of continuous white noise acceleration with intensity
    q over one dwell interval.
    """
    a = np.array(
        [
            [1.0, 0.0, tau, 0.0],
            [0.0, 1.0, 0.0, tau],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    t3, t2 = tau**3 / 3.0, tau**2 / 2.0
    w = q * np.array(
        [
            [t3, 0.0, t2, 0.0],
            [0.0, t3, 0.0, t2],
            [t2, 0.0, tau, 0.0],
            [0.0, t2, 0.0, tau],
        ]
    )
    return TargetModel(
        np.repeat(a[None, :, :], n_targets, axis=0),
        np.repeat(w[None, :, :], n_targets, axis=0),
    )


def static_target_model(n_targets: int, eps: float = 1e-9) -> TargetModel:
    """Stationary targets: position-only state, tiny noise keeps covariances PD."""
    eye = np.eye(2)
    return TargetModel(
        np.repeat(eye[None, :, :], n_targets, axis=0),
        np.repeat((eps * eye)[None, :, :], n_targets, axis=0),
    )


@dataclass(frozen=True)
class WorldConfig:
    """Everything the objective needs about one problem instance."""

    model: TargetModel
    target_means0: np.ndarray  # (k, d) initial target estimates
    sigma0_blocks: np.ndarray  # (k, d, d) prior covariance blocks
    robots: tuple[RobotSpec, ...]
    cost_field: CostField
    horizon: int
    tau: float
    _mean_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        means = np.asarray(self.target_means0, dtype=np.float64)
        sig = np.asarray(self.sigma0_blocks, dtype=np.float64)
        k, d = self.model.n_blocks, self.model.block_dim
        if means.shape != (k, d):
            raise ValueError(f"target means shape {means.shape}, expected {(k, d)}")
        if sig.shape != (k, d, d):
            raise ValueError(f"prior shape {sig.shape}, expected {(k, d, d)}")
        ids = [r.robot_id for r in self.robots]
        if len(set(ids)) != len(ids):
            raise ValueError("robot ids must be unique")
        object.__setattr__(self, "target_means0", means)
        object.__setattr__(self, "sigma0_blocks", sig)
        object.__setattr__(self, "robots", tuple(self.robots))

    def spec_of(self, robot_id: int) -> RobotSpec:
        for r in self.robots:
            if r.robot_id == robot_id:
                return r
        raise KeyError(f"unknown robot id {robot_id}")

    def target_positions(self) -> np.ndarray:
        """Predicted target positions for t = 1..T, shape (T, k, 2).

        The estimate evolves under the target model alone, since no
        measurement values exist at planning time.
        """
        key = "positions"
        if key not in self._mean_cache:
            k, d = self.model.n_blocks, self.model.block_dim
            out = np.empty((self.horizon, k, 2))
            mean = self.target_means0.copy()
            for t in range(self.horizon):
                a = self.model.a_at(t)
                mean = np.einsum("kij,kj->ki", a, mean)
                out[t] = mean[:, :2]
            self._mean_cache[key] = out
        return self._mean_cache[key]


def observation_info(h: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Information contributed by one linearized observation: H^T V^-1 H."""
    return h.T @ np.linalg.solve(v, h)


def sensor_info_matrix(
    state: RobotState,
    target_pos: np.ndarray,
    profile: SensorProfile,
    block_dim: int = 2,
) -> np.ndarray:
    """Information matrix for one robot pose observing one target.

    Returns a (block_dim, block_dim) PSD matrix; the range and bearing
    Jacobian only touches the two position components, so velocity rows
    and columns stay zero. Outside the field of view or range the target
    is simply not observed and the matrix is exactly zero.
    """
    dx = float(target_pos[0]) - state.x
    dy = float(target_pos[1]) - state.y
    dist = math.hypot(dx, dy)
    if profile.range_m is not None and dist > profile.range_m:
        return np.zeros((block_dim, block_dim))
    bearing = wrap_angle(math.atan2(dy, dx) - state.theta)
    if abs(bearing) > math.radians(profile.fov_deg) / 2.0:
        return np.zeros((block_dim, block_dim))
    d_eff = max(dist, MIN_SENSING_DISTANCE)
    s_r, s_b = profile.sigmas_at(dist)
    h = np.zeros((2, block_dim))
    h[0, 0] = dx / d_eff
    h[0, 1] = dy / d_eff
    h[1, 0] = -dy / d_eff**2
    h[1, 1] = dx / d_eff**2
    v = np.diag([s_r**2, s_b**2])
    out = np.zeros((block_dim, block_dim))
    out[:2, :2] = observation_info(h, v)[:2, :2]
    return out


def info_stack(spec: RobotSpec, states: Sequence[RobotState], world: WorldConfig) -> np.ndarray:
    """Per-step information stack of one trajectory, shape (T, k, d, d)."""
    return info_stack_batch(spec, [tuple(states)], world)[0]


def info_stack_batch(spec: RobotSpec, state_paths, world: WorldConfig) -> np.ndarray:
    """Vectorized information stacks for many candidate trajectories.

    state_paths: (C, T) array-like of RobotState. Returns (C, T, k, d, d).
    Candidate generation scores thousands of rollouts, so this runs the
    whole sensor model as batched array arithmetic.
    """
    paths = np.asarray(
        [[(s.x, s.y, s.theta) for s in row] for row in state_paths], dtype=np.float64
    )
    n_cand, horizon = paths.shape[0], paths.shape[1]
    k, d = world.model.n_blocks, world.model.block_dim
    if horizon != world.horizon:
        raise ValueError(f"paths cover {horizon} steps, world horizon is {world.horizon}")
    targets = world.target_positions()  # (T, k, 2)

    px = paths[:, :, 0][:, :, None]  # (C, T, 1)
    py = paths[:, :, 1][:, :, None]
    th = paths[:, :, 2][:, :, None]
    dx = targets[None, :, :, 0] - px  # (C, T, k)
    dy = targets[None, :, :, 1] - py
    dist = np.hypot(dx, dy)

    visible = np.ones(dist.shape, dtype=bool)
    prof = spec.sensor
    if prof.range_m is not None:
        visible &= dist <= prof.range_m
    rel = np.arctan2(dy, dx) - th
    rel = np.pi - np.mod(np.pi - rel, TWO_PI)
    visible &= np.abs(rel) <= math.radians(prof.fov_deg) / 2.0

    d_eff = np.maximum(dist, MIN_SENSING_DISTANCE)
    s_r_max = prof.sigma_range_max
    s_b_max = math.radians(prof.sigma_bearing_max_deg)
    if prof.range_m is None:
        s_r = np.full(dist.shape, s_r_max)
        s_b = np.full(dist.shape, s_b_max)
    else:
        frac = prof.noise_floor_frac + (1.0 - prof.noise_floor_frac) * np.minimum(
            dist / prof.range_m, 1.0
        )
        s_r = s_r_max * frac
        s_b = s_b_max * frac

    # M = (1/s_r^2) u u^T + (1/s_b^2) v v^T on the position block, where
    # u is the unit line of sight and v its perpendicular over distance
    ux, uy = dx / d_eff, dy / d_eff
    vx, vy = -dy / d_eff**2, dx / d_eff**2
    wr = visible / s_r**2
    wb = visible / s_b**2
    m = np.zeros((n_cand, horizon, k, d, d))
    m[..., 0, 0] = wr * ux * ux + wb * vx * vx
    m[..., 0, 1] = wr * ux * uy + wb * vx * vy
    m[..., 1, 0] = m[..., 0, 1]
    m[..., 1, 1] = wr * uy * uy + wb * vy * vy
    return m
