"""Team objective: information gathered minus weighted energy spent.

The ground set is a flat list of candidate trajectories, partitioned by
robot, and a feasible solution assigns at most one trajectory per robot.
The solvers only ever talk to a set-function oracle g(S) which offsets
the objective by the worst-case total energy, keeping it nonnegative
over all feasible sets. Trajectory ids are positional: robot-major, and
within one robot ordered by descending standalone score, so ascending id
order doubles as the lazy-evaluation order.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import fastmi
from .filtering import mi_from_info_stacks
from .world import RobotSpec, WorldConfig, info_stack_batch, rollout, trajectory_energy


class MatroidViolation(ValueError):
    """An operation tried to give one robot two trajectories."""


@dataclass(frozen=True)
class Trajectory:
    """One candidate plan for one robot, with its cached scores.

    states excludes the start pose: states[t-1] is the pose at step t.
    energy is the robot's unweighted cost of flying this trajectory;
    standalone_score is the team objective of the singleton {this}.
    info_stack caches the per-step information matrices, (T, k, d, d).
    """

    robot_id: int
    controls: tuple
    states: tuple
    energy: float
    standalone_score: float
    info_stack: np.ndarray


def build_trajectory(spec: RobotSpec, controls: Sequence, world: WorldConfig) -> Trajectory:
    """Roll out a control sequence and attach every cached quantity."""
    states = rollout(spec.state0, controls, world.tau)
    return _finish_trajectories(spec, [tuple(controls)], [states], world)[0]


def _finish_trajectories(
    spec: RobotSpec,
    control_rows: Sequence[tuple],
    state_rows: Sequence[tuple],
    world: WorldConfig,
) -> list[Trajectory]:
    """Batch-score rollouts into Trajectory records."""
    stacks = info_stack_batch(spec, state_rows, world)
    model = world.model
    if fastmi.NUMBA_AVAILABLE:
        mis = fastmi.mi_batch(model.a_blocks, model.w_blocks, world.sigma0_blocks, stacks)
    else:
        mis = np.array(
            [
                mi_from_info_stacks(model.a_blocks, model.w_blocks, world.sigma0_blocks, stacks[c])
                for c in range(stacks.shape[0])
            ]
        )
    out = []
    for c, (controls, states) in enumerate(zip(control_rows, state_rows)):
        energy = trajectory_energy(spec, controls, states, world.cost_field)
        score = float(mis[c]) - spec.weight * energy
        out.append(
            Trajectory(
                robot_id=spec.robot_id,
                controls=tuple(controls),
                states=tuple(states),
                energy=energy,
                standalone_score=score,
                info_stack=np.ascontiguousarray(stacks[c]),
            )
        )
    return out


class PartitionMatroid:
    """Ground set of trajectories partitioned by robot, ids positional.

    Construction validates that every trajectory's robot_id matches its
    partition and that each partition arrives sorted by standalone score
    descending, which the lazy search order relies on.
    """

    def __init__(self, partitions: Mapping[int, Sequence[Trajectory]]):
        trajs: list[Trajectory] = []
        ranges: dict[int, range] = {}
        for robot_id in sorted(partitions):
            part = list(partitions[robot_id])
            for traj in part:
                if traj.robot_id != robot_id:
                    raise ValueError(
                        f"trajectory for robot {traj.robot_id} filed under robot {robot_id}"
                    )
            scores = [t.standalone_score for t in part]
            if any(a < b for a, b in zip(scores, scores[1:])):
                raise ValueError(f"partition of robot {robot_id} not sorted by standalone score")
            start = len(trajs)
            trajs.extend(part)
            ranges[robot_id] = range(start, len(trajs))
        self.trajectories: tuple[Trajectory, ...] = tuple(trajs)
        self._ranges = ranges
        self._robot_of = np.empty(len(trajs), dtype=np.int64)
        for robot_id, rng in ranges.items():
            self._robot_of[rng.start : rng.stop] = robot_id

    @property
    def size(self) -> int:
        return len(self.trajectories)

    @property
    def robot_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self._ranges))

    def ids_of_robot(self, robot_id: int) -> tuple[int, ...]:
        return tuple(self._ranges[robot_id])

    def robot_of(self, traj_id: int) -> int:
        return int(self._robot_of[traj_id])

    def traj(self, traj_id: int) -> Trajectory:
        return self.trajectories[traj_id]

    def standalone(self, traj_id: int) -> float:
        return self.trajectories[traj_id].standalone_score

    def empty_solution(self) -> "SolutionSet":
        return SolutionSet(self, frozenset())

    def solution(self, ids: Iterable[int]) -> "SolutionSet":
        return SolutionSet(self, frozenset(ids))


class SolutionSet:
    """Immutable feasible set: at most one trajectory per robot."""

    __slots__ = ("matroid", "_ids", "_by_robot", "_key")

    def __init__(self, matroid: PartitionMatroid, ids: frozenset[int]):
        by_robot: dict[int, int] = {}
        for traj_id in ids:
            robot = matroid.robot_of(traj_id)
            if robot in by_robot:
                raise MatroidViolation(
                    f"robot {robot} holds both trajectory {by_robot[robot]} and {traj_id}"
                )
            by_robot[robot] = traj_id
        self.matroid = matroid
        self._ids = ids
        self._by_robot = by_robot
        self._key = tuple(sorted(ids))

    @property
    def ids(self) -> tuple[int, ...]:
        """Member ids in canonical ascending order."""
        return self._key

    @property
    def covered_robots(self) -> frozenset[int]:
        return frozenset(self._by_robot)

    def robot_choice(self, robot_id: int) -> int | None:
        return self._by_robot.get(robot_id)

    def __contains__(self, traj_id: int) -> bool:
        return traj_id in self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def __eq__(self, other) -> bool:
        return isinstance(other, SolutionSet) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"SolutionSet{self._key}"

    def with_add(self, traj_id: int) -> "SolutionSet":
        if traj_id in self._ids:
            raise ValueError(f"trajectory {traj_id} already selected")
        return SolutionSet(self.matroid, self._ids | {traj_id})

    def with_delete(self, traj_id: int) -> "SolutionSet":
        if traj_id not in self._ids:
            raise ValueError(f"trajectory {traj_id} not in solution")
        return SolutionSet(self.matroid, self._ids - {traj_id})

    def apply(self, delete_id: int | None, add_id: int | None) -> "SolutionSet":
        """Apply a (delete, add) pair where either side may be None."""
        ids = self._ids
        if delete_id is not None:
            if delete_id not in ids:
                raise ValueError(f"trajectory {delete_id} not in solution")
            ids = ids - {delete_id}
        if add_id is not None:
            if add_id in ids:
                raise ValueError(f"trajectory {add_id} already selected")
            ids = ids | {add_id}
        return SolutionSet(self.matroid, ids)

    def can_add(self, traj_id: int, ignoring: int | None = None) -> bool:
        """Would adding traj_id keep the partition constraint, after
        optionally ignoring one currently selected trajectory?"""
        robot = self.matroid.robot_of(traj_id)
        held = self._by_robot.get(robot)
        return held is None or held == ignoring


def offset_lambda(specs: Sequence[RobotSpec], horizon: int) -> float:
    """Offset making the oracle nonnegative over every feasible set.

    Each robot can spend at most horizon times its worst per-step cost,
    so the weighted sum of those maxima dominates any realizable total
    energy cost.
    """
    return float(sum(s.weight * horizon * s.max_step_cost() for s in specs))


class ObjectiveEvaluator:
    """Computes energy, information and the offset objective for id sets."""

    def __init__(self, world: WorldConfig, matroid: PartitionMatroid):
        self.world = world
        self.matroid = matroid
        self.lambda_offset = offset_lambda(world.robots, world.horizon)
        self._weights = {s.robot_id: s.weight for s in world.robots}
        model = world.model
        self._use_fast = fastmi.NUMBA_AVAILABLE and model.is_constant
        k, d = model.n_blocks, model.block_dim
        self._zero_info = np.zeros((world.horizon, k, d, d))

    def energy_cost(self, ids: Iterable[int]) -> float:
        """Weighted energy C(S); modular in the selection."""
        total = 0.0
        for traj_id in ids:
            traj = self.matroid.traj(traj_id)
            total += self._weights[traj.robot_id] * traj.energy
        return total

    def mutual_info(self, ids: Iterable[int]) -> float:
        ids = tuple(ids)
        if not ids:
            return 0.0
        info_sum = self._zero_info.copy()
        for traj_id in ids:
            info_sum += self.matroid.traj(traj_id).info_stack
        model = self.world.model
        if self._use_fast:
            return fastmi.mi_stacked(
                model.a_blocks, model.w_blocks, self.world.sigma0_blocks, info_sum
            )
        return mi_from_info_stacks(
            model.a_blocks, model.w_blocks, self.world.sigma0_blocks, info_sum
        )

    def objective(self, ids: Iterable[int]) -> float:
        """J(S) = mutual information minus weighted energy."""
        ids = tuple(ids)
        return self.mutual_info(ids) - self.energy_cost(ids)

    def g(self, ids: Iterable[int]) -> float:
        """Offset oracle g(S) = J(S) + lambda; nonnegative on feasible sets."""
        value = self.objective(ids) + self.lambda_offset
        if value < -1e-9:
            raise AssertionError(
                f"offset objective came out negative ({value}); offset miscomputed"
            )
        return value


class CountingOracle:
    """Memoizing wrapper around g with request and miss counters.

    Distinct id sets are evaluated once; repeat requests are cache hits.
    Counter and cache updates take a lock so concurrent proposal searches
    cannot tear the bookkeeping.
    """

    def __init__(self, fn: Callable[[tuple[int, ...]], float]):
        self._fn = fn
        self._cache: dict[tuple[int, ...], float] = {}
        self._lock = threading.Lock()
        self.requests = 0
        self.misses = 0

    def __call__(self, s: "SolutionSet | Iterable[int]") -> float:
        key = s.ids if isinstance(s, SolutionSet) else tuple(sorted(s))
        with self._lock:
            self.requests += 1
            if key in self._cache:
                return self._cache[key]
        value = self._fn(key)
        with self._lock:
            if key not in self._cache:
                self._cache[key] = value
                self.misses += 1
        return value

    def reset_counts(self) -> None:
        with self._lock:
            self.requests = 0
            self.misses = 0


def make_oracle(evaluator: ObjectiveEvaluator) -> CountingOracle:
    return CountingOracle(evaluator.g)


def marginal_gain(oracle: Callable, add_id: int, s: SolutionSet) -> float:
    """g(S + a) - g(S). Raises if the union breaks the partition constraint."""
    return oracle(s.with_add(add_id)) - oracle(s)
