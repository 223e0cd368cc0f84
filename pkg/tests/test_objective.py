"""Team objective assembly: offset, matroid bookkeeping, oracle counting."""

from __future__ import annotations

import math

import numpy as np
import pytest

from teamsense.filtering import mutual_information
from teamsense.objective import (
    CountingOracle,
    MatroidViolation,
    ObjectiveEvaluator,
    PartitionMatroid,
    SolutionSet,
    build_trajectory,
    make_oracle,
    marginal_gain,
    offset_lambda,
)
from teamsense.world import (
    ControlInput,
    CostField,
    RobotSpec,
    RobotState,
    SensorProfile,
    WorldConfig,
    double_integrator_model,
    trajectory_energy,
)

TAU = 0.5
STAY = ControlInput(0.0, 0.0)
FWD = ControlInput(8.0, 0.0)
TURN = ControlInput(0.0, math.pi / 2)
FWD_TURN = ControlInput(8.0, math.pi / 2)
UGV_COSTS = {STAY: 0.0, TURN: 1.0, FWD: 1.0, FWD_TURN: 2.0}


def make_world(n_robots=2, horizon=3, weight_fn=lambda i: float(i + 1)):
    model = double_integrator_model(TAU, q=0.5, n_targets=2)
    means = np.array([[3.0, 0.0, 0.0, 0.0], [0.0, 4.0, 0.0, 0.0]])
    sigma0 = np.stack([np.diag([4.0, 4.0, 1.0, 1.0])] * 2)
    robots = tuple(
        RobotSpec(
            i,
            "ugv",
            RobotState(2.0 * i, 0.0, 0.0),
            SensorProfile(360.0, 8.0, 0.1, 5.0),
            UGV_COSTS,
            {"mud": 3.0},
            weight_fn(i),
        )
        for i in range(n_robots)
    )
    return WorldConfig(
        model=model,
        target_means0=means,
        sigma0_blocks=sigma0,
        robots=robots,
        cost_field=CostField(()),
        horizon=horizon,
        tau=TAU,
    )


def make_matroid(world, seqs_per_robot):
    parts = {}
    for spec, seqs in zip(world.robots, seqs_per_robot):
        trajs = [build_trajectory(spec, seq, world) for seq in seqs]
        # partitions must come pre-ranked, exactly like the generator's output
        trajs.sort(key=lambda t: -t.standalone_score)
        parts[spec.robot_id] = trajs
    return PartitionMatroid(parts)


def id_of(matroid, robot_id, controls):
    controls = tuple(controls)
    for tid in matroid.ids_of_robot(robot_id):
        if matroid.traj(tid).controls == controls:
            return tid
    raise LookupError(controls)


@pytest.fixture
def small():
    world = make_world()
    seqs = [
        [[STAY] * 3, [FWD] * 3, [TURN] * 3],
        [[STAY] * 3, [FWD_TURN] * 3],
    ]
    return world, make_matroid(world, seqs)


def test_offset_lambda_hand_sum():
    world = make_world(n_robots=3, horizon=4)
    # each robot: (max ctrl 2 + max state 3) * T * weight, weights 1,2,3
    want = sum((2.0 + 3.0) * 4 * (i + 1.0) for i in range(3))
    assert offset_lambda(world.robots, 4) == pytest.approx(want)
    no_hazard = RobotSpec(0, "ugv", RobotState(0, 0, 0),
                          SensorProfile(360.0, 8.0, 0.1, 5.0), UGV_COSTS, {}, 2.0)
    assert offset_lambda([no_hazard], 10) == pytest.approx(2.0 * 10 * 2.0)


def test_build_trajectory_scores_standalone(small):
    world, matroid = small
    traj = matroid.traj(id_of(matroid, 0, [FWD] * 3))
    assert traj.robot_id == 0
    assert traj.controls == (FWD,) * 3
    want_energy = trajectory_energy(world.robots[0], traj.controls,
                                    traj.states, world.cost_field)
    assert traj.energy == pytest.approx(want_energy)
    mi = mutual_information([traj], world.model, world.sigma0_blocks, 3)
    assert traj.standalone_score == pytest.approx(mi - 1.0 * traj.energy)


def test_partition_matroid_layout(small):
    _, matroid = small
    assert matroid.size == 5
    assert matroid.robot_ids == (0, 1)
    assert matroid.ids_of_robot(0) == (0, 1, 2)
    assert matroid.ids_of_robot(1) == (3, 4)
    assert matroid.robot_of(4) == 1
    with pytest.raises(IndexError):
        matroid.robot_of(5)
    # ids are robot-major, ranked best first inside each partition
    for traj_id in range(matroid.size):
        assert matroid.standalone(traj_id) == matroid.traj(traj_id).standalone_score
    for rid in matroid.robot_ids:
        scores = [matroid.standalone(i) for i in matroid.ids_of_robot(rid)]
        assert scores == sorted(scores, reverse=True)


def test_solution_set_operations(small):
    _, matroid = small
    fwd0 = id_of(matroid, 0, [FWD] * 3)
    turn0 = id_of(matroid, 0, [TURN] * 3)
    stay1 = id_of(matroid, 1, [STAY] * 3)
    spin1 = id_of(matroid, 1, [FWD_TURN] * 3)
    s = matroid.empty_solution()
    assert len(s) == 0 and s.ids == ()
    s1 = s.with_add(fwd0)
    assert fwd0 in s1 and s1.covered_robots == frozenset({0})
    assert s1.robot_choice(0) == fwd0 and s1.robot_choice(1) is None
    s2 = s1.with_add(spin1)
    assert s2.ids == tuple(sorted((fwd0, spin1)))
    assert s2.with_delete(fwd0).ids == (spin1,)
    swapped = s2.apply(fwd0, turn0)
    assert swapped.ids == tuple(sorted((turn0, spin1)))
    assert s2.apply(None, None) == s2
    assert s2.can_add(stay1) is False
    assert s2.can_add(stay1, ignoring=spin1) is True
    assert not s2.can_add(fwd0)  # already in the set


def test_matroid_violation_on_double_cover(small):
    _, matroid = small
    with pytest.raises(MatroidViolation):
        matroid.solution([0, 1])
    s = matroid.solution([0])
    with pytest.raises(MatroidViolation):
        s.with_add(2)
    with pytest.raises(ValueError):
        s.with_delete(4)


def test_evaluator_g_is_offset_objective(small):
    world, matroid = small
    ev = ObjectiveEvaluator(world, matroid)
    lam = offset_lambda(world.robots, world.horizon)
    fwd0 = id_of(matroid, 0, [FWD] * 3)
    stay0 = id_of(matroid, 0, [STAY] * 3)
    stay1 = id_of(matroid, 1, [STAY] * 3)
    spin1 = id_of(matroid, 1, [FWD_TURN] * 3)
    for ids in ((), (fwd0,), (fwd0, spin1), (stay0, stay1)):
        j = ev.mutual_info(ids) - ev.energy_cost(ids)
        assert ev.objective(ids) == pytest.approx(j, abs=1e-12)
        assert ev.g(ids) == pytest.approx(j + lam, abs=1e-12)
        assert ev.g(ids) >= 0.0
    assert ev.g(()) == pytest.approx(lam)
    assert ev.mutual_info(()) == 0.0


def test_energy_cost_scales_with_weight(small):
    world, matroid = small
    ev = ObjectiveEvaluator(world, matroid)
    # robot 1 weight is 2, so its weighted energy doubles the raw sum
    spin1 = id_of(matroid, 1, [FWD_TURN] * 3)
    raw = matroid.traj(spin1).energy
    assert ev.energy_cost((spin1,)) == pytest.approx(2.0 * raw)
    assert ev.energy_cost(()) == 0.0


def test_g_nonnegative_on_random_instances():
    from teamsense.bench.instances import instance_oracle, random_instance

    rng = np.random.default_rng(17)
    for i in range(40):
        world, matroid = random_instance(int(rng.integers(0, 10_000)))
        oracle = instance_oracle(world, matroid)
        ids = [
            tid for rid in matroid.robot_ids
            if (cand := matroid.ids_of_robot(rid)) and rng.random() < 0.7
            for tid in [cand[int(rng.integers(0, len(cand)))]]
        ]
        assert oracle(matroid.solution(ids)) >= -1e-12


def test_counting_oracle_memo_and_counters(small):
    world, matroid = small
    calls = []

    def fn(key):
        calls.append(key)
        return float(len(key))

    oracle = CountingOracle(fn)
    fwd0 = id_of(matroid, 0, [FWD] * 3)
    spin1 = id_of(matroid, 1, [FWD_TURN] * 3)
    s = matroid.solution([fwd0, spin1])
    assert oracle(s) == 2.0
    assert oracle(s) == 2.0
    assert oracle([spin1, fwd0]) == 2.0  # iterable form sorts to the same key
    assert oracle.requests == 3
    assert oracle.misses == 1
    assert calls == [tuple(sorted((fwd0, spin1)))]
    oracle.reset_counts()
    assert (oracle.requests, oracle.misses) == (0, 0)
    assert oracle(s) == 2.0 and oracle.misses == 0  # cache survives reset


def test_marginal_gain_via_oracle(small):
    world, matroid = small
    oracle = make_oracle(ObjectiveEvaluator(world, matroid))
    s = matroid.empty_solution()
    fwd0 = id_of(matroid, 0, [FWD] * 3)
    gain = marginal_gain(oracle, fwd0, s)
    assert gain == pytest.approx(oracle(s.with_add(fwd0)) - oracle(s), abs=1e-12)
    assert gain == pytest.approx(matroid.standalone(fwd0), abs=1e-9)


def test_empty_partition_robot_is_allowed():
    world = make_world(n_robots=2)
    parts = {
        0: [build_trajectory(world.robots[0], [STAY] * 3, world)],
        1: [],
    }
    matroid = PartitionMatroid(parts)
    assert matroid.size == 1
    assert matroid.ids_of_robot(1) == ()
    s = matroid.solution([0])
    assert s.can_add(0) is False
