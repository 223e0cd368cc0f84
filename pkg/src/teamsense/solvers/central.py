"""Centralized solvers over the trajectory matroid.

local_search is the reference two-pass solver: start from the best
single trajectory, repeatedly take the first delete, add or swap that
improves the objective by the acceptance margin, then freeze that
solution, strip it from the ground set and run a second pass. The
better of the two passes carries the approximation guarantee for
nonnegative submodular objectives under a partition constraint.

coordinate_descent is the sequential baseline: robots commit one at a
time, each maximizing its own marginal gain given earlier commitments.
brute_force_opt exists for small instances and tests.
"""

from __future__ import annotations

import heapq
import itertools
import time
from typing import Callable, Iterable, MutableMapping, Sequence

from ..objective import PartitionMatroid, SolutionSet
from .common import ADD, DELETE, SWAP, LocalOp, RunMetrics, SolverResult, improvement_threshold


def _read_counts(oracle) -> tuple[int, int]:
    return getattr(oracle, "misses", 0), getattr(oracle, "requests", 0)


def lazy_greedy_argmax(
    candidate_ids: Sequence[int],
    s: SolutionSet,
    oracle: Callable,
    bounds: MutableMapping[int, float] | None = None,
    lazy: bool = True,
) -> tuple[int | None, float, int]:
    """Exact argmax of marginal gain over the candidates.

    Candidates carry stale upper bounds (their standalone score, or the
    last gain computed for them when a bounds map is passed in and
    reused across calls). Submodularity makes those valid upper bounds,
    so candidates whose bound cannot beat the best exact gain found so
    far are never evaluated. The result matches the naive scan exactly,
    including the tie rule of lowest trajectory id.

    Returns (best_id, best_gain, evaluations); (None, -inf, 0) when the
    candidate list is empty.
    """
    if not candidate_ids:
        return None, float("-inf"), 0
    matroid = s.matroid
    g_s = oracle(s)
    if bounds is None:
        bounds = {}
    for traj_id in candidate_ids:
        if traj_id not in bounds:
            bounds[traj_id] = matroid.standalone(traj_id)
    if not lazy:
        best_id, best_gain, evals = None, float("-inf"), 0
        for traj_id in sorted(candidate_ids):
            gain = oracle(s.with_add(traj_id)) - g_s
            bounds[traj_id] = gain
            evals += 1
            if gain > best_gain:
                best_id, best_gain = traj_id, gain
        return best_id, best_gain, evals

    heap = [(-bounds[traj_id], traj_id) for traj_id in candidate_ids]
    heapq.heapify(heap)
    best_id, best_gain, evals = None, float("-inf"), 0
    while heap:
        neg_bound, traj_id = heap[0]
        bound = -neg_bound
        if best_id is not None and (
            bound < best_gain or (bound == best_gain and traj_id > best_id)
        ):
            break  # nothing left can win, even on the tie rule
        heapq.heappop(heap)
        gain = oracle(s.with_add(traj_id)) - g_s
        bounds[traj_id] = gain
        evals += 1
        if gain > best_gain or (gain == best_gain and (best_id is None or traj_id < best_id)):
            best_id, best_gain = traj_id, gain
    return best_id, best_gain, evals


def local_search(
    matroid: PartitionMatroid,
    alpha: float,
    oracle: Callable,
) -> SolverResult:
    """Two-pass first-improvement local search; the centralized reference.

    Scan order within a pass is fixed: all deletes in ascending id order,
    then all adds, then all swaps in (deleted, added) lexicographic
    order, taking the first candidate that clears the acceptance
    threshold. The margin divisor N is the initial ground set size and
    stays frozen for the second pass.
    """
    t_start = time.perf_counter()
    miss0, req0 = _read_counts(oracle)
    n_ground = matroid.size
    trace: list[LocalOp] = []
    empty = matroid.empty_solution()
    if n_ground == 0:
        g_val = oracle(empty)
        metrics = RunMetrics(rounds=0, wall_time_s=time.perf_counter() - t_start)
        miss1, req1 = _read_counts(oracle)
        metrics.oracle_calls, metrics.oracle_requests = miss1 - miss0, req1 - req0
        return SolverResult(empty, g_val, g_val - _offset(oracle, empty), metrics, ())

    ground = set(range(n_ground))
    pass_solutions: list[SolutionSet] = []
    for round_k in (1, 2):
        avail = sorted(ground)
        if not avail:
            pass_solutions.append(empty)
            continue
        init = _best_singleton(matroid, avail)
        s = matroid.solution({init})
        while True:
            op = _first_improvement(matroid, s, avail, alpha, n_ground, oracle)
            if op is None:
                break
            s = s.apply(op.d, op.a)
            trace.append(LocalOp(op.kind, op.d, op.a, round_k))
        pass_solutions.append(s)
        ground -= set(s.ids)

    best = pass_solutions[0]
    for cand in pass_solutions[1:]:
        if oracle(cand) > oracle(best):
            best = cand
    g_val = oracle(best)
    j_val = g_val - _offset(oracle, empty)
    miss1, req1 = _read_counts(oracle)
    metrics = RunMetrics(
        oracle_calls=miss1 - miss0,
        oracle_requests=req1 - req0,
        rounds=2,
        wall_time_s=time.perf_counter() - t_start,
    )
    return SolverResult(best, g_val, j_val, metrics, tuple(trace))


def _offset(oracle: Callable, empty: SolutionSet) -> float:
    # J(S) = g(S) - g(empty), since the empty set gathers no information
    return oracle(empty)


def _best_singleton(matroid: PartitionMatroid, avail: Sequence[int]) -> int:
    best = avail[0]
    for traj_id in avail[1:]:
        if matroid.standalone(traj_id) > matroid.standalone(best):
            best = traj_id
    return best


def _first_improvement(
    matroid: PartitionMatroid,
    s: SolutionSet,
    avail: Sequence[int],
    alpha: float,
    n_ground: int,
    oracle: Callable,
) -> LocalOp | None:
    """First delete, add or swap clearing the threshold, in canonical order."""
    thr = improvement_threshold(oracle(s), alpha, n_ground)
    for d in s.ids:
        if oracle(s.with_delete(d)) >= thr:
            return LocalOp(DELETE, d, None)
    covered = s.covered_robots
    for a in avail:
        if a in s or matroid.robot_of(a) in covered:
            continue
        if oracle(s.with_add(a)) >= thr:
            return LocalOp(ADD, None, a)
    for d in s.ids:
        s_minus = s.with_delete(d)
        for a in avail:
            if a in s or not s_minus.can_add(a):
                continue
            if oracle(s_minus.with_add(a)) >= thr:
                return LocalOp(SWAP, d, a)
    return None


def coordinate_descent(
    matroid: PartitionMatroid,
    order: Sequence[int],
    oracle: Callable,
    lazy: bool = True,
) -> SolverResult:
    """Sequential baseline: each robot in turn takes its best marginal
    trajectory, or sits out when every option strictly hurts."""
    t_start = time.perf_counter()
    miss0, req0 = _read_counts(oracle)
    if sorted(order) != list(matroid.robot_ids):
        raise ValueError("order must be a permutation of the matroid's robots")
    s = matroid.empty_solution()
    trace: list[LocalOp] = []
    for robot_id in order:
        cands = matroid.ids_of_robot(robot_id)
        best, gain, _ = lazy_greedy_argmax(cands, s, oracle, lazy=lazy)
        if best is not None and gain >= 0.0:
            s = s.with_add(best)
            trace.append(LocalOp(ADD, None, best))
    g_val = oracle(s)
    j_val = g_val - oracle(matroid.empty_solution())
    miss1, req1 = _read_counts(oracle)
    metrics = RunMetrics(
        oracle_calls=miss1 - miss0,
        oracle_requests=req1 - req0,
        proposal_exchanges=len(order),
        rounds=1,
        wall_time_s=time.perf_counter() - t_start,
    )
    return SolverResult(s, g_val, j_val, metrics, tuple(trace))


def brute_force_opt(
    matroid: PartitionMatroid,
    oracle: Callable,
    guard: int = 1_000_000,
) -> SolutionSet:
    """Exhaustive optimum over all feasible assignments.

    Each robot independently picks one trajectory or none, so the search
    space is the product of (N_i + 1). Refuses to run past the guard.
    Ties resolve to the lexicographically smallest id tuple.
    """
    space = 1
    for robot_id in matroid.robot_ids:
        space *= len(matroid.ids_of_robot(robot_id)) + 1
        if space > guard:
            raise ValueError(f"search space exceeds guard of {guard} assignments")
    choices = [(None, *matroid.ids_of_robot(robot_id)) for robot_id in matroid.robot_ids]
    best_key: tuple[int, ...] | None = None
    best_g = float("-inf")
    for combo in itertools.product(*choices):
        key = tuple(sorted(i for i in combo if i is not None))
        g_val = oracle(key)
        if best_key is None or g_val > best_g or (g_val == best_g and key < best_key):
            best_key, best_g = key, g_val
    return matroid.solution(best_key)
