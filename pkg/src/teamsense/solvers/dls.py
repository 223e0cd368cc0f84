"""Distributed local search over a simulated broadcast bus.

Each robot owns one partition of the candidate set and searches for
proposals: delete any selected trajectory (its own or a teammate's),
add one of its own, or swap one of its own in for any deletion. A
proposal qualifies when the resulting team objective clears the same
acceptance threshold the centralized solver uses; all acceptance
comparisons are made on absolute oracle values so the two solvers make
bit-identical decisions.

Two bus schedules are simulated, both committing exactly one proposal
per protocol round. The canonical schedule polls every agent once per
round, with each agent scanning deletes, then adds, then swaps, and
commits the qualifying proposal that is lowest in that same
(phase, delete id, add id) order; that makes the protocol deterministic
and exactly trace-equivalent to the centralized scan. The concurrent
schedule models simultaneous searching: each agent scans in its natural
per-deletion order, search time is measured in oracle requests, and
every agent finishing no later than the first qualifying finisher gets
its broadcast out before the commit cuts the rest off. Simultaneous
proposals are resolved in (finish time, robot id) order: the first
commits, the rest are re-validated against the updated solution and
either stay in flight to commit in later rounds or are discarded as
stale. Metrics runs use the concurrent schedule.

An optional warm start runs before the proposal rounds of each pass:
unassigned robots repeatedly bid their best qualifying addition and the
bus commits the globally best bid. That reproduces a prefix of lazy
greedy and collapses the runs of small self-swaps a fresh solution
otherwise goes through, which is where most of the message traffic
comes from.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

from ..objective import PartitionMatroid, SolutionSet
from .central import lazy_greedy_argmax
from .common import ADD, DELETE, SWAP, LocalOp, RunMetrics, SolverResult, improvement_threshold

CANONICAL = "canonical"
CONCURRENT = "concurrent"


class ProtocolFault(RuntimeError):
    """Agents and ground set disagree; the protocol cannot run."""


class Proposal(NamedTuple):
    """A (delete, add) pair; None on both sides is the NOP terminator."""

    d: int | None
    a: int | None

    @property
    def is_nop(self) -> bool:
        return self.d is None and self.a is None

    def order_key(self) -> tuple[int, int, int]:
        """Position of this proposal in the canonical scan order."""
        if self.a is None:
            return (0, self.d, -1)  # delete
        if self.d is None:
            return (1, self.a, -1)  # add
        return (2, self.d, self.a)  # swap

    @property
    def kind(self) -> str:
        if self.a is None:
            return DELETE
        if self.d is None:
            return ADD
        return SWAP


NOP = Proposal(None, None)


@dataclass(frozen=True)
class BusRecord:
    """One bus log event, in the order every agent observed it.

    Broadcast rows (committed False) are actual messages and count
    toward the exchange metrics. Commit rows (committed True) mark the
    one state change of a protocol round with objective values taken at
    commit time; they are log events, not messages, since the committing
    broadcast already reached everyone. Discard rows record stale
    proposals dropped by re-validation.
    """

    seq: int
    round_k: int
    category: str  # "init", "warm", "search", "discard"
    proposer: int
    d: int | None
    a: int | None
    g_before: float | None
    g_after: float | None
    committed: bool


class Agent:
    """One robot's view of the protocol: its partition and solution copy."""

    def __init__(self, robot_id: int, partition: Sequence[int], matroid: PartitionMatroid):
        self.robot_id = robot_id
        self.partition = list(partition)  # ascending ids = descending standalone
        self.matroid = matroid
        self.local_s: SolutionSet | None = None
        self.warm_bounds: dict[int, float] = {}

    def reset_round(self, s: SolutionSet) -> None:
        self.local_s = s
        self.warm_bounds = {}

    def observe_commit(self, s: SolutionSet) -> None:
        self.local_s = s

    def remove_committed(self, ids) -> None:
        self.partition = [i for i in self.partition if i not in ids]

    # -- proposal search ------------------------------------------------

    def find_proposal(
        self,
        s: SolutionSet,
        alpha: float,
        n_ground: int,
        oracle: Callable,
        lazy: bool = True,
        order: str = "natural",
    ) -> tuple[Proposal, int]:
        """Scan for the first qualifying proposal; returns (proposal, ticks).

        ticks counts the oracle requests this search issued, which is the
        unit of simulated search time under the concurrent schedule.
        "natural" order walks each potential deletion in turn, trying the
        deletion itself and then swaps against it, with pure additions
        last; "phased" groups all deletes first, then adds, then swaps,
        which is the order the canonical schedule needs. With lazy
        enabled the addition scans stop as soon as cached standalone
        scores drop below the remaining deficiency, which cannot skip a
        qualifying candidate because standalone scores bound marginal
        gains.
        """
        g_s = oracle(s)
        ticks = 1
        thr = improvement_threshold(g_s, alpha, n_ground)
        if order == "phased":
            for d in s.ids:
                g_minus = oracle(s.with_delete(d))
                ticks += 1
                if g_minus >= thr:
                    return Proposal(d, None), ticks
            prop, t = self._scan_adds(s, None, g_s, thr, oracle, lazy)
            ticks += t
            if prop is not None:
                return prop, ticks
            for d in s.ids:
                s_minus = s.with_delete(d)
                g_minus = oracle(s_minus)
                ticks += 1
                prop, t = self._scan_adds(s_minus, d, g_minus, thr, oracle, lazy)
                ticks += t
                if prop is not None:
                    return prop, ticks
            return NOP, ticks
        # natural order: each deletion followed by the swaps against it,
        # additions without deletion last
        for d in s.ids:
            s_minus = s.with_delete(d)
            g_minus = oracle(s_minus)
            ticks += 1
            if g_minus >= thr:
                return Proposal(d, None), ticks
            prop, t = self._scan_adds(s_minus, d, g_minus, thr, oracle, lazy)
            ticks += t
            if prop is not None:
                return prop, ticks
        prop, t = self._scan_adds(s, None, g_s, thr, oracle, lazy)
        ticks += t
        if prop is not None:
            return prop, ticks
        return NOP, ticks

    def _scan_adds(
        self,
        s_base: SolutionSet,
        d: int | None,
        g_base: float,
        thr: float,
        oracle: Callable,
        lazy: bool,
    ) -> tuple[Proposal | None, int]:
        """First own addition against s_base that clears the threshold."""
        if self.robot_id in s_base.covered_robots:
            return None, 0
        deficiency = thr - g_base
        ticks = 0
        for a in self.partition:
            if a in s_base or a == d:
                continue
            if lazy and self.matroid.standalone(a) < deficiency:
                break  # sorted descending, nothing further can qualify
            g_new = oracle(s_base.with_add(a))
            ticks += 1
            if g_new >= thr:
                return Proposal(d, a), ticks
        return None, ticks


def find_proposal(
    agent: Agent,
    s: SolutionSet,
    alpha: float,
    n_ground: int,
    oracle: Callable,
    lazy: bool = True,
) -> Proposal:
    """The proposal the given agent would broadcast against s."""
    prop, _ = agent.find_proposal(s, alpha, n_ground, oracle, lazy=lazy)
    return prop


def make_agents(matroid: PartitionMatroid) -> list[Agent]:
    return [Agent(rid, matroid.ids_of_robot(rid), matroid) for rid in matroid.robot_ids]


def commit_bound(g_init: float, g_max: float, alpha: float, n_ground: int) -> int:
    """Upper bound on accepted commits: every commit multiplies the
    objective by at least (1 + alpha / N^4)."""
    if g_init <= 0 or g_max < g_init:
        raise ValueError("bound needs 0 < g_init <= g_max")
    ratio = 1.0 + alpha / float(n_ground) ** 4
    return math.ceil(math.log(g_max / g_init) / math.log(ratio)) + 1


def bus_commit(
    s: SolutionSet,
    in_flight: Sequence[tuple[int, int, Proposal]],
    alpha: float,
    n_ground: int,
    oracle: Callable,
) -> tuple[SolutionSet, tuple[int, int, Proposal], list, list]:
    """Resolve simultaneous proposals: lowest (finish time, robot) wins.

    The winner must validate against s, the state its search ran on. The
    rest are re-validated against the post-commit solution; survivors
    stay in flight for later rounds, the others are stale and dropped.
    Returns (new solution, winner, survivors, discarded).
    """
    if not in_flight:
        raise ProtocolFault("nothing to commit")
    ordered = sorted(in_flight, key=lambda r: (r[0], r[1]))
    winner = ordered[0]
    if not _still_valid(s, winner[2], alpha, n_ground, oracle):
        raise ProtocolFault("winning proposal does not validate against its own state")
    s_new = s.apply(winner[2].d, winner[2].a)
    survivors, discarded = [], []
    for entry in ordered[1:]:
        if _still_valid(s_new, entry[2], alpha, n_ground, oracle):
            survivors.append(entry)
        else:
            discarded.append(entry)
    return s_new, winner, survivors, discarded


class _Bus:
    """Broadcast log, message accounting and commit application."""

    def __init__(self, agents: list[Agent], oracle: Callable, metrics: RunMetrics):
        self.agents = agents
        self.oracle = oracle
        self.metrics = metrics
        self.records: list[BusRecord] = []
        self._seq = 0

    def _log(self, rec_args) -> None:
        self.records.append(BusRecord(self._seq, *rec_args))
        self._seq += 1

    def broadcast(
        self,
        round_k: int,
        category: str,
        proposer: int,
        prop: Proposal,
        g_before: float | None = None,
        g_after: float | None = None,
    ) -> None:
        self._log((round_k, category, proposer, prop.d, prop.a, g_before, g_after, False))
        self.metrics.proposal_exchanges += 1
        counter = f"{category}_messages"
        setattr(self.metrics, counter, getattr(self.metrics, counter) + 1)

    def discard(self, round_k: int, proposer: int, prop: Proposal) -> None:
        self._log((round_k, "discard", proposer, prop.d, prop.a, None, None, False))

    def commit(
        self,
        round_k: int,
        category: str,
        proposer: int,
        prop: Proposal,
        s: SolutionSet,
        trace: list[LocalOp] | None,
    ) -> SolutionSet:
        g_before = self.oracle(s)
        s_new = s.apply(prop.d, prop.a)
        g_after = self.oracle(s_new)
        self._log((round_k, category, proposer, prop.d, prop.a, g_before, g_after, True))
        for agent in self.agents:
            agent.observe_commit(s_new)
        keys = {agent.local_s.ids for agent in self.agents}
        if len(keys) != 1:
            raise ProtocolFault("agents disagree on the team solution after a commit")
        if trace is not None:
            trace.append(LocalOp(prop.kind, prop.d, prop.a, round_k))
        return s_new


def dls_run(
    agents: list[Agent],
    alpha: float,
    oracle: Callable,
    lazy: bool = True,
    warm_start: bool = True,
    schedule: str = CANONICAL,
) -> SolverResult:
    """Run the full two-pass distributed protocol and return the result.

    The ground set size N that scales the acceptance margin is frozen
    from the first pass's size broadcasts. After the first pass its
    solution is withdrawn from every partition and the protocol repeats;
    the better pass wins. Passing an agent list that does not exactly
    tile the matroid's ground set raises ProtocolFault.
    """
    if schedule not in (CANONICAL, CONCURRENT):
        raise ValueError(f"unknown schedule {schedule!r}")
    t_start = time.perf_counter()
    if not agents:
        raise ProtocolFault("no agents")
    matroid = agents[0].matroid
    _validate_partitions(agents, matroid)
    agents = sorted(agents, key=lambda ag: ag.robot_id)
    miss0 = getattr(oracle, "misses", 0)
    req0 = getattr(oracle, "requests", 0)

    metrics = RunMetrics()
    bus = _Bus(agents, oracle, metrics)
    empty = matroid.empty_solution()
    n_ground = 0
    trace: list[LocalOp] = []
    pass_solutions: list[SolutionSet] = []

    for round_k in (1, 2):
        # every agent announces its partition size and its best own
        # singleton; the first pass's sizes fix N for good
        sizes = 0
        best_robot, best_traj, best_score = None, None, -math.inf
        for agent in agents:
            sizes += len(agent.partition)
            top = agent.partition[0] if agent.partition else None
            if top is not None and matroid.standalone(top) > best_score:
                best_robot, best_traj, best_score = agent.robot_id, top, matroid.standalone(top)
            bus.broadcast(round_k, "init", agent.robot_id, Proposal(None, top))
        if round_k == 1:
            n_ground = sizes
        if best_traj is None:
            for agent in agents:
                agent.reset_round(empty)
            pass_solutions.append(empty)
            continue
        for agent in agents:
            agent.reset_round(empty)
        s = bus.commit(round_k, "init", best_robot, Proposal(None, best_traj), empty, None)

        if warm_start:
            s = _warm_start_phase(bus, agents, s, alpha, n_ground, oracle, lazy, round_k, trace)

        if schedule == CANONICAL:
            s = _run_canonical(bus, agents, s, alpha, n_ground, oracle, lazy, round_k, trace)
        else:
            s = _run_concurrent(bus, agents, s, alpha, n_ground, oracle, lazy, round_k, trace)

        pass_solutions.append(s)
        for agent in agents:
            agent.remove_committed(set(s.ids))

    best = pass_solutions[0]
    for cand in pass_solutions[1:]:
        if oracle(cand) > oracle(best):
            best = cand
    g_val = oracle(best)
    j_val = g_val - oracle(empty)
    metrics.oracle_calls = getattr(oracle, "misses", 0) - miss0
    metrics.oracle_requests = getattr(oracle, "requests", 0) - req0
    metrics.wall_time_s = time.perf_counter() - t_start
    return SolverResult(best, g_val, j_val, metrics, tuple(trace), tuple(bus.records))


def _validate_partitions(agents: list[Agent], matroid: PartitionMatroid) -> None:
    seen: set[int] = set()
    for agent in agents:
        if agent.matroid is not matroid:
            raise ProtocolFault("agents were built against different ground sets")
        own = set(agent.partition)
        expected = set(matroid.ids_of_robot(agent.robot_id))
        if not own <= expected or (seen & own):
            raise ProtocolFault(f"agent {agent.robot_id} holds trajectories it does not own")
        seen |= own
    if seen != set(range(matroid.size)):
        raise ProtocolFault("agent partitions do not tile the ground set")


def _warm_start_phase(
    bus: _Bus,
    agents: list[Agent],
    s: SolutionSet,
    alpha: float,
    n_ground: int,
    oracle: Callable,
    lazy: bool,
    round_k: int,
    trace: list[LocalOp],
) -> SolutionSet:
    """Adds-only bidding: commit the globally best qualifying addition
    until none qualifies or every robot is assigned.

    The committed sequence reproduces lazy greedy selections because
    each step takes the maximal marginal gain with ties to the lower
    robot id, and ids are robot-major. Costs at most one message per
    unassigned agent per step: an agent whose best addition once fails
    the bar bids NOP that step and then stays silent, which is sound
    because marginal gains only shrink as the solution grows while the
    bar only rises, so a failed bidder can never qualify later.
    """
    retired: set[int] = set()
    while True:
        g_s = oracle(s)
        thr = improvement_threshold(g_s, alpha, n_ground)
        best = None  # (gain, robot_id, traj_id)
        bids = []  # (robot_id, proposal, g_after or None)
        for agent in agents:
            if agent.robot_id in s.covered_robots or agent.robot_id in retired:
                continue
            cands = [a for a in agent.partition if a not in s]
            traj_id, gain, _ = lazy_greedy_argmax(
                cands, s, oracle, bounds=agent.warm_bounds, lazy=lazy
            )
            qualifies = traj_id is not None and oracle(s.with_add(traj_id)) >= thr
            if qualifies:
                bids.append((agent.robot_id, Proposal(None, traj_id), oracle(s.with_add(traj_id))))
                if best is None or gain > best[0]:
                    best = (gain, agent.robot_id, traj_id)
            else:
                retired.add(agent.robot_id)
                bids.append((agent.robot_id, NOP, None))
        for robot_id, prop, g_after in bids:
            bus.broadcast(round_k, "warm", robot_id, prop, g_s, g_after)
        if best is None:
            return s
        _, robot_id, traj_id = best
        s = bus.commit(round_k, "warm", robot_id, Proposal(None, traj_id), s, trace)


def _run_canonical(
    bus: _Bus,
    agents: list[Agent],
    s: SolutionSet,
    alpha: float,
    n_ground: int,
    oracle: Callable,
    lazy: bool,
    round_k: int,
    trace: list[LocalOp],
) -> SolutionSet:
    """Deterministic schedule: poll everyone, commit the scan-order minimum."""
    while True:
        bus.metrics.rounds += 1
        g_s = oracle(s)
        responses: list[tuple[int, Proposal]] = []
        for agent in agents:
            prop, _ = agent.find_proposal(s, alpha, n_ground, oracle, lazy=lazy, order="phased")
            responses.append((agent.robot_id, prop))
        winner: tuple[int, Proposal] | None = None
        for robot_id, prop in responses:
            if prop.is_nop:
                continue
            if winner is None or prop.order_key() < winner[1].order_key():
                winner = (robot_id, prop)
        for robot_id, prop in responses:
            g_after = oracle(s.apply(prop.d, prop.a)) if not prop.is_nop else None
            bus.broadcast(round_k, "search", robot_id, prop, g_s, g_after)
        if winner is None:
            return s
        s = bus.commit(round_k, "search", winner[0], winner[1], s, trace)


def _run_concurrent(
    bus: _Bus,
    agents: list[Agent],
    s: SolutionSet,
    alpha: float,
    n_ground: int,
    oracle: Callable,
    lazy: bool,
    round_k: int,
    trace: list[LocalOp],
) -> SolutionSet:
    """Simultaneous searches resolved by finish time, one commit per round.

    Search time is counted in oracle requests. Every agent that finishes
    its scan no later than the first qualifying finisher gets its
    broadcast out, NOPs included; slower searches abort unseen when the
    commit lands. Surviving simultaneous proposals stay in flight and
    commit in later rounds without new messages, unless re-validation
    against the moved solution discards them first.
    """
    in_flight: list[tuple[int, int, Proposal]] = []
    while True:
        bus.metrics.rounds += 1
        # a round with valid carried proposals commits one of them before
        # anyone's fresh search can finish
        committed = False
        while in_flight:
            ticks, robot_id, prop = in_flight.pop(0)
            if _still_valid(s, prop, alpha, n_ground, oracle):
                s = bus.commit(round_k, "search", robot_id, prop, s, trace)
                committed = True
                break
            bus.discard(round_k, robot_id, prop)
        if committed:
            continue
        g_s = oracle(s)
        results = []  # (ticks, robot_id, proposal)
        for agent in agents:
            prop, ticks = agent.find_proposal(s, alpha, n_ground, oracle, lazy=lazy,
                                              order="natural")
            results.append((ticks, agent.robot_id, prop))
        live = [r for r in results if not r[2].is_nop]
        if not live:
            for ticks, robot_id, prop in sorted(results):
                bus.broadcast(round_k, "search", robot_id, prop, g_s, None)
            return s
        t_star = min(r[0] for r in live)
        finishers = sorted(r for r in results if r[0] <= t_star)
        for ticks, robot_id, prop in finishers:
            g_after = oracle(s.apply(prop.d, prop.a)) if not prop.is_nop else None
            bus.broadcast(round_k, "search", robot_id, prop, g_s, g_after)
        s_new, winner, survivors, discarded = bus_commit(
            s, [r for r in finishers if not r[2].is_nop], alpha, n_ground, oracle
        )
        s = bus.commit(round_k, "search", winner[1], winner[2], s, trace)
        if s.ids != s_new.ids:
            raise ProtocolFault("bus resolution and commit disagree")
        for ticks, robot_id, prop in discarded:
            bus.discard(round_k, robot_id, prop)
        in_flight = survivors


def _still_valid(
    s: SolutionSet, prop: Proposal, alpha: float, n_ground: int, oracle: Callable
) -> bool:
    """Re-check a proposal against the current solution before applying."""
    if prop.d is not None and prop.d not in s:
        return False
    if prop.a is not None:
        if prop.a in s or not s.can_add(prop.a, ignoring=prop.d):
            return False
    thr = improvement_threshold(oracle(s), alpha, n_ground)
    return oracle(s.apply(prop.d, prop.a)) >= thr
