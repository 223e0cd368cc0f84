"""Shared solver plumbing: ops, metrics, results, acceptance threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..objective import SolutionSet

DELETE = "delete"
ADD = "add"
SWAP = "swap"


@dataclass(frozen=True)
class LocalOp:
    """One accepted local move. d and a are trajectory ids; None is a no-op
    on that side, so (d, None) deletes and (None, a) adds."""

    kind: str
    d: int | None
    a: int | None
    round_k: int = 1


@dataclass
class RunMetrics:
    """Work and traffic accounting for one solver run.

    oracle_calls counts distinct evaluations (cache misses of the shared
    memoized oracle); oracle_requests counts every request including
    hits. proposal_exchanges counts every broadcast message on the bus,
    with per-category fields breaking the total down.
    """

    oracle_calls: int = 0
    oracle_requests: int = 0
    proposal_exchanges: int = 0
    init_messages: int = 0
    warm_messages: int = 0
    search_messages: int = 0
    rounds: int = 0
    wall_time_s: float = 0.0


@dataclass
class SolverResult:
    solution: SolutionSet
    g_value: float
    j_value: float
    metrics: RunMetrics
    op_trace: tuple[LocalOp, ...] = ()
    commit_log: tuple = ()


def improvement_threshold(g_current: float, alpha: float, n_ground: int) -> float:
    """Smallest objective value that counts as sufficient improvement.

    The relative margin alpha / N^4 underflows below float resolution
    once the ground set is large, so the margin is floored at a few ulps
    to keep accepted moves strictly increasing and termination finite.
    All solvers must use this same arithmetic for their acceptance
    comparisons; trace equivalence between them depends on it.
    """
    if n_ground <= 0:
        raise ValueError("threshold needs a positive ground set size")
    rel = (alpha / float(n_ground) ** 4) * g_current
    return g_current + max(rel, 4.0 * math.ulp(g_current))
