"""Solvers for the one-trajectory-per-robot selection problem."""

from .central import brute_force_opt, coordinate_descent, lazy_greedy_argmax, local_search
from .common import LocalOp, RunMetrics, SolverResult, improvement_threshold
from .dls import Agent, BusRecord, Proposal, commit_bound, dls_run, find_proposal, make_agents

__all__ = [
    "Agent",
    "BusRecord",
    "LocalOp",
    "Proposal",
    "RunMetrics",
    "SolverResult",
    "brute_force_opt",
    "commit_bound",
    "coordinate_descent",
    "dls_run",
    "find_proposal",
    "improvement_threshold",
    "lazy_greedy_argmax",
    "local_search",
    "make_agents",
]
