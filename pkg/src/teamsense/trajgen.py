"""Candidate trajectory enumeration over motion-primitive trees.

Breadth first over the primitive set, one level per step. Explosion is
controlled two ways: a pose dedup grid collapses frontier nodes that
discretize to the same (x, y, theta) cell to the first one in expansion
order, and an optional beam width caps how many nodes survive a level.
Beam expansion is primitive-major (every parent's stationary child,
then every parent's next primitive, and so on), so truncation spreads
the surviving nodes across parents instead of exhausting one subtree.
The stationary primitive orders first, so the stay-put trajectory
always survives and every robot can choose to sit still. Completed
rollouts are scored standalone and the best kept. Everything here is a
pure function of its inputs, no randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .objective import Trajectory, _finish_trajectories
from .world import ControlInput, RobotSpec, RobotState, WorldConfig, step_dynamics

# score candidates in chunks so the (C, T, k, d, d) info stacks stay small
SCORE_CHUNK = 2048


@dataclass(frozen=True)
class GenConfig:
    """Tree enumeration knobs.

    max_candidates caps how many scored trajectories a robot keeps.
    grid_xy and grid_theta_deg set the dedup cell size; coarser grids
    prune harder. beam_width, if set, caps the per-level frontier so
    deep horizons stay tractable. hold_steps repeats each chosen
    primitive for that many steps before the next branching, which tames
    long horizons; the last hold truncates to fit. downsample keeps only
    the top fraction after sorting.
    """

    primitives: tuple[ControlInput, ...]
    max_candidates: int = 200
    grid_xy: float = 0.5
    grid_theta_deg: float = 22.5
    beam_width: int | None = None
    hold_steps: int = 1
    downsample: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.downsample <= 1.0:
            raise ValueError("downsample fraction must be in (0, 1]")
        if self.grid_xy <= 0 or self.grid_theta_deg <= 0:
            raise ValueError("dedup grid resolution must be positive")
        if self.beam_width is not None and self.beam_width < 1:
            raise ValueError("beam_width must be at least 1 when set")
        if self.hold_steps < 1:
            raise ValueError("hold_steps must be at least 1")


def _ordered_primitives(primitives: tuple[ControlInput, ...]) -> tuple[ControlInput, ...]:
    # stationary first, then slow before fast and straight before turning,
    # so dedup ties resolve toward simpler maneuvers
    return tuple(sorted(primitives, key=lambda u: (abs(u.nu), abs(u.omega), u.omega < 0)))


def _cell(state: RobotState, cfg: GenConfig) -> tuple[int, int, int]:
    theta_res = math.radians(cfg.grid_theta_deg)
    return (
        int(math.floor(state.x / cfg.grid_xy)),
        int(math.floor(state.y / cfg.grid_xy)),
        int(math.floor((state.theta + math.pi) / theta_res)),
    )


def generate_candidates(spec: RobotSpec, cfg: GenConfig, world: WorldConfig) -> list[Trajectory]:
    """Enumerate, score and rank candidate trajectories for one robot.

    Returns at most max_candidates trajectories sorted by standalone
    score descending (ties keep enumeration order). A zero cap returns
    an empty list without enumerating anything.
    """
    if cfg.max_candidates <= 0:
        return []
    prims = _ordered_primitives(cfg.primitives)
    # each frontier node: (state, control ids so far, states so far)
    frontier: list[tuple[RobotState, tuple[int, ...], tuple[RobotState, ...]]] = [
        (spec.state0, (), ())
    ]
    beam = cfg.beam_width
    remaining = world.horizon
    while remaining > 0:
        hold = min(cfg.hold_steps, remaining)
        remaining -= hold
        # all children first, grouped by primitive
        groups: list[list[tuple[RobotState, tuple[int, ...], tuple[RobotState, ...]]]] = []
        for prim_id, u in enumerate(prims):
            group = []
            for state, ctrl_ids, states in frontier:
                child = state
                leg = []
                for _ in range(hold):
                    child = step_dynamics(child, u, world.tau)
                    leg.append(child)
                group.append((child, ctrl_ids + (prim_id,) * hold, states + tuple(leg)))
            groups.append(group)
        # then admit round-robin across primitives so a beam cut keeps
        # every maneuver represented instead of exhausting one subtree
        seen: set[tuple[int, int, int]] = set()
        nxt = []
        cursors = [0] * len(groups)
        limit = beam if beam is not None else len(frontier) * len(prims)
        alive = True
        while alive and len(nxt) < limit:
            alive = False
            for gi, group in enumerate(groups):
                while cursors[gi] < len(group):
                    node = group[cursors[gi]]
                    cursors[gi] += 1
                    cell = _cell(node[0], cfg)
                    if cell not in seen:
                        seen.add(cell)
                        nxt.append(node)
                        alive = True
                        break
                if beam is not None and len(nxt) >= limit:
                    break
        frontier = nxt

    control_rows = [tuple(prims[i] for i in ctrl_ids) for _, ctrl_ids, _ in frontier]
    state_rows = [states for _, _, states in frontier]
    scored: list[Trajectory] = []
    for start in range(0, len(control_rows), SCORE_CHUNK):
        scored.extend(
            _finish_trajectories(
                spec,
                control_rows[start : start + SCORE_CHUNK],
                state_rows[start : start + SCORE_CHUNK],
                world,
            )
        )
    scored.sort(key=lambda t: -t.standalone_score)
    kept = scored[: cfg.max_candidates]
    if cfg.downsample < 1.0:
        kept = downsample_best(kept, cfg.downsample)
    return kept


def downsample_best(trajs: list[Trajectory], fraction: float) -> list[Trajectory]:
    """Keep the top ceil(fraction * len) of an already sorted list."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    if not trajs:
        return []
    keep = math.ceil(fraction * len(trajs))
    return list(trajs[:keep])
