"""Experiment runner: sweeps, trial records, CSV and trace emission.

One trial = one scenario instance (fixed by the trial seed) on which
every enabled solver variant runs against the identical candidate set;
the candidate hash goes into every record so fairness is checkable
after the fact. Trial seeds are base seed + trial index. Everything
except wall time is reproducible from (config, seed).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from ..objective import ObjectiveEvaluator, make_oracle
from ..solvers.central import coordinate_descent, local_search
from ..solvers.dls import dls_run, make_agents
from .scenarios import Instance, build_scenario1, build_scenario2

CSV_COLUMNS = [
    "scenario",
    "n_or_r",
    "trial",
    "solver",
    "variant",
    "g",
    "J",
    "MI",
    "C",
    "energy_raw",
    "oracle_calls",
    "oracle_calls_per_N",
    "proposal_exchanges",
    "runtime_s",
    "traj_set_hash",
]

AGG_METRICS = ["g", "J", "MI", "C", "energy_raw", "oracle_calls",
               "oracle_calls_per_N", "proposal_exchanges"]


@dataclass(frozen=True)
class SolverSpec:
    """One enabled solver variant."""

    name: str  # "cls", "dls" or "cd"
    lazy: bool = True
    warm: bool = True
    schedule: str = "canonical"
    order: str = "cheap-first"  # cd only

    @property
    def variant(self) -> str:
        if self.name == "cls":
            return "two-round"
        if self.name == "cd":
            return self.order
        tags = [("lazy" if self.lazy else "eager"), ("warm" if self.warm else "cold")]
        return "+".join(tags) + f"@{self.schedule}"

    @property
    def key(self) -> str:
        return f"{self.name}:{self.variant}"


@dataclass
class ScenarioConfig:
    """Everything a sweep needs; loadable from a YAML file."""

    scenario: int
    sweep: Sequence[float]  # robot counts for scenario 1, r weights for 2
    trials: int = 20
    seed: int = 0
    alpha: float = 1.0
    max_candidates: int = 64
    horizon: int | None = None
    process_noise: float = 1.0
    sigma0_pos: float = 16.0
    sigma0_vel: float = 1.0
    hold_steps: int = 4  # scenario 2 only
    downsample: float = 1.0
    solvers: Sequence[SolverSpec] = field(default_factory=lambda: DEFAULT_SOLVERS)
    outdir: str = "results"
    plots: bool = False
    traces: bool = False

    def __post_init__(self) -> None:
        if self.scenario not in (1, 2):
            raise ValueError(f"unknown scenario {self.scenario}")
        if self.trials < 1 or not self.sweep:
            raise ValueError("need at least one trial and one sweep point")


DEFAULT_SOLVERS = (
    SolverSpec("dls", lazy=False, warm=False),
    SolverSpec("dls", lazy=True, warm=False),
    SolverSpec("dls", lazy=False, warm=True),
    SolverSpec("dls", lazy=True, warm=True),
    SolverSpec("cd", order="cheap-first"),
    SolverSpec("cd", order="expensive-first"),
)


@dataclass(frozen=True)
class TrialRecord:
    scenario: int
    n_or_r: float
    trial: int
    solver: str
    variant: str
    g: float
    j: float
    mi: float
    c: float
    energy_raw: float
    oracle_calls: int
    oracle_calls_per_n: float
    proposal_exchanges: int
    runtime_s: float
    traj_set_hash: str

    def row(self) -> list:
        return [
            self.scenario,
            f"{self.n_or_r:g}",
            self.trial,
            self.solver,
            self.variant,
            repr(self.g),
            repr(self.j),
            repr(self.mi),
            repr(self.c),
            repr(self.energy_raw),
            self.oracle_calls,
            repr(self.oracle_calls_per_n),
            self.proposal_exchanges,
            f"{self.runtime_s:.4f}",
            self.traj_set_hash,
        ]


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse a YAML config file into a ScenarioConfig."""
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    try:
        scenario = int(raw.pop("scenario"))
        if scenario == 1:
            sweep = [int(v) for v in raw.pop("robots")]
        else:
            sweep = [float(v) for v in raw.pop("r_values")]
    except KeyError as exc:
        raise ValueError(f"{path}: missing required field {exc}") from exc
    solvers = raw.pop("solvers", None)
    specs: Sequence[SolverSpec]
    if solvers is None:
        specs = DEFAULT_SOLVERS
    else:
        specs = tuple(
            SolverSpec(
                name=s["name"],
                lazy=bool(s.get("lazy", True)),
                warm=bool(s.get("warm", True)),
                schedule=s.get("schedule", "canonical"),
                order=s.get("order", "cheap-first"),
            )
            for s in solvers
        )
    known = {
        "trials", "seed", "alpha", "max_candidates", "horizon", "process_noise",
        "sigma0_pos", "sigma0_vel", "hold_steps", "downsample", "outdir", "plots",
        "traces",
    }
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown config fields {sorted(unknown)}")
    return ScenarioConfig(scenario=scenario, sweep=sweep, solvers=specs, **raw)


def trajectory_set_hash(instance: Instance) -> str:
    """Stable digest of the full candidate set a trial ran on."""
    h = hashlib.sha256()
    matroid = instance.matroid
    for traj_id in range(matroid.size):
        traj = matroid.traj(traj_id)
        h.update(repr((traj.robot_id, traj.controls, traj.energy,
                       traj.standalone_score)).encode())
    return h.hexdigest()[:16]


def build_instance(cfg: ScenarioConfig, point: float, trial: int) -> Instance:
    seed = cfg.seed + trial
    if cfg.scenario == 1:
        return build_scenario1(
            int(point),
            seed,
            horizon=cfg.horizon or 10,
            max_candidates=cfg.max_candidates,
            process_noise=cfg.process_noise,
            sigma0_pos=cfg.sigma0_pos,
            sigma0_vel=cfg.sigma0_vel,
            downsample=cfg.downsample,
        )
    return build_scenario2(
        float(point),
        seed,
        horizon=cfg.horizon or 20,
        max_candidates=cfg.max_candidates,
        hold_steps=cfg.hold_steps,
        sigma0_pos=cfg.sigma0_pos,
        downsample=cfg.downsample,
    )


def cd_order(instance: Instance, order: str) -> list[int]:
    """Cheapest robots plan first (ascending max step cost), or reversed."""
    key = lambda r: (r.weight * r.max_step_cost(), r.robot_id)
    robots = sorted(instance.world.robots, key=key)
    ids = [r.robot_id for r in robots]
    if order == "expensive-first":
        ids.reverse()
    elif order != "cheap-first":
        raise ValueError(f"unknown cd order {order!r}")
    return ids


def run_solver(
    spec: SolverSpec, instance: Instance, alpha: float
) -> tuple[object, float]:
    """One solver run on a fresh counting oracle; returns (result, runtime)."""
    evaluator = ObjectiveEvaluator(instance.world, instance.matroid)
    oracle = make_oracle(evaluator)
    t0 = time.perf_counter()
    if spec.name == "cls":
        result = local_search(instance.matroid, alpha, oracle)
    elif spec.name == "dls":
        result = dls_run(
            make_agents(instance.matroid),
            alpha,
            oracle,
            lazy=spec.lazy,
            warm_start=spec.warm,
            schedule=spec.schedule,
        )
    elif spec.name == "cd":
        result = coordinate_descent(instance.matroid, cd_order(instance, spec.order), oracle)
    else:
        raise ValueError(f"unknown solver {spec.name!r}")
    return result, time.perf_counter() - t0


def run_experiment(cfg: ScenarioConfig) -> list[TrialRecord]:
    """Full sweep; returns the records and writes CSV/trace artifacts."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    records: list[TrialRecord] = []
    for point in cfg.sweep:
        for trial in range(cfg.trials):
            instance = build_instance(cfg, point, trial)
            evaluator = ObjectiveEvaluator(instance.world, instance.matroid)
            set_hash = trajectory_set_hash(instance)
            n_ground = max(instance.matroid.size, 1)
            for spec in cfg.solvers:
                result, runtime = run_solver(spec, instance, cfg.alpha)
                ids = result.solution.ids
                mi = evaluator.mutual_info(ids)
                c = evaluator.energy_cost(ids)
                raw = sum(instance.matroid.traj(i).energy for i in ids)
                rec = TrialRecord(
                    scenario=cfg.scenario,
                    n_or_r=float(point),
                    trial=trial,
                    solver=spec.name,
                    variant=spec.variant,
                    g=result.g_value,
                    j=result.j_value,
                    mi=mi,
                    c=c,
                    energy_raw=raw,
                    oracle_calls=result.metrics.oracle_calls,
                    oracle_calls_per_n=result.metrics.oracle_calls / n_ground,
                    proposal_exchanges=result.metrics.proposal_exchanges,
                    runtime_s=runtime,
                    traj_set_hash=set_hash,
                )
                records.append(rec)
                if cfg.traces and spec.name == "dls":
                    _write_trace(outdir, cfg, instance, spec, result)
    write_trial_csv(outdir / f"scenario{cfg.scenario}_trials.csv", records)
    write_aggregate_csv(outdir / f"scenario{cfg.scenario}_aggregate.csv", records)
    if cfg.plots:
        write_plots(outdir, cfg, records)
    return records


def _write_trace(
    outdir: Path, cfg: ScenarioConfig, instance: Instance, spec: SolverSpec, result
) -> None:
    matroid = instance.matroid
    path = outdir / f"trace_{instance.label}_{spec.variant.replace('@', '_')}.jsonl"
    header = {
        "label": instance.label,
        "alpha": cfg.alpha,
        "n_ground": matroid.size,
        "schedule": spec.schedule,
        "partition_sizes": [len(matroid.ids_of_robot(r)) for r in matroid.robot_ids],
        "final_ids": list(result.solution.ids),
        "g_value": result.g_value,
    }
    with path.open("w") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in result.commit_log:
            fh.write(json.dumps(rec.__dict__) + "\n")


def write_trial_csv(path: Path, records: Iterable[TrialRecord]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.row())


def _agg_rows(records: Sequence[TrialRecord]):
    groups: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.n_or_r, rec.solver, rec.variant), []).append(rec)
    for (point, solver, variant), recs in sorted(groups.items(), key=lambda kv: kv[0]):
        row = {
            "scenario": recs[0].scenario,
            "n_or_r": f"{point:g}",
            "solver": solver,
            "variant": variant,
            "trials": len(recs),
        }
        by_name = {
            "g": [r.g for r in recs],
            "J": [r.j for r in recs],
            "MI": [r.mi for r in recs],
            "C": [r.c for r in recs],
            "energy_raw": [r.energy_raw for r in recs],
            "oracle_calls": [float(r.oracle_calls) for r in recs],
            "oracle_calls_per_N": [r.oracle_calls_per_n for r in recs],
            "proposal_exchanges": [float(r.proposal_exchanges) for r in recs],
        }
        for name in AGG_METRICS:
            vals = by_name[name]
            row[f"{name}_mean"] = repr(statistics.fmean(vals))
            row[f"{name}_std"] = repr(statistics.pstdev(vals) if len(vals) > 1 else 0.0)
        yield row


def write_aggregate_csv(path: Path, records: Sequence[TrialRecord]) -> None:
    cols = ["scenario", "n_or_r", "solver", "variant", "trials"]
    for name in AGG_METRICS:
        cols += [f"{name}_mean", f"{name}_std"]
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in _agg_rows(records):
            writer.writerow(row)


def write_plots(outdir: Path, cfg: ScenarioConfig, records: Sequence[TrialRecord]) -> None:
    """Static SVGs from the aggregates; objective curves for scenario 1,
    the sensing/energy trade-off for scenario 2."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = list(_agg_rows(records))
    variants = sorted({(r["solver"], r["variant"]) for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    if cfg.scenario == 1:
        for solver, variant in variants:
            pts = [(float(r["n_or_r"]), float(r["g_mean"])) for r in rows
                   if r["solver"] == solver and r["variant"] == variant]
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    label=f"{solver} {variant}")
        ax.set_xlabel("robots")
        ax.set_ylabel("mean g")
    else:
        for solver, variant in variants:
            pts = [(float(r["MI_mean"]), float(r["energy_raw_mean"])) for r in rows
                   if r["solver"] == solver and r["variant"] == variant]
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    label=f"{solver} {variant}")
        ax.set_xlabel("mean MI")
        ax.set_ylabel("mean raw energy")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(outdir / f"scenario{cfg.scenario}_summary.svg")
    plt.close(fig)
