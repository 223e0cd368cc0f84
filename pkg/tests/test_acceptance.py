"""Whole-system acceptance checks, numbered 01 to 10.

Each test asserts one shipping claim end to end, so a verbose run reads
as the acceptance report with one pass or fail line per claim. The two
scenario sweeps dominate the runtime and are shared module fixtures;
everything else runs on small randomized instances. Measured numbers
are printed (visible with -s or -rA) and repeated in assert messages.
"""

from __future__ import annotations

import math
from statistics import fmean
from typing import NamedTuple

import numpy as np
import pytest

from teamsense.bench.instances import instance_oracle, random_instance
from teamsense.bench.runner import cd_order
from teamsense.bench.scenarios import Instance, build_scenario1, build_scenario2
from teamsense.filtering import kf_update_info, mi_from_info_stacks
from teamsense.objective import ObjectiveEvaluator, PartitionMatroid
from teamsense.solvers import (
    brute_force_opt,
    commit_bound,
    coordinate_descent,
    dls_run,
    local_search,
    make_agents,
)
from teamsense.solvers.dls import CONCURRENT
from teamsense.trajgen import downsample_best

ALPHA = 1.0
FACTOR = 4.0 * (1.0 + ALPHA)
NS = tuple(range(2, 7))
SEEDS = tuple(range(20))
R_VALUES = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


class S1Run(NamedTuple):
    g: float
    calls: int
    exchanges: int
    commits: tuple


class S2Run(NamedTuple):
    g: float
    mi: float
    raw: float


def _commits(result) -> tuple:
    return tuple(
        (r.round_k, r.category, r.proposer, r.d, r.a)
        for r in result.commit_log
        if r.committed
    )


def _s1_stats(result) -> S1Run:
    return S1Run(
        g=result.g_value,
        calls=result.metrics.oracle_calls,
        exchanges=result.metrics.proposal_exchanges,
        commits=_commits(result),
    )


def _downsampled(inst: Instance, fraction: float = 0.1) -> Instance:
    parts = {
        rid: downsample_best(
            [inst.matroid.traj(i) for i in inst.matroid.ids_of_robot(rid)], fraction
        )
        for rid in inst.matroid.robot_ids
    }
    return Instance(inst.world, PartitionMatroid(parts), f"{inst.label}-ds")


def _solve_s1(inst: Instance) -> dict[str, S1Run]:
    out = {}
    dls_variants = {
        "ec": dict(lazy=False, warm_start=False),
        "lc": dict(lazy=True, warm_start=False),
        "lw": dict(lazy=True, warm_start=True),
    }
    for key, kwargs in dls_variants.items():
        oracle = instance_oracle(inst.world, inst.matroid)
        out[key] = _s1_stats(dls_run(make_agents(inst.matroid), ALPHA, oracle, **kwargs))
    for key, order in (("cd", "cheap-first"), ("cdr", "expensive-first")):
        oracle = instance_oracle(inst.world, inst.matroid)
        out[key] = _s1_stats(
            coordinate_descent(inst.matroid, cd_order(inst, order), oracle)
        )
    ds = _downsampled(inst)
    oracle = instance_oracle(ds.world, ds.matroid)
    out["ds_dls"] = _s1_stats(dls_run(make_agents(ds.matroid), ALPHA, oracle))
    for key, order in (("ds_cd", "cheap-first"), ("ds_cdr", "expensive-first")):
        oracle = instance_oracle(ds.world, ds.matroid)
        out[key] = _s1_stats(
            coordinate_descent(ds.matroid, cd_order(ds, order), oracle)
        )
    return out


@pytest.fixture(scope="module")
def s1_sweep():
    """Tracking scenario, n = 2..6, 20 seeds each, all solver variants."""
    return {
        (n, seed): _solve_s1(build_scenario1(n, seed))
        for n in NS
        for seed in SEEDS
    }


@pytest.fixture(scope="module")
def s2_sweep():
    """Heterogeneous scenario, r swept 0 to 0.5, 20 seeds each."""
    rows = {}
    for r in R_VALUES:
        for seed in SEEDS:
            inst = build_scenario2(r, seed)
            evaluator = ObjectiveEvaluator(inst.world, inst.matroid)
            row = {}
            for key, run in (
                ("dls", lambda: dls_run(
                    make_agents(inst.matroid), ALPHA,
                    instance_oracle(inst.world, inst.matroid))),
                ("cd", lambda: coordinate_descent(
                    inst.matroid, cd_order(inst, "cheap-first"),
                    instance_oracle(inst.world, inst.matroid))),
                ("cdr", lambda: coordinate_descent(
                    inst.matroid, cd_order(inst, "expensive-first"),
                    instance_oracle(inst.world, inst.matroid))),
            ):
                res = run()
                ids = res.solution.ids
                row[key] = S2Run(
                    g=res.g_value,
                    mi=evaluator.mutual_info(ids),
                    raw=sum(inst.matroid.traj(i).energy for i in ids),
                )
            rows[(r, seed)] = row
    return rows


def test_01_worst_case_factor_holds():
    # both solvers must land within 4(1+alpha) of the exhaustive optimum
    worst = math.inf
    for seed in range(200):
        world, matroid = random_instance(seed)
        oracle = instance_oracle(world, matroid)
        g_opt = oracle(brute_force_opt(matroid, oracle))
        bound = g_opt / FACTOR
        for name, res in (
            ("cls", local_search(matroid, ALPHA, oracle)),
            ("dls", dls_run(make_agents(matroid), ALPHA, oracle)),
        ):
            assert res.g_value >= bound - 1e-9, (
                f"seed {seed} {name}: g={res.g_value!r} under bound={bound!r}"
            )
            if g_opt > 0.0:
                worst = min(worst, res.g_value / g_opt)
    print(f"[01] factor {FACTOR:g} bound held on 200 instances, "
          f"worst observed ratio {worst:.3f}")


def test_02_central_and_distributed_traces_match():
    # canonical schedule, warm start off: same moves, same answer, bit for bit
    for seed in range(300, 400):
        world, matroid = random_instance(seed)
        oracle = instance_oracle(world, matroid)
        res_ls = local_search(matroid, ALPHA, oracle)
        res_dls = dls_run(make_agents(matroid), ALPHA, oracle, warm_start=False)
        assert res_ls.op_trace == res_dls.op_trace, f"seed {seed}: op traces differ"
        assert res_ls.solution.ids == res_dls.solution.ids, f"seed {seed}: finals differ"
        assert res_ls.g_value == res_dls.g_value, f"seed {seed}: g values differ"
    print("[02] traces and finals bit-identical on 100 instances")


def test_03_lazy_pruning_sound_and_saves_oracle_calls(s1_sweep):
    for (n, seed), row in s1_sweep.items():
        assert row["ec"].commits == row["lc"].commits, (
            f"n={n} seed={seed}: lazy toggle changed the committed proposals"
        )
        assert row["ec"].g == row["lc"].g, f"n={n} seed={seed}: lazy toggle changed g"
    naive = fmean(row["ec"].calls for row in s1_sweep.values())
    lazy_warm = fmean(row["lw"].calls for row in s1_sweep.values())
    reduction = 1.0 - lazy_warm / naive
    assert reduction >= 0.50, (
        f"oracle-call reduction {reduction:.1%} below 50% "
        f"(naive mean {naive:.0f}, lazy+warm mean {lazy_warm:.0f})"
    )
    print(f"[03] lazy sound on {len(s1_sweep)} pairs; lazy+warm cuts mean oracle "
          f"calls by {reduction:.1%} ({naive:.0f} -> {lazy_warm:.0f}) at desk scale")


def test_04_warm_start_cuts_messages(s1_sweep):
    cold = fmean(row["lc"].exchanges for row in s1_sweep.values())
    warm = fmean(row["lw"].exchanges for row in s1_sweep.values())
    reduction = 1.0 - warm / cold
    assert reduction > 0.0, (
        f"warm start did not cut messages (cold mean {cold:.1f}, warm mean {warm:.1f})"
    )
    by_n = {
        n: 1.0 - fmean(s1_sweep[(n, s)]["lw"].exchanges for s in SEEDS)
        / fmean(s1_sweep[(n, s)]["lc"].exchanges for s in SEEDS)
        for n in NS
    }
    detail = ", ".join(f"n={n}: {v:+.0%}" for n, v in by_n.items())
    print(f"[04] warm start cuts mean proposal exchanges by {reduction:.1%} "
          f"({cold:.1f} -> {warm:.1f}; per n: {detail})")


def _mean_by_n(s1_sweep, key: str) -> dict[int, float]:
    return {n: fmean(s1_sweep[(n, s)][key].g for s in SEEDS) for n in NS}


def test_05_distributed_beats_coordinate_descent(s1_sweep):
    dls = _mean_by_n(s1_sweep, "lw")
    for key in ("cd", "cdr"):
        cd = _mean_by_n(s1_sweep, key)
        gaps = {n: dls[n] - cd[n] for n in NS}
        for n in NS:
            assert gaps[n] >= 0.0, (
                f"mean g: dls {dls[n]:.3f} < {key} {cd[n]:.3f} at n={n}"
            )
        assert gaps[NS[-1]] > gaps[NS[0]], (
            f"{key} gap does not widen: {gaps[NS[0]]:.3f} at n={NS[0]} vs "
            f"{gaps[NS[-1]]:.3f} at n={NS[-1]}"
        )
    gap_lo = dls[NS[0]] - _mean_by_n(s1_sweep, "cd")[NS[0]]
    gap_hi = dls[NS[-1]] - _mean_by_n(s1_sweep, "cd")[NS[-1]]
    print(f"[05] dls >= cd (both orders) at every n; cheap-first gap widens "
          f"{gap_lo:.3f} -> {gap_hi:.3f}")


def test_06_cd_cheap_first_beats_expensive_first(s1_sweep):
    cheap = fmean(row["cd"].g for row in s1_sweep.values())
    expensive = fmean(row["cdr"].g for row in s1_sweep.values())
    assert cheap >= expensive, (
        f"cheap-first mean g {cheap:.3f} < expensive-first {expensive:.3f}"
    )
    print(f"[06] planning order matters: cheap-first mean g {cheap:.3f} "
          f">= expensive-first {expensive:.3f}")


def test_07_energy_weight_sweep_tradeoff(s2_sweep):
    dls_raw = [fmean(s2_sweep[(r, s)]["dls"].raw for s in SEEDS) for r in R_VALUES]
    dls_mi = [fmean(s2_sweep[(r, s)]["dls"].mi for s in SEEDS) for r in R_VALUES]
    # realized energy must trend down as it gets more expensive; one small
    # inversion (under 5% of the sweep mean) is tolerated
    overall = fmean(dls_raw)
    inversions = [
        (R_VALUES[i], dls_raw[i + 1] - dls_raw[i])
        for i in range(len(R_VALUES) - 1)
        if dls_raw[i + 1] > dls_raw[i]
    ]
    assert len(inversions) <= 1 and all(v <= 0.05 * overall for _, v in inversions), (
        f"energy not non-increasing over r: means {dls_raw}, inversions {inversions}"
    )
    for key in ("cd", "cdr"):
        for i, r in enumerate(R_VALUES):
            cd_mi = fmean(s2_sweep[(r, s)][key].mi for s in SEEDS)
            cd_raw = fmean(s2_sweep[(r, s)][key].raw for s in SEEDS)
            dominated = (
                cd_mi >= dls_mi[i]
                and cd_raw <= dls_raw[i]
                and (cd_mi > dls_mi[i] or cd_raw < dls_raw[i])
            )
            assert not dominated, (
                f"{key} dominates dls at r={r}: mi {cd_mi:.3f} vs {dls_mi[i]:.3f}, "
                f"energy {cd_raw:.1f} vs {dls_raw[i]:.1f}"
            )
    print(f"[07] dls mean energy falls {dls_raw[0]:.1f} -> {dls_raw[-1]:.1f} over r; "
          f"no cd point dominates")


def test_08_filter_numerics_and_mi_properties():
    # scalar one-step case with unit prior, unit walk noise, unit info:
    # prediction doubles the variance, the update cuts it to 2/3
    ones = np.ones((1, 1, 1))
    got = mi_from_info_stacks(ones, ones, ones, np.ones((1, 1, 1, 1)))
    assert abs(got - 0.5 * math.log(3.0)) < 1e-12

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 5))
        a = rng.normal(size=(d, d))
        sigma = a @ a.T + 0.1 * np.eye(d)
        rows = int(rng.integers(1, d + 1))
        h = rng.normal(size=(rows, d))
        v = np.diag(rng.uniform(0.2, 5.0, rows))
        via_info = kf_update_info(sigma, [h.T @ np.linalg.inv(v) @ h])
        k = sigma @ h.T @ np.linalg.inv(h @ sigma @ h.T + v)
        ikh = np.eye(d) - k @ h
        via_gain = ikh @ sigma @ ikh.T + k @ v @ k.T
        worst = max(worst, float(np.abs(via_info - via_gain).max()))
    assert worst < 1e-8, f"info form vs gain form diverge by {worst:.2e}"

    # set-function properties on random nested selections
    py_rng = np.random.default_rng(7)
    checks = 0
    for seed in range(500, 560):
        world, matroid = random_instance(seed)
        if matroid.size < 2:
            continue
        evaluator = ObjectiveEvaluator(world, matroid)
        assert evaluator.mutual_info(()) == 0.0
        ground = list(range(matroid.size))
        for _ in range(5):
            x = int(py_rng.choice(ground))
            rest = [i for i in ground if i != x]
            b = [i for i in rest if py_rng.random() < 0.5]
            a_set = [i for i in b if py_rng.random() < 0.5]
            mi_a = evaluator.mutual_info(a_set)
            mi_b = evaluator.mutual_info(b)
            assert mi_a >= -1e-9, f"seed {seed}: negative MI {mi_a!r}"
            assert mi_b >= mi_a - 1e-9, f"seed {seed}: MI not monotone"
            gain_a = evaluator.mutual_info(a_set + [x]) - mi_a
            gain_b = evaluator.mutual_info(b + [x]) - mi_b
            assert gain_a >= gain_b - 1e-9, f"seed {seed}: gains not diminishing"
            checks += 1
    assert checks >= 200
    print(f"[08] half-ln-3 exact to 1e-12; info vs gain worst gap {worst:.1e} "
          f"over 1000 draws; {checks} nested-set MI checks passed")


def test_09_concurrent_protocol_fuzz():
    worst_ratio = 0.0
    for seed in range(1000, 2000):
        world, matroid = random_instance(seed)
        oracle = instance_oracle(world, matroid)
        agents = make_agents(matroid)
        res = dls_run(agents, ALPHA, oracle, schedule=CONCURRENT)

        finals = {ag.local_s.ids for ag in agents if ag.local_s is not None}
        assert len(finals) <= 1, f"seed {seed}: agents disagree on the final set"

        commits = [r for r in res.commit_log if r.committed]
        pass_finals = []
        for round_k in (1, 2):
            held: dict[int, int] = {}
            for rec in (r for r in commits if r.round_k == round_k):
                if rec.d is not None:
                    rid = matroid.robot_of(rec.d)
                    assert held.get(rid) == rec.d, f"seed {seed}: deleted an unheld id"
                    del held[rid]
                if rec.a is not None:
                    rid = matroid.robot_of(rec.a)
                    assert rid not in held, f"seed {seed}: robot holds two trajectories"
                    held[rid] = rec.a
            pass_finals.append(tuple(sorted(held.values())))
        assert res.solution.ids in pass_finals, f"seed {seed}: final not a pass result"

        searches = [r for r in commits if r.category != "init"]
        if searches:
            g0 = min(r.g_before for r in searches)
            g1 = max(r.g_after for r in searches)
            if g0 > 0.0:
                cap = 2 * commit_bound(g0, g1, ALPHA, matroid.size) + 2
                assert len(searches) <= cap, (
                    f"seed {seed}: {len(searches)} commits exceed bound {cap}"
                )
                worst_ratio = max(worst_ratio, len(searches) / cap)
    print(f"[09] 1000 concurrent runs: admissible after every commit, agents "
          f"consistent, worst commits/bound ratio {worst_ratio:.2f}")


def test_10_downsampled_ordering_holds(s1_sweep):
    dls = _mean_by_n(s1_sweep, "ds_dls")
    gaps_at = {}
    for key in ("ds_cd", "ds_cdr"):
        cd = _mean_by_n(s1_sweep, key)
        for n in NS:
            assert dls[n] >= cd[n], (
                f"best-10% subset: mean g dls {dls[n]:.3f} < {key} {cd[n]:.3f} at n={n}"
            )
        gaps_at[key] = (dls[NS[0]] - cd[NS[0]], dls[NS[-1]] - cd[NS[-1]])
    lo, hi = gaps_at["ds_cd"]
    print(f"[10] ordering survives the best-10% cut at every n; cheap-first gap "
          f"{lo:.3f} at n={NS[0]}, {hi:.3f} at n={NS[-1]}")
