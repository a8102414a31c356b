"""Acceptance gate: each test checks one criterion at its stated tolerance and
records a pass/fail line that is printed in the pytest terminal summary."""
import itertools
import math
import time

import numpy as np
import pytest

from lmrsp.capacity import (boundary_point, capacity_membership, direction_grid,
                            estimate_psi_phi, frozen_hull_gauge, min_load, theta_min)
from lmrsp.channel import FROZEN, ChannelModel, all_states, mixing_horizon
from lmrsp.config import ExperimentConfig
from lmrsp.engine import System, make_rng, simulate
from lmrsp.experiment import STABLE, UNSTABLE, metrics_to_csv, run_many
from lmrsp.policy import (EXACT, GREEDY_MATCHING, NOISY_GREEDY, NOISY_ORACLE, UNIFORM,
                          LmrspState, PolicyParams, f_update_prob, gmwm_solve, lmrsp_step)
from lmrsp.queueing import ArrivalModel
from lmrsp.topology import InterferenceModel, NetworkGraph, enumerate_schedules

from conftest import brute_schedules, random_graph, record_criterion

pytestmark = pytest.mark.acceptance

SEEDS = (0, 1, 2, 3, 4)
T_LONG = 1_000_000


def _check(number, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    record_criterion(number, ok, f"{detail} ({elapsed:.1f}s, budget {budget:.0f}s)")
    assert ok, detail


def test_c01_update_function_exact():
    t0 = time.perf_counter()
    bad = 0
    for rho in (0.02, 0.01, 0.3, 1 / 3):
        grid = np.linspace(-2 * rho, 2 * rho, 10_000)
        anchors = (f_update_prob(rho, rho) == 1.0 and f_update_prob(-rho, rho) == 0.0
                   and f_update_prob(0.0, rho) == 0.5)
        bad += (not anchors) + sum(f_update_prob(x, rho) + f_update_prob(-x, rho) != 1.0
                                   for x in grid.tolist())
    _check(1, bad == 0, f"{bad} grid violations", time.perf_counter() - t0, 1)


def test_c02_gmwm_matches_exhaustive_search():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20)
    mismatches = 0
    for _ in range(200):
        g = random_graph(rng, max_edges=8)
        n = g.n_links
        kappa = int(rng.integers(1, 3))
        model = ChannelModel(tuple(rng.uniform(0.2, 4.0, n)))
        X = rng.uniform(0, 100, n).tolist()
        s = rng.integers(0, 2, n).tolist()
        got, value = gmwm_solve(X, s, enumerate_schedules(g, InterferenceModel(kappa)), model)
        best, best_v = None, None
        for row in sorted(brute_schedules(g, kappa)):
            v = 0.0
            for x, gr, st_, on in zip(X, model.good_rates, s, row):
                if on:
                    v += x * gr if st_ else 0.0
            if best is None or v > best_v:
                best, best_v = row, v
        mismatches += (got != best) or (value != best_v)
    _check(2, mismatches == 0, f"{mismatches}/200 mismatches", time.perf_counter() - t0, 30)


def test_c03_per_step_drift_invariant():
    t0 = time.perf_counter()
    rng = np.random.default_rng(30)
    kinds = (EXACT, UNIFORM, NOISY_ORACLE, GREEDY_MATCHING, NOISY_GREEDY)
    violations = steps = 0
    for k in range(10):
        g = random_graph(rng, max_edges=6)
        n = g.n_links
        good = rng.integers(1, 4, n).astype(float)
        ch = ChannelModel(tuple(good), r=float(rng.uniform(0.05, 0.95)))
        p = PolicyParams(alpha=float(rng.uniform(1e-3, 0.5)), rho=float(rng.uniform(0.005, 0.3)),
                         delta=float(rng.uniform(0.2, 1.0)), oracle_kind=kinds[k % 5])
        arrivals = ArrivalModel(tuple(rng.uniform(0.05, 0.6, n)))
        system = System(g, InterferenceModel(1), ch, p, arrivals)
        res = simulate(system, 10_001, k, warmup=0.0, trace=True)
        X = res.trace["X"].astype(float)
        S = res.trace["s"].astype(float)
        I = res.trace["schedule"]
        rows = system.schedules.matrix.astype(float)
        rate_now = rows[I[1:]] * S[1:] * good
        rate_held = rows[I[:-1]] * S[1:] * good
        Xt = X[1:]
        lhs = (Xt * (rate_now - (1 - p.rho) * rate_held)).sum(axis=1)
        norm = np.sqrt((Xt * Xt).sum(axis=1))
        live = norm > 0
        violations += int(np.sum(~(lhs[live] > -p.rho * p.alpha * norm[live])))
        steps += int(live.sum())
    _check(3, violations == 0 and steps > 50_000,
           f"{violations} violations over {steps} non-empty steps", time.perf_counter() - t0, 60)


def test_c04_psi_phi_bound():
    t0 = time.perf_counter()
    g = NetworkGraph.path(4)
    rho = 0.02
    cells = []
    for r in (0.1, 0.3, 0.5):
        ch = ChannelModel((1.0,) * 4, r=r)
        system = System(g, InterferenceModel(1), ch,
                        PolicyParams(alpha=0.01, rho=rho, delta=0.5, oracle_kind=NOISY_ORACLE))
        k0 = mixing_horizon(4, r)
        rng = make_rng(400 + int(r * 10))
        grid = direction_grid(4, 11, rng)
        assert len(grid) == 16
        factor = r + (1 - r) * rho
        for x in grid:
            pp = estimate_psi_phi(1e6 * x, system, 200 * k0, 200, rng, burn_in=10 * k0)
            gap = pp.bound_gap(factor)
            cells.append((r, gap.value <= 3 * gap.stderr, gap.value / max(gap.stderr, 1e-300)))
    failed = [c for c in cells if not c[1]]
    worst = max(c[2] for c in cells)
    _check(4, not failed, f"{len(cells) - len(failed)}/{len(cells)} cells hold, "
           f"max (psi - c phi)/stderr = {worst:.1f}", time.perf_counter() - t0, 120)


def _config(graph, channel, means, policy, seed=0):
    return ExperimentConfig(graph=graph, interference=InterferenceModel(1), channel=channel,
                            arrivals=ArrivalModel(tuple(float(a) for a in means)),
                            policy=policy, horizon=T_LONG, seeds=(seed,))


def _criterion5_jobs():
    g = NetworkGraph.path(4)
    ch = ChannelModel((1.0,) * 4, r=0.2)
    p = PolicyParams(alpha=0.01, rho=0.02, zeta=0.0, delta=0.5, oracle_kind=NOISY_ORACLE)
    b = boundary_point((1, 1, 1, 1), ch, enumerate_schedules(g, InterferenceModel(1)))
    th = theta_min(0.0, 0.02, 0.5, 0.2)
    loads = (0.7 * th, 0.9 * th, 1.05)
    jobs = [(_config(g, ch, load * b, p), seed, load) for seed in SEEDS for load in loads]
    return jobs, loads, th


def test_c05_stable_inside_guaranteed_region():
    t0 = time.perf_counter()
    jobs, loads, th = _criterion5_jobs()
    runs = run_many(jobs)
    by_load = {load: [m.verdict for m in runs if m.load == load] for load in loads}
    ok = (abs(th - 0.98 / 1.216) < 1e-12
          and by_load[loads[0]] == [STABLE] * 5 and by_load[loads[1]] == [STABLE] * 5
          and by_load[loads[2]] == [UNSTABLE] * 5)
    summary = ", ".join(f"{load:.3f}: {v.count(STABLE)}S/{v.count(UNSTABLE)}U"
                        for load, v in by_load.items())
    _check(5, ok, f"theta_min={th:.4f}; {summary}", time.perf_counter() - t0, 300)


def test_c06_throughput_optimality_limit():
    t0 = time.perf_counter()
    g = NetworkGraph.path(2)
    ch = ChannelModel((1.0, 1.0), kind=FROZEN)
    sched = enumerate_schedules(g, InterferenceModel(1))
    p = PolicyParams(alpha=0.01, rho=0.01, zeta=0.0, delta=1.0 / len(sched), oracle_kind=UNIFORM)
    b = boundary_point((1, 1), ch, sched)
    runs = run_many([(_config(g, ch, 0.9 * b, p), seed, 0.9) for seed in SEEDS])
    verdicts = [m.verdict for m in runs]
    _check(6, verdicts == [STABLE] * 5,
           f"{verdicts.count(STABLE)}/5 stable at load 0.9, mean queue "
           f"{np.mean([m.mean_total_queue for m in runs]):.1f}", time.perf_counter() - t0, 120)


def test_c07_delay_grows_with_correlation():
    t0 = time.perf_counter()
    g = NetworkGraph.path(4)
    sched = enumerate_schedules(g, InterferenceModel(1))
    p = PolicyParams(alpha=0.01, rho=0.02, delta=0.5, oracle_kind=NOISY_ORACLE)
    medians = []
    effective = []
    for r in (0.5, 0.25, 0.125):
        ch = ChannelModel((1.0,) * 4, r=r)
        a = 0.8 * theta_min(0.0, 0.02, 0.5, r) * boundary_point((1, 1, 1, 1), ch, sched)
        runs = run_many([(_config(g, ch, a, p), seed, r) for seed in SEEDS])
        delays = [m.delay for m in runs]
        medians.append(math.nan if None in delays else float(np.median(delays)))
        effective.append(runs[0].effective_load)
    ok = (all(not math.isnan(d) for d in medians)
          and medians[0] <= medians[1] <= medians[2]
          and all(abs(e - 0.8) < 1e-6 for e in effective))
    _check(7, ok, "median delay r=0.5/0.25/0.125: " + " <= ".join(f"{d:.2f}" for d in medians),
           time.perf_counter() - t0, 300)


GRAPHS = {
    "P3": (3, ((0, 1), (1, 2))),
    "2K2": (4, ((0, 1), (2, 3))),
    "P4": (4, ((0, 1), (1, 2), (2, 3))),
    "star": (4, ((0, 1), (0, 2), (0, 3))),
    "triangle": (3, ((0, 1), (1, 2), (0, 2))),
    "P3+K2": (5, ((0, 1), (1, 2), (3, 4))),
    "3K2": (6, ((0, 1), (2, 3), (4, 5))),
}


def test_c08_capacity_lp_matches_hull():
    t0 = time.perf_counter()
    rng = np.random.default_rng(80)
    checked = disagreements = 0
    for name, (nodes, edges) in GRAPHS.items():
        g = NetworkGraph(nodes, edges)
        n = g.n_links
        for kappa in (1, 2):
            sched = enumerate_schedules(g, InterferenceModel(kappa))
            for state in all_states(n):
                for rates in ((1.0,) * n, tuple(rng.integers(1, 4, n).astype(float))):
                    ch = ChannelModel(rates, kind=FROZEN, initial_state=tuple(state))
                    for _ in range(8):
                        a = rng.uniform(0, 1.2, n) * (rng.random(n) < 0.85)
                        inside = capacity_membership(a, ch, sched).inside
                        gauge = frozen_hull_gauge(a, ch, sched)
                        lp, *_ = min_load(a, ch, sched)
                        same_value = (math.isinf(lp) and math.isinf(gauge)) or abs(lp - gauge) <= 1e-8
                        hull_inside = 1.0 - gauge > 1e-8
                        disagreements += (inside != hull_inside) or not same_value
                        checked += 1
    _check(8, disagreements == 0, f"{disagreements}/{checked} disagreements",
           time.perf_counter() - t0, 30)


def test_c09_scale_invariance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(90)
    graphs = [NetworkGraph.path(4)] + [random_graph(rng, max_edges=6) for _ in range(4)]
    differ = trials = 0
    for kind in (EXACT, UNIFORM, GREEDY_MATCHING):
        p = PolicyParams(alpha=0.01, rho=0.02, oracle_kind=kind)
        for trial in range(10_000):
            g = graphs[trial % len(graphs)]
            sched = enumerate_schedules(g, InterferenceModel(1))
            n = g.n_links
            ch = ChannelModel(tuple(float(x) for x in rng.integers(1, 4, n)), r=0.3)
            X = rng.integers(0, 1000, n)
            s = tuple(rng.integers(0, 2, n).tolist())
            prev = sched[int(rng.integers(len(sched)))]
            seed = int(rng.integers(1 << 63))
            a, _ = lmrsp_step(LmrspState(prev), p, X.tolist(), s, sched, ch, make_rng(seed))
            b, _ = lmrsp_step(LmrspState(prev), p, (7 * X).tolist(), s, sched, ch, make_rng(seed))
            differ += a != b
            trials += 1
    _check(9, differ == 0, f"{differ}/{trials} paired choices differ",
           time.perf_counter() - t0, 60)


def test_c10_rerun_is_bit_identical():
    t0 = time.perf_counter()
    jobs, _, _ = _criterion5_jobs()
    first = metrics_to_csv(run_many(jobs))
    second = metrics_to_csv(run_many(list(reversed(jobs)), parallel=2))
    _check(10, first == second and len(first.splitlines()) == 16,
           "criterion-5 CSV identical across reruns and worker counts",
           time.perf_counter() - t0, 600)
