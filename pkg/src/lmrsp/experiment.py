"""End-to-end runs: simulate a configured network, judge stability, sweep loads, write results."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import capacity, engine
from .config import ExperimentConfig, StabilityThresholds
from .errors import SeriesTooShort, SizeLimitExceeded, UndefinedDelay, ZeroNu
from .rates import nu

STABLE = "stable"
UNSTABLE = "unstable"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: str
    slope: float
    normalized_slope: float
    second_quarter_mean: float
    final_quarter_mean: float


def _ls_slope(y: np.ndarray) -> float:
    n = y.size
    t = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    yc = y.astype(np.float64) - y.mean(dtype=np.float64)
    return float(np.dot(t, yc) / np.dot(t, t))


def detect_stability(queue_totals: Sequence[float], warmup: float, arrival_volume: float,
                     thresholds: StabilityThresholds = StabilityThresholds()) -> StabilityVerdict:
    """Classify a total-queue series by its post-warmup trend.

    ``arrival_volume`` is the mean number of packets arriving per slot; the
    least-squares slope is divided by it before comparing to the thresholds.
    """
    y = np.asarray(queue_totals)
    window = y[int(y.size * warmup):]
    if window.size < thresholds.min_length:
        raise SeriesTooShort(
            f"{window.size} post-warmup samples, at least {thresholds.min_length} needed")
    slope = _ls_slope(window)
    if arrival_volume > 0:
        norm = slope / arrival_volume
    else:
        norm = 0.0 if slope == 0 else math.copysign(math.inf, slope)
    q = window.size // 4
    q2 = float(window[q:2 * q].mean(dtype=np.float64))
    q4 = float(window[3 * q:].mean(dtype=np.float64))
    if norm < thresholds.stable_slope and q4 <= thresholds.quarter_ratio * q2:
        verdict = STABLE
    elif norm > thresholds.unstable_slope:
        verdict = UNSTABLE
    else:
        verdict = INCONCLUSIVE
    return StabilityVerdict(verdict, slope, norm, q2, q4)


@dataclass
class RunMetrics:
    seed: int
    load: float | None
    arrival_means: tuple[float, ...]
    mean_total_queue: float
    per_link_queue: tuple[float, ...]
    delay: float | None
    effective_load: float | None
    verdict: str | None
    slope: float | None
    normalized_slope: float | None
    checksum: str
    throughput: float
    offered: float
    wasted: float
    final_total_queue: int
    thresholds: StabilityThresholds = field(default_factory=StabilityThresholds)
    diagnostics: dict = field(default_factory=dict)

    @property
    def arrival_total(self) -> float:
        return float(sum(self.arrival_means))


def average_delay(metrics: RunMetrics) -> float:
    """Little's-law delay: total time-averaged backlog over total arrival rate."""
    lam = metrics.arrival_total
    if lam <= 0:
        raise UndefinedDelay("no arrivals")
    if metrics.verdict != STABLE:
        raise UndefinedDelay(f"verdict is {metrics.verdict}, not stable")
    return sum(metrics.per_link_queue) / lam


def build_system(config: ExperimentConfig) -> engine.System:
    return engine.System(config.graph, config.interference, config.channel,
                         config.policy, config.arrivals)


def reference_theta(config: ExperimentConfig, n_schedules: int) -> float:
    zeta, delta = capacity.effective_guarantee(config.policy, n_schedules)
    r = config.channel.r if config.channel.kind != "frozen" else 0.0
    return capacity.theta_min(zeta, config.policy.rho, delta, r)


def effective_load(config: ExperimentConfig, system: engine.System) -> float | None:
    """Position of the arrival vector relative to the guaranteed region, or None if too large."""
    try:
        load, *_ = capacity.min_load(config.arrivals.means, config.channel, system.schedules)
    except SizeLimitExceeded:
        return None
    return load / reference_theta(config, len(system.schedules))


def _positivity_check(config: ExperimentConfig, system: engine.System) -> bool:
    zeta, delta = capacity.effective_guarantee(config.policy, len(system.schedules))
    nu_value = nu(config.channel, system.schedules)
    margin = delta * nu_value / math.sqrt(system.n_links) - config.policy.rho * config.policy.alpha
    if margin <= 0:
        warnings.warn(
            f"rho*alpha={config.policy.rho * config.policy.alpha:g} is not below "
            f"delta*nu/sqrt(N)={delta * nu_value / math.sqrt(system.n_links):g}",
            RuntimeWarning, stacklevel=3)
    return margin > 0


def run_simulation(config: ExperimentConfig, seed: int, load: float | None = None,
                   trace: bool | None = None, backend: str | None = None):
    """Simulate one replication. Returns (RunMetrics, trace dict or None)."""
    system = build_system(config)
    try:
        positive = _positivity_check(config, system)
    except ZeroNu:  # a link that can never transmit
        positive = False
    want_trace = config.trace if trace is None else trace
    res = engine.simulate(system, config.horizon, seed, config.warmup, backend=backend,
                          trace=want_trace)
    lam = config.arrivals.total_rate
    try:
        sv = detect_stability(res.total_queue, config.warmup, lam, config.stability)
    except SeriesTooShort:
        sv = None
    window = max(res.T - res.warm_start, 1)
    per_link = tuple(float(x) for x in res.mean_queue)
    metrics = RunMetrics(
        seed=int(seed), load=load, arrival_means=tuple(config.arrivals.means),
        mean_total_queue=float(sum(per_link)), per_link_queue=per_link, delay=None,
        effective_load=effective_load(config, system),
        verdict=sv.verdict if sv else None, slope=sv.slope if sv else None,
        normalized_slope=sv.normalized_slope if sv else None, checksum=res.checksum,
        throughput=float(res.served.sum()) / window, offered=float(res.arrivals.sum()) / window,
        wasted=float(res.wasted.sum()) / window, final_total_queue=int(res.final_queue.sum()),
        thresholds=config.stability,
        diagnostics={"positivity_ok": positive, "n_schedules": len(system.schedules),
                     "second_quarter_mean": sv.second_quarter_mean if sv else None,
                     "final_quarter_mean": sv.final_quarter_mean if sv else None})
    if lam > 0 and metrics.verdict == STABLE:
        metrics.delay = average_delay(metrics)
    return metrics, res.trace


def _run_job(job):
    config, seed, load = job
    metrics, _ = run_simulation(config, seed, load=load, trace=False)
    return metrics


def run_many(jobs: Sequence[tuple], parallel: int = 1) -> list[RunMetrics]:
    """Run (config, seed, load) jobs, sorted afterwards by (seed, load)."""
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            out = list(pool.map(_run_job, jobs))
    else:
        out = [_run_job(j) for j in jobs]
    return sorted(out, key=lambda m: (m.seed, -math.inf if m.load is None else m.load))


@dataclass
class SweepResult:
    runs: list[RunMetrics]
    loads: tuple[float, ...]
    boundary: tuple[float, ...]
    stable_load: float | None
    unstable_load: float | None
    non_monotone_seeds: tuple[int, ...]

    def verdicts(self, load: float) -> list[str | None]:
        return [m.verdict for m in self.runs if m.load == load]


def sweep_load(config: ExperimentConfig, direction: Sequence[float] | None = None,
               loads: Sequence[float] | None = None, seeds: Sequence[int] | None = None,
               scale_to_boundary: bool | None = None, parallel: int = 1) -> SweepResult:
    """Run every (seed, load) at a = load * b, with b the boundary point along ``direction``."""
    sweep_cfg = config.sweep
    direction = direction if direction is not None else (sweep_cfg.direction if sweep_cfg else None)
    loads = tuple(loads if loads is not None else (sweep_cfg.loads if sweep_cfg else ()))
    if direction is None or not loads:
        raise ValueError("a sweep needs a direction and a load grid")
    if any(b <= a for a, b in zip(loads, loads[1:])):
        raise ValueError("load grid must be strictly increasing")
    seeds = tuple(seeds if seeds is not None else config.seeds)
    if scale_to_boundary is None:
        scale_to_boundary = sweep_cfg.scale_to_boundary if sweep_cfg else True
    system = build_system(config)
    if scale_to_boundary:
        b = capacity.boundary_point(direction, config.channel, system.schedules)
    else:
        b = np.asarray(direction, dtype=float)
    jobs = [(config.with_means(load * b), seed, load) for seed in seeds for load in loads]
    runs = run_many(jobs, parallel)
    stable_load = None
    unstable_load = None
    for load in loads:
        v = [m.verdict for m in runs if m.load == load]
        if all(x == STABLE for x in v):
            stable_load = load
        if unstable_load is None and any(x == UNSTABLE for x in v):
            unstable_load = load
    bad = []
    for seed in seeds:
        seen_unstable = False
        for m in (m for m in runs if m.seed == seed):
            if m.verdict == UNSTABLE:
                seen_unstable = True
            elif m.verdict == STABLE and seen_unstable:
                bad.append(seed)
                break
    return SweepResult(runs, loads, tuple(float(x) for x in b), stable_load, unstable_load,
                       tuple(bad))


# -- serialization ----------------------------------------------------------

CSV_FIELDS = ("seed", "load", "arrival_means", "mean_total_queue", "per_link_queue", "delay",
              "effective_load", "verdict", "slope", "normalized_slope", "throughput",
              "offered", "wasted", "final_total_queue", "checksum")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def metrics_to_csv(rows: Iterable[RunMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for m in rows:
        w.writerow([_fmt(getattr(m, k)) for k in CSV_FIELDS])
    return buf.getvalue()


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def metrics_to_jsonl(rows: Iterable[RunMetrics]) -> str:
    lines = []
    for m in rows:
        rec = asdict(m)
        rec["arrival_total"] = m.arrival_total
        lines.append(json.dumps(_clean(rec), sort_keys=True))
    return "".join(line + "\n" for line in lines)


def write_metrics(rows: Sequence[RunMetrics], path: str | Path | None, fmt: str = "csv") -> str:
    if fmt == "csv":
        text = metrics_to_csv(rows)
    elif fmt == "jsonl":
        text = metrics_to_jsonl(rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


_BRANCHES = ("candidate", "previous", "initial")


def write_trace(trace: dict, path: str | Path) -> int:
    """One JSON object per slot: queues and channel at the slot start, then the decision."""
    n = 0
    with open(path, "w") as fh:
        for t, (x, s, sched, cand, ph, br) in enumerate(zip(
                trace["X"].tolist(), trace["s"].tolist(), trace["schedule"].tolist(),
                trace["candidate"].tolist(), trace["phi"].tolist(), trace["branch"].tolist())):
            fh.write(json.dumps({"t": t, "X": x, "s": s, "candidate": cand, "schedule": sched,
                                 "phi": ph, "branch": _BRANCHES[br]}) + "\n")
            n += 1
    return n
