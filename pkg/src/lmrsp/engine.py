"""Drive the slot-loop kernels: full simulations and frozen-queue rollouts.

Per-slot uniform layout for simulations (one row of 2N + 3 doubles):
channel flips by link index, arrivals by link index, candidate success coin,
candidate uniform pick, switch coin. Slot 0 uses its channel draws for the
initial state. Rows are drawn in chunks from a PCG64 generator, which yields
the same stream as drawing them one slot at a time.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .channel import FROZEN, ChannelModel
from .errors import LengthMismatch, QueueOverflow, UnsupportedKind
from .policy import GREEDY_MATCHING, NOISY_GREEDY, PolicyParams
from .queueing import ArrivalModel
from .topology import InterferenceModel, NetworkGraph, ScheduleSet, enumerate_schedules

CHUNK = 1 << 15


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class System:
    """Everything a replication needs except the seed."""

    graph: NetworkGraph
    interference: InterferenceModel
    channel: ChannelModel
    params: PolicyParams
    arrivals: ArrivalModel | None = None
    schedules: ScheduleSet = field(default=None)

    def __post_init__(self):
        if self.schedules is None:
            self.schedules = enumerate_schedules(self.graph, self.interference)
        n = self.graph.n_links
        if self.channel.n_links != n:
            raise LengthMismatch("channel good_rates length differs from link count")
        if self.arrivals is not None and self.arrivals.n_links != n:
            raise LengthMismatch("arrival means length differs from link count")
        if self.params.oracle_kind in (GREEDY_MATCHING, NOISY_GREEDY) and self.interference.kappa != 1:
            raise UnsupportedKind("greedy matching needs node-exclusive interference (kappa = 1)")

    @property
    def n_links(self) -> int:
        return self.graph.n_links

    def kernel_static(self):
        sched = self.schedules.matrix
        return (
            np.ascontiguousarray(sched, dtype=np.uint8),
            np.ascontiguousarray(self.schedules.masks, dtype=np.int64),
            np.ascontiguousarray(self.graph.edges, dtype=np.int64).reshape(self.n_links, 2),
            int(self.graph.node_count),
        )


@dataclass
class SimulationResult:
    T: int
    warm_start: int
    total_queue: np.ndarray
    mean_queue: np.ndarray
    arrivals: np.ndarray
    served: np.ndarray
    wasted: np.ndarray
    final_queue: np.ndarray
    checksum: str
    trace: dict | None = None


def simulate(system: System, T: int, seed: int, warmup: float = 0.2,
             backend: str | None = None, trace: bool = False,
             chunk: int = CHUNK) -> SimulationResult:
    """Run T slots of channel, arrivals, policy and queues from empty queues."""
    if system.arrivals is None:
        raise ValueError("simulation needs an arrival model")
    kern = _backend.get_kernel(backend)
    n = system.n_links
    width = 2 * n + 3
    sched, masks, edges, n_nodes = system.kernel_static()
    ch = system.channel
    arr = system.arrivals
    p = system.params
    good = np.asarray(ch.good_rates, dtype=np.float64)
    cap = np.floor(good).astype(np.int64)
    bern = np.ascontiguousarray(arr.bernoulli_thresholds(), dtype=np.float64)
    if arr.kind_code == 1:
        pois = np.ascontiguousarray(arr.poisson_tables(), dtype=np.float64)
    else:
        pois = np.zeros((n, 1), dtype=np.float64)

    rng = make_rng(seed)
    X = np.zeros(n, dtype=np.int64)
    s = np.asarray(ch.initial_state if ch.kind == FROZEN else (0,) * n, dtype=np.uint8).copy()
    prev = np.full(1, -1, dtype=np.int64)
    warm_start = int(T * warmup)
    total_q = np.empty(T, dtype=np.int64)
    sum_x = np.zeros(n, dtype=np.float64)
    sum_arr = np.zeros(n, dtype=np.int64)
    sum_served = np.zeros(n, dtype=np.int64)
    sum_waste = np.zeros(n, dtype=np.int64)
    # one stream per series so the checksum does not depend on chunking
    digests = [hashlib.blake2b(digest_size=16) for _ in range(4)]
    trace_parts = [] if trace else None

    t0 = 0
    while t0 < T:
        steps = min(chunk, T - t0)
        U = rng.random((steps, width))
        sched_out = np.empty(steps, dtype=np.int32)
        cand_out = np.empty(steps, dtype=np.int32)
        phi_out = np.empty(steps, dtype=np.float64)
        branch_out = np.empty(steps, dtype=np.int8)
        if trace:
            x_tr = np.empty((steps, n), dtype=np.int64)
            s_tr = np.empty((steps, n), dtype=np.uint8)
        else:
            x_tr = np.empty((0, n), dtype=np.int64)
            s_tr = np.empty((0, n), dtype=np.uint8)
        status = kern.simulate_chunk(
            sched, masks, edges, n_nodes, good, cap, ch.kind_code, float(ch.r),
            arr.kind_code, bern, int(arr.batch_size), pois,
            p.oracle_code, float(p.delta), float(p.alpha), float(p.rho), U,
            X, s, prev, t0, warm_start,
            total_q[t0:t0 + steps], sched_out, cand_out, phi_out, branch_out,
            sum_x, sum_arr, sum_served, sum_waste, x_tr, s_tr)
        if status:
            raise QueueOverflow(f"a queue exceeded 2^60 packets near slot {t0 + steps}")
        for d, part in zip(digests, (total_q[t0:t0 + steps], sched_out, cand_out, phi_out)):
            d.update(part.tobytes())
        if trace:
            trace_parts.append((sched_out, cand_out, phi_out, branch_out, x_tr, s_tr))
        t0 += steps

    window = max(T - warm_start, 1)
    trace_data = None
    if trace:
        trace_data = {
            "schedule": np.concatenate([t[0] for t in trace_parts]),
            "candidate": np.concatenate([t[1] for t in trace_parts]),
            "phi": np.concatenate([t[2] for t in trace_parts]),
            "branch": np.concatenate([t[3] for t in trace_parts]),
            "X": np.concatenate([t[4] for t in trace_parts]),
            "s": np.concatenate([t[5] for t in trace_parts]),
        }
    return SimulationResult(
        T=T, warm_start=warm_start, total_queue=total_q, mean_queue=sum_x / window,
        arrivals=sum_arr, served=sum_served, wasted=sum_waste, final_queue=X.copy(),
        checksum=hashlib.blake2b(b"".join(d.digest() for d in digests),
                                 digest_size=16).hexdigest(), trace=trace_data)


def rollouts(system: System, X, s0, i0, horizon: int, seed_or_rng, burn_in: int = 0,
             backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Frozen-queue rollouts; returns per-rollout (phi_sums, psi_sums).

    ``s0`` has one row per rollout and ``i0`` one schedule index per rollout.
    Per-step uniform layout: N channel flips, success coin, pick, switch coin.
    """
    kern = _backend.get_kernel(backend)
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else make_rng(seed_or_rng)
    n = system.n_links
    s0 = np.ascontiguousarray(s0, dtype=np.uint8).reshape(-1, n)
    i0 = np.ascontiguousarray(i0, dtype=np.int64).reshape(-1)
    reps = s0.shape[0]
    steps = burn_in + horizon - 1
    U = rng.random((reps, max(steps, 0), n + 3))
    sched, masks, edges, n_nodes = system.kernel_static()
    ch = system.channel
    p = system.params
    phi_sums = np.zeros(reps)
    psi_sums = np.zeros(reps)
    kern.rollout_batch(
        sched, masks, edges, n_nodes, np.asarray(ch.good_rates, dtype=np.float64),
        ch.kind_code, float(ch.r), p.oracle_code, float(p.delta), float(p.alpha),
        float(p.rho), np.ascontiguousarray(X, dtype=np.float64), s0, i0,
        int(burn_in), int(horizon), U, phi_sums, psi_sums)
    return phi_sums, psi_sums
