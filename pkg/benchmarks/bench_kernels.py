"""Time the compiled and pure-Python slot loops on the same workloads.

    python3 benchmarks/bench_kernels.py --slots 200000 --repeat 3
"""
import argparse
import time

import numpy as np

from lmrsp import _backend
from lmrsp.channel import ChannelModel
from lmrsp.engine import System, rollouts, simulate
from lmrsp.policy import GREEDY_MATCHING, NOISY_ORACLE, PolicyParams
from lmrsp.queueing import ArrivalModel
from lmrsp.topology import InterferenceModel, NetworkGraph


def workloads(n_links):
    g = NetworkGraph.path(n_links)
    ch = ChannelModel((1.0,) * n_links, r=0.2)
    arr = ArrivalModel((0.15,) * n_links)
    for kind in (NOISY_ORACLE, GREEDY_MATCHING):
        p = PolicyParams(alpha=0.01, rho=0.02, delta=0.5, oracle_kind=kind)
        yield kind, System(g, InterferenceModel(1), ch, p, arr)


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--links", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _backend.compiled_kernel is None:
        raise SystemExit("compiled kernel not built; run `pip install --no-build-isolation -e .`")

    print(f"{'workload':<28}{'python s':>10}{'cython s':>10}{'speedup':>9}  identical")
    for kind, system in workloads(args.links):
        py, a = best_of(lambda: simulate(system, args.slots, 1, backend="python"), args.repeat)
        cy, b = best_of(lambda: simulate(system, args.slots, 1, backend="cython"), args.repeat)
        print(f"{'simulate/' + kind:<28}{py:>10.3f}{cy:>10.4f}{py / cy:>9.1f}  {a.checksum == b.checksum}")

        reps, horizon = 100, max(args.slots // 100, 2)
        rng = np.random.default_rng(0)
        s0 = rng.integers(0, 2, (reps, args.links))
        i0 = rng.integers(0, len(system.schedules), reps)
        X = rng.uniform(1, 10, args.links)
        py, a = best_of(lambda: rollouts(system, X, s0, i0, horizon, 3, backend="python"), args.repeat)
        cy, b = best_of(lambda: rollouts(system, X, s0, i0, horizon, 3, backend="cython"), args.repeat)
        same = all(np.array_equal(x, y) for x, y in zip(a, b))
        print(f"{'rollouts/' + kind:<28}{py:>10.3f}{cy:>10.4f}{py / cy:>9.1f}  {same}")


if __name__ == "__main__":
    main()
