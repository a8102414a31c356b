"""Command line entry point: ``lmrsp {simulate,sweep,capacity,estimate}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import capacity, experiment
from .channel import mixing_horizon
from .config import load_config
from .engine import make_rng
from .errors import LmrspError


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _trace_path(out: str | None, seed: int) -> Path:
    if out is None:
        return Path(f"trace-seed{seed}.jsonl")
    p = Path(out)
    return p.with_name(f"{p.stem}.seed{seed}.trace.jsonl")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seeds = [args.seed] if args.seed is not None else list(cfg.seeds)
    trace = args.trace or cfg.trace
    if trace:
        rows = []
        for seed in seeds:
            m, tr = experiment.run_simulation(cfg, seed, trace=True)
            experiment.write_trace(tr, _trace_path(args.out, seed))
            rows.append(m)
    else:
        rows = experiment.run_many([(cfg, s, None) for s in seeds], args.parallel)
    _emit(experiment.write_metrics(rows, None, args.format), args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    seeds = [args.seed] if args.seed is not None else None
    res = experiment.sweep_load(cfg, seeds=seeds, parallel=args.parallel)
    _emit(experiment.write_metrics(res.runs, None, args.format), args.out)
    summary = {"boundary_point": list(res.boundary), "largest_stable_load": res.stable_load,
               "smallest_unstable_load": res.unstable_load,
               "non_monotone_seeds": list(res.non_monotone_seeds)}
    print(json.dumps(summary), file=sys.stderr)
    return 0


def cmd_capacity(args) -> int:
    cfg = load_config(args.config)
    system = experiment.build_system(cfg)
    p = cfg.policy
    zeta, delta = capacity.effective_guarantee(p, len(system.schedules))
    r = cfg.channel.r if cfg.channel.kind != "frozen" else 0.0
    if args.query == "membership":
        a = args.rates if args.rates is not None else list(cfg.arrivals.means)
        res = capacity.capacity_membership(a, cfg.channel, system.schedules, theta=args.theta)
        rec = {"rates": a, "theta": args.theta, "inside": res.inside, "load": res.load}
        if res.inside:
            rec["epsilon"] = res.epsilon
            rec["shares"] = [[s, i, b] for (s, i), b in sorted(res.beta.items())]
    elif args.query == "theta-min":
        rec = {"zeta": zeta, "delta": delta, "rho": p.rho, "r": r,
               "theta_min": capacity.theta_min(zeta, p.rho, delta, r)}
    else:
        rng = make_rng(args.seed if args.seed is not None else cfg.seeds[0])
        est = capacity.estimate_theta(system, K=args.horizon, reps=args.reps, rng=rng,
                                      n_random=args.directions)
        rec = {"theta": est.theta, "stderr": est.stderr, "zeta": est.zeta, "delta": est.delta,
               "nu": est.nu, "grid_size": est.grid_size, "K": est.K, "reps": est.reps,
               "theta_min": capacity.theta_min(zeta, p.rho, delta, r)}
    _emit(json.dumps(rec) + "\n", args.out)
    return 0


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    system = experiment.build_system(cfg)
    n = system.n_links
    direction = np.asarray(args.direction if args.direction is not None else [1.0] * n)
    X = args.magnitude * direction / np.linalg.norm(direction)
    markov = cfg.channel.kind != "frozen" and 0.0 < cfg.channel.r < 1.0
    k0 = mixing_horizon(n, cfg.channel.r) if markov else 1
    K = args.horizon if args.horizon is not None else 100 * k0
    burn = 10 * k0 if markov else 0
    rng = make_rng(args.seed if args.seed is not None else cfg.seeds[0])
    pp = capacity.estimate_psi_phi(X, system, K, args.reps, rng, burn_in=burn)
    r = cfg.channel.r if cfg.channel.kind != "frozen" else 0.0
    factor = r + (1 - r) * cfg.policy.rho
    gap = pp.bound_gap(factor)
    rec = {"direction": direction.tolist(), "K": K, "reps": args.reps, "psi": pp.psi,
           "psi_stderr": pp.psi_stderr, "phi": pp.phi, "phi_stderr": pp.phi_stderr,
           "upsilon": pp.upsilon, "bound_factor": factor, "bound_gap": gap.value,
           "bound_gap_stderr": gap.stderr}
    _emit(json.dumps(rec) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmrsp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, parallel=False):
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--seed", type=_u64, default=None, help="override the config seeds")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        if parallel:
            p.add_argument("--parallel", type=int, default=1, help="worker processes")

    p = sub.add_parser("simulate", help="run the configured seeds (or one --seed)")
    common(p, parallel=True)
    p.add_argument("--trace", action="store_true", help="write per-slot JSON-lines traces")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run the [sweep] load grid")
    common(p, parallel=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("capacity", help="capacity-region queries")
    common(p)
    p.add_argument("query", choices=("membership", "theta-min", "estimate-theta"))
    p.add_argument("--rates", type=_floats, default=None, help="comma-separated rate vector")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--horizon", type=int, default=None, help="rollout length K")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--directions", type=int, default=16, help="random grid directions")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("estimate", help="frozen-queue rollout estimates along one direction")
    common(p)
    p.add_argument("--direction", type=_floats, default=None)
    p.add_argument("--magnitude", type=float, default=1e6)
    p.add_argument("--horizon", type=int, default=None, help="rollout length K")
    p.add_argument("--reps", type=int, default=200)
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LmrspError, OSError) as exc:
        parser.exit(2, f"lmrsp: error: {exc}\n")


if __name__ == "__main__":
    raise SystemExit(main())
