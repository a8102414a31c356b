"""Experiment configuration: a TOML file with fixed sections, unknown keys rejected.

Example::

    [graph]
    path = 4                      # or: node_count = 5, edges = [[0, 1], ...]

    [interference]
    kappa = 1

    [channel]
    kind = "two_state_markov"     # or "frozen"
    r = 0.2
    good_rates = [1, 1, 1, 1]
    # initial_state = [1, 1, 1, 1]   (frozen kind)
    # d_max = 2

    [arrivals]
    kind = "bernoulli_batch"      # or "truncated_poisson"
    means = [0.2, 0.2, 0.2, 0.2]
    a_max = 1
    batch_size = 1

    [policy]
    alpha = 0.01
    rho = 0.02
    zeta = 0.0
    delta = 0.5
    oracle_kind = "noisy_oracle"

    [run]
    horizon = 1000000
    warmup = 0.2
    seeds = [0, 1, 2, 3, 4]
    trace = false

    [stability]
    stable_slope = 0.01
    unstable_slope = 0.1
    quarter_ratio = 2.0

    [sweep]
    direction = [1, 1, 1, 1]
    loads = [0.5, 0.7, 0.9, 1.05]
    scale_to_boundary = true
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .channel import ChannelModel
from .errors import ConfigError
from .policy import PolicyParams
from .queueing import ArrivalModel
from .topology import InterferenceModel, NetworkGraph


@dataclass(frozen=True)
class StabilityThresholds:
    """Finite-horizon surrogate for stability in the mean."""

    stable_slope: float = 0.01
    unstable_slope: float = 0.1
    quarter_ratio: float = 2.0
    min_length: int = 10_000


@dataclass(frozen=True)
class SweepSpec:
    direction: tuple[float, ...]
    loads: tuple[float, ...]
    scale_to_boundary: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    graph: NetworkGraph
    interference: InterferenceModel
    channel: ChannelModel
    arrivals: ArrivalModel
    policy: PolicyParams
    horizon: int = 1_000_000
    warmup: float = 0.2
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    trace: bool = False
    stability: StabilityThresholds = field(default_factory=StabilityThresholds)
    sweep: SweepSpec | None = None

    def __post_init__(self):
        n = self.graph.n_links
        if self.channel.n_links != n or self.arrivals.n_links != n:
            raise ConfigError("channel good_rates and arrival means need one entry per link")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        if not 0.0 <= self.warmup <= 0.5:
            raise ConfigError("warmup fraction must lie in [0, 0.5]")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(s < 0 or s >= 1 << 64 for s in self.seeds):
            raise ConfigError("seeds must be unsigned 64-bit integers")
        if self.sweep is not None:
            if len(self.sweep.direction) != n:
                raise ConfigError("sweep direction needs one entry per link")
            loads = self.sweep.loads
            if any(b <= a for a, b in zip(loads, loads[1:])):
                raise ConfigError("sweep loads must be strictly increasing")

    def with_means(self, means) -> "ExperimentConfig":
        arr = dataclasses.replace(self.arrivals, means=tuple(float(m) for m in means))
        return dataclasses.replace(self, arrivals=arr)


_SECTIONS = {
    "graph": {"path", "node_count", "edges"},
    "interference": {"kappa"},
    "channel": {"kind", "r", "good_rates", "initial_state", "d_max"},
    "arrivals": {"kind", "means", "a_max", "batch_size"},
    "policy": {"alpha", "rho", "zeta", "delta", "oracle_kind"},
    "run": {"horizon", "warmup", "seeds", "trace"},
    "stability": {"stable_slope", "unstable_slope", "quarter_ratio", "min_length"},
    "sweep": {"direction", "loads", "scale_to_boundary"},
}
_REQUIRED = ("graph", "channel", "arrivals", "policy")


def _check_keys(raw: dict) -> None:
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    for name, allowed in _SECTIONS.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        extra = set(section) - allowed
        if extra:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
    for name in _REQUIRED:
        if name not in raw:
            raise ConfigError(f"missing section [{name}]")


def _graph(section: dict) -> NetworkGraph:
    if "path" in section:
        if set(section) != {"path"}:
            raise ConfigError("[graph] takes either `path` or `node_count` + `edges`")
        return NetworkGraph.path(int(section["path"]))
    try:
        return NetworkGraph(int(section["node_count"]), tuple(tuple(e) for e in section["edges"]))
    except KeyError as exc:
        raise ConfigError(f"[graph] is missing {exc.args[0]!r}") from None


def config_from_dict(raw: dict) -> ExperimentConfig:
    _check_keys(raw)
    try:
        graph = _graph(raw["graph"])
        interference = InterferenceModel(**raw.get("interference", {}))
        ch = dict(raw["channel"])
        for key in ("good_rates", "initial_state"):
            if key in ch:
                ch[key] = tuple(ch[key])
        channel = ChannelModel(**ch)
        arr = dict(raw["arrivals"])
        arr["means"] = tuple(arr.get("means", ()))
        arrivals = ArrivalModel(**arr)
        policy = PolicyParams(**raw["policy"])
        run = raw.get("run", {})
        stability = StabilityThresholds(**raw.get("stability", {}))
        sweep = None
        if "sweep" in raw:
            sw = raw["sweep"]
            sweep = SweepSpec(tuple(float(x) for x in sw["direction"]),
                              tuple(float(x) for x in sw["loads"]),
                              bool(sw.get("scale_to_boundary", True)))
        return ExperimentConfig(
            graph=graph, interference=interference, channel=channel, arrivals=arrivals,
            policy=policy, horizon=int(run.get("horizon", 1_000_000)),
            warmup=float(run.get("warmup", 0.2)),
            seeds=tuple(int(s) for s in run.get("seeds", (0, 1, 2, 3, 4))),
            trace=bool(run.get("trace", False)), stability=stability, sweep=sweep)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))
