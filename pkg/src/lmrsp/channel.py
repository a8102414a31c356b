"""Per-link two-state (good/bad) channel process and its stationary law."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidRate, LengthMismatch, UndefinedDistribution

TWO_STATE = "two_state_markov"
FROZEN = "frozen"
CHANNEL_KINDS = (TWO_STATE, FROZEN)

ChannelState = tuple[int, ...]


@dataclass(frozen=True)
class ChannelModel:
    """Independent symmetric good/bad chains, one per link.

    Each link flips state with probability ``r`` per slot. The ``frozen``
    kind keeps ``initial_state`` forever (the time-invariant limit).
    """

    good_rates: tuple[float, ...]
    r: float = 0.0
    kind: str = TWO_STATE
    initial_state: tuple[int, ...] | None = None
    d_max: float | None = None
    _d_max: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rates = tuple(float(g) for g in self.good_rates)
        object.__setattr__(self, "good_rates", rates)
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not 0.0 <= self.r <= 1.0:
            raise InvalidRate(f"transition rate {self.r} outside [0, 1]")
        if not rates or any(g <= 0 for g in rates):
            raise ValueError("good_rates must be non-empty and positive")
        d_max = self.d_max if self.d_max is not None else math.floor(max(rates)) + 1.0
        if any(g >= d_max for g in rates):
            raise ValueError(f"good rates must stay below D_max={d_max}")
        object.__setattr__(self, "_d_max", float(d_max))
        if self.initial_state is None:
            object.__setattr__(self, "initial_state", (1,) * len(rates))
        else:
            init = tuple(int(bool(x)) for x in self.initial_state)
            if len(init) != len(rates):
                raise LengthMismatch("initial_state length differs from good_rates")
            object.__setattr__(self, "initial_state", init)

    @property
    def n_links(self) -> int:
        return len(self.good_rates)

    @property
    def rate_bound(self) -> float:
        """D_max: strict upper bound on every per-link rate."""
        return self._d_max

    @property
    def kind_code(self) -> int:
        return CHANNEL_KINDS.index(self.kind)


def _check(model: ChannelModel, state: Sequence[int]) -> None:
    if len(state) != model.n_links:
        raise LengthMismatch(f"state has length {len(state)}, model has {model.n_links} links")


def initial_channel_state(model: ChannelModel, rng: np.random.Generator) -> ChannelState:
    """Draw s(0): stationary for the Markov kind, the configured state when frozen.

    Always consumes one uniform per link so draw counts do not depend on the kind.
    """
    u = rng.random(model.n_links)
    if model.kind == FROZEN:
        return model.initial_state
    return tuple(1 if x < 0.5 else 0 for x in u)


def step_channel(model: ChannelModel, state: Sequence[int], rng: np.random.Generator) -> ChannelState:
    """Advance one slot. Uniforms are consumed in link order, one per link."""
    _check(model, state)
    u = rng.random(model.n_links)
    if model.kind == FROZEN:
        return tuple(state)
    r = model.r
    return tuple((1 - s) if x < r else s for s, x in zip(state, u))


def all_states(n_links: int) -> np.ndarray:
    """Every channel state as rows of a (2^N, N) array, lexicographic order."""
    idx = np.arange(1 << n_links, dtype=np.int64)
    shifts = np.arange(n_links - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def steady_state_prob(model: ChannelModel, s: Sequence[int]) -> float:
    _check(model, s)
    if model.kind == FROZEN:
        return 1.0 if tuple(s) == model.initial_state else 0.0
    if not 0.0 < model.r < 1.0:
        raise UndefinedDistribution(
            f"r={model.r} leaves the two-state chain without a unique stationary law")
    return 0.5 ** model.n_links


def stationary_distribution(model: ChannelModel) -> tuple[np.ndarray, np.ndarray]:
    """(states, probabilities) over the full state space."""
    states = all_states(model.n_links)
    probs = np.array([steady_state_prob(model, row) for row in states])
    return states, probs


def flip_probability(r: float) -> float:
    """beta_l: one-step coupling mass of a single symmetric link chain."""
    return 2.0 * r if r < 0.5 else 2.0 - 2.0 * r


def mixing_horizon(n_links: int, r: float) -> int:
    """Smallest k0 of the form ceil(ln 4N / -ln(1 - beta_l)); 1 when r = 0.5."""
    if not 0.0 < r < 1.0:
        raise InvalidRate(f"mixing horizon needs 0 < r < 1, got {r}")
    if n_links < 1:
        raise ValueError("n_links must be positive")
    if r == 0.5:
        return 1
    beta = flip_probability(r)
    k0 = max(1, math.ceil(math.log(4 * n_links) / -math.log(1.0 - beta)))
    # guard against log rounding at exact powers
    while (1.0 - beta) ** k0 > 1.0 / (4 * n_links):
        k0 += 1
    return k0
