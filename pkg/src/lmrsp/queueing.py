"""Arrival generation and the per-slot queue recursion with wasted service."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidMean, LengthMismatch

BERNOULLI_BATCH = "bernoulli_batch"
TRUNCATED_POISSON = "truncated_poisson"
ARRIVAL_KINDS = (BERNOULLI_BATCH, TRUNCATED_POISSON)

QueueVector = tuple[int, ...]


@dataclass(frozen=True)
class ArrivalModel:
    """I.i.d. per-slot arrivals with mean vector ``means`` and a hard cap ``a_max``.

    ``bernoulli_batch`` delivers ``batch_size`` packets with probability
    mean/batch_size. ``truncated_poisson`` is Poisson(mean) conditioned on
    not exceeding ``a_max`` (equivalently: resampled on overflow), so its
    true mean sits slightly below ``mean`` when the cap binds.
    """

    means: tuple[float, ...]
    kind: str = BERNOULLI_BATCH
    a_max: int = 1
    batch_size: int = 1

    def __post_init__(self):
        means = tuple(float(a) for a in self.means)
        object.__setattr__(self, "means", means)
        if self.kind not in ARRIVAL_KINDS:
            raise ValueError(f"unknown arrival kind {self.kind!r}")
        if self.a_max < 1:
            raise ValueError("a_max must be a positive integer")
        for a in means:
            if not (0.0 <= a <= self.a_max) or math.isnan(a):
                raise InvalidMean(f"mean {a} outside [0, A_max={self.a_max}]")
        if self.kind == BERNOULLI_BATCH:
            if not 1 <= self.batch_size <= self.a_max:
                raise ValueError("batch_size must lie in [1, a_max]")
            for a in means:
                if a > self.batch_size:
                    raise InvalidMean(f"mean {a} exceeds batch size {self.batch_size}")

    @property
    def n_links(self) -> int:
        return len(self.means)

    @property
    def kind_code(self) -> int:
        return ARRIVAL_KINDS.index(self.kind)

    @property
    def total_rate(self) -> float:
        return sum(self.means)

    def bernoulli_thresholds(self) -> np.ndarray:
        return np.array([a / self.batch_size for a in self.means])

    def poisson_tables(self) -> np.ndarray:
        """Cumulative truncated-Poisson masses, shape (N, a_max + 1), unnormalised."""
        return np.array([poisson_cdf_table(a, self.a_max) for a in self.means]).reshape(
            self.n_links, self.a_max + 1)


def poisson_cdf_table(lam: float, a_max: int) -> list[float]:
    p = math.exp(-lam)
    c = p
    out = [c]
    for k in range(1, a_max + 1):
        p *= lam / k
        c += p
        out.append(c)
    return out


def truncated_poisson_draw(u: float, table: Sequence[float]) -> int:
    """Inverse-CDF draw from an unnormalised cumulative table."""
    target = u * table[-1]
    k = 0
    last = len(table) - 1
    while k < last and table[k] <= target:
        k += 1
    return k


def sample_arrivals(model: ArrivalModel, rng: np.random.Generator) -> tuple[int, ...]:
    """One slot of arrivals; consumes exactly one uniform per link."""
    u = rng.random(model.n_links)
    if model.kind == BERNOULLI_BATCH:
        b = model.batch_size
        return tuple(b if x < a / b else 0 for x, a in zip(u, model.means))
    return tuple(truncated_poisson_draw(x, poisson_cdf_table(a, model.a_max))
                 for x, a in zip(u, model.means))


def queue_step(X: Sequence[int], A: Sequence[int], D: Sequence[float]):
    """Serve-before-arrive update: returns (X', U).

    Rates are floored to whole packets; U is the unused part of the service.
    """
    if not len(X) == len(A) == len(D):
        raise LengthMismatch("X, A and D must have equal length")
    x_next = []
    waste = []
    for x, a, d in zip(X, A, D):
        if d < 0 or a < 0:
            raise ValueError("rates and arrivals must be non-negative")
        cap = math.floor(d)
        served = min(x, cap)
        waste.append(cap - served)
        x_next.append(x - served + a)
    return tuple(x_next), tuple(waste)
