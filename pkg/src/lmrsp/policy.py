"""Max-weight oracle, candidate generators and the linear-memory update rule.

All randomness is drawn from a numpy ``Generator`` in a fixed pattern so a
sequence of calls here reproduces the compiled simulation kernel exactly:
a candidate draw always consumes two uniforms (success coin, uniform pick)
and the update rule always consumes one more (the switch coin).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import ChannelModel
from .errors import LengthMismatch, UnsupportedKind
from .topology import ScheduleSet, ScheduleVector

EXACT = "exact"
UNIFORM = "uniform"
NOISY_ORACLE = "noisy_oracle"
GREEDY_MATCHING = "greedy_matching"
NOISY_GREEDY = "noisy_greedy"
ORACLE_KINDS = (EXACT, UNIFORM, NOISY_ORACLE, GREEDY_MATCHING, NOISY_GREEDY)

CANDIDATE = "candidate"
PREVIOUS = "previous"
INITIAL = "initial"


@dataclass(frozen=True)
class PolicyParams:
    """Update-rule and oracle parameters.

    ``zeta`` and ``delta`` describe the candidate generator: with probability
    at least ``delta`` its pick is within a factor ``1 - zeta`` of the best
    backlog-rate product. For ``noisy_oracle``/``noisy_greedy`` ``delta`` is
    also the success probability actually used when sampling.
    """

    alpha: float = 0.01
    rho: float = 0.02
    zeta: float = 0.0
    delta: float = 1.0
    oracle_kind: str = EXACT

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not 0 <= self.zeta < 1:
            raise ValueError("zeta must lie in [0, 1)")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.oracle_kind not in ORACLE_KINDS:
            raise UnsupportedKind(f"unknown oracle kind {self.oracle_kind!r}")

    @property
    def zeta_prime(self) -> float:
        return 1.0 - (1.0 - self.rho) * (1.0 - self.zeta)

    @property
    def oracle_code(self) -> int:
        return ORACLE_KINDS.index(self.oracle_kind)

    def positivity_margin(self, nu: float, n_links: int) -> float:
        """delta*nu/sqrt(N) - rho*alpha; must be positive for a useful guarantee."""
        return self.delta * nu / math.sqrt(n_links) - self.rho * self.alpha

    def check_positivity(self, nu: float, n_links: int) -> bool:
        ok = self.positivity_margin(nu, n_links) > 0
        if not ok:
            warnings.warn(
                f"rho*alpha={self.rho * self.alpha:g} is not below delta*nu/sqrt(N)="
                f"{self.delta * nu / math.sqrt(n_links):g}; the stability fraction bound is vacuous",
                RuntimeWarning, stacklevel=2)
        return ok


def oracle_guarantee(kind: str, n_schedules: int, delta: float = 1.0) -> tuple[float, float]:
    """The (zeta, delta) pair a candidate generator kind achieves."""
    if kind == EXACT:
        return 0.0, 1.0
    if kind == UNIFORM:
        return 0.0, 1.0 / n_schedules
    if kind == NOISY_ORACLE:
        return 0.0, delta
    if kind == GREEDY_MATCHING:
        return 0.5, 1.0
    if kind == NOISY_GREEDY:
        return 0.5, delta
    raise UnsupportedKind(kind)


# -- backlog-rate products -------------------------------------------------

def link_weights(X: Sequence[float], s: Sequence[int], model: ChannelModel) -> list[float]:
    """X_l * D_l(s, l alone): the backlog-rate weight of each link."""
    return [x * g if st else 0.0 for x, g, st in zip(X, model.good_rates, s)]


def _value(weights: Sequence[float], row) -> float:
    v = 0.0
    for w, on in zip(weights, row):
        if on:
            v += w
    return v


def schedule_values(X, s, schedules: ScheduleSet, model: ChannelModel) -> list[float]:
    w = link_weights(X, s, model)
    return [_value(w, row) for row in schedules.matrix]


def queue_norm(X: Sequence[float]) -> float:
    acc = 0.0
    for x in X:
        xf = float(x)
        acc += xf * xf
    return math.sqrt(acc)


def _argmax(values: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def gmwm_solve(X: Sequence[float], s: Sequence[int], schedules: ScheduleSet,
               model: ChannelModel) -> tuple[ScheduleVector, float]:
    """Schedule maximising X.D(s, I); the lowest canonical index wins ties."""
    if len(X) != schedules.n_links or len(s) != schedules.n_links:
        raise LengthMismatch("X and s must have one entry per link")
    values = schedule_values(X, s, schedules, model)
    i = _argmax(values)
    return schedules[i], values[i]


def greedy_matching_index(weights: Sequence[float], schedules: ScheduleSet) -> int:
    """Greedy matching on link weights, heaviest first, ties by link index.

    Zero-weight links are never added, so the result is canonical.
    """
    graph = schedules.graph
    order = sorted(range(len(weights)), key=lambda l: (-weights[l], l))
    busy = set()
    chosen = [0] * len(weights)
    for l in order:
        if weights[l] <= 0.0:
            break
        u, v = graph.edges[l]
        if u in busy or v in busy:
            continue
        busy.add(u)
        busy.add(v)
        chosen[l] = 1
    return schedules.index(chosen)


def _uniform_index(u: float, m: int) -> int:
    return min(int(u * m), m - 1)


def candidate_index(kind: str, params: PolicyParams, X, s, schedules: ScheduleSet,
                    model: ChannelModel, u_success: float, u_pick: float) -> int:
    """Candidate selection given its two uniforms; see ``algorithm_a_sample``."""
    m = len(schedules)
    if kind in (GREEDY_MATCHING, NOISY_GREEDY) and schedules.model.kappa != 1:
        raise UnsupportedKind("greedy matching is only defined for node-exclusive interference")
    if kind == UNIFORM:
        return _uniform_index(u_pick, m)
    if kind in (NOISY_ORACLE, NOISY_GREEDY) and not u_success < params.delta:
        return _uniform_index(u_pick, m)
    if kind in (EXACT, NOISY_ORACLE):
        return _argmax(schedule_values(X, s, schedules, model))
    if kind in (GREEDY_MATCHING, NOISY_GREEDY):
        return greedy_matching_index(link_weights(X, s, model), schedules)
    raise UnsupportedKind(kind)


def algorithm_a_sample(kind: str, params: PolicyParams, X, s, schedules: ScheduleSet,
                       model: ChannelModel, rng: np.random.Generator) -> ScheduleVector:
    """Draw a candidate schedule.

    exact: the max-weight schedule. uniform: uniform over all schedules.
    noisy_oracle: exact with probability delta, otherwise uniform.
    greedy_matching: greedy max-weight matching (half-approximation).
    noisy_greedy: greedy with probability delta, otherwise uniform.
    """
    u_success, u_pick = rng.random(2)
    return schedules[candidate_index(kind, params, X, s, schedules, model, u_success, u_pick)]


# -- comparison and update rule ---------------------------------------------

def _phi_from_values(v_cand: float, v_prev: float, norm: float, alpha: float) -> float:
    if norm == 0.0:
        return 0.0
    return (v_cand - v_prev) / (max(v_cand, v_prev) + alpha * norm)


def phi(X: Sequence[float], d_cand: Sequence[float], d_prev: Sequence[float], alpha: float) -> float:
    """Normalised backlog-rate improvement of the candidate; 0 when X = 0."""
    if not len(X) == len(d_cand) == len(d_prev):
        raise LengthMismatch("X, d_cand and d_prev must have equal length")
    v_cand = 0.0
    v_prev = 0.0
    for x, dc, dp in zip(X, d_cand, d_prev):
        if dc:
            v_cand += x * dc
        if dp:
            v_prev += x * dp
    return _phi_from_values(v_cand, v_prev, queue_norm(X), alpha)


def f_update_prob(phi_val: float, rho: float) -> float:
    """Switch probability: linear ramp from 0 at -rho to 1 at rho.

    Negative arguments are evaluated as 1 - f(-phi), which makes
    f(phi) + f(-phi) == 1 hold exactly in floating point.
    """
    if phi_val >= rho:
        return 1.0
    if phi_val <= -rho:
        return 0.0
    if phi_val >= 0.0:
        return 0.5 + phi_val / (2.0 * rho)
    return 1.0 - (0.5 + -phi_val / (2.0 * rho))


@dataclass
class LmrspState:
    """Linear memory of the policy: just the schedule used in the last slot."""

    previous_schedule: ScheduleVector | None = None


@dataclass(frozen=True)
class StepDiagnostics:
    candidate: ScheduleVector
    candidate_index: int
    schedule_index: int
    phi: float
    f: float
    branch: str
    value_candidate: float
    value_previous: float


def lmrsp_step(state: LmrspState, params: PolicyParams, X, s, schedules: ScheduleSet,
               model: ChannelModel, rng: np.random.Generator):
    """One slot of the policy. Returns (I(t), diagnostics) and updates ``state``.

    On the first call (no previous schedule) the candidate is adopted
    directly; the switch coin is still drawn to keep the stream aligned.
    """
    u_success, u_pick, u_coin = rng.random(3)
    kind = params.oracle_kind
    cand = candidate_index(kind, params, X, s, schedules, model, u_success, u_pick)
    w = link_weights(X, s, model)
    v_cand = _value(w, schedules.matrix[cand])
    if state.previous_schedule is None:
        state.previous_schedule = schedules[cand]
        return schedules[cand], StepDiagnostics(
            schedules[cand], cand, cand, 0.0, 1.0, INITIAL, v_cand, 0.0)
    prev = schedules.index(state.previous_schedule)
    v_prev = _value(w, schedules.matrix[prev])
    phi_val = _phi_from_values(v_cand, v_prev, queue_norm(X), params.alpha)
    f_val = f_update_prob(phi_val, params.rho)
    if u_coin < f_val:
        chosen, branch = cand, CANDIDATE
    else:
        chosen, branch = prev, PREVIOUS
    state.previous_schedule = schedules[chosen]
    return schedules[chosen], StepDiagnostics(
        schedules[cand], cand, chosen, phi_val, f_val, branch, v_cand, v_prev)
