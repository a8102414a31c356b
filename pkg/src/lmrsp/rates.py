"""Transmission rates D(s, I) and the system constant nu."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .channel import FROZEN, ChannelModel, stationary_distribution
from .errors import InvalidSchedule, LengthMismatch, ZeroNu
from .topology import ScheduleSet

# exact nu enumerates (state, schedule) pairs up to this many
_EXACT_NU_LIMIT = 1 << 22


def rate_vector(model: ChannelModel, s: Sequence[int], sched: Sequence[int],
                schedules: ScheduleSet) -> tuple[float, ...]:
    """Per-link rate: the good-state rate on active links in state g, else 0."""
    if len(s) != model.n_links or len(sched) != model.n_links:
        raise LengthMismatch("state/schedule length differs from link count")
    if sched not in schedules:
        raise InvalidSchedule(f"{tuple(sched)} is not a valid schedule")
    return tuple(g if (x and on) else 0.0 for g, x, on in zip(model.good_rates, s, sched))


def rate_matrix(model: ChannelModel, s: Sequence[int], schedules: ScheduleSet) -> np.ndarray:
    """D(s, I) for every schedule, shape (|I|, N)."""
    link_rate = np.asarray(model.good_rates) * np.asarray(s, dtype=float)
    return schedules.matrix * link_rate


def nu(model: ChannelModel, schedules: ScheduleSet, exact: bool | None = None) -> float:
    """min over links of the stationary mean of the best per-link rate.

    The exact path sums over every (state, schedule) pair; the closed form
    uses that max_I D_l(s, I) only depends on s_l. ``exact=None`` picks the
    exact path whenever it fits the enumeration budget.
    """
    n = model.n_links
    coverable = schedules.matrix.max(axis=0).astype(bool)
    if exact is None:
        exact = n <= 20 and (len(schedules) << n) <= _EXACT_NU_LIMIT
    if exact:
        states, probs = stationary_distribution(model)
        per_link = np.zeros(n)
        for row, p in zip(states, probs):
            if p == 0.0:
                continue
            per_link += p * rate_matrix(model, row, schedules).max(axis=0)
    else:
        if model.kind == FROZEN:
            p_good = np.asarray(model.initial_state, dtype=float)
        else:
            p_good = np.full(n, 0.5)
        per_link = p_good * np.asarray(model.good_rates) * coverable
    value = float(per_link.min())
    if value <= 0.0:
        bad = [l for l in range(n) if per_link[l] <= 0.0]
        raise ZeroNu(f"links {bad} can never transmit")
    return value
