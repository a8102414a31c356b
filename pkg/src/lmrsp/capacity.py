"""Capacity region membership, the closed-form stability fraction, and
Monte Carlo estimators of the frozen-queue benchmarks (Upsilon, Psi, Phi, theta).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import engine
from .channel import FROZEN, ChannelModel, mixing_horizon, stationary_distribution
from .errors import InvalidGrid, SizeLimitExceeded, ZeroQueue
from .policy import gmwm_solve, oracle_guarantee
from .rates import nu, rate_matrix
from .topology import ScheduleSet

LP_TOL = 1e-8
MAX_LP_LINKS = 12
EXACT_STATE_LIMIT = 4096


# -- membership -------------------------------------------------------------

@dataclass(frozen=True)
class CapacityCertificate:
    """Witness that ``a`` lies strictly inside theta * Gamma.

    ``beta`` maps (state index, schedule index) to the time share of that
    schedule in that state; ``load`` is max over states of the shares' sum.
    """

    beta: dict
    load: float
    epsilon: float
    theta_used: float
    states: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)
    inside: bool = True

    def reconstruct(self, model: ChannelModel, schedules: ScheduleSet) -> np.ndarray:
        a = np.zeros(schedules.n_links)
        for (si, ii), b in self.beta.items():
            a += self.probs[si] * b * rate_matrix(model, self.states[si], schedules)[ii]
        return a


@dataclass(frozen=True)
class Outside:
    """``a`` is not strictly inside theta * Gamma; ``load`` is the least achievable
    max share sum (inf when no mixture of schedules reaches ``a`` at all)."""

    load: float
    theta_used: float
    inside: bool = False


def _support(model: ChannelModel, max_links: int):
    if model.n_links > max_links:
        raise SizeLimitExceeded(
            f"{model.n_links} links exceed the membership LP limit of {max_links}")
    states, probs = stationary_distribution(model)
    keep = probs > 0
    return states[keep], probs[keep]


def min_load(a: Sequence[float], model: ChannelModel, schedules: ScheduleSet,
             max_links: int = MAX_LP_LINKS):
    """Solve min m s.t. a = sum_s pi(s) sum_I beta_{s,I} D(s,I), sum_I beta_{s,I} <= m.

    Returns (m, beta matrix of shape (states, schedules), states, probs);
    m is inf when the equality system is infeasible.
    """
    a = np.asarray(a, dtype=float)
    states, probs = _support(model, max_links)
    n_s, n_i, n = len(states), len(schedules), schedules.n_links
    if np.all(a == 0):
        return 0.0, np.zeros((n_s, n_i)), states, probs
    nvar = n_s * n_i + 1
    A_eq = np.zeros((n, nvar))
    for k, (row, p) in enumerate(zip(states, probs)):
        A_eq[:, k * n_i:(k + 1) * n_i] = p * rate_matrix(model, row, schedules).T
    A_ub = np.zeros((n_s, nvar))
    for k in range(n_s):
        A_ub[k, k * n_i:(k + 1) * n_i] = 1.0
        A_ub[k, -1] = -1.0
    c = np.zeros(nvar)
    c[-1] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n_s), A_eq=A_eq, b_eq=a,
                  bounds=[(0, None)] * nvar, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        return math.inf, None, states, probs
    if res.status != 0:
        raise RuntimeError(f"membership LP failed: {res.message}")
    beta = np.clip(res.x[:-1], 0.0, None).reshape(n_s, n_i)
    return float(beta.sum(axis=1).max()), beta, states, probs


def capacity_membership(a: Sequence[float], model: ChannelModel, schedules: ScheduleSet,
                        theta: float = 1.0, tol: float = LP_TOL,
                        max_links: int = MAX_LP_LINKS):
    """Certificate if ``a`` is strictly inside theta * Gamma, else ``Outside``."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if any(x < 0 for x in a):
        raise ValueError("rates must be non-negative")
    load, beta, states, probs = min_load(a, model, schedules, max_links)
    if not math.isfinite(load) or theta - load <= tol:
        return Outside(load=load, theta_used=theta)
    shares = {(int(si), int(ii)): float(beta[si, ii])
              for si, ii in zip(*np.nonzero(beta > 0))}
    return CapacityCertificate(beta=shares, load=load, epsilon=theta - load,
                               theta_used=theta, states=states, probs=probs)


def boundary_point(direction: Sequence[float], model: ChannelModel,
                   schedules: ScheduleSet) -> np.ndarray:
    """The point of Gamma's boundary along ``direction`` (a ray from the origin)."""
    d = np.asarray(direction, dtype=float)
    load, *_ = min_load(d, model, schedules)
    if not math.isfinite(load) or load == 0.0:
        raise ValueError("direction does not meet the capacity region boundary")
    return d / load


def frozen_hull_gauge(a: Sequence[float], model: ChannelModel, schedules: ScheduleSet,
                      tol: float = 1e-9) -> float:
    """Smallest m with a in m * hull{D(s0, I)} for a frozen channel, by facet enumeration.

    Enumerates every hyperplane through affinely independent d-subsets of
    the rate vectors, keeps the supporting ones, and reads the gauge off
    them. Exponential in the point count; meant for tiny cross-checks.
    """
    if model.kind != FROZEN:
        raise ValueError("hull gauge cross-check is defined for frozen channels")
    a = np.asarray(a, dtype=float)
    pts = np.unique(rate_matrix(model, model.initial_state, schedules), axis=0)
    support = pts.max(axis=0) > 0
    if np.any(a[~support] > tol):
        return math.inf
    a = a[support]
    pts = np.unique(pts[:, support], axis=0)
    d = a.size
    if d == 0:
        return 0.0
    gauge = 0.0
    for combo in itertools.combinations(range(len(pts)), d):
        sub = pts[list(combo)]
        M = np.hstack([sub, -np.ones((d, 1))])
        _, sv, vt = np.linalg.svd(M)
        rank = int(np.sum(sv > 1e-12))
        if rank != d:
            continue
        normal, offset = vt[-1, :d], vt[-1, d]
        if np.linalg.norm(normal) < 1e-12:
            continue
        side = pts @ normal - offset
        if np.all(side >= -tol):
            normal, offset, side = -normal, -offset, -side
        elif not np.all(side <= tol):
            continue
        if offset > tol:
            gauge = max(gauge, float(a @ normal) / offset)
        elif float(a @ normal) > tol:
            return math.inf
    return gauge


# -- closed forms -----------------------------------------------------------

def theta_min(zeta: float, rho: float, delta: float, r: float) -> float:
    """Lower bound on the stabilised fraction for independent two-state links."""
    zeta_prime = 1.0 - (1.0 - rho) * (1.0 - zeta)
    return (1.0 - zeta_prime) / (1.0 + (1.0 - delta) / delta * ((1.0 - r) * rho + r))


def theta_lower_bound(zeta: float, rho: float, delta: float, r: float,
                      alpha: float, nu_value: float, n_links: int) -> float:
    """Finite-alpha version of ``theta_min`` (includes the sqrt(N) rho alpha / (delta nu) term)."""
    zeta_prime = 1.0 - (1.0 - rho) * (1.0 - zeta)
    penalty = math.sqrt(n_links) * rho * alpha / (delta * nu_value)
    return (1.0 - zeta_prime - penalty) / (1.0 + (1.0 - delta) / delta * (r + (1.0 - r) * rho))


# -- benchmarks -------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float = 0.0


def estimate_upsilon(X: Sequence[float], model: ChannelModel, schedules: ScheduleSet,
                     reps: int = 10_000, rng: np.random.Generator | None = None,
                     exact_limit: int = EXACT_STATE_LIMIT) -> Estimate:
    """Stationary mean of the max backlog-rate product for a fixed X."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    n = model.n_links
    if model.kind == FROZEN:
        return Estimate(gmwm_solve(X, model.initial_state, schedules, model)[1])
    if (1 << n) <= exact_limit:
        states, probs = stationary_distribution(model)
        total = 0.0
        for row, p in zip(states, probs):
            total += p * gmwm_solve(X, tuple(row), schedules, model)[1]
        return Estimate(total)
    if rng is None:
        raise SizeLimitExceeded("state space too large for exact evaluation and no rng given")
    draws = (rng.random((reps, n)) < 0.5).astype(np.uint8)
    vals = np.array([gmwm_solve(X, tuple(row), schedules, model)[1] for row in draws])
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0)


@dataclass(frozen=True)
class PsiPhi:
    """Frozen-queue benchmark estimates for one X, with per-rollout samples."""

    psi: float
    psi_stderr: float
    phi: float
    phi_stderr: float
    upsilon: float
    psi_samples: np.ndarray = field(repr=False)
    phi_samples: np.ndarray = field(repr=False)

    def bound_gap(self, factor: float) -> Estimate:
        """Mean and stderr of psi - factor * phi over the rollouts."""
        diff = self.psi_samples - factor * self.phi_samples
        return Estimate(float(diff.mean()), _stderr(diff))


def _stderr(x: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    return float(x.std(ddof=1) / math.sqrt(x.size))


def initial_conditions(system: "engine.System", reps: int, rng: np.random.Generator):
    """Channel states from the stationary law and uniformly drawn schedules."""
    n = system.n_links
    ch = system.channel
    if ch.kind == FROZEN:
        s0 = np.tile(np.asarray(ch.initial_state, dtype=np.uint8), (reps, 1))
        rng.random((reps, n))
    else:
        s0 = (rng.random((reps, n)) < 0.5).astype(np.uint8)
    i0 = np.minimum((rng.random(reps) * len(system.schedules)).astype(np.int64),
                    len(system.schedules) - 1)
    return s0, i0


def estimate_psi_phi(X: Sequence[float], system: "engine.System", K: int, reps: int,
                     rng: np.random.Generator, s0=None, i0=None, burn_in: int = 0,
                     backend: str | None = None) -> PsiPhi:
    """Run ``reps`` frozen-queue rollouts of K slots and normalise by K * Upsilon(X).

    Psi sums K - 1 terms over a K denominator, as in its definition.
    Without explicit ``s0``/``i0`` the start is drawn by ``initial_conditions``.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    X = np.asarray(X, dtype=float)
    if not np.any(X):
        raise ZeroQueue("benchmarks are undefined for an empty queue vector")
    ups = estimate_upsilon(X, system.channel, system.schedules, rng=rng).value
    if s0 is None or i0 is None:
        s0, i0 = initial_conditions(system, reps, rng)
    else:
        s0 = np.tile(np.asarray(s0, dtype=np.uint8).reshape(1, -1), (reps, 1))
        i0 = np.full(reps, int(i0), dtype=np.int64)
    phi_sums, psi_sums = engine.rollouts(system, X, s0, i0, K, rng, burn_in=burn_in,
                                         backend=backend)
    scale = K * ups
    phi_s = phi_sums / scale
    psi_s = psi_sums / scale
    return PsiPhi(float(psi_s.mean()), _stderr(psi_s), float(phi_s.mean()), _stderr(phi_s),
                  ups, psi_s, phi_s)


def direction_grid(n_links: int, n_random: int, rng: np.random.Generator) -> np.ndarray:
    """Coordinate axes, the uniform direction, then random non-negative unit vectors."""
    dirs = [np.eye(n_links)[l] for l in range(n_links)]
    dirs.append(np.full(n_links, 1.0 / math.sqrt(n_links)))
    for _ in range(n_random):
        v = np.abs(rng.normal(size=n_links))
        dirs.append(v / np.linalg.norm(v))
    return np.array(dirs)


@dataclass(frozen=True)
class DirectionEstimate:
    direction: np.ndarray
    psi_phi: PsiPhi
    first_term: float
    value: float


@dataclass(frozen=True)
class ThetaEstimate:
    """Minimum over a finite direction grid: an upper estimate of the true infimum."""

    theta: float
    stderr: float
    zeta: float
    delta: float
    nu: float
    grid_size: int
    K: int
    reps: int
    per_direction: list = field(repr=False)

    @property
    def argmin(self) -> DirectionEstimate:
        return min(self.per_direction, key=lambda d: d.value)


def theta_terms(pp: PsiPhi, zeta: float, delta: float, rho: float, alpha: float,
                nu_value: float, n_links: int) -> tuple[float, float]:
    zeta_prime = 1.0 - (1.0 - rho) * (1.0 - zeta)
    first = (1.0 - zeta_prime - (1.0 - delta) / delta * pp.psi
             - math.sqrt(n_links) * rho * alpha / (delta * nu_value))
    return first, max(first, pp.phi)


def estimate_theta(system: "engine.System", K: int | None = None, directions=None,
                   reps: int = 100, rng: np.random.Generator | None = None,
                   magnitude: float = 1e6, n_random: int = 64, burn_in: int | None = None,
                   backend: str | None = None) -> ThetaEstimate:
    """Grid estimate of theta for a Markov (or frozen) channel.

    For each unit direction x the queue is frozen at ``magnitude * x`` and
    max(1 - zeta' - (1-delta)/delta Psi - sqrt(N) rho alpha/(delta nu), Phi)
    is estimated by rollouts; the minimum over the grid is returned.
    """
    rng = rng if rng is not None else engine.make_rng(0)
    n = system.n_links
    ch = system.channel
    k0 = mixing_horizon(n, ch.r) if 0.0 < ch.r < 1.0 and ch.kind != FROZEN else 1
    if K is None:
        K = 100 * k0
    if burn_in is None:
        burn_in = 10 * k0
    if directions is None:
        directions = direction_grid(n, n_random, rng)
    directions = np.asarray(directions, dtype=float)
    if directions.ndim != 2 or directions.shape[1] != n:
        raise InvalidGrid("directions must be an array of shape (count, N)")
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9) or np.any(directions < 0):
        raise InvalidGrid("every direction must be a non-negative unit vector")
    p = system.params
    zeta, delta = effective_guarantee(p, len(system.schedules))
    nu_value = nu(ch, system.schedules)
    per = []
    for x in directions:
        pp = estimate_psi_phi(magnitude * x, system, K, reps, rng, burn_in=burn_in,
                              backend=backend)
        first, value = theta_terms(pp, zeta, delta, p.rho, p.alpha, nu_value, n)
        per.append(DirectionEstimate(x, pp, first, value))
    best = min(per, key=lambda d: d.value)
    if best.value == best.first_term:
        se = (1.0 - delta) / delta * best.psi_phi.psi_stderr
    else:
        se = best.psi_phi.phi_stderr
    return ThetaEstimate(best.value, se, zeta, delta, nu_value, len(per), K, reps, per)


def effective_guarantee(params, n_schedules: int) -> tuple[float, float]:
    """Conservative (zeta, delta): the weaker of the configured and the kind's own."""
    kz, kd = oracle_guarantee(params.oracle_kind, n_schedules, params.delta)
    return max(params.zeta, kz), min(params.delta, kd)
