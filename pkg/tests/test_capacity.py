import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lmrsp.capacity import (boundary_point, capacity_membership, direction_grid,
                            effective_guarantee, estimate_psi_phi, estimate_theta,
                            estimate_upsilon, frozen_hull_gauge, min_load, theta_lower_bound,
                            theta_min)
from lmrsp.channel import FROZEN, ChannelModel, all_states
from lmrsp.engine import System
from lmrsp.errors import InvalidGrid, SizeLimitExceeded, ZeroQueue
from lmrsp.policy import EXACT, GREEDY_MATCHING, NOISY_ORACLE, UNIFORM, PolicyParams
from lmrsp.rates import nu, rate_matrix
from lmrsp.topology import InterferenceModel, NetworkGraph, enumerate_schedules

from conftest import random_graph


def _sched(n_links):
    return enumerate_schedules(NetworkGraph.path(n_links), InterferenceModel(1))


def test_two_adjacent_frozen_examples():
    sched = _sched(2)
    m = ChannelModel((1.0, 1.0), kind=FROZEN)
    cert = capacity_membership((0.4, 0.4), m, sched)
    assert cert.inside and cert.epsilon == pytest.approx(0.2)
    assert np.allclose(cert.reconstruct(m, sched), (0.4, 0.4), atol=1e-9)
    out = capacity_membership((0.6, 0.6), m, sched)
    assert not out.inside and out.load == pytest.approx(1.2)


def test_theta_scaling():
    sched = _sched(2)
    m = ChannelModel((1.0, 1.0), kind=FROZEN)
    assert capacity_membership((0.3, 0.3), m, sched, theta=0.8).inside
    assert not capacity_membership((0.45, 0.45), m, sched, theta=0.8).inside
    with pytest.raises(ValueError):
        capacity_membership((0.1, 0.1), m, sched, theta=0.0)


def test_unreachable_link_is_outside():
    sched = _sched(2)
    m = ChannelModel((1.0, 1.0), kind=FROZEN, initial_state=(1, 0))
    out = capacity_membership((0.1, 0.1), m, sched)
    assert not out.inside and math.isinf(out.load)


def test_single_link_markov_half_rate():
    sched = _sched(1)
    m = ChannelModel((2.0,), r=0.3)
    assert capacity_membership((0.99,), m, sched).inside
    assert not capacity_membership((1.01,), m, sched).inside


def test_two_adjacent_markov_symmetric_boundary():
    # one link on in every state where any link is good: 3/4 total throughput
    b = boundary_point((1, 1), ChannelModel((1.0, 1.0), r=0.2), _sched(2))
    assert np.allclose(b, (0.375, 0.375))


def test_lp_too_large():
    g = NetworkGraph(26, tuple((2 * i, 2 * i + 1) for i in range(13)))
    sched = enumerate_schedules(g, InterferenceModel(1))
    with pytest.raises(SizeLimitExceeded):
        min_load([0.1] * 13, ChannelModel((1.0,) * 13, r=0.2), sched)


@given(st.integers(0, 2**32 - 1))
def test_boundary_respects_support_function(seed):
    """w.b <= sum_s pi(s) max_I w.D(s, I) for any w >= 0, tight for the LP dual."""
    rng = np.random.default_rng(seed)
    g = random_graph(rng, max_edges=4, max_nodes=5)
    n = g.n_links
    m = ChannelModel(tuple(rng.integers(1, 4, n).astype(float)), r=0.3)
    sched = enumerate_schedules(g, InterferenceModel(1))
    b = boundary_point(rng.uniform(0.1, 1.0, n), m, sched)
    states = all_states(n)
    mats = [rate_matrix(m, s, sched) for s in states]
    for w in rng.uniform(0, 1, (200, n)):
        h = np.mean([float((mat @ w).max()) for mat in mats])
        assert w @ b <= h + 1e-9


@given(st.integers(0, 2**32 - 1))
def test_lp_matches_hull_gauge(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, max_edges=4, max_nodes=5)
    n = g.n_links
    m = ChannelModel(tuple(rng.integers(1, 4, n).astype(float)), kind=FROZEN,
                     initial_state=tuple(rng.integers(0, 2, n)))
    sched = enumerate_schedules(g, InterferenceModel(int(rng.integers(1, 3))))
    a = rng.uniform(0, 1.5, n) * (rng.random(n) < 0.8)
    lp, *_ = min_load(a, m, sched)
    hull = frozen_hull_gauge(a, m, sched)
    if math.isinf(hull):
        assert math.isinf(lp)
    else:
        assert lp == pytest.approx(hull, abs=1e-8)


def test_theta_min_closed_form():
    assert theta_min(0.0, 0.02, 0.5, 0.2) == pytest.approx(0.98 / 1.216)
    assert theta_min(0.0, 0.02, 1.0, 0.3) == pytest.approx(0.98)
    assert theta_min(0.5, 0.02, 1.0, 0.3) == pytest.approx(0.49)
    assert theta_lower_bound(0.0, 0.02, 0.5, 0.2, 0.01, 0.5, 4) < theta_min(0.0, 0.02, 0.5, 0.2)


@given(st.floats(0.01, 0.99), st.floats(0.001, 0.5), st.floats(0.05, 1.0))
def test_theta_min_decreases_with_correlation_loss(r, rho, delta):
    # faster channel changes hurt the stale schedule more
    assert theta_min(0, rho, delta, r) >= theta_min(0, rho, delta, min(1.0, r + 0.01)) - 1e-15


def test_effective_guarantee():
    assert effective_guarantee(PolicyParams(oracle_kind=UNIFORM), 8) == (0.0, 0.125)
    assert effective_guarantee(PolicyParams(oracle_kind=GREEDY_MATCHING, delta=0.7), 8) == (0.5, 0.7)


def test_upsilon_exact_vs_monte_carlo(path4, node_exclusive):
    m = ChannelModel((1.0, 2.0, 1.0, 1.0), r=0.2)
    sched = enumerate_schedules(path4, node_exclusive)
    X = (3.0, 1.0, 2.0, 5.0)
    exact = estimate_upsilon(X, m, sched)
    mc = estimate_upsilon(X, m, sched, reps=20_000, rng=np.random.default_rng(0), exact_limit=1)
    assert abs(mc.value - exact.value) < 4 * mc.stderr


def _system(channel, kind=NOISY_ORACLE, delta=0.5, rho=0.02):
    return System(NetworkGraph.path(4), InterferenceModel(1), channel,
                  PolicyParams(alpha=0.01, rho=rho, delta=delta, oracle_kind=kind))


def test_psi_phi_zero_queue():
    with pytest.raises(ZeroQueue):
        estimate_psi_phi([0, 0, 0, 0], _system(ChannelModel((1.0,) * 4, r=0.2)), 10, 5,
                         np.random.default_rng(0))


def test_frozen_psi_is_rho_times_phi_up_to_last_slot():
    system = _system(ChannelModel((1.0,) * 4, kind=FROZEN), kind=EXACT, rho=0.05)
    K = 200
    pp = estimate_psi_phi([1.0, 3.0, 2.0, 1.0], system, K, 50, np.random.default_rng(0))
    # every per-slot term is at most Upsilon, so the missing last term is at most 1/K
    assert np.all(pp.psi_samples <= 0.05 * pp.phi_samples + 1e-12)
    assert np.all(pp.psi_samples >= 0.05 * (pp.phi_samples - 1.0 / K) - 1e-12)
    assert pp.phi > 0.95


def test_markov_psi_phi_bound_holds():
    r, rho = 0.3, 0.02
    system = _system(ChannelModel((1.0,) * 4, r=r), rho=rho)
    pp = estimate_psi_phi([2.0, 1.0, 1.0, 3.0], system, 400, 100, np.random.default_rng(1),
                          burn_in=40)
    gap = pp.bound_gap(r + (1 - r) * rho)
    assert gap.value <= 3 * gap.stderr
    assert 0.0 < pp.phi <= 1.0


def test_direction_grid_shape():
    d = direction_grid(4, 5, np.random.default_rng(0))
    assert d.shape == (10, 4)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
    assert np.all(d >= 0)


def test_estimate_theta_validates_grid():
    system = _system(ChannelModel((1.0,) * 4, r=0.2))
    with pytest.raises(InvalidGrid):
        estimate_theta(system, K=20, directions=[[1.0, 1.0, 0, 0]], reps=5)
    with pytest.raises(InvalidGrid):
        estimate_theta(system, K=20, directions=[[-1.0, 0, 0, 0]], reps=5)


def test_estimate_theta_above_finite_alpha_bound():
    r = 0.3
    system = _system(ChannelModel((1.0,) * 4, r=r))
    est = estimate_theta(system, K=200, reps=60, rng=np.random.default_rng(2), n_random=3)
    lb = theta_lower_bound(0.0, 0.02, 0.5, r, 0.01, nu(system.channel, system.schedules), 4)
    assert est.theta >= lb - 3 * est.stderr
    assert est.theta <= 1.0 + 3 * est.stderr
    assert est.grid_size == 8
