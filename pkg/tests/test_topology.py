import numpy as np
import pytest
from hypothesis import given, strategies as st

from lmrsp.errors import InvalidSchedule, LengthMismatch, SizeLimitExceeded
from lmrsp.topology import (InterferenceModel, NetworkGraph, enumerate_schedules,
                            is_valid_schedule)

from conftest import brute_schedules, random_graph


def test_path_matchings():
    g = NetworkGraph.path(3)
    sched = enumerate_schedules(g, InterferenceModel(1))
    assert list(sched) == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 0, 1)]


def test_two_hop_on_path_allows_only_far_links():
    g = NetworkGraph.path(4)
    sched = enumerate_schedules(g, InterferenceModel(2))
    # links 0 and 3 are two hops apart, everything else conflicts
    assert (1, 0, 0, 1) in sched
    assert (1, 0, 1, 0) not in sched
    assert len(sched) == 6


def test_empty_schedule_always_first(path4):
    sched = enumerate_schedules(path4, InterferenceModel(1))
    assert sched[0] == (0, 0, 0, 0)
    assert sched.index((0, 0, 0, 0)) == 0


def test_index_roundtrip_and_errors(path4):
    sched = enumerate_schedules(path4, InterferenceModel(1))
    for i, row in enumerate(sched):
        assert sched.index(row) == i
    with pytest.raises(InvalidSchedule):
        sched.index((1, 1, 0, 0))
    assert (1, 1, 0, 0) not in sched


def test_length_mismatch(path4):
    with pytest.raises(LengthMismatch):
        is_valid_schedule(path4, InterferenceModel(1), (1, 0))


def test_size_limit():
    g = NetworkGraph(50, tuple((2 * i, 2 * i + 1) for i in range(25)))
    with pytest.raises(SizeLimitExceeded):
        enumerate_schedules(g, InterferenceModel(1))


@pytest.mark.parametrize("edges", [((0, 0),), ((0, 1), (1, 0)), ((0, 5),)])
def test_bad_graphs(edges):
    with pytest.raises(ValueError):
        NetworkGraph(3, edges)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_enumeration_matches_brute_force(seed, kappa):
    g = random_graph(np.random.default_rng(seed))
    model = InterferenceModel(kappa)
    sched = enumerate_schedules(g, model)
    expected = brute_schedules(g, kappa)
    assert list(sched) == sorted(expected)
    for row in expected:
        assert is_valid_schedule(g, model, row)


@given(st.integers(0, 2**32 - 1))
def test_schedule_set_is_down_closed(seed):
    g = random_graph(np.random.default_rng(seed))
    sched = enumerate_schedules(g, InterferenceModel(1))
    for row in sched:
        for l in range(len(row)):
            if row[l]:
                sub = list(row)
                sub[l] = 0
                assert tuple(sub) in sched
