import itertools

import numpy as np
import pytest
from hypothesis import settings

from lmrsp.channel import ChannelModel
from lmrsp.topology import InterferenceModel, NetworkGraph

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def floyd_distances(graph):
    n = graph.node_count
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0)
    for u, v in graph.edges:
        d[u, v] = d[v, u] = 1
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def brute_schedules(graph, kappa):
    """All valid 0/1 vectors by filtering the full cube; independent of the library."""
    d = floyd_distances(graph)
    edges = graph.edges
    n = len(edges)

    def conflict(i, j):
        return min(d[a, b] for a in edges[i] for b in edges[j]) < kappa

    out = []
    for bits in itertools.product((0, 1), repeat=n):
        on = [l for l in range(n) if bits[l]]
        if all(not conflict(i, j) for i, j in itertools.combinations(on, 2)):
            out.append(bits)
    return out


def random_graph(rng, max_edges=8, max_nodes=7):
    n_nodes = int(rng.integers(2, max_nodes + 1))
    pairs = list(itertools.combinations(range(n_nodes), 2))
    k = int(rng.integers(1, min(max_edges, len(pairs)) + 1))
    idx = rng.choice(len(pairs), size=k, replace=False)
    return NetworkGraph(n_nodes, tuple(pairs[i] for i in sorted(idx)))


@pytest.fixture
def path4():
    return NetworkGraph.path(4)


@pytest.fixture
def node_exclusive():
    return InterferenceModel(1)


@pytest.fixture
def unit_markov4():
    return ChannelModel((1.0,) * 4, r=0.2)


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES.append((number, f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
