import itertools

import numpy as np
import pytest

from agc.graph import build_graph

BARBELL_EDGES = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]
BARBELL_SPLIT = np.array([0, 0, 0, 1, 1, 1])

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture
def barbell():
    return build_graph(BARBELL_EDGES, 6)


@pytest.fixture
def path3():
    return build_graph([(0, 1), (1, 2)], 3)


def random_graph(rng, n, p, min_edges=1):
    """Erdos-Renyi graph with at least ``min_edges`` edges."""
    while True:
        pairs = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
        if len(pairs) >= min_edges:
            return build_graph(pairs, n)


def dense_adjacency(graph):
    a = np.zeros((graph.num_nodes, graph.num_nodes))
    for u, v in graph.edges():
        a[u, v] = a[v, u] = 1.0
    return a


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
