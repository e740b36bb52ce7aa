import math

import numpy as np
import pytest

from spreadsim.graph import Graph

INF = math.inf


@pytest.fixture
def line5():
    """A-B-C-D-E with unit edges and sources at both ends."""
    return Graph.from_edges(5, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)],
                            [0.0, INF, INF, INF, 0.0])


@pytest.fixture
def triangle():
    """Three nodes, unit edges, s = (0, 1, inf)."""
    return Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], [0.0, 1.0, INF])


@pytest.fixture
def two_gateway():
    """A=0 with s=1 feeding B=1, C=2, D=3 where D has its own s=5."""
    return Graph.from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 2.0)], [1.0, INF, INF, 5.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(REPORT, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
