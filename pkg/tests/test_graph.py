import math

import numpy as np
import pytest

from spreadsim.graph import (INF, DisconnectedPlacementError, GeometricConfig, Graph, GraphError,
                             dumps, generate_geometric, geometric_graph, load, loads, save, shrunken,
                             validate)


def test_basic_accessors(triangle):
    assert triangle.node_count == 3
    assert triangle.neighbors(0) == ((1, 1.0), (2, 1.0))
    assert triangle.edges() == [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]
    assert triangle.e_min == 1.0
    assert triangle.finite_sources == {0, 1}
    assert triangle.s_min == 0.0 and triangle.s_min_set == {0}
    assert validate(triangle) == []


def test_padded_adjacency(line5):
    pad = line5.padded
    assert pad.index.shape == pad.weight.shape == pad.mask.shape
    assert pad.mask.sum() == 2 * line5.edge_count
    # pad slots point at the row itself with infinite weight
    assert np.all(pad.weight[~pad.mask] == np.inf)
    rows = np.broadcast_to(np.arange(5)[:, None], pad.index.shape)
    assert np.all(pad.index[~pad.mask] == rows[~pad.mask])


@pytest.mark.parametrize("adj, s, needle", [
    ({0: {1: 1.0}, 1: {}}, [0, INF], "no reverse edge"),
    ({0: {1: 1.0}, 1: {0: 2.0}}, [0, INF], "asymmetric"),
    ({0: {1: 0.0}, 1: {0: 0.0}}, [0, INF], "nonpositive"),
    ({0: {1: INF}, 1: {0: INF}}, [0, INF], "infinite"),
    ({0: {0: 1.0, 1: 1.0}, 1: {0: 1.0}}, [0, INF], "self-loop"),
    ({0: {}, 1: {}}, [0, INF], "disconnected"),
    ({0: {1: 1.0}, 1: {0: 1.0}}, [INF, INF], "S* empty"),
    ({0: {1: 1.0}, 1: {0: 1.0}}, [-1.0, INF], "negative"),
])
def test_validate_reports(adj, s, needle):
    problems = validate(Graph(adj, s))
    assert any(needle in p for p in problems), problems


def test_from_edges_rejects_self_loop():
    with pytest.raises(GraphError):
        Graph.from_edges(2, [(0, 0, 1.0)], [0, INF])


def test_shrunken():
    g = Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)], [0, INF, INF])
    assert shrunken(g, 0.0) is g
    assert [w for _, _, w in shrunken(g, 0.5).edges()] == [0.5, 2.5, 1.5]
    with pytest.raises(GraphError):
        shrunken(g, 1.0)
    with pytest.raises(GraphError):
        shrunken(g, -0.1)


def test_two_point_geometric_graph():
    g = geometric_graph(np.array([[0.0, 0.0], [0.1, 0.0]]), 0.25, {0: 0.0})
    assert g.edges() == [(0, 1, pytest.approx(0.1))]


def test_generate_is_deterministic_and_connected():
    cfg = GeometricConfig(1.0, 0.5, 0.25, 60, seed=3)
    a = generate_geometric(cfg, {0: 0.0})
    b = generate_geometric(cfg, {0: 0.0})
    assert a == b and a.edges() == b.edges()
    assert a.is_connected() and validate(a) == []
    c = generate_geometric(GeometricConfig(1.0, 0.5, 0.25, 60, seed=4), {0: 0.0})
    assert a != c


def test_pinned_position():
    g = generate_geometric(GeometricConfig(4, 4, 0.6, 200, seed=1, pinned={0: (0.3, 0.3)}), {0: 0.0})
    assert tuple(g.positions[0]) == (0.3, 0.3)


def test_sparse_placement_gives_up():
    with pytest.raises(DisconnectedPlacementError):
        generate_geometric(GeometricConfig(100, 100, 0.01, 20, seed=0), {0: 0.0})


def test_text_round_trip(tmp_path, two_gateway):
    text = dumps(two_gateway)
    assert text.splitlines()[0] == "4 3"
    assert "1 inf" in text.splitlines()
    assert loads(text) == two_gateway
    save(two_gateway, tmp_path / "g.txt")
    assert load(tmp_path / "g.txt") == two_gateway


def test_text_exact_floats():
    g = Graph.from_edges(2, [(0, 1, 0.1 + 0.2)], [math.pi, INF])
    assert loads(dumps(g)) == g


def test_loads_errors():
    with pytest.raises(GraphError, match="line 1"):
        loads("3\n")
    with pytest.raises(GraphError):
        loads("2 1\n0 1\n0 0\n1 inf\n")
