import math

import numpy as np
import pytest

from spreadsim import engine, metrics, oracle
from spreadsim.engine import PLAIN, RaisingConfig, init, run, step
from spreadsim.functions import abf_sum, for_graph
from spreadsim.graph import GeometricConfig, Graph, generate_geometric

INF = math.inf
LINE5_RAISING = RaisingConfig(M=4.0, delta=1.0, deadzone=0.0)


def test_raising_config_validation():
    with pytest.raises(ValueError):
        RaisingConfig(M=1.0, delta=0.0)
    with pytest.raises(ValueError):
        RaisingConfig(M=-1.0, delta=1.0)
    with pytest.raises(ValueError):
        RaisingConfig(M=1.0, delta=1.0, deadzone=-0.5)
    custom = RaisingConfig(M=1.0, delta=1.0, g=lambda x: 2 * x + 1)
    assert custom.raise_(np.array([1.0])).tolist() == [3.0]


def test_init(line5):
    st = init(line5, [0, 1, 3, 2, 0])
    assert st.t == 0
    assert st.in_S.tolist() == [True, False, False, False, True]
    assert st.in_R.tolist() == st.in_S.tolist()
    assert st.constraining.tolist() == [0, 1, 2, 3, 4]
    assert st.in_A.all()
    assert not init(line5, [1, 1, 1, 1, 1]).in_S.any()
    with pytest.raises(ValueError):
        init(line5, [0, -1, 0, 0, 0])
    with pytest.raises(ValueError):
        init(line5, [0, 0, 0])
    with pytest.raises(ValueError):
        init(line5, [0, INF, 0, 0, 0])


def test_line5_first_round(line5):
    f = abf_sum(1.0)
    s1 = step(init(line5, [0, 1, 3, 2, 0]), line5, f, LINE5_RAISING)
    A, B, C, D, E = range(5)
    assert s1.constraining[B] == A and s1.in_A[B] and s1.estimates[B] == 1.0
    assert s1.tilde[D] == 1.0 and s1.estimates[D] == 3.0
    assert s1.in_A.tolist() == [True, True, False, False, True]
    assert s1.in_R.tolist() == [True, True, False, False, True]
    assert s1.in_U.tolist() == s1.in_E.tolist() == [False, False, True, True, False]


def test_line5_converges_in_four_rounds(line5):
    # C starts at 3 and D at 1.5: the caption's sets R(1), U(1) hold and
    # the run settles after four rounds
    f = abf_sum(1.0)
    x = np.array([0.0, 1.0, 2.0, 1.0, 0.0])
    series = metrics.ErrorSeries(x)
    traj = run(line5, f, LINE5_RAISING, [0, 1, 3, 1.5, 0], 10, observers=[series])
    assert traj.in_R[1].tolist() == [True, True, False, False, True]
    assert traj.in_A[1].tolist() == [True, True, False, False, True]
    assert metrics.convergence_round(series) == 4
    assert traj.final.estimates.tolist() == x.tolist()
    bound = oracle.convergence_time_bound(oracle.stationary(line5, f), line5, f, LINE5_RAISING, [0, 1, 3, 1.5, 0])
    assert 4 <= bound


def test_line5_spec_initial_converges_by_round_three(line5):
    series = metrics.ErrorSeries(np.array([0.0, 1.0, 2.0, 1.0, 0.0]))
    run(line5, abf_sum(1.0), LINE5_RAISING, [0, 1, 3, 2, 0], 10, observers=[series])
    assert metrics.convergence_round(series) == 3


def test_two_node_raise_then_snap():
    g = Graph.from_edges(2, [(0, 1, 1.0)], [0.0, INF])
    traj = run(g, abf_sum(1.0), RaisingConfig(M=10.0, delta=1.0, deadzone=0.0), [0, 5], 8)
    assert traj.estimates[:, 1].tolist() == [5, 6, 7, 8, 9, 10, 1, 1, 1]
    assert traj.tilde[1:, 1].tolist() == [1.0] * 8
    assert traj.in_A[1:6, 1].tolist() == [False] * 5
    assert traj.in_A[6, 1]


def _eq1_step(g, f, x):
    pad = g.padded
    cand = np.where(pad.mask, f(x[pad.index], pad.weight, pad.index), np.inf)
    return np.minimum(cand.min(axis=1), g.max_values)


@pytest.mark.parametrize("raising", [PLAIN, RaisingConfig(0.0, 3.0, 0.0), RaisingConfig(7.0, 1.0, INF)])
def test_plain_reduction_is_bitwise(raising):
    g = generate_geometric(GeometricConfig(1.0, 0.5, 0.3, 40, seed=11), {0: 0.0, 5: 0.2})
    f = abf_sum(g.e_min)
    x = np.random.default_rng(0).uniform(0, 3, g.node_count)
    st = init(g, x)
    for _ in range(30):
        expect = _eq1_step(g, f, st.estimates)
        st = step(st, g, f, raising)
        assert np.array_equal(st.estimates, expect)
        assert st.in_A.all()


def test_plain_matches_bellman_ford_relaxation():
    g = generate_geometric(GeometricConfig(1.0, 1.0, 0.35, 30, seed=2), {0: 0.0})
    f = abf_sum(g.e_min)
    x = oracle.stationary_values(g, f)
    # Bellman-Ford from all-overestimates: dist_t = min(s, min_k dist_{t-1}[k] + w)
    d = np.full(g.node_count, 50.0)
    traj = run(g, f, PLAIN, d, 40)
    for t in range(1, 41):
        d = np.array([min(g.max_values[i], min(d[k] + w for k, w in g.neighbors(i)))
                      for i in range(g.node_count)])
        np.testing.assert_array_equal(traj.estimates[t], d)
    np.testing.assert_allclose(traj.final.estimates, x, atol=1e-12)


def test_constraining_tie_breaks_to_lowest_index():
    g = Graph.from_edges(3, [(0, 2, 1.0), (1, 2, 1.0)], [0.0, 0.0, INF])
    st = step(init(g, [0, 0, 5]), g, abf_sum(1.0), PLAIN)
    assert st.constraining[2] == 0


def test_source_clause_wins_ties(triangle):
    st = step(init(triangle, [0, 1, 1]), triangle, abf_sum(1.0), PLAIN)
    # node 1: neighbor 0 offers 0 + 1 = s_1 exactly
    assert st.constraining[1] == 1
    assert st.in_S[1] and st.in_R[1]


def test_value_cap_keeps_mpp_below_one():
    g = Graph.from_edges(2, [(0, 1, 0.5)], [0.0, INF])
    f = for_graph("mpp", g)
    traj = run(g, f, RaisingConfig(M=5.0, delta=1.0, deadzone=0.0), [0, 0.9], 5)
    assert traj.estimates.max() <= 1.0


def test_guas_spot_check():
    g = generate_geometric(GeometricConfig(1.0, 0.6, 0.3, 30, seed=5), {0: 0.0})
    f = abf_sum(g.e_min)
    x = oracle.stationary_values(g, f)
    r = RaisingConfig(M=120.0, delta=120.0, deadzone=0.0)
    rng = np.random.default_rng(1)
    finals = [run(g, f, r, rng.uniform(0, 100, g.node_count), 500,
                  record_every=0, stop_when_stationary=True).final.estimates for _ in range(20)]
    for fin in finals:
        np.testing.assert_array_equal(fin, finals[0])
    np.testing.assert_allclose(finals[0], x, atol=1e-9)


def test_stationary_point_is_fixed(line5):
    f = abf_sum(1.0)
    x = oracle.stationary_values(line5, f)
    st = step(init(line5, x), line5, f, LINE5_RAISING)
    assert np.array_equal(st.estimates, x)


def test_run_recording_and_csv(tmp_path, line5):
    traj = run(line5, abf_sum(1.0), LINE5_RAISING, [0, 1, 3, 1.5, 0], 9, record_every=4)
    assert traj.rounds == [0, 4, 8, 9]
    traj.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "round,node,estimate,tilde,in_A,in_R,constraining"
    assert len(lines) == 1 + 4 * 5
    with pytest.raises(ValueError):
        run(line5, abf_sum(1.0), LINE5_RAISING, [0] * 5, 0)


def test_stop_when_stationary(line5):
    traj = run(line5, abf_sum(1.0), LINE5_RAISING, [0, 1, 3, 1.5, 0], 100, stop_when_stationary=True)
    assert traj.final.t == 5


def test_observers_see_every_round(line5):
    seen = []
    run(line5, abf_sum(1.0), LINE5_RAISING, [0] * 5, 3, observers=[lambda s: seen.append(s.t)], record_every=0)
    assert seen == [0, 1, 2, 3]


def test_unrooted_min(line5):
    st = init(line5, [0, 1, 3, 1.5, 0])
    assert st.unrooted_min() == 1.0
    all_rooted = Graph.from_edges(2, [(0, 1, 1.0)], [0.0, 0.5])
    assert init(all_rooted, [0.0, 0.5]).unrooted_min() is None
