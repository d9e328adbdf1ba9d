import math

import numpy as np
import pytest

from twochoices import analysis, dynamics as dyn, graph as gm
from twochoices.dynamics import BLUE, RED, BiasPair, RngContext, StopCriteria


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def test_random_init_deterministic(small_graph):
    a = dyn.random_init(small_graph, 123)
    b = dyn.random_init(small_graph, 123)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, dyn.random_init(small_graph, 124))


def test_random_init_mean_bias_near_zero(medium_graph):
    g = medium_graph
    trials = 20_000
    total = 0
    for t in range(trials):
        s1, _ = dyn.biases(g, dyn.random_init(g, 7, run=t))
        total += s1
    mean = total / trials
    sigma_mean = math.sqrt(g.n) / math.sqrt(trials)
    assert abs(mean) < 3 * sigma_mean


def test_random_init_tail_matches_normal(medium_graph):
    # Berry-Esseen-flavored check at modest scale
    g = medium_graph
    trials = 20_000
    s1 = np.array([dyn.biases(g, dyn.random_init(g, 11, run=t))[0] for t in range(trials)])
    for kappa in (0.5, 1.0, 2.0):
        emp = float((s1 >= kappa * math.sqrt(g.n)).mean())
        phibar = analysis.normal_upper_tail(kappa)
        slack = 0.5 / math.sqrt(g.n) + 3 * math.sqrt(emp * (1 - emp) / trials)
        assert abs(emp - phibar) <= slack, (kappa, emp, phibar, slack)


def test_seeded_init_counts():
    g = gm.generate_clustered_regular(10, 2, 1, seed=0)
    c = dyn.seeded_init(g, 4, 0)
    assert int((c[:10] == RED).sum()) == 7
    assert int((c[:10] == BLUE).sum()) == 3


def test_seeded_init_parity_error():
    g = gm.generate_clustered_regular(10, 2, 1, seed=0)
    with pytest.raises(ValueError, match="even"):
        dyn.seeded_init(g, 3, 0)


def test_seeded_init_extremes():
    g = gm.generate_clustered_regular(10, 2, 1, seed=0)
    c = dyn.seeded_init(g, 10, -10)
    assert (c[:10] == RED).all() and (c[10:] == BLUE).all()
    with pytest.raises(ValueError, match="exceeds"):
        dyn.seeded_init(g, 12, 0)


# ---------------------------------------------------------------------------
# biases / classify
# ---------------------------------------------------------------------------


def test_biases_all_red(small_graph):
    c = np.full(small_graph.num_nodes, RED, dtype=np.uint8)
    assert dyn.biases(small_graph, c) == (small_graph.n, small_graph.n)


def test_biases_small_example():
    g = gm.generate_clustered_regular(4, 2, 1, seed=7)
    c = np.zeros(8, dtype=np.uint8)
    c[[0, 1, 2]] = RED
    assert dyn.biases(g, c).s1 == 2


def test_biases_flip_negates(small_graph):
    c = dyn.random_init(small_graph, 5)
    s = dyn.biases(small_graph, c)
    sf = dyn.biases(small_graph, dyn.flip_colors(c))
    assert sf == (-s.s1, -s.s2)


def test_classify_examples():
    n = 100
    assert dyn.classify(BiasPair(n, -n), n) == dyn.ALMOST_CLUSTERED
    assert dyn.classify(BiasPair(n, n), n) == dyn.MONOCHROMATIC
    assert dyn.classify(BiasPair(-n, -n), n) == dyn.MONOCHROMATIC
    assert dyn.classify(BiasPair(0, 0), n) == dyn.MIXED
    assert dyn.classify(BiasPair(n, -n + 2), n) == dyn.ALMOST_CLUSTERED
    with pytest.raises(ValueError):
        dyn.classify(BiasPair(0, 0), n, kappa=0)


def test_classify_threshold_floor():
    # n=1000, kappa=8: budget 8*ln(1000)/ln(ln(1000)) = 28.59.., threshold 971
    assert dyn.almost_clustered_threshold(1000, 8.0) == 971
    assert dyn.classify(BiasPair(972, -972), 1000) == dyn.ALMOST_CLUSTERED
    assert dyn.classify(BiasPair(970, -972), 1000) == dyn.MIXED


# ---------------------------------------------------------------------------
# steps
# ---------------------------------------------------------------------------


def test_monochromatic_is_fixed_point(small_graph):
    for color in (BLUE, RED):
        c = np.full(small_graph.num_nodes, color, dtype=np.uint8)
        for t in range(5):
            ctx = RngContext(31, run=t, round_index=t)
            assert np.array_equal(dyn.step_two_choices(small_graph, c, ctx), c)
            assert np.array_equal(dyn.step_voter(small_graph, c, ctx), c)


def test_unanimous_neighbors_force_adoption(four_node_graph):
    # c = (R, B, B, R): node 0's neighbors {1, 2} are both blue, so it
    # turns blue under any draw sequence; likewise for the other nodes
    c = np.array([1, 0, 0, 1], dtype=np.uint8)
    for t in range(20):
        out = dyn.step_two_choices(four_node_graph, c, RngContext(t, run=t))
        # node 0 sees only blue, node 1 only red, node 2 only red, node 3 only blue
        assert out[0] == BLUE and out[1] == RED and out[2] == RED and out[3] == BLUE
        vout = dyn.step_voter(four_node_graph, c, RngContext(t, run=t))
        assert vout[0] == BLUE and vout[1] == RED


def test_voter_expectation_preserves_red_count(small_graph):
    # sum over nodes of (red neighbors)/d double-counts each red node d/d times
    g = small_graph
    for seed in range(3):
        c = dyn.random_init(g, seed)
        red_neighbor_sum = int((c[g.adjacency] == RED).sum())
        assert red_neighbor_sum == g.d * int((c == RED).sum())


def test_color_symmetry(small_graph):
    c = dyn.random_init(small_graph, 9)
    ctx = RngContext(77, run=2, round_index=5)
    for step in (dyn.step_two_choices, dyn.step_voter):
        a = step(small_graph, dyn.flip_colors(c), ctx)
        b = dyn.flip_colors(step(small_graph, c, ctx))
        assert np.array_equal(a, b)


def test_locality(small_graph):
    g = small_graph
    c = dyn.random_init(g, 13)
    u = 7
    neighborhood = set(g.adjacency[u]) | {u}
    w = next(x for x in range(g.num_nodes) if x not in neighborhood)
    c2 = c.copy()
    c2[w] = 1 - c2[w]
    ctx = RngContext(41, run=0, round_index=3)
    assert dyn.step_two_choices(g, c, ctx)[u] == dyn.step_two_choices(g, c2, ctx)[u]
    assert dyn.step_voter(g, c, ctx)[u] == dyn.step_voter(g, c2, ctx)[u]


# ---------------------------------------------------------------------------
# run()
# ---------------------------------------------------------------------------


def test_run_stops_immediately_on_monochromatic(small_graph):
    c = np.full(small_graph.num_nodes, RED, dtype=np.uint8)
    traj = dyn.run(
        small_graph,
        c,
        stop=StopCriteria(max_rounds=50, stop_on_monochromatic=True),
        ctx=RngContext(1),
    )
    assert traj.rounds_executed == 0
    assert traj.records.shape[0] == 1
    assert traj.terminal == dyn.MONOCHROMATIC


def test_run_exact_round_count(small_graph):
    c = dyn.random_init(small_graph, 3)
    traj = dyn.run(small_graph, c, stop=StopCriteria(max_rounds=5), ctx=RngContext(3))
    assert traj.rounds_executed == 5
    assert traj.records.shape == (6, 5)


def test_run_matches_stepwise_reference(small_graph):
    g = small_graph
    c0 = dyn.random_init(g, 21, run=4)
    traj = dyn.run(g, c0, stop=StopCriteria(max_rounds=12), ctx=RngContext(21, run=4))
    c = c0.copy()
    for t in range(12):
        s = dyn.biases(g, c)
        assert traj.records[t, 1] == s.s1 and traj.records[t, 2] == s.s2
        c = dyn.step_two_choices(g, c, RngContext(21, run=4, round_index=t))
    s = dyn.biases(g, c)
    assert traj.records[12, 1] == s.s1 and traj.records[12, 2] == s.s2


def test_run_voter_matches_stepwise(small_graph):
    g = small_graph
    c0 = dyn.random_init(g, 8)
    traj = dyn.run(g, c0, rule=dyn.VOTER, stop=StopCriteria(max_rounds=7), ctx=RngContext(8))
    c = c0.copy()
    for t in range(7):
        c = dyn.step_voter(g, c, RngContext(8, round_index=t))
    s = dyn.biases(g, c)
    assert (traj.records[7, 1], traj.records[7, 2]) == (s.s1, s.s2)


def test_run_is_deterministic(small_graph):
    c0 = dyn.random_init(small_graph, 2)
    t1 = dyn.run(small_graph, c0, stop=StopCriteria(max_rounds=30), ctx=RngContext(2))
    t2 = dyn.run(small_graph, c0, stop=StopCriteria(max_rounds=30), ctx=RngContext(2))
    assert np.array_equal(t1.records, t2.records)
    assert t1.terminal == t2.terminal


def test_trajectory_pure_function_of_graph_bytes(tmp_path, small_graph):
    gm.save_graph(small_graph, tmp_path / "g.crg")
    g2 = gm.load_graph(tmp_path / "g.crg")
    c0 = dyn.random_init(small_graph, 19)
    t1 = dyn.run(small_graph, c0, stop=StopCriteria(max_rounds=25), ctx=RngContext(19))
    t2 = dyn.run(g2, dyn.random_init(g2, 19), stop=StopCriteria(max_rounds=25), ctx=RngContext(19))
    assert np.array_equal(t1.records, t2.records)


def test_trajectory_csv_format(tmp_path, small_graph):
    c0 = dyn.random_init(small_graph, 4)
    traj = dyn.run(small_graph, c0, stop=StopCriteria(max_rounds=3), ctx=RngContext(4))
    path = tmp_path / "traj.csv"
    traj.save_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "round,s1,s2,minority1,minority2"
    assert len(lines) == 5
    assert lines[-1].endswith(f",terminal={traj.terminal}")
    assert lines[1].startswith("0,")


def test_one_round_mean_consistency(medium_graph):
    # Monte-Carlo one-step mean vs the exact oracle, 3 sigma of the mean
    g = medium_graph
    colors = dyn.random_init(g, 55)
    color = analysis.minority_color(g, colors, 1)
    exact = analysis.exact_expected_color_count(g, colors, 1, color)
    profile = analysis.minority_flip_profile(g, colors, 1, color=color)
    replays = 20_000
    samples = analysis.one_step_color_count_samples(g, colors, 1, color, replays, seed=3)
    sigma_mean = math.sqrt(float((profile.p * (1 - profile.p)).sum()) / replays)
    assert abs(float(samples.mean()) - exact) <= 3 * sigma_mean
