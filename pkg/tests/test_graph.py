import numpy as np
import pytest

from twochoices import graph as gm


def _degrees_ok(adj, deg):
    return adj.shape[1] == deg and not (np.sort(adj, 1)[:, 1:] == np.sort(adj, 1)[:, :-1]).any()


# ---------------------------------------------------------------------------
# community generator
# ---------------------------------------------------------------------------


def test_community_4_nodes_2_regular_is_a_cycle():
    # the only simple 2-regular graph on 4 nodes is the 4-cycle
    adj = gm.generate_regular_community(4, 2, seed=11)
    assert adj.shape == (4, 2)
    assert _degrees_ok(adj, 2)
    assert not (adj == np.arange(4)[:, None]).any()
    assert gm.is_connected(adj)


def test_community_parity_violation():
    with pytest.raises(ValueError, match="even"):
        gm.generate_regular_community(3, 1, seed=0)


def test_community_100_nodes_10_regular_validates():
    adj = gm.generate_regular_community(100, 10, seed=1)
    assert _degrees_ok(adj, 10)
    # symmetry of the local adjacency
    fwd = np.sort(np.arange(100).repeat(10) * 100 + adj.ravel())
    bwd = np.sort(adj.ravel().astype(np.int64) * 100 + np.arange(100).repeat(10))
    assert np.array_equal(fwd, bwd)


def test_community_degree_bounds():
    with pytest.raises(ValueError):
        gm.generate_regular_community(5, 5, seed=0)


# ---------------------------------------------------------------------------
# cut generator
# ---------------------------------------------------------------------------


def test_cut_empty():
    cut = gm.generate_regular_cut(5, 0, seed=0)
    assert cut.shape == (5, 0)


def test_cut_complete_bipartite():
    # b = n forces the complete bipartite graph
    cut = gm.generate_regular_cut(5, 5, seed=4)
    assert np.array_equal(np.sort(cut, axis=1), np.tile(np.arange(5), (5, 1)))


def test_cut_cross_degree():
    cut = gm.generate_regular_cut(50, 3, seed=2)
    assert cut.shape == (50, 3)
    # matchings: every right node appears exactly 3 times, no duplicates per row
    assert np.array_equal(np.bincount(cut.ravel(), minlength=50), np.full(50, 3))
    assert not (np.sort(cut, 1)[:, 1:] == np.sort(cut, 1)[:, :-1]).any()


# ---------------------------------------------------------------------------
# clustered generator
# ---------------------------------------------------------------------------


def test_clustered_small():
    g = gm.generate_clustered_regular(4, 2, 1, seed=7)
    assert g.num_nodes == 8 and g.d == 3
    assert gm.validate(g).ok


def test_clustered_disconnected_when_no_cut():
    g = gm.generate_clustered_regular(4, 2, 0, seed=7)
    rep = gm.structure_report(g)
    assert not rep.connected
    assert rep.community_connected == (True, True)


def test_clustered_large():
    g = gm.generate_clustered_regular(1000, 128, 2, seed=3)
    assert g.d == 130
    assert gm.validate(g).ok


def test_cross_degree_sum_consistency(small_graph):
    g = small_graph
    adj = g.adjacency
    cross1 = int((adj[: g.n] >= g.n).sum())
    cross2 = int((adj[g.n :] < g.n).sum())
    assert cross1 == g.n * g.b == cross2


def test_intra_adjacency_blocks(small_graph):
    g = small_graph
    intra1 = g.intra_adjacency(1)
    intra2 = g.intra_adjacency(2)
    assert intra1.shape == (g.n, g.a) == intra2.shape
    assert intra1.max() < g.n and intra2.max() < g.n


def test_circulant_is_deterministic_cycle():
    g1 = gm.generate_clustered_regular(10, 2, 1, seed=0, method="circulant")
    g2 = gm.generate_clustered_regular(10, 2, 1, seed=99, method="circulant")
    assert np.array_equal(g1.adjacency, g2.adjacency)
    intra = g1.intra_adjacency(1)
    assert np.array_equal(intra[0], [1, 9])
    assert gm.validate(g1).ok


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_validate_wellformed(small_graph):
    assert gm.validate(small_graph).ok


def test_validate_detects_asymmetry(small_graph):
    adj = small_graph.adjacency.copy()
    u = 0
    old = adj[u, 0]
    # replace one endpoint only on u's side
    replacement = (old + 1) % small_graph.num_nodes
    while replacement in adj[u]:
        replacement = (replacement + 1) % small_graph.num_nodes
    adj[u, 0] = replacement
    bad = gm.ClusteredRegularGraph(small_graph.n, small_graph.d, small_graph.b, adj)
    rep = gm.validate(bad)
    assert not rep.ok
    assert any(kind == "asymmetry" for _, kind in rep.violations)


def test_validate_detects_duplicate(small_graph):
    adj = small_graph.adjacency.copy()
    adj[3, 0] = adj[3, 1]
    bad = gm.ClusteredRegularGraph(small_graph.n, small_graph.d, small_graph.b, adj)
    rep = gm.validate(bad)
    assert not rep.ok
    kinds = {kind for node, kind in rep.violations if node == 3}
    assert "duplicate" in kinds


def test_validate_detects_self_loop(small_graph):
    adj = small_graph.adjacency.copy()
    adj[5, 0] = 5
    bad = gm.ClusteredRegularGraph(small_graph.n, small_graph.d, small_graph.b, adj)
    rep = gm.validate(bad)
    assert any(kind == "self-loop" for node, kind in rep.violations if node == 5)


def test_validate_detects_cross_degree(small_graph):
    g = small_graph
    adj = g.adjacency.copy()
    # swap a cross neighbor for an intra one on both sides (keeps symmetry)
    u = 0
    cross = [x for x in adj[u] if x >= g.n][0]
    intra = [x for x in range(1, g.n) if x not in adj[u]][0]
    adj[u][adj[u] == cross] = intra
    adj[intra, 0] = u  # introduces duplication/asymmetry elsewhere, fine
    bad = gm.ClusteredRegularGraph(g.n, g.d, g.b, adj)
    rep = gm.validate(bad)
    assert any(kind == "cross-degree" for node, kind in rep.violations)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_save_load_roundtrip(tmp_path, small_graph):
    path = tmp_path / "g.crg"
    gm.save_graph(small_graph, path)
    g2 = gm.load_graph(path)
    assert g2.n == small_graph.n and g2.d == small_graph.d and g2.b == small_graph.b
    assert np.array_equal(g2.adjacency, small_graph.adjacency)
    # resave is byte-identical
    path2 = tmp_path / "g2.crg"
    gm.save_graph(g2, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_generation_is_deterministic(tmp_path):
    p1, p2 = tmp_path / "a.crg", tmp_path / "b.crg"
    gm.save_graph(gm.generate_clustered_regular(50, 6, 2, seed=12), p1)
    gm.save_graph(gm.generate_clustered_regular(50, 6, 2, seed=12), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_out_of_range(tmp_path):
    path = tmp_path / "bad.crg"
    path.write_text("crg v1\nn=4 d=3 b=1\n0 9\n")
    with pytest.raises(gm.GraphFormatError, match="out of range"):
        gm.load_graph(path)


def test_load_rejects_missing_header(tmp_path):
    path = tmp_path / "bad.crg"
    path.write_text("n=4 d=3 b=1\n0 1\n")
    with pytest.raises(gm.GraphFormatError, match="header"):
        gm.load_graph(path)


def test_load_rejects_wrong_degrees(tmp_path):
    path = tmp_path / "bad.crg"
    path.write_text("crg v1\nn=2 d=2 b=1\n0 1\n")
    with pytest.raises(gm.GraphFormatError):
        gm.load_graph(path)


def test_generated_graphs_always_validate():
    for seed in range(5):
        g = gm.generate_clustered_regular(30, 4, 2, seed=seed)
        assert gm.validate(g).ok
