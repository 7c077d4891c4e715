import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lindt
from lindt.graph import (GraphParseError, Graph, build_adjacency,
                         edge_pairs, read_edges, load_graph,
                         induced_subgraph, write_edges, write_features,
                         write_labels, write_splits, read_splits)


def _write(path, text):
    path.write_text(text, encoding="utf-8")


def _graph_files(tmp_path, edges, features, labels):
    e, f, l = tmp_path / "e.txt", tmp_path / "f.txt", tmp_path / "l.txt"
    _write(e, edges)
    _write(f, features)
    _write(l, labels)
    return e, f, l


class TestLoadGraph:
    def test_symmetrization(self, tmp_path):
        paths = _graph_files(tmp_path, "0 1\n1 2\n",
                             "3 1\n1\n0\n1\n", "3 2\n0 0\n1 1\n2 0\n")
        g = load_graph(*paths)
        a = g.adjacency.toarray()
        assert a[0, 1] == a[1, 0] == a[1, 2] == a[2, 1] == 1
        assert a.sum() == 4

    def test_self_loop_dropped_with_count(self, tmp_path):
        p = tmp_path / "e.txt"
        _write(p, "0 1\n2 2\n")
        pairs, dropped = read_edges(p, 3)
        assert dropped == 1
        assert len(pairs) == 1

    def test_duplicate_edges_collapse(self, tmp_path):
        paths = _graph_files(tmp_path, "0 1\n1 0\n0 1\n",
                             "2 1\n1\n0\n", "2 2\n0 0\n1 1\n")
        g = load_graph(*paths)
        assert g.num_edges == 1

    def test_feature_row_count_mismatch(self, tmp_path):
        paths = _graph_files(tmp_path, "0 1\n", "3 1\n1\n0\n",
                             "3 2\n0 0\n1 1\n2 0\n")
        with pytest.raises(GraphParseError, match="f.txt:4"):
            load_graph(*paths)

    def test_node_index_out_of_range(self, tmp_path):
        paths = _graph_files(tmp_path, "0 5\n", "2 1\n1\n0\n",
                             "2 2\n0 0\n1 1\n")
        with pytest.raises(GraphParseError, match="e.txt:1"):
            load_graph(*paths)

    def test_label_out_of_range(self, tmp_path):
        paths = _graph_files(tmp_path, "0 1\n", "2 1\n1\n0\n",
                             "2 2\n0 0\n1 5\n")
        with pytest.raises(GraphParseError, match="out of range"):
            load_graph(*paths)

    def test_malformed_line_names_file_and_line(self, tmp_path):
        paths = _graph_files(tmp_path, "0 1\n0 x\n", "2 1\n1\n0\n",
                             "2 2\n0 0\n1 1\n")
        with pytest.raises(GraphParseError, match="e.txt:2"):
            load_graph(*paths)


def test_roundtrip_through_files(tmp_path, small_sbm):
    g = small_sbm
    write_edges(tmp_path / "edges.txt", g)
    write_features(tmp_path / "features.txt", g)
    write_labels(tmp_path / "labels.txt", g.latent_labels, g.num_classes)
    g2 = load_graph(tmp_path / "edges.txt", tmp_path / "features.txt",
                    tmp_path / "labels.txt")
    assert (g2.adjacency != g.adjacency).nnz == 0
    np.testing.assert_allclose(g2.features, g.features)
    assert (g2.latent_labels == g.latent_labels).all()


def test_splits_roundtrip(tmp_path):
    split = lindt.split_nodes(30, (0.2, 0.3, 0.5), seed=5)
    write_splits(tmp_path / "splits.txt", split)
    back = read_splits(tmp_path / "splits.txt", 30)
    for role in ("train", "val", "test"):
        assert (getattr(back, role) == getattr(split, role)).all()


class TestNormalizeAdjacency:
    def test_single_edge_pair(self):
        g = Graph(2, build_adjacency(np.array([[0, 1]]), 2),
                  np.zeros((2, 1)), 2)
        np.testing.assert_allclose(lindt.normalize_adjacency(g).toarray(),
                                   [[0.5, 0.5], [0.5, 0.5]])

    def test_isolated_node(self):
        g = Graph(1, build_adjacency(np.empty((0, 2)), 1), np.zeros((1, 1)), 2)
        np.testing.assert_allclose(lindt.normalize_adjacency(g).toarray(),
                                   [[1.0]])

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_oracle(self, seed):
        g = lindt.generate_sbm(50, 5, 0.3, 0.1, 5, 0.8, seed)
        a = g.adjacency.toarray().astype(float) + np.eye(50)
        d_inv_sqrt = np.diag(1.0 / np.sqrt(a.sum(axis=1)))
        oracle = d_inv_sqrt @ a @ d_inv_sqrt
        got = lindt.normalize_adjacency(g).toarray()
        assert np.abs(got - oracle).max() < 1e-12


class TestEdgeHomophilyRatio:
    def test_uniform_triangle(self):
        g = Graph(3, build_adjacency(np.array([[0, 1], [1, 2], [0, 2]]), 3),
                  np.zeros((3, 1)), 1)
        assert lindt.edge_homophily_ratio(g, np.zeros(3, dtype=int)) == 1.0

    def test_single_cross_edge(self):
        g = Graph(2, build_adjacency(np.array([[0, 1]]), 2),
                  np.zeros((2, 1)), 2)
        assert lindt.edge_homophily_ratio(g, np.array([0, 1])) == 0.0

    def test_empty_edge_set(self):
        g = Graph(2, build_adjacency(np.empty((0, 2)), 2), np.zeros((2, 1)), 2)
        with pytest.raises(ValueError, match="empty edge set"):
            lindt.edge_homophily_ratio(g, np.array([0, 1]))

    @settings(max_examples=25, deadline=None)
    @given(perm_seed=st.integers(0, 10**6))
    def test_invariant_under_class_permutation(self, perm_seed):
        g = lindt.generate_sbm(30, 3, 0.4, 0.1, 3, 0.9, seed=2)
        perm = np.random.default_rng(perm_seed).permutation(3)
        base = lindt.edge_homophily_ratio(g, g.latent_labels)
        permuted = lindt.edge_homophily_ratio(g, perm[g.latent_labels])
        assert base == permuted


class TestGenerateSbm:
    def test_two_cliques(self):
        g = lindt.generate_sbm(4, 2, 1.0, 0.0, 2, 1.0, seed=0)
        assert g.num_edges == 2
        assert lindt.edge_homophily_ratio(g, g.latent_labels) == 1.0

    def test_zero_edges(self):
        g = lindt.generate_sbm(6, 2, 0.0, 0.0, 2, 0.9, seed=0)
        with pytest.raises(ValueError, match="empty edge set"):
            lindt.edge_homophily_ratio(g, g.latent_labels)

    def test_mean_ehr_matches_expected_value(self):
        # n=600, k=3: each node has 199 same-block and 400 other-block peers
        p_intra, p_inter = 0.05, 0.005
        expected = p_intra * 199 / (p_intra * 199 + p_inter * 400)
        ratios = [lindt.edge_homophily_ratio(
            g := lindt.generate_sbm(600, 3, p_intra, p_inter, 3, 0.9, s),
            g.latent_labels) for s in range(20)]
        assert abs(np.mean(ratios) - expected) < 0.03

    def test_deterministic_per_seed(self):
        a = lindt.generate_sbm(30, 3, 0.3, 0.05, 6, 0.9, seed=11)
        b = lindt.generate_sbm(30, 3, 0.3, 0.05, 6, 0.9, seed=11)
        c = lindt.generate_sbm(30, 3, 0.3, 0.05, 6, 0.9, seed=12)
        assert (a.adjacency != b.adjacency).nnz == 0
        assert (a.features == b.features).all()
        assert (a.adjacency != c.adjacency).nnz != 0 or \
            (a.features != c.features).any()

    def test_invalid_probabilities(self):
        with pytest.raises(ValueError):
            lindt.generate_sbm(6, 2, 0.1, 0.5, 2, 0.9, seed=0)

    def test_validates_structure(self):
        g = lindt.generate_sbm(60, 3, 0.2, 0.05, 6, 0.9, seed=4)
        g.validate()


class TestSplitNodes:
    def test_small_sizes(self):
        s = lindt.split_nodes(10, (0.1, 0.2, 0.7), seed=0)
        assert (len(s.train), len(s.val), len(s.test)) == (1, 2, 7)

    def test_deterministic(self):
        a = lindt.split_nodes(100, (0.1, 0.2, 0.7), seed=9)
        b = lindt.split_nodes(100, (0.1, 0.2, 0.7), seed=9)
        assert (a.train == b.train).all() and (a.test == b.test).all()

    def test_citation_graph_sizes(self):
        s = lindt.split_nodes(2708, (0.1, 0.2, 0.7), seed=0)
        assert (len(s.train), len(s.val), len(s.test)) == (271, 542, 1895)

    def test_partition_is_disjoint_and_complete(self):
        s = lindt.split_nodes(53, (0.2, 0.3, 0.5), seed=1)
        assert (s.all_nodes() == np.arange(53)).all()

    def test_empty_split_rejected(self):
        with pytest.raises(ValueError):
            lindt.split_nodes(3, (0.01, 0.01, 0.98), seed=0)


class TestInjectLabelNoise:
    def test_zero_ratio_identity(self):
        labels = np.array([0, 1, 2, 0])
        out = lindt.inject_label_noise(labels, 0.0, 3, np.arange(4), seed=0)
        assert (out == labels).all()

    def test_full_ratio_two_classes_flips_all(self):
        labels = np.array([0, 1, 1, 0])
        out = lindt.inject_label_noise(labels, 1.0, 2, np.arange(4), seed=0)
        assert (out == 1 - labels).all()

    def test_exact_count_and_all_changed(self):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 5, size=1000)
        node_set = np.arange(1000)
        out = lindt.inject_label_noise(labels, 0.1, 5, node_set, seed=3)
        changed = np.nonzero(out != labels)[0]
        assert len(changed) == 100
        assert (out[changed] != labels[changed]).all()

    def test_untouched_outside_node_set(self):
        labels = np.zeros(20, dtype=int)
        node_set = np.arange(10)
        out = lindt.inject_label_noise(labels, 1.0, 4, node_set, seed=1)
        assert (out[10:] == 0).all()
        assert (out[:10] != 0).all()

    def test_k1_with_noise_rejected(self):
        with pytest.raises(ValueError):
            lindt.inject_label_noise(np.zeros(4, dtype=int), 0.5, 1,
                                     np.arange(4), seed=0)


def test_induced_subgraph_preserves_edges(small_sbm):
    nodes = np.array([0, 1, 2, 25, 26, 45])
    sub, node_map = induced_subgraph(small_sbm, nodes)
    assert (node_map == nodes).all()
    full = small_sbm.adjacency.toarray()
    np.testing.assert_array_equal(sub.adjacency.toarray(),
                                  full[np.ix_(nodes, nodes)])
    sub.validate()


def test_edge_pairs_each_edge_once(small_sbm):
    pairs = edge_pairs(small_sbm)
    assert len(pairs) == small_sbm.num_edges
    assert (pairs[:, 0] < pairs[:, 1]).all()
