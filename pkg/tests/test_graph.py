"""Mutual-KNN construction, edge weights, spectral scale, components."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpac.graph import (
    DegenerateGraphError,
    MknnGraph,
    build_mknn,
    compute_lambda,
    connected_components,
    edge_weights,
    spectral_norm,
    write_edges_csv,
)
from cpac.rng import substream

from oracles import bfs_components, brute_force_mknn


def graph_from_edges(n, edges, k=1):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    degrees = np.bincount(edges.ravel(), minlength=n) if len(edges) else np.zeros(n, dtype=int)
    g = MknnGraph(
        n=n,
        k=k,
        edges=edges,
        weights=np.ones(len(edges)),
        degrees=degrees,
        unary_weights=np.where(degrees > 0, 1.0 / np.maximum(degrees, 1), 0.0),
    )
    if len(edges):
        g.weights = edge_weights(g)
    return g


class TestBuildMknn:
    def test_line_points_k1(self):
        # 3's nearest is 1, but 1's nearest is 0; 7 is nobody's nearest
        pts = np.array([[0.0], [1.0], [3.0], [7.0]])
        g = build_mknn(pts, 1)
        assert g.edges.tolist() == [[0, 1]]
        assert g.degrees.tolist() == [1, 1, 0, 0]

    def test_identical_points(self):
        pts = np.array([[2.0, 2.0], [2.0, 2.0]])
        g = build_mknn(pts, 1)
        assert g.edges.tolist() == [[0, 1]]

    def test_matches_brute_force(self):
        pts = substream(0, "pts").standard_normal((100, 5))
        g = build_mknn(pts, 10)
        assert {tuple(e) for e in g.edges.tolist()} == brute_force_mknn(pts, 10)

    @pytest.mark.parametrize("k", [0, -1, 5])
    def test_bad_k_rejected(self, k):
        pts = np.zeros((5, 2))
        with pytest.raises(ValueError):
            build_mknn(pts, k)

    def test_degrees_and_unary_weights_consistent(self):
        pts = substream(1, "pts").standard_normal((60, 3))
        g = build_mknn(pts, 5)
        counted = np.bincount(g.edges.ravel(), minlength=g.n)
        assert np.array_equal(g.degrees, counted)
        connected = g.degrees > 0
        np.testing.assert_allclose(g.unary_weights[connected] * g.degrees[connected], 1.0)
        assert np.all(g.unary_weights[~connected] == 0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(5, 40), k=st.integers(1, 4))
    def test_mutuality_property(self, seed, n, k):
        k = min(k, n - 1)
        pts = substream(seed, "prop").standard_normal((n, 2))
        g = build_mknn(pts, k)
        assert {tuple(e) for e in g.edges.tolist()} == brute_force_mknn(pts, k)
        assert np.all(g.edges[:, 0] < g.edges[:, 1])


class TestEdgeWeights:
    def test_four_cycle_all_ones(self):
        g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        np.testing.assert_allclose(g.weights, 1.0)

    def test_star_with_isolated_node(self):
        # center degree 3, leaves degree 1, one isolated: mean degree 1.2
        g = graph_from_edges(5, [(0, 1), (0, 2), (0, 3)])
        np.testing.assert_allclose(g.weights, 1.2 / np.sqrt(3))

    def test_single_edge(self):
        g = graph_from_edges(2, [(0, 1)])
        np.testing.assert_allclose(g.weights, 1.0)

    def test_exclude_isolated_flag(self):
        g = graph_from_edges(5, [(0, 1), (0, 2), (0, 3)])
        w = edge_weights(g, include_isolated=False)
        np.testing.assert_allclose(w, 1.5 / np.sqrt(3))

    def test_normalization_identity(self):
        # mean of w * sqrt(deg_p * deg_q) over edges equals the mean degree
        pts = substream(3, "pts").standard_normal((80, 4))
        g = build_mknn(pts, 6)
        p, q = g.edges[:, 0], g.edges[:, 1]
        lhs = (g.weights * np.sqrt(g.degrees[p] * g.degrees[q])).mean()
        np.testing.assert_allclose(lhs, g.degrees.mean(), rtol=1e-12)


class TestComputeLambda:
    def test_edgeless_graph_rejected(self):
        g = graph_from_edges(4, [])
        with pytest.raises(DegenerateGraphError):
            compute_lambda(substream(0, "z").standard_normal((4, 2)), g)

    def test_matches_dense_svd(self):
        rng = substream(7, "lam")
        n, dz = 50, 10
        z = rng.standard_normal((n, dz))
        # random mutual-style edge set
        edges = set()
        while len(edges) < 200:
            p, q = rng.integers(0, n, 2)
            if p != q:
                edges.add((min(p, q), max(p, q)))
        g = graph_from_edges(n, sorted(edges))
        lam = compute_lambda(z, g)
        dense = np.zeros((n, n))
        for (p, q), w in zip(g.edges, g.weights):
            dense[p, q] = dense[q, p] = w
        lap = np.diag(dense.sum(axis=1)) - dense
        expected = np.linalg.svd(z, compute_uv=False)[0] / np.linalg.svd(lap, compute_uv=False)[0]
        assert lam == pytest.approx(expected, rel=1e-6)

    def test_homogeneous_in_z(self):
        rng = substream(8, "lam")
        z = rng.standard_normal((30, 4))
        g = build_mknn(rng.standard_normal((30, 3)), 4)
        base = compute_lambda(z, g)
        assert compute_lambda(3.0 * z, g) == pytest.approx(3.0 * base, rel=1e-9)

    def test_zero_codes_warns_and_returns_zero(self):
        g = graph_from_edges(3, [(0, 1), (1, 2)])
        with pytest.warns(UserWarning):
            assert compute_lambda(np.zeros((3, 2)), g) == 0.0

    def test_spectral_norm_matches_svd(self):
        for seed, shape in [(0, (20, 7)), (1, (6, 30))]:
            m = substream(seed, "sn").standard_normal(shape)
            assert spectral_norm(m) == pytest.approx(
                np.linalg.svd(m, compute_uv=False)[0], rel=1e-8
            )


class TestConnectedComponents:
    def test_chain_plus_singleton(self):
        labels, count = connected_components(4, [(0, 1), (1, 2)])
        assert labels.tolist() == [0, 0, 0, 1]
        assert count == 2

    def test_no_edges_all_singletons(self):
        labels, count = connected_components(3, [])
        assert labels.tolist() == [0, 1, 2]
        assert count == 3

    def test_labels_ordered_by_smallest_member(self):
        labels, count = connected_components(5, [(3, 4), (0, 2)])
        assert labels.tolist() == [0, 1, 0, 2, 2]
        assert count == 3

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            connected_components(3, [(0, 3)])

    def test_random_graph_matches_bfs(self):
        rng = substream(9, "cc")
        n = 500
        edges = [(int(p), int(q)) for p, q in rng.integers(0, n, (400, 2)) if p != q]
        labels, count = connected_components(n, edges)
        oracle_labels, oracle_count = bfs_components(n, edges)
        assert count == oracle_count
        # same partition: co-membership must agree even if label ids differ
        pairs = rng.integers(0, n, (2000, 2))
        for a, b in pairs:
            assert (labels[a] == labels[b]) == (oracle_labels[a] == oracle_labels[b])

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(2, 30),
        raw=st.lists(st.tuples(st.integers(0, 29), st.integers(0, 29)), max_size=40),
    )
    def test_partition_property(self, n, raw):
        edges = [(p % n, q % n) for p, q in raw if p % n != q % n]
        labels, count = connected_components(n, edges)
        assert len(labels) == n
        assert sorted(set(labels.tolist())) == list(range(count))
        oracle_labels, oracle_count = bfs_components(n, edges)
        assert count == oracle_count


def test_edges_csv_export(tmp_path):
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    path = tmp_path / "graph.csv"
    write_edges_csv(g, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "p,q,w"
    assert len(lines) == 3
    p, q, w = lines[1].split(",")
    assert (int(p), int(q)) == (0, 1)
    assert float(w) == pytest.approx(g.weights[0])
