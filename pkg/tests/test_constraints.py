"""Pair ranking, constraint application, journaling, oracle simulation."""

import numpy as np
import pytest

from cpac.admm import LossBreakdown
from cpac.constraints import (
    CANNOT,
    MUST,
    ConstraintSet,
    append_journal,
    apply_constraints,
    load_journal,
    rank_pairs,
    simulate_oracle_labels,
)
from cpac.data import synth_corrupted_blobs
from cpac.graph import build_mknn
from cpac.rng import substream

from test_graph import graph_from_edges


def breakdown_with(losses):
    return LossBreakdown(reconstruction=0.0, pairwise=0.0, representation=0.0,
                         dual_term=0.0, per_edge_loss=np.asarray(losses, dtype=float))


class TestRankPairs:
    def test_descending_order(self):
        g = graph_from_edges(4, [(0, 1), (2, 3)])
        queue = rank_pairs(breakdown_with([0.1, 0.9]), g)
        assert [(e.p, e.q) for e in queue.entries] == [(2, 3), (0, 1)]
        assert [e.loss for e in queue.entries] == [0.9, 0.1]

    def test_ties_break_by_edge_id(self):
        g = graph_from_edges(6, [(0, 1), (2, 3), (4, 5)])
        queue = rank_pairs(breakdown_with([0.5, 0.5, 0.5]), g)
        assert [e.edge_id for e in queue.entries] == [0, 1, 2]

    def test_head_is_argmax(self):
        rng = substream(0, "rank")
        edges = [(i, i + 10) for i in range(10)]
        g = graph_from_edges(20, edges)
        losses = rng.uniform(0, 1, 10)
        queue = rank_pairs(breakdown_with(losses), g)
        assert queue.entries[0].edge_id == int(np.argmax(losses))

    def test_empty_graph_empty_queue(self):
        g = graph_from_edges(3, [])
        queue = rank_pairs(breakdown_with([]), g)
        assert len(queue) == 0

    def test_cursor(self):
        g = graph_from_edges(6, [(0, 1), (2, 3), (4, 5)])
        queue = rank_pairs(breakdown_with([0.3, 0.2, 0.1]), g)
        first = queue.take(2)
        second = queue.take(2)
        assert [e.edge_id for e in first] == [0, 1]
        assert [e.edge_id for e in second] == [2]
        assert queue.remaining == 0


class TestConstraintSet:
    def test_self_pair_rejected(self):
        cs = ConstraintSet()
        with pytest.raises(ValueError):
            cs.add(2, 2, MUST)

    def test_bad_kind_rejected(self):
        cs = ConstraintSet()
        with pytest.raises(ValueError):
            cs.add(0, 1, "maybe")

    def test_latest_wins(self):
        cs = ConstraintSet()
        cs.add(0, 1, CANNOT)
        cs.add(1, 0, MUST)  # same pair, canonicalized
        assert cs.effective() == {(0, 1): MUST}
        cs.add(0, 1, CANNOT)
        assert cs.effective() == {(0, 1): CANNOT}

    def test_counts(self):
        cs = ConstraintSet()
        cs.add(0, 1, CANNOT)
        cs.add(0, 2, CANNOT)
        cs.add(0, 3, CANNOT)
        cs.add(1, 2, MUST)
        cs.add(1, 3, MUST)
        assert cs.counts() == {MUST: 2, CANNOT: 3}


class TestApplyConstraints:
    def test_cannot_link_removes_only_edge(self):
        g = graph_from_edges(2, [(0, 1)])
        cs = ConstraintSet()
        cs.add(0, 1, CANNOT)
        out = apply_constraints(g, cs)
        assert out.n_edges == 0
        assert g.n_edges == 1  # input untouched

    def test_must_link_sets_max_weight(self):
        g = graph_from_edges(4, [(0, 1), (2, 3)])
        g.weights = np.array([0.3, 1.4])
        cs = ConstraintSet()
        cs.add(0, 1, MUST)
        out = apply_constraints(g, cs)
        assert out.weights[0] == 1.4

    def test_must_link_inserts_missing_edge(self):
        g = graph_from_edges(4, [(0, 1)])
        g.weights = np.array([0.8])
        cs = ConstraintSet()
        cs.add(2, 3, MUST)
        out = apply_constraints(g, cs)
        assert out.n_edges == 2
        assert (out.edges == [2, 3]).all(axis=1).any()
        assert out.weights[-1] == 0.8
        # degrees stay frozen from construction
        np.testing.assert_array_equal(out.degrees, g.degrees)

    def test_empty_set_is_identity(self):
        g = graph_from_edges(3, [(0, 1), (1, 2)])
        out = apply_constraints(g, ConstraintSet())
        np.testing.assert_array_equal(out.edges, g.edges)
        np.testing.assert_array_equal(out.weights, g.weights)

    def test_idempotent(self):
        g = graph_from_edges(6, [(0, 1), (1, 2), (3, 4)])
        g.weights = np.array([0.5, 2.0, 1.0])
        cs = ConstraintSet()
        cs.add(0, 1, MUST)
        cs.add(3, 4, CANNOT)
        cs.add(2, 5, MUST)
        once = apply_constraints(g, cs)
        twice = apply_constraints(once, cs)
        np.testing.assert_array_equal(once.edges, twice.edges)
        np.testing.assert_array_equal(once.weights, twice.weights)

    def test_locality(self):
        g = graph_from_edges(6, [(0, 1), (1, 2), (3, 4)])
        cs = ConstraintSet()
        cs.add(3, 4, CANNOT)
        out = apply_constraints(g, cs)
        kept = {tuple(e) for e in out.edges.tolist()}
        assert kept == {(0, 1), (1, 2)}
        idx = [i for i, e in enumerate(g.edges.tolist()) if tuple(e) in kept]
        np.testing.assert_array_equal(out.weights, g.weights[idx])

    def test_invalid_index_rejected(self):
        g = graph_from_edges(3, [(0, 1)])
        cs = ConstraintSet()
        cs.add(0, 9, CANNOT)
        with pytest.raises(ValueError):
            apply_constraints(g, cs)

    def test_conflict_resolution_order(self):
        g = graph_from_edges(2, [(0, 1)])
        cs = ConstraintSet()
        cs.add(0, 1, CANNOT)
        cs.add(0, 1, MUST)
        out = apply_constraints(g, cs)
        assert out.n_edges == 1  # must wins
        cs2 = ConstraintSet()
        cs2.add(0, 1, MUST)
        cs2.add(0, 1, CANNOT)
        assert apply_constraints(g, cs2).n_edges == 0  # cannot wins


class TestSimulateOracle:
    def test_zero_count_empty(self):
        g = graph_from_edges(4, [(0, 1), (2, 3)])
        queue = rank_pairs(breakdown_with([0.2, 0.1]), g)
        cs = simulate_oracle_labels(queue, [0, 0, 1, 1], 0)
        assert len(cs) == 0

    def test_same_class_is_must_link(self):
        g = graph_from_edges(4, [(0, 1), (1, 2)])
        queue = rank_pairs(breakdown_with([0.9, 0.8]), g)
        cs = simulate_oracle_labels(queue, [0, 0, 1, 1], 2)
        eff = cs.effective()
        assert eff[(0, 1)] == MUST
        assert eff[(1, 2)] == CANNOT

    def test_truncates_with_warning(self):
        g = graph_from_edges(4, [(0, 1)])
        queue = rank_pairs(breakdown_with([0.5]), g)
        with pytest.warns(UserWarning):
            cs = simulate_oracle_labels(queue, [0, 1, 0, 1], 10)
        assert len(cs) == 1

    def test_high_loss_pairs_enriched_for_cross_class(self):
        # bridge points planted between blobs make the longest (highest
        # loss) edges disproportionately cross-class
        top_fracs, rand_fracs = [], []
        for seed in range(5):
            dm = synth_corrupted_blobs(200, 6, 3, 8.0, seed, corrupt_frac=0.08)
            g = build_mknn(dm.values, 8)
            s = g.edge_lengths(dm.values) ** 2
            mu2 = 3.0 * s.max()
            losses = g.weights * (mu2 * s / (mu2 + s))
            queue = rank_pairs(breakdown_with(losses), g)
            cross = np.array(
                [dm.labels[e.p] != dm.labels[e.q] for e in queue.entries], dtype=float
            )
            top = cross[:50].mean()
            rng = substream(seed, "rand50")
            rand = cross[rng.permutation(len(cross))[:50]].mean()
            top_fracs.append(top)
            rand_fracs.append(rand)
        assert np.mean(top_fracs) > np.mean(rand_fracs)


class TestJournal:
    def test_roundtrip_and_replay(self, tmp_path):
        path = tmp_path / "constraints.csv"
        cs = ConstraintSet()
        for c in (cs.add(0, 1, MUST, 1.0), cs.add(2, 3, CANNOT, 2.0), cs.add(0, 1, CANNOT, 3.0)):
            append_journal(path, c)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "p,q,kind,timestamp"
        assert len(lines) == 4
        replayed = load_journal(path)
        assert replayed.effective() == cs.effective()
        assert [c.kind for c in replayed.entries] == [MUST, CANNOT, CANNOT]

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "junk.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            load_journal(path)
