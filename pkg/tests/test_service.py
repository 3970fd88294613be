"""Label-service session logic and the HTTP protocol surface."""

import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from cpac.config import RunConfig
from cpac.constraints import load_journal
from cpac.data import save_binary_matrix, save_labels, synth_corrupted_blobs
from cpac.pipeline import run_pipeline
from cpac.service import ConflictError, LabelSession, make_server


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("service-run")
    dm = synth_corrupted_blobs(64, 4, 2, 8.0, seed=1, corrupt_frac=0.1)
    mat = tmp / "data.bin"
    save_binary_matrix(dm.values, mat)
    save_labels(dm.labels, tmp / "labels.txt")
    cfg = RunConfig(
        data_path=str(mat), data_format="binary-matrix", labels_path=str(tmp / "labels.txt"),
        k=4, seed=1, hidden=(8, 4), epochs_pretrain=2, epochs_finetune=2,
        epochs_cluster=2, batch_size=32, out_dir=str(tmp / "run"),
    )
    run_pipeline(cfg)
    return cfg.out_dir


@pytest.fixture
def session(run_dir, tmp_path):
    s = LabelSession.from_run_dir(run_dir, config=RunConfig(k=4, hidden=(8, 4), out_dir=run_dir,
                                                            epochs_cluster=1, batch_size=32))
    s.journal_path = str(tmp_path / "constraints.csv")  # fresh journal per test
    s.constraints.entries.clear()
    return s


class TestSession:
    def test_zero_count_empty(self, session):
        pairs, exhausted = session.get_pairs(0)
        assert pairs == []
        assert not exhausted

    def test_two_calls_disjoint(self, session):
        a, _ = session.get_pairs(5)
        b, _ = session.get_pairs(5)
        ids_a = {p["pair_id"] for p in a}
        ids_b = {p["pair_id"] for p in b}
        assert len(a) == len(b) == 5
        assert not ids_a & ids_b

    def test_first_pair_is_queue_head(self, session):
        head = session.queue.entries[0]
        pairs, _ = session.get_pairs(1)
        assert pairs[0]["p"] == head.p and pairs[0]["q"] == head.q
        assert pairs[0]["loss"] == pytest.approx(head.loss)

    def test_exhaustion_flag(self, session):
        total = len(session.queue.entries)
        pairs, exhausted = session.get_pairs(total + 50)
        assert exhausted
        again, exhausted2 = session.get_pairs(5)
        assert again == [] and exhausted2

    def test_payload_fields(self, session):
        pairs, _ = session.get_pairs(1)
        payload = pairs[0]["payload_p"]
        assert len(payload["features"]) == session.data.dim
        assert len(payload["pca"]) == 2
        assert payload["pixels"] is None  # no image shape on this dataset

    def test_label_roundtrip_and_idempotence(self, session):
        pairs, _ = session.get_pairs(2)
        pid = pairs[0]["pair_id"]
        session.post_label(pid, "cannot")
        session.post_label(pid, "cannot")  # relabel, same kind
        session.post_label(pid, "must")  # latest wins
        eff = session.constraints.effective()
        assert len(eff) == 1
        assert list(eff.values()) == ["must"]
        journal = load_journal(session.journal_path)
        assert journal.effective() == eff

    def test_unknown_pair_rejected(self, session):
        with pytest.raises(KeyError):
            session.post_label("999-1000", "must")

    def test_status_counts(self, session):
        pairs, _ = session.get_pairs(5)
        for rec in pairs[:3]:
            session.post_label(rec["pair_id"], "cannot")
        for rec in pairs[3:5]:
            session.post_label(rec["pair_id"], "must")
        st = session.get_status()
        assert st["state"] == "idle"
        assert st["round"] == 0
        assert st["cannot_count"] == 3
        assert st["must_count"] == 2

    def test_round_runs_and_increments(self, session):
        pairs, _ = session.get_pairs(3)
        for rec in pairs:
            session.post_label(rec["pair_id"], "must")
        session.start_round(epochs=1)
        session.wait_idle()
        st = session.get_status()
        assert st["round"] == 1
        assert st["state"] == "idle"

    def test_zero_epoch_round_still_advances(self, session):
        session.start_round(epochs=0)
        session.wait_idle()
        assert session.get_status()["round"] == 1

    def test_busy_round_conflicts(self, session):
        # hold the session in training state without a worker
        session.status = "training"
        with pytest.raises(ConflictError):
            session.start_round(1)
        session.status = "idle"

    def test_embedding_payload(self, session):
        emb = session.embedding_payload()
        assert len(emb["points"]) == session.data.n
        assert len(emb["labels"]) == session.data.n

    def test_journal_replay_reconstructs(self, session, run_dir):
        pairs, _ = session.get_pairs(4)
        for rec in pairs[:2]:
            session.post_label(rec["pair_id"], "cannot")
        replayed = LabelSession.from_run_dir(run_dir, config=RunConfig(
            k=4, hidden=(8, 4), out_dir=run_dir, batch_size=32))
        replayed.journal_path = session.journal_path
        rebuilt = load_journal(session.journal_path)
        assert rebuilt.effective() == session.constraints.effective()

    def test_from_run_dir_recovers_config_from_metadata(self, run_dir):
        restored = LabelSession.from_run_dir(run_dir)  # no explicit config
        assert restored.config.k == 4
        assert restored.config.hidden == (8, 4)
        assert restored.config.seed == 1
        assert restored.graph.k == 4

    def test_frozen_ranking_flag(self, run_dir):
        fixed = LabelSession.from_run_dir(run_dir)
        fixed.refresh_ranking = False
        order_before = [(e.p, e.q) for e in fixed.queue.entries]
        fixed._refresh()
        assert [(e.p, e.q) for e in fixed.queue.entries] == order_before

    def test_simulated_labels_edit_graph_at_round(self, session):
        added = session.simulate_labels(30)
        assert added == 30
        counts = session.constraints.counts()
        assert counts["must"] + counts["cannot"] == 30
        edges_before = session.graph.n_edges
        session.start_round(epochs=0)
        session.wait_idle()
        if counts["cannot"]:
            assert session.graph.n_edges < edges_before
        # must-link weights pinned to the construction-time maximum
        eff = session.constraints.effective()
        index = {(int(p), int(q)): i for i, (p, q) in enumerate(session.graph.edges)}
        max_w = session.base_graph.weights.max()
        for pair, kind in eff.items():
            if kind == "must" and pair in index:
                assert session.graph.weights[index[pair]] == pytest.approx(max_w)


class TestImagePayload:
    def test_pixels_rendered_row_major(self, tmp_path):
        dm_values = np.arange(12, dtype=float).reshape(2, 6)
        from cpac.data import DataMatrix
        from cpac import admm, graph as gm, nn

        data = DataMatrix(values=np.vstack([dm_values] * 4), image_shape=(2, 3))
        net = nn.MlpAutoencoder([6, 3], dropout_rate=0.0, seed=0)
        g = gm.build_mknn(data.values, 2)
        cfg = RunConfig(k=2, out_dir=str(tmp_path))
        from cpac.admm import ClusterConfig

        state = admm.init_admm_state(net, data.values, g, ClusterConfig(seed=0))
        session = LabelSession(net, data, g, state, cfg, str(tmp_path / "j.csv"))
        payload = session._payload(0)
        assert payload["shape"] == [2, 3]
        assert len(payload["pixels"]) == 6
        # min-max scaled to bytes over the whole dataset (rows render consistently)
        lo, hi = data.values.min(), data.values.max()
        expected = [int(round((v - lo) / (hi - lo) * 255)) for v in data.values[0]]
        assert payload["pixels"] == expected
        last = session._payload(3)
        assert last["pixels"][-1] == 255


class TestHttp:
    @pytest.fixture
    def server(self, session):
        srv = make_server(session, port=0)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        yield f"http://127.0.0.1:{srv.server_address[1]}"
        srv.shutdown()

    def _get(self, url):
        with urllib.request.urlopen(url) as resp:
            return resp.status, json.loads(resp.read())

    def _post(self, url, body):
        req = urllib.request.Request(url, data=json.dumps(body).encode(),
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())

    def test_pairs_endpoint(self, server):
        status, payload = self._get(f"{server}/pairs?count=3")
        assert status == 200
        assert len(payload["pairs"]) == 3
        assert {"pair_id", "p", "q", "loss", "payload_p", "payload_q"} <= set(payload["pairs"][0])

    def test_label_flow_and_status(self, server):
        _, payload = self._get(f"{server}/pairs?count=2")
        pid = payload["pairs"][0]["pair_id"]
        status, ack = self._post(f"{server}/labels", {"pair_id": pid, "kind": "cannot"})
        assert status == 200 and ack["ok"]
        _, st = self._get(f"{server}/status")
        assert st["cannot_count"] == 1
        assert {"state", "round", "must_count", "cannot_count"} <= set(st)

    def test_unknown_label_404(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            self._post(f"{server}/labels", {"pair_id": "no-such", "kind": "must"})
        assert err.value.code == 404
        assert "error" in json.loads(err.value.read())

    def test_bad_kind_400(self, server):
        _, payload = self._get(f"{server}/pairs?count=1")
        pid = payload["pairs"][0]["pair_id"]
        with pytest.raises(urllib.error.HTTPError) as err:
            self._post(f"{server}/labels", {"pair_id": pid, "kind": "maybe"})
        assert err.value.code == 400

    def test_round_endpoint_and_busy_conflict(self, server, session):
        status, out = self._post(f"{server}/round", {"epochs": 0})
        assert status == 202
        session.wait_idle()
        _, st = self._get(f"{server}/status")
        assert st["round"] == 1
        session.status = "training"
        with pytest.raises(urllib.error.HTTPError) as err:
            self._post(f"{server}/round", {"epochs": 1})
        assert err.value.code == 409
        session.status = "idle"

    def test_embedding_endpoint(self, server, session):
        _, emb = self._get(f"{server}/embedding")
        assert len(emb["points"]) == session.data.n

    def test_unknown_path_404(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            self._get(f"{server}/nope")
        assert err.value.code == 404
