"""Local HTTP session for the pair-labeling loop.

Serves ranked high-loss pairs as JSON, journals every accepted label
before acknowledging it, and runs constrained retraining rounds on a
worker thread so labeling stays responsive. Endpoints:

    GET  /pairs?count=K   next unlabeled pairs with point payloads
    POST /labels          {"pair_id": ..., "kind": "must"|"cannot"}
    POST /round           {"epochs": N} -> starts a retraining round
    GET  /status          {"state", "round", "must_count", "cannot_count", ...}
    GET  /embedding       2-d scatter of the current representation
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import admm, extract, metrics, nn
from .config import RunConfig
from .constraints import (
    ConstraintSet,
    append_journal,
    apply_constraints,
    load_journal,
    rank_pairs,
    simulate_oracle_labels,
)
from .data import load_dataset
from .graph import MknnGraph, build_mknn
from .pipeline import cluster_config


class ConflictError(RuntimeError):
    """A round is already running."""


def _pair_id(p: int, q: int) -> str:
    return f"{min(p, q)}-{max(p, q)}"


class LabelSession:
    """One labeling session over a finished clustering run.

    State mutations pass through a single lock; the training round runs on
    its own thread and flips ``state`` from idle to training and back.
    """

    def __init__(self, net, data, graph: MknnGraph, state: admm.AdmmState,
                 config: RunConfig, journal_path: str, refresh_ranking: bool = True):
        self.session_id = uuid.uuid4().hex[:12]
        self.net = net
        self.data = data
        self.base_graph = graph
        self.state = state
        self.config = config
        self.journal_path = journal_path
        self.refresh_ranking = refresh_ranking  # else keep the initial queue order
        self.lock = threading.Lock()
        self.status = "idle"
        self.error: str | None = None
        self.round = 0
        self.constraints = (
            load_journal(journal_path) if os.path.exists(journal_path) else ConstraintSet()
        )
        self.graph = apply_constraints(graph, self.constraints)
        self.served: dict[str, dict] = {}
        self._worker: threading.Thread | None = None
        self._pixel_lo = float(data.values.min())
        self._pixel_hi = float(data.values.max())
        self._refresh(first=True)

    @classmethod
    def from_run_dir(cls, run_dir: str, config: RunConfig | None = None) -> "LabelSession":
        paths = {
            "net": os.path.join(run_dir, "net.bin"),
            "run": os.path.join(run_dir, "run.bin"),
            "data": os.path.join(run_dir, "data.bin"),
            "labels": os.path.join(run_dir, "labels.txt"),
            "metadata": os.path.join(run_dir, "metadata.txt"),
            "journal": os.path.join(run_dir, "constraints.csv"),
        }
        if config is None:
            if os.path.exists(paths["metadata"]):
                from .config import config_from_metadata

                config = config_from_metadata(paths["metadata"], out_dir=run_dir)
            else:
                config = RunConfig(out_dir=run_dir)
        labels = paths["labels"] if os.path.exists(paths["labels"]) else None
        data = load_dataset(paths["data"], "binary-matrix", labels_path=labels,
                            image_shape=config.image_shape)
        net = nn.load_net(paths["net"], dropout_rate=config.dropout)
        state, seed = admm.load_run(paths["run"])
        config.seed = seed
        graph = build_mknn(data.values, config.k)
        return cls(net, data, graph, state, config, paths["journal"])

    # -- internals ----------------------------------------------------------

    def _refresh(self, first: bool = False) -> None:
        """Recompute ranking, extraction, metrics and the 2-d scatter."""
        if first or self.refresh_ranking:
            breakdown = admm.evaluate_losses(self.net, self.data.values, self.state, self.graph)
            self.queue = rank_pairs(breakdown, self.graph)
        if self.graph.n_edges:
            tau = extract.final_threshold(self.state.u, self.graph)
            self.assignment = extract.extract_clusters(self.state.u, self.graph, tau)
        else:
            from .graph import connected_components

            labels, count = connected_components(self.graph.n, self.graph.edges)
            self.assignment = extract.ClusterAssignment(labels=labels, count=count, threshold=0.0)
        self.scores = {}
        if self.data.labels is not None:
            self.scores = {
                "nmi": metrics.nmi(self.data.labels, self.assignment.labels),
                "acc": metrics.acc(self.data.labels, self.assignment.labels),
            }
        self.pca = extract.pca_project(self.state.u, 2)

    def _payload(self, idx: int) -> dict:
        payload = {
            "features": [float(v) for v in self.data.values[idx]],
            "pca": [float(self.pca[idx, 0]), float(self.pca[idx, 1])],
            "pixels": None,
            "shape": None,
        }
        if self.data.image_shape is not None:
            lo, hi = self._pixel_lo, self._pixel_hi
            scale = 255.0 / (hi - lo) if hi > lo else 0.0
            raw = np.clip((self.data.values[idx] - lo) * scale, 0, 255)
            payload["pixels"] = [int(round(v)) for v in raw]
            payload["shape"] = list(self.data.image_shape)
        return payload

    # -- operations -----------------------------------------------------------

    def get_pairs(self, count: int) -> tuple[list[dict], bool]:
        with self.lock:
            labeled = set(self.constraints.effective())
            out = []
            while len(out) < count:
                batch = self.queue.take(1)
                if not batch:
                    break
                entry = batch[0]
                if (entry.p, entry.q) in labeled:
                    continue
                pid = _pair_id(entry.p, entry.q)
                if pid in self.served:
                    continue
                record = {
                    "pair_id": pid,
                    "p": entry.p,
                    "q": entry.q,
                    "loss": entry.loss,
                    "payload_p": self._payload(entry.p),
                    "payload_q": self._payload(entry.q),
                }
                self.served[pid] = record
                out.append(record)
            exhausted = self.queue.remaining == 0 and len(out) < count
            return out, exhausted

    def post_label(self, pair_id: str, kind: str) -> dict:
        with self.lock:
            if pair_id not in self.served:
                raise KeyError(f"unknown pair id {pair_id!r}")
            rec = self.served[pair_id]
            constraint = self.constraints.add(rec["p"], rec["q"], kind)
            append_journal(self.journal_path, constraint)  # journal before ack
            return {"ok": True, "pair_id": pair_id, "kind": kind}

    def start_round(self, epochs: int) -> dict:
        with self.lock:
            if self.status == "training":
                raise ConflictError("a training round is already running")
            self.status = "training"
            self.error = None
        self._worker = threading.Thread(target=self._run_round, args=(int(epochs),), daemon=True)
        self._worker.start()
        return {"state": "training", "round": self.round}

    def _run_round(self, epochs: int) -> None:
        try:
            with self.lock:
                self.graph = apply_constraints(self.base_graph, self.constraints)
            ccfg = cluster_config(self.config)
            if epochs > 0:
                admm.train_clustering_stage(self.net, self.data.values, self.graph,
                                            self.state, ccfg, epochs=epochs)
            with self.lock:
                self._refresh()
                self._save_checkpoints()
                self.round += 1
                self.status = "idle"
        except Exception as e:  # surface the failure through /status
            with self.lock:
                self.status = "error"
                self.error = f"{type(e).__name__}: {e}"

    def _save_checkpoints(self) -> None:
        # write-then-rename so a crashed round keeps the previous checkpoint
        run_dir = self.config.out_dir
        for name, writer in (
            ("net.bin", lambda p: nn.save_net(self.net, p)),
            ("run.bin", lambda p: admm.save_run(self.state, p, seed=self.config.seed)),
            ("assignment.csv", lambda p: extract.write_assignment_csv(self.assignment, p)),
            ("pca.csv", lambda p: extract.write_pca_csv(self.pca, self.assignment.labels, p)),
        ):
            final = os.path.join(run_dir, name)
            tmp = final + ".tmp"
            writer(tmp)
            os.replace(tmp, final)
        if self.scores:
            metrics.write_metrics_csv(self.scores, os.path.join(run_dir, "metrics.csv"))

    def wait_idle(self, timeout: float = 300.0) -> None:
        deadline = time.time() + timeout
        while time.time() < deadline:
            with self.lock:
                if self.status != "training":
                    return
            time.sleep(0.01)
        raise TimeoutError("round did not finish in time")

    def get_status(self) -> dict:
        with self.lock:
            counts = self.constraints.counts()
            out = {
                "state": self.status,
                "round": self.round,
                "must_count": counts["must"],
                "cannot_count": counts["cannot"],
                "metrics": self.scores or None,
            }
            if self.error:
                out["error"] = self.error
            return out

    def embedding_payload(self) -> dict:
        with self.lock:
            return {
                "round": self.round,
                "points": [[float(x), float(y)] for x, y in self.pca],
                "labels": [int(l) for l in self.assignment.labels],
            }

    def simulate_labels(self, count: int) -> int:
        """Testing helper: oracle-label the top pairs from ground truth."""
        if self.data.labels is None:
            raise ValueError("no ground-truth labels available")
        cs = simulate_oracle_labels(self.queue, self.data.labels, count)
        with self.lock:
            for c in cs.entries:
                self.constraints.entries.append(c)
                append_journal(self.journal_path, c)
        return len(cs)


# -- HTTP layer ----------------------------------------------------------------


def _make_handler(session: LabelSession, ui_dir: str | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet
            pass

        def _send(self, code: int, payload: dict) -> None:
            body = json.dumps(payload).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _send_file(self, path: str) -> None:
            ctype = "text/html"
            if path.endswith(".js"):
                ctype = "text/javascript"
            elif path.endswith(".css"):
                ctype = "text/css"
            with open(path, "rb") as f:
                body = f.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()

        def do_GET(self):
            url = urlparse(self.path)
            try:
                if url.path == "/pairs":
                    params = parse_qs(url.query)
                    count = int(params.get("count", ["10"])[0])
                    pairs, exhausted = session.get_pairs(count)
                    self._send(200, {"pairs": pairs, "exhausted": exhausted})
                elif url.path == "/status":
                    self._send(200, session.get_status())
                elif url.path == "/embedding":
                    self._send(200, session.embedding_payload())
                elif ui_dir and url.path in ("/", "/index.html"):
                    self._send_file(os.path.join(ui_dir, "index.html"))
                elif ui_dir and "/.." not in url.path:
                    candidate = os.path.join(ui_dir, url.path.lstrip("/"))
                    if os.path.isfile(candidate):
                        self._send_file(candidate)
                    else:
                        self._send(404, {"error": f"no such path {url.path}"})
                else:
                    self._send(404, {"error": f"no such path {url.path}"})
            except ValueError as e:
                self._send(400, {"error": str(e)})

        def do_POST(self):
            url = urlparse(self.path)
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._send(400, {"error": "invalid json body"})
                return
            try:
                if url.path == "/labels":
                    ack = session.post_label(str(body.get("pair_id")), str(body.get("kind")))
                    self._send(200, ack)
                elif url.path == "/round":
                    out = session.start_round(int(body.get("epochs", 10)))
                    self._send(202, out)
                else:
                    self._send(404, {"error": f"no such path {url.path}"})
            except KeyError as e:
                self._send(404, {"error": str(e)})
            except ConflictError as e:
                self._send(409, {"error": str(e)})
            except ValueError as e:
                self._send(400, {"error": str(e)})

    return Handler


def make_server(session: LabelSession, port: int = 0, ui_dir: str | None = None) -> ThreadingHTTPServer:
    return ThreadingHTTPServer(("127.0.0.1", port), _make_handler(session, ui_dir))


def serve(session: LabelSession, port: int, ui_dir: str | None = None) -> None:
    server = make_server(session, port, ui_dir)
    host, actual_port = server.server_address
    print(f"labeling session {session.session_id} on http://{host}:{actual_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
