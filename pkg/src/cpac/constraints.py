"""Semi-supervised machinery: rank high-loss pairs, record must-link and
cannot-link labels, and rewrite the connectivity graph accordingly."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .admm import LossBreakdown
from .graph import MknnGraph

MUST = "must"
CANNOT = "cannot"
KINDS = (MUST, CANNOT)


@dataclass
class QueueEntry:
    edge_id: int
    p: int
    q: int
    loss: float


@dataclass
class PairQueue:
    """Edges ordered by descending clustering loss; a cursor tracks which
    ones have already been presented."""

    entries: list[QueueEntry]
    cursor: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def remaining(self) -> int:
        return len(self.entries) - self.cursor

    def take(self, count: int) -> list[QueueEntry]:
        batch = self.entries[self.cursor : self.cursor + count]
        self.cursor += len(batch)
        return batch


def rank_pairs(breakdown: LossBreakdown, graph: MknnGraph) -> PairQueue:
    """Queue of edges sorted by per-edge loss, highest first (edge-id order
    breaks ties)."""
    losses = breakdown.per_edge_loss
    if graph.n_edges == 0 or len(losses) == 0:
        return PairQueue(entries=[])
    if len(losses) != graph.n_edges:
        raise ValueError("per-edge losses do not match the graph")
    order = np.lexsort((np.arange(len(losses)), -losses))
    entries = [
        QueueEntry(edge_id=int(i), p=int(graph.edges[i, 0]), q=int(graph.edges[i, 1]),
                   loss=float(losses[i]))
        for i in order
    ]
    return PairQueue(entries=entries)


@dataclass
class Constraint:
    p: int
    q: int
    kind: str
    timestamp: float
    applied: bool = False


@dataclass
class ConstraintSet:
    """Append-only list of pair labels; for a relabeled pair the latest
    entry wins."""

    entries: list[Constraint] = field(default_factory=list)

    def add(self, p: int, q: int, kind: str, timestamp: float | None = None) -> Constraint:
        if p == q:
            raise ValueError(f"constraint on a self-pair ({p}, {q})")
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
        if p > q:
            p, q = q, p
        c = Constraint(p=int(p), q=int(q), kind=kind,
                       timestamp=time.time() if timestamp is None else timestamp)
        self.entries.append(c)
        return c

    def effective(self) -> dict[tuple[int, int], str]:
        """Latest label per pair, in file/append order."""
        out: dict[tuple[int, int], str] = {}
        for c in self.entries:
            out[(c.p, c.q)] = c.kind
        return out

    def counts(self) -> dict[str, int]:
        eff = self.effective()
        return {
            MUST: sum(1 for k in eff.values() if k == MUST),
            CANNOT: sum(1 for k in eff.values() if k == CANNOT),
        }

    def __len__(self) -> int:
        return len(self.entries)


def apply_constraints(graph: MknnGraph, cs: ConstraintSet) -> MknnGraph:
    """Rewrite the edge set: cannot-link removes the edge, must-link pins
    its weight to the current maximum (inserting the edge if absent).

    Degrees and unary weights stay frozen from construction; applying the
    same set twice is a no-op the second time.
    """
    out = graph.copy()
    eff = cs.effective()
    if not eff:
        return out
    for (p, q), _ in eff.items():
        if not (0 <= p < graph.n and 0 <= q < graph.n):
            raise ValueError(f"constraint ({p}, {q}) out of range for n={graph.n}")
    max_w = float(out.weights.max()) if out.n_edges else 1.0
    index = {(int(p), int(q)): i for i, (p, q) in enumerate(out.edges)}
    drop = [index[pair] for pair, kind in eff.items() if kind == CANNOT and pair in index]
    new_edges = []
    new_weights = []
    for pair, kind in eff.items():
        if kind != MUST:
            continue
        if pair in index:
            out.weights[index[pair]] = max_w
        else:
            new_edges.append(pair)
            new_weights.append(max_w)
    if drop:
        keep = np.ones(out.n_edges, dtype=bool)
        keep[drop] = False
        out.edges = out.edges[keep]
        out.weights = out.weights[keep]
    if new_edges:
        out.edges = np.vstack([out.edges.reshape(-1, 2), np.asarray(new_edges, dtype=np.int64)])
        out.weights = np.concatenate([out.weights, np.asarray(new_weights)])
    for c in cs.entries:
        c.applied = True
    return out


def simulate_oracle_labels(queue: PairQueue, truth_labels, count: int,
                           timestamp: float = 0.0) -> ConstraintSet:
    """Label the top ``count`` queue entries the way a perfect user would:
    must-link when the true classes agree, cannot-link otherwise."""
    truth_labels = np.asarray(truth_labels)
    if count > len(queue.entries):
        warnings.warn(f"asked for {count} labels but the queue has {len(queue.entries)}")
        count = len(queue.entries)
    cs = ConstraintSet()
    for entry in queue.entries[:count]:
        kind = MUST if truth_labels[entry.p] == truth_labels[entry.q] else CANNOT
        cs.add(entry.p, entry.q, kind, timestamp=timestamp)
    return cs


# -- journal -----------------------------------------------------------------


def append_journal(path, constraint: Constraint) -> None:
    """Append one labeled pair; creates the file (with header) on first use."""
    import os

    fresh = not os.path.exists(path)
    with open(path, "a") as f:
        if fresh:
            f.write("p,q,kind,timestamp\n")
        f.write(f"{constraint.p},{constraint.q},{constraint.kind},{float(constraint.timestamp)!r}\n")
        f.flush()
        os.fsync(f.fileno())


def load_journal(path) -> ConstraintSet:
    """Replay an append-only journal into a ConstraintSet."""
    cs = ConstraintSet()
    with open(path) as f:
        header = f.readline()
        if header.strip() != "p,q,kind,timestamp":
            raise ValueError(f"{path}: not a constraint journal")
        for line in f:
            line = line.strip()
            if not line:
                continue
            p, q, kind, ts = line.split(",")
            cs.add(int(p), int(q), kind, timestamp=float(ts))
    return cs
