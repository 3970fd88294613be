"""Partition-agreement metrics: normalized mutual information and accuracy
under the best one-to-one cluster-to-class matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class ContingencyTable:
    """Cluster-by-class co-occurrence counts with marginals."""

    counts: np.ndarray
    row_marginals: np.ndarray
    col_marginals: np.ndarray
    n: int

    @classmethod
    def from_labels(cls, truth, predicted) -> "ContingencyTable":
        truth = np.asarray(truth)
        predicted = np.asarray(predicted)
        if truth.shape != predicted.shape or truth.ndim != 1:
            raise ValueError("label vectors must be 1-d and the same length")
        if len(truth) == 0:
            raise ValueError("empty label vectors")
        _, t_idx = np.unique(truth, return_inverse=True)
        _, p_idx = np.unique(predicted, return_inverse=True)
        counts = np.zeros((p_idx.max() + 1, t_idx.max() + 1), dtype=np.int64)
        np.add.at(counts, (p_idx, t_idx), 1)
        return cls(
            counts=counts,
            row_marginals=counts.sum(axis=1),
            col_marginals=counts.sum(axis=0),
            n=len(truth),
        )


def _entropy(marginals: np.ndarray, n: int) -> float:
    p = marginals[marginals > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(truth, predicted) -> float:
    """Mutual information over the larger entropy, in [0, 1].

    Two single-cluster partitions agree perfectly (1); if only one side is
    a single cluster the mutual information, and hence the score, is 0.
    """
    table = ContingencyTable.from_labels(truth, predicted)
    h_true = _entropy(table.col_marginals, table.n)
    h_pred = _entropy(table.row_marginals, table.n)
    if h_true == 0.0 and h_pred == 0.0:
        return 1.0
    denom = max(h_true, h_pred)
    joint = table.counts[table.counts > 0] / table.n
    rows, cols = np.nonzero(table.counts)
    outer = (table.row_marginals[rows] / table.n) * (table.col_marginals[cols] / table.n)
    info = float((joint * np.log(joint / outer)).sum())
    return float(np.clip(info / denom, 0.0, 1.0))


def acc(truth, predicted) -> float:
    """Fraction matched under the best injective cluster-to-class mapping
    (square-padded Hungarian assignment)."""
    table = ContingencyTable.from_labels(truth, predicted)
    k = max(table.counts.shape)
    padded = np.zeros((k, k), dtype=np.int64)
    padded[: table.counts.shape[0], : table.counts.shape[1]] = table.counts
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return float(padded[rows, cols].sum()) / table.n


def format_report(values: dict[str, float]) -> str:
    return "\n".join(f"{k} = {v:.6f}" for k, v in values.items())


def write_metrics_csv(values: dict[str, float], path) -> None:
    with open(path, "w") as f:
        f.write("metric,value\n")
        for k, v in values.items():
            f.write(f"{k},{float(v)!r}\n")
