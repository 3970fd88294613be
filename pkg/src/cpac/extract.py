"""Cluster extraction from the trained representation, plus PCA export."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import MknnGraph, connected_components, power_iteration


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    count: int
    threshold: float


def final_threshold(u, graph: MknnGraph) -> float:
    """Mean length of the shortest 1% of edges (at least one) in ``u``."""
    if graph.n_edges == 0:
        raise ValueError("threshold needs a graph with edges")
    lengths = np.sort(graph.edge_lengths(np.asarray(u, dtype=np.float64)))
    count = max(1, int(0.01 * graph.n_edges))
    return float(lengths[:count].mean())


def extract_clusters(u, graph: MknnGraph, threshold: float) -> ClusterAssignment:
    """Keep edges no longer than the threshold and label the connected
    components of what remains."""
    u = np.asarray(u, dtype=np.float64)
    keep = graph.edge_lengths(u) <= threshold
    labels, count = connected_components(graph.n, graph.edges[keep])
    return ClusterAssignment(labels=labels, count=count, threshold=float(threshold))


def pca_project(m, dims: int) -> np.ndarray:
    """Project onto the top principal directions (power iteration with
    deflation on the sample covariance); column variances are non-increasing."""
    m = np.asarray(m, dtype=np.float64)
    n, d = m.shape
    if dims > d:
        raise ValueError(f"cannot project {d}-dim data onto {dims} components")
    if n < dims:
        raise ValueError(f"need at least {dims} rows, got {n}")
    centered = m - m.mean(axis=0)
    cov = centered.T @ centered / max(n - 1, 1)
    basis = np.zeros((d, dims))
    for j in range(dims):
        _, vec = power_iteration(lambda v: cov @ v, d, seed=j)
        # deflation residue can point back along earlier components, so
        # re-orthogonalize; fall back to any orthogonal direction when the
        # data rank is deficient
        vec = vec - basis[:, :j] @ (basis[:, :j].T @ vec)
        norm = np.linalg.norm(vec)
        if norm < 1e-9:
            for axis in range(d):
                cand = np.zeros(d)
                cand[axis] = 1.0
                cand -= basis[:, :j] @ (basis[:, :j].T @ cand)
                if np.linalg.norm(cand) > 1e-6:
                    vec, norm = cand, np.linalg.norm(cand)
                    break
        vec = vec / norm
        if vec[np.argmax(np.abs(vec))] < 0:  # deterministic sign
            vec = -vec
        basis[:, j] = vec
        val = float(vec @ cov @ vec)
        cov = cov - val * np.outer(vec, vec)
    return centered @ basis


def write_assignment_csv(assignment: ClusterAssignment, path) -> None:
    with open(path, "w") as f:
        f.write("index,label\n")
        for i, lab in enumerate(assignment.labels):
            f.write(f"{i},{lab}\n")


def write_pca_csv(coords, labels, path) -> None:
    coords = np.asarray(coords)
    dims = coords.shape[1]
    header = "index,x,y" + (",z" if dims == 3 else "") + ",label\n"
    with open(path, "w") as f:
        f.write(header)
        for i in range(coords.shape[0]):
            cells = ",".join(repr(float(c)) for c in coords[i])
            f.write(f"{i},{cells},{labels[i]}\n")
