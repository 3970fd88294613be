"""Mutual k-nearest-neighbor graphs: edges, weights, spectral scale, components."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .rng import substream


class DegenerateGraphError(ValueError):
    """Raised when an operation needs edges and the graph has none."""


@dataclass
class MknnGraph:
    """Undirected mutual-KNN edge set with per-edge and per-node weights.

    Edges are stored as an (m, 2) int array with p < q on every row.
    ``degrees`` and ``unary_weights`` are frozen at construction time and
    deliberately not recomputed when constraints later edit the edge set.
    """

    n: int
    k: int
    edges: np.ndarray
    weights: np.ndarray
    degrees: np.ndarray
    unary_weights: np.ndarray
    origin: str = "input"

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def copy(self) -> "MknnGraph":
        return MknnGraph(
            n=self.n,
            k=self.k,
            edges=self.edges.copy(),
            weights=self.weights.copy(),
            degrees=self.degrees.copy(),
            unary_weights=self.unary_weights.copy(),
            origin=self.origin,
        )

    def edge_lengths(self, points: np.ndarray) -> np.ndarray:
        """Euclidean length of every edge measured in ``points`` coordinates."""
        if self.n_edges == 0:
            return np.zeros(0)
        diff = points[self.edges[:, 0]] - points[self.edges[:, 1]]
        return np.sqrt((diff**2).sum(axis=1))


def build_mknn(points, k: int, origin: str = "input") -> MknnGraph:
    """Graph with an edge (p, q) iff each point is in the other's k nearest.

    Distances are Euclidean; KNN ties break toward the lower point index
    so runs are reproducible.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if k <= 0 or k >= n:
        raise ValueError(f"k must satisfy 0 < k < n, got k={k}, n={n}")
    dist = cdist(points, points)
    near = np.zeros((n, n), dtype=bool)
    for i in range(n):
        order = np.argsort(dist[i], kind="stable")  # stable = ties by index
        nbrs = order[order != i][:k]
        near[i, nbrs] = True
    mutual = near & near.T
    edges = np.argwhere(np.triu(mutual, 1))
    degrees = np.bincount(edges.ravel(), minlength=n) if len(edges) else np.zeros(n, dtype=int)
    unary = np.where(degrees > 0, 1.0 / np.maximum(degrees, 1), 0.0)
    graph = MknnGraph(
        n=n,
        k=k,
        edges=edges.astype(np.int64),
        weights=np.ones(len(edges)),
        degrees=degrees,
        unary_weights=unary,
        origin=origin,
    )
    graph.weights = edge_weights(graph)
    return graph


def edge_weights(graph: MknnGraph, include_isolated: bool = True) -> np.ndarray:
    """Per-edge balancing weights: mean degree over sqrt(deg_p * deg_q).

    The mean runs over all nodes, isolated ones included (set
    ``include_isolated=False`` to restrict it to connected nodes).
    """
    if graph.n_edges == 0:
        return np.zeros(0)
    degs = graph.degrees.astype(np.float64)
    mean_deg = degs.mean() if include_isolated else degs[degs > 0].mean()
    p, q = graph.edges[:, 0], graph.edges[:, 1]
    return mean_deg / np.sqrt(degs[p] * degs[q])


# -- spectral norms ----------------------------------------------------------


def power_iteration(matvec, dim: int, seed: int = 0, max_iter: int = 1000, tol: float = 1e-9):
    """Dominant eigenvalue of a symmetric PSD operator given by ``matvec``.

    Starts from the all-ones vector plus tiny seeded noise (a pure ones
    start can be orthogonal to the dominant eigenvector) and stops when
    the Rayleigh quotient settles within ``tol``.
    """
    rng = substream(seed, "power-iteration")
    v = np.ones(dim) + 1e-6 * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    ray = None
    for _ in range(max_iter):
        w = matvec(v)
        new_ray = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, v
        v = w / norm
        # relative test: for a Laplacian the ones start lies in the null
        # space and the quotient climbs from ~0, so an absolute test on the
        # first iterations would stop far too early
        if ray is not None and abs(new_ray - ray) <= tol * abs(new_ray):
            return new_ray, v
        ray = new_ray
    return ray, v


def spectral_norm(m: np.ndarray, seed: int = 0) -> float:
    """Largest singular value via power iteration on the (smaller) Gram matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[0] < m.shape[1]:
        gram = m @ m.T
    else:
        gram = m.T @ m
    top, _ = power_iteration(lambda v: gram @ v, gram.shape[0], seed=seed)
    return float(np.sqrt(max(top, 0.0)))


def _laplacian_matvec(graph: MknnGraph):
    p, q = graph.edges[:, 0], graph.edges[:, 1]
    w = graph.weights
    diag = np.zeros(graph.n)
    np.add.at(diag, p, w)
    np.add.at(diag, q, w)

    def matvec(v):
        out = diag * v
        np.add.at(out, p, -w * v[q])
        np.add.at(out, q, -w * v[p])
        return out

    return matvec


def compute_lambda(z, graph: MknnGraph, seed: int = 0) -> float:
    """Pairwise-loss scale: spectral norm of the codes over the spectral
    norm of the weighted graph Laplacian. Computed once per run."""
    if graph.n_edges == 0:
        raise DegenerateGraphError("cannot scale the pairwise loss on an edgeless graph")
    z = np.asarray(z, dtype=np.float64)
    # the weighted Laplacian is symmetric PSD, so its top eigenvalue is its norm
    lap_norm, _ = power_iteration(_laplacian_matvec(graph), graph.n, seed=seed)
    z_norm = spectral_norm(z, seed=seed)
    if z_norm == 0.0:
        warnings.warn("zero code matrix: pairwise-loss scale is 0")
        return 0.0
    return z_norm / lap_norm


# -- connected components ----------------------------------------------------


class UnionFind:
    """Union by rank with path compression."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:  # path compression
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def connected_components(n: int, edges) -> tuple[np.ndarray, int]:
    """Union-find labeling; labels are consecutive ints ordered by each
    component's smallest member index. Isolated points are singletons."""
    uf = UnionFind(n)
    for p, q in edges:
        if not (0 <= p < n and 0 <= q < n):
            raise ValueError(f"edge ({p}, {q}) out of range for n={n}")
        uf.union(int(p), int(q))
    labels = np.empty(n, dtype=np.int64)
    next_label = 0
    seen: dict[int, int] = {}
    for i in range(n):
        root = uf.find(i)
        if root not in seen:
            seen[root] = next_label
            next_label += 1
        labels[i] = seen[root]
    return labels, next_label


def write_edges_csv(graph: MknnGraph, path) -> None:
    with open(path, "w") as f:
        f.write("p,q,w\n")
        for (p, q), w in zip(graph.edges, graph.weights):
            f.write(f"{p},{q},{float(w)!r}\n")
