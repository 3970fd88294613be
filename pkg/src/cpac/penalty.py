"""Geman-McClure robust penalty and the graduated scale-halving schedule.

The penalty acts on squared distances: rho(s) = mu * s / (mu + s). It is
bounded by mu, so once the scale anneals down, far-apart pairs stop
contributing gradient and only close pairs keep attracting each other.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .graph import MknnGraph

SCALE_FLOOR = 1e-12
DELTA2_EDGE_CAP = 250


def geman_mcclure(s, mu: float):
    """Bounded penalty of a squared distance; increasing in s, capped at mu."""
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("squared distance must be nonnegative")
    out = mu * s / (mu + s)
    return float(out) if out.ndim == 0 else out


def geman_mcclure_grad(s, mu: float):
    """d(penalty)/ds = mu^2 / (mu + s)^2, in (0, 1] with value 1 at s=0."""
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("squared distance must be nonnegative")
    out = (mu / (mu + s)) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass
class PenaltySchedule:
    """Current penalty scales, their floors, and the halving cadence."""

    mu1: float
    mu2: float
    delta1: float
    delta2: float
    update_interval: int
    epoch: int = 0

    def step(self) -> "PenaltySchedule":
        """Advance one epoch; halve both scales (down to their floors) at
        every multiple of the update interval."""
        self.epoch += 1
        if self.epoch % self.update_interval == 0:
            self.mu1 = max(self.mu1 / 2.0, self.delta1)
            self.mu2 = max(self.mu2 / 2.0, self.delta2)
        return self


def schedule_step(sched: PenaltySchedule) -> PenaltySchedule:
    return sched.step()


def compute_deltas(z, graph: MknnGraph) -> tuple[float, float]:
    """Scale floors from the initial codes.

    delta1: twice the mean distance of codes from their centroid.
    delta2: mean length of the shortest 1% of edges measured in the codes
    (at least 1 edge, capped at 250). Both floored at a tiny positive value.
    """
    z = np.asarray(z, dtype=np.float64)
    if graph.n_edges == 0:
        raise ValueError("scale floors need a graph with edges")
    delta1 = 2.0 * float(np.linalg.norm(z - z.mean(axis=0), axis=1).mean())
    lengths = np.sort(graph.edge_lengths(z))
    count = int(np.clip(int(0.01 * graph.n_edges), 1, DELTA2_EDGE_CAP))
    delta2 = float(lengths[:count].mean())
    if delta1 < SCALE_FLOOR or delta2 < SCALE_FLOOR:
        warnings.warn("degenerate code spread: penalty scale floored")
    return max(delta1, SCALE_FLOOR), max(delta2, SCALE_FLOOR)


def init_mus(u0, graph: MknnGraph, delta1: float, delta2: float) -> tuple[float, float]:
    """Initial scales: 8x the unary floor, and 3x the largest squared edge
    length in the starting representation (so the objective starts
    near-convex)."""
    u0 = np.asarray(u0, dtype=np.float64)
    if graph.n_edges == 0:
        raise ValueError("scale initialization needs a graph with edges")
    mu1 = max(8.0 * delta1, delta1)
    max_sq = float((graph.edge_lengths(u0) ** 2).max())
    mu2 = max(3.0 * max_sq, delta2)
    return mu1, mu2


def choose_update_interval(n_edges: int, n: int, override: int | None = None) -> int:
    """Halve every 60 epochs for sparse graphs (< 0.2% of n^2 pairs
    connected), every 10 for denser ones."""
    if override is not None:
        return int(override)
    return 60 if n_edges < 0.002 * n * n else 10


def make_schedule(z, graph: MknnGraph, override: int | None = None) -> PenaltySchedule:
    """Full schedule setup from the initial codes (representation starts at z)."""
    delta1, delta2 = compute_deltas(z, graph)
    mu1, mu2 = init_mus(z, graph, delta1, delta2)
    interval = choose_update_interval(graph.n_edges, graph.n, override)
    return PenaltySchedule(mu1=mu1, mu2=mu2, delta1=delta1, delta2=delta2, update_interval=interval)
