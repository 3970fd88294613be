"""Alternating clustering-stage trainer.

Each epoch runs three moves over a duplicated representation: pull the
clustering representation U toward mutually-near codes (robust pairwise
loss plus an attraction back to the codes), retrain the autoencoder to
track U while still reconstructing, then nudge the Lagrange multiplier by
the remaining Z-U residual. Penalty scales anneal on a fixed halving
schedule so outlier pairs progressively lose influence.

Pairs are the unit of batching: both endpoints of every edge pass through
the shared-weight net, and per-point (unary) terms are downweighted by
1/degree so highly connected points are not overcounted. Points with no
edges get one unweighted visit per epoch, which keeps the per-epoch total
equal to the full objective.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .graph import MknnGraph, compute_lambda
from .nn import MlpAutoencoder, OptimizerState, optimizer_step
from .penalty import PenaltySchedule, geman_mcclure, geman_mcclure_grad, make_schedule
from .rng import substream

RUN_MAGIC = b"CPACRUN1"

MODES = ("i", "ii", "iii")  # joint-on-Z / pairwise-only / full alternating


@dataclass
class ClusterConfig:
    epochs: int = 100
    batch_size: int = 256
    lr_u: float = 0.04
    lr_net: float = 1e-4
    rmsprop_decay: float = 0.9
    epsilon: float = 1e-8
    dual_step: float = 1.0
    mode: str = "iii"
    update_interval: int | None = None
    seed: int = 0


@dataclass
class LossBreakdown:
    """Every objective term separately, plus per-edge values for ranking."""

    reconstruction: float
    pairwise: float
    representation: float
    dual_term: float
    per_edge_loss: np.ndarray

    def total(self, mode: str = "iii") -> float:
        if mode == "i":
            return self.reconstruction + self.pairwise
        if mode == "ii":
            return self.pairwise
        if mode == "iii":
            return self.reconstruction + self.pairwise + self.representation + self.dual_term
        raise ValueError(f"unknown mode {mode!r}")


@dataclass
class AdmmState:
    u: np.ndarray
    dual: np.ndarray
    dual_step: float
    sched: PenaltySchedule
    lam: float
    epoch: int
    u_opt: OptimizerState
    net_opt: OptimizerState


def init_admm_state(net: MlpAutoencoder, x, graph: MknnGraph, config: ClusterConfig) -> AdmmState:
    """Set up the clustering stage: U starts at the codes, the multiplier at
    zero, and the penalty schedule and pairwise scale come from the initial
    encoding."""
    z = net.encode(np.asarray(x, dtype=np.float64))
    sched = make_schedule(z, graph, config.update_interval)
    lam = compute_lambda(z, graph, seed=config.seed)
    u = z.copy()
    dual = np.zeros_like(u)
    u_opt = OptimizerState.rmsprop(
        [u], learning_rate=config.lr_u, decay=config.rmsprop_decay, epsilon=config.epsilon
    )
    net_opt = OptimizerState.rmsprop(
        net.params(), learning_rate=config.lr_net, decay=config.rmsprop_decay, epsilon=config.epsilon
    )
    return AdmmState(
        u=u, dual=dual, dual_step=config.dual_step, sched=sched, lam=lam, epoch=0,
        u_opt=u_opt, net_opt=net_opt,
    )


# -- loss evaluation ---------------------------------------------------------


def _breakdown(x, recon, z, u, dual, graph, sched, lam) -> LossBreakdown:
    dim_x = x.shape[1]
    dim_z = z.shape[1]
    rec = float(((recon - x) ** 2).sum()) / dim_x
    per_edge = np.zeros(0)
    pair = 0.0
    if graph.n_edges:
        s = (graph.edge_lengths(u)) ** 2
        per_edge = graph.weights * geman_mcclure(s, sched.mu2)
        pair = lam / dim_z * float(per_edge.sum())
    r = ((z - u) ** 2).sum(axis=1)
    rep = float(geman_mcclure(r, sched.mu1).sum()) / dim_z
    dual_term = float((dual * (z - u)).sum())
    return LossBreakdown(
        reconstruction=rec,
        pairwise=pair,
        representation=rep,
        dual_term=dual_term,
        per_edge_loss=per_edge,
    )


def evaluate_losses(net: MlpAutoencoder, x, state: AdmmState, graph: MknnGraph) -> LossBreakdown:
    x = np.asarray(x, dtype=np.float64)
    z = net.encode(x)
    recon = net.decode(z)
    bd = _breakdown(x, recon, z, state.u, state.dual, graph, state.sched, state.lam)
    for name in ("reconstruction", "pairwise", "representation", "dual_term"):
        if not np.isfinite(getattr(bd, name)):
            raise FloatingPointError(f"non-finite loss term: {name}")
    return bd


def residual_norm(z, u) -> float:
    """Mean row norm of Z - U, the constraint violation."""
    return float(np.linalg.norm(z - u, axis=1).mean())


# -- full-batch objectives (also the reference for gradient checks) ----------


def u_objective(u, z, dual, graph: MknnGraph, sched: PenaltySchedule, lam: float) -> float:
    dim_z = z.shape[1]
    total = float((dual * (z - u)).sum())
    if graph.n_edges:
        s = (graph.edge_lengths(u)) ** 2
        total += lam / dim_z * float((graph.weights * geman_mcclure(s, sched.mu2)).sum())
    r = ((z - u) ** 2).sum(axis=1)
    total += float(geman_mcclure(r, sched.mu1).sum()) / dim_z
    return total


def u_objective_grad(u, z, dual, graph: MknnGraph, sched: PenaltySchedule, lam: float) -> np.ndarray:
    dim_z = z.shape[1]
    grad = -dual.copy()
    if graph.n_edges:
        p, q = graph.edges[:, 0], graph.edges[:, 1]
        du = u[p] - u[q]
        s = (du**2).sum(axis=1)
        coef = 2.0 * lam / dim_z * graph.weights * geman_mcclure_grad(s, sched.mu2)
        np.add.at(grad, p, coef[:, None] * du)
        np.add.at(grad, q, -coef[:, None] * du)
    diff = u - z
    r = (diff**2).sum(axis=1)
    grad += 2.0 / dim_z * geman_mcclure_grad(r, sched.mu1)[:, None] * diff
    return grad


def net_objective(net, x, u, dual, graph, sched: PenaltySchedule, lam: float, mode: str = "iii") -> float:
    """Scalar the network step descends, by ablation mode."""
    x = np.asarray(x, dtype=np.float64)
    z = net.encode(x)
    dim_z = z.shape[1]
    total = 0.0
    if mode in ("i", "iii"):
        recon = net.decode(z)
        total += float(((recon - x) ** 2).sum()) / x.shape[1]
    if mode in ("i", "ii"):
        s = (graph.edge_lengths(z)) ** 2
        total += lam / dim_z * float((graph.weights * geman_mcclure(s, sched.mu2)).sum())
    if mode == "iii":
        r = ((z - u) ** 2).sum(axis=1)
        total += float(geman_mcclure(r, sched.mu1).sum()) / dim_z
        total += float((dual * (z - u)).sum())
    return total


# -- batching ----------------------------------------------------------------


def iter_edge_batches(n_edges: int, batch_size: int, rng):
    """Shuffled batches of edge indices covering every edge exactly once."""
    order = rng.permutation(n_edges)
    for start in range(0, n_edges, batch_size):
        yield order[start : start + batch_size]


def _isolated_indices(graph: MknnGraph) -> np.ndarray:
    return np.flatnonzero(graph.degrees == 0)


# -- the three moves ---------------------------------------------------------


def _u_unary_grad(u, z, dual, sched, rows, visit_w):
    dim_z = u.shape[1]
    diff = u[rows] - z[rows]
    r = (diff**2).sum(axis=1)
    coef = visit_w * (2.0 / dim_z) * geman_mcclure_grad(r, sched.mu1)
    return coef[:, None] * diff - visit_w[:, None] * dual[rows]


def u_batch_gradient(u, z, dual, graph: MknnGraph, sched, lam, edge_idx=None, iso_rows=None):
    """Gradient contribution of one pair batch (pairwise term for the
    batch's edges plus degree-weighted unary terms for their endpoints)
    and/or one batch of isolated points. Batches over a full epoch sum to
    the exact full-objective gradient."""
    dim_z = u.shape[1]
    grad = np.zeros_like(u)
    if edge_idx is not None and len(edge_idx):
        p, q = graph.edges[edge_idx, 0], graph.edges[edge_idx, 1]
        du = u[p] - u[q]
        s = (du**2).sum(axis=1)
        coef = 2.0 * lam / dim_z * graph.weights[edge_idx] * geman_mcclure_grad(s, sched.mu2)
        np.add.at(grad, p, coef[:, None] * du)
        np.add.at(grad, q, -coef[:, None] * du)
        rows = np.concatenate([p, q])
        np.add.at(grad, rows, _u_unary_grad(u, z, dual, sched, rows, graph.unary_weights[rows]))
    if iso_rows is not None and len(iso_rows):
        np.add.at(grad, iso_rows, _u_unary_grad(u, z, dual, sched, iso_rows, np.ones(len(iso_rows))))
    return grad


def u_step(state: AdmmState, z, graph: MknnGraph, config: ClusterConfig) -> None:
    """One epoch of RMSProp on U with the codes frozen."""
    z = np.asarray(z, dtype=np.float64)
    u = state.u
    rng = substream(config.seed, f"u-edges-e{state.epoch}")
    for bi, idx in enumerate(iter_edge_batches(graph.n_edges, config.batch_size, rng)):
        grad = u_batch_gradient(u, z, state.dual, graph, state.sched, state.lam, edge_idx=idx)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite U gradient in edge batch {bi}")
        optimizer_step(state.u_opt, [u], [grad])
    iso = _isolated_indices(graph)
    for start in range(0, len(iso), config.batch_size):
        rows = iso[start : start + config.batch_size]
        grad = u_batch_gradient(u, z, state.dual, graph, state.sched, state.lam, iso_rows=rows)
        optimizer_step(state.u_opt, [u], [grad])


def net_batch_gradients(net, x, u, dual, graph: MknnGraph, sched, lam,
                        rows, visit_w, pair_idx, mode: str):
    """Parameter gradients for one shared-weight pair batch. ``rows`` holds
    the p endpoints then the q endpoints when ``pair_idx`` is given."""
    dim_x = x.shape[1]
    dim_z = u.shape[1]
    xb = x[rows]
    recon, zb = net.forward(xb)
    grad_recon = None
    grad_z = np.zeros_like(zb)
    if mode in ("i", "iii"):
        grad_recon = (2.0 / dim_x) * visit_w[:, None] * (recon - xb)
    if mode == "iii":
        d = zb - u[rows]
        r = (d**2).sum(axis=1)
        coef = visit_w * (2.0 / dim_z) * geman_mcclure_grad(r, sched.mu1)
        grad_z += coef[:, None] * d + visit_w[:, None] * dual[rows]
    if pair_idx is not None and mode in ("i", "ii"):
        b = len(pair_idx)
        dz = zb[:b] - zb[b:]
        s = (dz**2).sum(axis=1)
        coef = 2.0 * lam / dim_z * graph.weights[pair_idx] * geman_mcclure_grad(s, sched.mu2)
        grad_z[:b] += coef[:, None] * dz
        grad_z[b:] -= coef[:, None] * dz
    grads = net.backprop(grad_recon=grad_recon, grad_z=grad_z)
    return grads.weights + grads.biases


def net_step(net: MlpAutoencoder, x, state: AdmmState, graph: MknnGraph,
             config: ClusterConfig, mode: str = "iii") -> None:
    """One epoch of RMSProp on the autoencoder weights with U frozen.

    Modes: "iii" descends reconstruction + code-tracking + multiplier terms;
    "i" descends reconstruction + pairwise-on-codes; "ii" pairwise only.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    rng = substream(config.seed, f"net-edges-e{state.epoch}")

    def apply(rows, visit_w, pair_idx, bi):
        flat = net_batch_gradients(net, x, state.u, state.dual, graph, state.sched,
                                   state.lam, rows, visit_w, pair_idx, mode)
        for g in flat:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite net gradient in batch {bi}")
        optimizer_step(state.net_opt, net.params(), flat)

    for bi, idx in enumerate(iter_edge_batches(graph.n_edges, config.batch_size, rng)):
        p, q = graph.edges[idx, 0], graph.edges[idx, 1]
        rows = np.concatenate([p, q])
        apply(rows, graph.unary_weights[rows], pair_idx=idx, bi=bi)

    if mode in ("i", "iii"):  # pairwise-only mode has no unary term
        iso = _isolated_indices(graph)
        for start in range(0, len(iso), config.batch_size):
            rows = iso[start : start + config.batch_size]
            apply(rows, np.ones(len(rows)), pair_idx=None, bi=-1)


def dual_update(state: AdmmState, z) -> None:
    state.dual += state.dual_step * (np.asarray(z) - state.u)


# -- training loop -----------------------------------------------------------


def train_clustering_stage(net: MlpAutoencoder, x, graph: MknnGraph, state: AdmmState,
                           config: ClusterConfig, epochs: int | None = None) -> list[dict]:
    """Run the alternating scheme for a fixed epoch budget; returns one
    history row per epoch with every loss term and the residual."""
    x = np.asarray(x, dtype=np.float64)
    epochs = config.epochs if epochs is None else epochs
    mode = config.mode
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    history: list[dict] = []
    for _ in range(epochs):
        state.epoch += 1
        mu1_used, mu2_used = state.sched.mu1, state.sched.mu2
        if mode == "iii":
            z = net.encode(x)
            u_step(state, z, graph, config)
            net_step(net, x, state, graph, config, mode="iii")
            z = net.encode(x)
            dual_update(state, z)
        else:
            net_step(net, x, state, graph, config, mode=mode)
            z = net.encode(x)
            state.u = z.copy()  # single-representation modes track the codes
        bd = _breakdown(x, net.decode(z), z, state.u, state.dual, graph, state.sched, state.lam)
        history.append(
            {
                "epoch": state.epoch,
                "rec": bd.reconstruction,
                "pair": bd.pairwise,
                "rep": bd.representation,
                "dual": bd.dual_term,
                "residual": residual_norm(z, state.u),
                "mu1": mu1_used,
                "mu2": mu2_used,
            }
        )
        state.sched.step()
    return history


HISTORY_COLUMNS = ("epoch", "rec", "pair", "rep", "dual", "residual", "mu1", "mu2")


def write_history_csv(history: list[dict], path) -> None:
    with open(path, "w") as f:
        f.write(",".join(HISTORY_COLUMNS) + "\n")
        for row in history:
            f.write(",".join(str(row[c]) if c == "epoch" else repr(float(row[c])) for c in HISTORY_COLUMNS) + "\n")


# -- run checkpoint ----------------------------------------------------------


def _write_array(f, a):
    a = np.ascontiguousarray(a, dtype="<f8")
    f.write(struct.pack("<I", a.ndim))
    for d in a.shape:
        f.write(struct.pack("<I", d))
    f.write(a.tobytes())


def _read_array(blob, off):
    (ndim,) = struct.unpack_from("<I", blob, off)
    off += 4
    shape = []
    for _ in range(ndim):
        (d,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape.append(d)
    count = int(np.prod(shape)) if shape else 1
    a = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape).copy()
    off += 8 * count
    return a, off


def save_run(state: AdmmState, path, seed: int = 0) -> None:
    """Binary run checkpoint: representation, multiplier, optimizer
    accumulators, penalty schedule, epoch and seed."""
    with open(path, "wb") as f:
        f.write(RUN_MAGIC)
        f.write(struct.pack("<II", state.u.shape[0], state.u.shape[1]))
        f.write(struct.pack("<ddI", state.dual_step, state.lam, state.epoch))
        s = state.sched
        f.write(struct.pack("<ddddII", s.mu1, s.mu2, s.delta1, s.delta2, s.update_interval, s.epoch))
        f.write(struct.pack("<Q", seed))
        _write_array(f, state.u)
        _write_array(f, state.dual)
        for opt in (state.u_opt, state.net_opt):
            f.write(struct.pack("<ddQI", opt.learning_rate, opt.decay, opt.step_count, len(opt.v)))
            for acc in opt.v:
                _write_array(f, acc)


def load_run(path) -> tuple[AdmmState, int]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != RUN_MAGIC:
        raise ValueError(f"{path}: bad magic, not a run checkpoint")
    off = 8
    n, dz = struct.unpack_from("<II", blob, off)
    off += 8
    dual_step, lam, epoch = struct.unpack_from("<ddI", blob, off)
    off += 20
    mu1, mu2, d1, d2, interval, sched_epoch = struct.unpack_from("<ddddII", blob, off)
    off += 40
    (seed,) = struct.unpack_from("<Q", blob, off)
    off += 8
    u, off = _read_array(blob, off)
    dual, off = _read_array(blob, off)
    opts = []
    for kind_lr in range(2):
        lr, decay, steps, count = struct.unpack_from("<ddQI", blob, off)
        off += 28
        accs = []
        for _ in range(count):
            a, off = _read_array(blob, off)
            accs.append(a)
        opt = OptimizerState(kind="rmsprop", learning_rate=lr, decay=decay, v=accs)
        opt.step_count = int(steps)
        opts.append(opt)
    sched = PenaltySchedule(mu1=mu1, mu2=mu2, delta1=d1, delta2=d2,
                            update_interval=interval, epoch=sched_epoch)
    state = AdmmState(u=u, dual=dual, dual_step=dual_step, sched=sched, lam=lam,
                      epoch=epoch, u_opt=opts[0], net_opt=opts[1])
    if state.u.shape != (n, dz):
        raise ValueError(f"{path}: checkpoint shape mismatch")
    return state, int(seed)
