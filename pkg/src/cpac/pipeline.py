"""End-to-end orchestration: pretrain, cluster, extract, evaluate, export.

Each stage leaves its artifacts in the run directory, so a run can be
resumed, inspected, or served to the labeling UI afterwards. Failures are
re-raised tagged with the stage name after persisting whatever state
exists.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import admm, extract, graph as graphmod, metrics, nn
from .config import RunConfig, write_metadata
from .data import DataMatrix, load_dataset, save_binary_matrix, save_labels, standardize


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunArtifacts:
    config: RunConfig
    data: DataMatrix
    net: nn.MlpAutoencoder
    graph: graphmod.MknnGraph
    state: admm.AdmmState
    history: list
    assignment: extract.ClusterAssignment
    scores: dict


def _paths(out_dir):
    return {
        "net": os.path.join(out_dir, "net.bin"),
        "run": os.path.join(out_dir, "run.bin"),
        "data": os.path.join(out_dir, "data.bin"),
        "labels": os.path.join(out_dir, "labels.txt"),
        "graph": os.path.join(out_dir, "graph.csv"),
        "history": os.path.join(out_dir, "history.csv"),
        "assignment": os.path.join(out_dir, "assignment.csv"),
        "pca": os.path.join(out_dir, "pca.csv"),
        "metrics": os.path.join(out_dir, "metrics.csv"),
        "metadata": os.path.join(out_dir, "metadata.txt"),
    }


def _load(config: RunConfig) -> DataMatrix:
    data = load_dataset(config.data_path, config.data_format,
                        labels_path=config.labels_path, image_shape=config.image_shape)
    if config.standardize:
        data = DataMatrix(values=standardize(data.values), labels=data.labels,
                          image_shape=data.image_shape)
    return data


def cluster_config(config: RunConfig) -> admm.ClusterConfig:
    return admm.ClusterConfig(
        epochs=config.epochs_cluster,
        batch_size=config.batch_size,
        lr_u=config.lr_u,
        lr_net=config.lr_net,
        rmsprop_decay=config.rmsprop_decay,
        epsilon=config.epsilon,
        dual_step=config.dual_step,
        mode=config.mode,
        update_interval=config.update_interval,
        seed=config.seed,
    )


def run_pretrain(config: RunConfig, data: DataMatrix | None = None) -> nn.MlpAutoencoder:
    """Layerwise pretraining; writes the net checkpoint and a data copy so
    later stages are self-contained."""
    os.makedirs(config.out_dir, exist_ok=True)
    paths = _paths(config.out_dir)
    try:
        if data is None:
            data = _load(config)
        pcfg = nn.PretrainConfig(
            hidden=tuple(config.hidden),
            epochs=config.epochs_pretrain,
            finetune_epochs=config.epochs_finetune,
            batch_size=config.batch_size,
            learning_rate=config.lr_pretrain,
            betas=tuple(config.adam_betas),
            dropout=config.dropout,
            seed=config.seed,
        )
        net = nn.layerwise_pretrain(data.values, pcfg)
        nn.save_net(net, paths["net"])
        save_binary_matrix(data.values, paths["data"])
        if data.labels is not None:
            save_labels(data.labels, paths["labels"])
        write_metadata(paths["metadata"], config, {"stage": "pretrain"})
        return net
    except StageError:
        raise
    except Exception as e:
        raise StageError("pretrain", e) from e


def run_cluster(config: RunConfig, net: nn.MlpAutoencoder | None = None,
                data: DataMatrix | None = None) -> RunArtifacts:
    """Graph construction, alternating training, extraction, evaluation and
    all exports. Loads the pretrained net from the run dir when not given."""
    paths = _paths(config.out_dir)
    if data is None:
        if os.path.exists(paths["data"]):
            labels = paths["labels"] if os.path.exists(paths["labels"]) else None
            data = load_dataset(paths["data"], "binary-matrix", labels_path=labels,
                                image_shape=config.image_shape)
        else:
            data = _load(config)
    if net is None:
        try:
            net = nn.load_net(paths["net"], dropout_rate=config.dropout)
        except Exception as e:
            raise StageError("cluster", e) from e

    try:
        g = graphmod.build_mknn(data.values, config.k)
        graphmod.write_edges_csv(g, paths["graph"])
    except Exception as e:
        raise StageError("graph", e) from e

    ccfg = cluster_config(config)
    try:
        state = admm.init_admm_state(net, data.values, g, ccfg)
    except Exception as e:
        raise StageError("init", e) from e

    try:
        history = admm.train_clustering_stage(net, data.values, g, state, ccfg)
    except Exception as e:
        # persist whatever exists so the run can be inspected or resumed
        nn.save_net(net, paths["net"])
        admm.save_run(state, paths["run"], seed=config.seed)
        raise StageError("train", e) from e

    nn.save_net(net, paths["net"])
    admm.save_run(state, paths["run"], seed=config.seed)
    admm.write_history_csv(history, paths["history"])

    try:
        tau = extract.final_threshold(state.u, g)
        assignment = extract.extract_clusters(state.u, g, tau)
    except Exception as e:
        raise StageError("extract", e) from e
    extract.write_assignment_csv(assignment, paths["assignment"])

    coords = extract.pca_project(state.u, 2)
    extract.write_pca_csv(coords, assignment.labels, paths["pca"])

    scores: dict = {}
    if data.labels is not None:
        scores = {
            "nmi": metrics.nmi(data.labels, assignment.labels),
            "acc": metrics.acc(data.labels, assignment.labels),
            "clusters": float(assignment.count),
        }
        metrics.write_metrics_csv(scores, paths["metrics"])

    write_metadata(paths["metadata"], config, {
        "stage": "cluster",
        "n": data.n,
        "dim": data.dim,
        "edges": g.n_edges,
        "lambda": state.lam,
        "threshold": assignment.threshold,
        "clusters": assignment.count,
        **{f"score_{k}": v for k, v in scores.items()},
    })
    return RunArtifacts(config=config, data=data, net=net, graph=g, state=state,
                        history=history, assignment=assignment, scores=scores)


def run_pipeline(config: RunConfig, data: DataMatrix | None = None) -> RunArtifacts:
    """Full run: pretrain then cluster, equivalent to invoking the two
    stages separately with the same seed."""
    net = run_pretrain(config, data=data)
    return run_cluster(config, net=net, data=data)
