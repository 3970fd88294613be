"""Non-parametric deep clustering with pairwise constraints.

An autoencoder embedding is trained jointly with a robust pairwise loss
over a mutual-KNN graph, alternating between a duplicated clustering
representation and the network weights; clusters fall out as connected
components of the thresholded graph, and user-labeled must/cannot-link
pairs rewrite that graph for semi-supervised refinement.
"""

from .admm import (
    AdmmState,
    ClusterConfig,
    LossBreakdown,
    dual_update,
    evaluate_losses,
    init_admm_state,
    net_step,
    train_clustering_stage,
    u_step,
)
from .config import RunConfig
from .constraints import ConstraintSet, PairQueue, apply_constraints, rank_pairs, simulate_oracle_labels
from .data import DataMatrix, load_dataset, synth_blobs, synth_corrupted_blobs
from .extract import ClusterAssignment, extract_clusters, final_threshold, pca_project
from .graph import MknnGraph, build_mknn, compute_lambda, connected_components, edge_weights
from .metrics import acc, nmi
from .nn import MlpAutoencoder, OptimizerState, PretrainConfig, layerwise_pretrain, optimizer_step
from .penalty import (
    PenaltySchedule,
    compute_deltas,
    geman_mcclure,
    geman_mcclure_grad,
    init_mus,
    schedule_step,
)
from .pipeline import run_cluster, run_pipeline, run_pretrain

__version__ = "0.1.0"
