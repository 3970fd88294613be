"""Desk-scale blob benchmark: full pipeline over several seeds.

Usage: python3 scripts/blob_benchmark.py [--seeds 5] [--epochs 100]
"""

import argparse
import time

import numpy as np

from cpac import admm, extract, graph as gm, metrics, nn
from cpac.admm import ClusterConfig
from cpac.data import standardize, synth_blobs


def run(seed, epochs):
    dm = synth_blobs(400, 10, 4, 10.0, seed)
    x = standardize(dm.values)
    g = gm.build_mknn(x, 10)
    pcfg = nn.PretrainConfig(hidden=(64, 32, 10), epochs=100, finetune_epochs=100,
                             batch_size=256, learning_rate=1e-3, seed=seed)
    net = nn.layerwise_pretrain(x, pcfg)
    ccfg = ClusterConfig(seed=seed)
    state = admm.init_admm_state(net, x, g, ccfg)
    history = admm.train_clustering_stage(net, x, g, state, ccfg, epochs=epochs)
    tau = extract.final_threshold(state.u, g)
    assignment = extract.extract_clusters(state.u, g, tau)
    return {
        "nmi": metrics.nmi(dm.labels, assignment.labels),
        "acc": metrics.acc(dm.labels, assignment.labels),
        "clusters": assignment.count,
        "threshold": tau,
        "residual": history[-1]["residual"],
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--epochs", type=int, default=100)
    args = parser.parse_args()

    rows = []
    for seed in range(args.seeds):
        t0 = time.time()
        row = run(seed, args.epochs)
        rows.append(row)
        print(f"seed {seed}: nmi {row['nmi']:.4f} acc {row['acc']:.4f} "
              f"clusters {row['clusters']} tau {row['threshold']:.4g} "
              f"residual {row['residual']:.4f} ({time.time() - t0:.1f}s)")
    print(f"median nmi {np.median([r['nmi'] for r in rows]):.4f} "
          f"median clusters {np.median([r['clusters'] for r in rows]):.0f}")


if __name__ == "__main__":
    main()
