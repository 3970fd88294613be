"""End-to-end labeling demo: synthesize corrupted blobs, run the pipeline,
then serve the labeling session (point the browser frontend at it).

Usage: python3 scripts/label_demo.py [--port 8321] [--ui frontend]
"""

import argparse
import os

from cpac.config import RunConfig
from cpac.data import save_binary_matrix, save_labels, synth_corrupted_blobs
from cpac.pipeline import run_pipeline
from cpac.service import LabelSession, serve


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--port", type=int, default=8321)
    parser.add_argument("--ui", default=None, help="static frontend directory")
    parser.add_argument("--out", default="demo-run")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    dm = synth_corrupted_blobs(400, 10, 4, 10.0, args.seed, corrupt_frac=0.05)
    mat = os.path.join(args.out, "input.bin")
    save_binary_matrix(dm.values, mat)
    save_labels(dm.labels, mat + ".labels")
    cfg = RunConfig(
        data_path=mat, data_format="binary-matrix", labels_path=mat + ".labels",
        standardize=True, k=10, seed=args.seed, hidden=(64, 32, 10),
        epochs_pretrain=100, epochs_finetune=100, lr_pretrain=1e-3,
        epochs_cluster=100, out_dir=args.out,
    )
    print("running the pipeline (this takes a few seconds)...")
    art = run_pipeline(cfg)
    print(f"clusters: {art.assignment.count}  scores: {art.scores}")
    session = LabelSession.from_run_dir(args.out, config=cfg)
    serve(session, args.port, ui_dir=args.ui)


if __name__ == "__main__":
    main()
