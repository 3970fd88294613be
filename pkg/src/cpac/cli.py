"""Command-line entry points: synth, pretrain, cluster, run, evaluate,
export-pca and the label service."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import extract, metrics
from .config import RunConfig
from .data import load_labels, save_binary_matrix, save_labels, synth_blobs, synth_corrupted_blobs
from .pipeline import StageError, run_cluster, run_pipeline, run_pretrain


def _parse_image_shape(text):
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", dest="data_path", help="input matrix (csv or binary)")
    p.add_argument("--format", dest="data_format", choices=["csv", "binary-matrix"], default="csv")
    p.add_argument("--labels", dest="labels_path", help="ground-truth labels, one int per line")
    p.add_argument("--image-shape", type=_parse_image_shape, default=None, metavar="HxW")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--k", type=int, default=10, help="mutual-KNN neighborhood size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", default=None, help="comma-separated encoder widths")
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--epochs-pretrain", type=int, default=50)
    p.add_argument("--epochs-finetune", type=int, default=50)
    p.add_argument("--epochs-cluster", type=int, default=100)
    p.add_argument("--lr-pretrain", type=float, default=1e-4)
    p.add_argument("--lr-net", type=float, default=1e-4)
    p.add_argument("--lr-u", type=float, default=0.04)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--dual-step", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1e-8, help="optimizer epsilon")
    p.add_argument("--mode", choices=["i", "ii", "iii"], default="iii")
    p.add_argument("--interval", dest="update_interval", type=int, default=None,
                   help="epochs between penalty halvings (default: auto)")
    p.add_argument("--out", dest="out_dir", default="run")


def _config_from(args) -> RunConfig:
    cfg = RunConfig(
        data_path=args.data_path,
        data_format=args.data_format,
        labels_path=args.labels_path,
        image_shape=args.image_shape,
        standardize=args.standardize,
        k=args.k,
        seed=args.seed,
        dropout=args.dropout,
        epochs_pretrain=args.epochs_pretrain,
        epochs_finetune=args.epochs_finetune,
        epochs_cluster=args.epochs_cluster,
        lr_pretrain=args.lr_pretrain,
        lr_net=args.lr_net,
        lr_u=args.lr_u,
        batch_size=args.batch_size,
        dual_step=args.dual_step,
        epsilon=args.epsilon,
        mode=args.mode,
        update_interval=args.update_interval,
        out_dir=args.out_dir,
    )
    if args.hidden:
        cfg.hidden = tuple(int(h) for h in args.hidden.split(","))
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic blob dataset")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--corrupt", type=float, default=0.0, help="fraction of bridge points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output matrix path (binary)")
    p.add_argument("--labels-out", default=None)

    for name in ("pretrain", "cluster", "run"):
        p = sub.add_parser(name, help=f"{name} stage")
        _add_run_flags(p)

    p = sub.add_parser("evaluate", help="score an assignment against ground truth")
    p.add_argument("--assignment", required=True, help="assignment csv (index,label)")
    p.add_argument("--truth", required=True, help="labels file, one int per line")
    p.add_argument("--out", default=None, help="optional metrics csv path")

    p = sub.add_parser("export-pca", help="recompute the PCA export of a finished run")
    p.add_argument("--run", dest="run_dir", required=True)
    p.add_argument("--dims", type=int, choices=[2, 3], default=2)
    p.add_argument("--out", default=None)

    p = sub.add_parser("label", help="serve the pair-labeling session")
    p.add_argument("--run", dest="run_dir", required=True)
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--ui", dest="ui_dir", default=None, help="static frontend directory")
    return parser


def _read_assignment(path) -> np.ndarray:
    labels = []
    with open(path) as f:
        header = f.readline()
        if header.strip() != "index,label":
            raise ValueError(f"{path}: not an assignment csv")
        for line in f:
            if line.strip():
                _, lab = line.strip().split(",")
                labels.append(int(lab))
    return np.asarray(labels, dtype=np.int64)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            if args.corrupt > 0:
                dm = synth_corrupted_blobs(args.n, args.d, args.clusters, args.separation,
                                           args.seed, corrupt_frac=args.corrupt)
            else:
                dm = synth_blobs(args.n, args.d, args.clusters, args.separation, args.seed)
            save_binary_matrix(dm.values, args.out)
            save_labels(dm.labels, args.labels_out or args.out + ".labels")
            print(f"wrote {dm.n}x{dm.dim} matrix to {args.out}")
        elif args.command == "pretrain":
            run_pretrain(_config_from(args))
            print(f"pretrained net saved under {args.out_dir}")
        elif args.command == "cluster":
            art = run_cluster(_config_from(args))
            print(f"{art.assignment.count} clusters (threshold {art.assignment.threshold:.6g})")
            if art.scores:
                print(metrics.format_report(art.scores))
        elif args.command == "run":
            art = run_pipeline(_config_from(args))
            print(f"{art.assignment.count} clusters (threshold {art.assignment.threshold:.6g})")
            if art.scores:
                print(metrics.format_report(art.scores))
        elif args.command == "evaluate":
            predicted = _read_assignment(args.assignment)
            truth = load_labels(args.truth)
            scores = {"nmi": metrics.nmi(truth, predicted), "acc": metrics.acc(truth, predicted)}
            print(metrics.format_report(scores))
            if args.out:
                metrics.write_metrics_csv(scores, args.out)
        elif args.command == "export-pca":
            import os

            from .admm import load_run

            state, _ = load_run(os.path.join(args.run_dir, "run.bin"))
            predicted = _read_assignment(os.path.join(args.run_dir, "assignment.csv"))
            coords = extract.pca_project(state.u, args.dims)
            out = args.out or os.path.join(args.run_dir, "pca.csv")
            extract.write_pca_csv(coords, predicted, out)
            print(f"wrote {out}")
        elif args.command == "label":
            from .service import LabelSession, serve

            session = LabelSession.from_run_dir(args.run_dir)
            serve(session, args.port, ui_dir=args.ui_dir)
    except StageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"[{args.command}] {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
