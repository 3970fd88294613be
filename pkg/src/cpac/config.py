"""Run configuration with every knob the pipeline exposes."""

from __future__ import annotations

import platform
from dataclasses import asdict, dataclass

import numpy as np

from .nn import DEFAULT_HIDDEN


@dataclass
class RunConfig:
    # data
    data_path: str | None = None
    data_format: str = "csv"
    labels_path: str | None = None
    image_shape: tuple[int, int] | None = None
    standardize: bool = False
    # graph
    k: int = 10
    # architecture / pretraining
    hidden: tuple = DEFAULT_HIDDEN
    dropout: float = 0.2
    epochs_pretrain: int = 50
    epochs_finetune: int = 50
    lr_pretrain: float = 1e-4
    adam_betas: tuple = (0.9, 0.999)
    # clustering stage
    epochs_cluster: int = 100
    lr_net: float = 1e-4
    lr_u: float = 0.04
    rmsprop_decay: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 256
    dual_step: float = 1.0
    mode: str = "iii"
    update_interval: int | None = None
    # bookkeeping
    seed: int = 0
    out_dir: str = "run"

    def to_metadata(self) -> dict:
        meta = asdict(self)
        meta["hidden"] = ",".join(str(h) for h in self.hidden)
        meta["adam_betas"] = ",".join(str(b) for b in self.adam_betas)
        if self.image_shape is not None:
            meta["image_shape"] = f"{self.image_shape[0]}x{self.image_shape[1]}"
        meta["python"] = platform.python_version()
        meta["numpy"] = np.__version__
        return meta


def write_metadata(path, config: RunConfig, extra: dict | None = None) -> None:
    """Human-readable key-value run record; enough to re-run bit-identically."""
    meta = config.to_metadata()
    if extra:
        meta.update(extra)
    with open(path, "w") as f:
        for key in sorted(meta):
            f.write(f"{key}: {meta[key]}\n")


def read_metadata(path) -> dict:
    meta = {}
    with open(path) as f:
        for line in f:
            if ": " in line:
                key, value = line.split(": ", 1)
                meta[key.strip()] = value.strip()
    return meta


def config_from_metadata(path, out_dir: str | None = None) -> RunConfig:
    """Rebuild the RunConfig a finished run was produced with."""
    meta = read_metadata(path)
    cfg = RunConfig()
    cfg.out_dir = out_dir or meta.get("out_dir", cfg.out_dir)
    for key in ("data_path", "labels_path", "data_format", "mode"):
        if meta.get(key) not in (None, "None"):
            setattr(cfg, key, meta[key])
    for key in ("k", "seed", "epochs_pretrain", "epochs_finetune", "epochs_cluster",
                "batch_size"):
        if key in meta:
            setattr(cfg, key, int(meta[key]))
    for key in ("dropout", "lr_pretrain", "lr_net", "lr_u", "rmsprop_decay",
                "epsilon", "dual_step"):
        if key in meta:
            setattr(cfg, key, float(meta[key]))
    if meta.get("update_interval", "None") != "None":
        cfg.update_interval = int(meta["update_interval"])
    if meta.get("standardize") == "True":
        cfg.standardize = True
    if "hidden" in meta:
        cfg.hidden = tuple(int(h) for h in meta["hidden"].split(","))
    if meta.get("image_shape", "None") != "None":
        h, w = meta["image_shape"].split("x")
        cfg.image_shape = (int(h), int(w))
    return cfg
