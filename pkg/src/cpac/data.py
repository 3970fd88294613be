"""Dataset ingestion, the binary matrix format, and synthetic benchmarks."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .rng import substream

MAT_MAGIC = b"CPACMAT1"


@dataclass
class DataMatrix:
    """n-by-d sample matrix with optional ground-truth labels and, for
    image data, the (height, width) needed to render rows as pixels."""

    values: np.ndarray
    labels: np.ndarray | None = None
    image_shape: tuple[int, int] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"data must be 2-d, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("data contains non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != len(self.values):
                raise ValueError(
                    f"{len(self.labels)} labels for {len(self.values)} rows"
                )
        if self.image_shape is not None:
            h, w = self.image_shape
            if h * w != self.values.shape[1]:
                raise ValueError(
                    f"image shape {h}x{w} does not match {self.values.shape[1]} features"
                )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


# -- parsing ------------------------------------------------------------------


def load_csv_matrix(path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ValueError(f"{path}: ragged row at line {lineno}")
            row = []
            for col, cell in enumerate(cells, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(f"{path}: unparseable cell at line {lineno}, column {col}") from None
                if not math.isfinite(v):
                    raise ValueError(f"{path}: non-finite cell at line {lineno}, column {col}")
                row.append(v)
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty matrix")
    return np.asarray(rows, dtype=np.float64)


def load_binary_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAT_MAGIC:
        raise ValueError(f"{path}: bad magic at offset 0, not a matrix file")
    if len(blob) < 16:
        raise ValueError(f"{path}: truncated header at offset {len(blob)}")
    rows, cols = struct.unpack_from("<II", blob, 8)
    expected = 16 + 8 * rows * cols
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    values = np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=16).reshape(rows, cols)
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise ValueError(f"{path}: non-finite value at row {bad[0]}, column {bad[1]}")
    return values.copy()


def save_binary_matrix(values, path) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as f:
        f.write(MAT_MAGIC)
        f.write(struct.pack("<II", values.shape[0], values.shape[1]))
        f.write(values.tobytes())


def load_labels(path) -> np.ndarray:
    labels = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ValueError(f"{path}: bad label at line {lineno}") from None
    return np.asarray(labels, dtype=np.int64)


def save_labels(labels, path) -> None:
    with open(path, "w") as f:
        for lab in labels:
            f.write(f"{int(lab)}\n")


def load_dataset(path, fmt: str = "csv", labels_path=None, image_shape=None) -> DataMatrix:
    if fmt == "csv":
        values = load_csv_matrix(path)
    elif fmt == "binary-matrix":
        values = load_binary_matrix(path)
    else:
        raise ValueError(f"unknown format {fmt!r} (use csv or binary-matrix)")
    labels = load_labels(labels_path) if labels_path else None
    return DataMatrix(values=values, labels=labels, image_shape=image_shape)


def standardize(values: np.ndarray) -> np.ndarray:
    """Per-feature zero mean, unit variance (constant features left at zero)."""
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    return (values - mean) / np.where(std > 0, std, 1.0)


# -- synthetic benchmarks ------------------------------------------------------


def _blob_centers(clusters, d, separation, deviation, rng):
    centers = rng.standard_normal((clusters, d))
    if clusters > 1:
        diffs = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diffs**2).sum(axis=2))
        min_dist = dist[np.triu_indices(clusters, 1)].min()
        scale = separation * deviation / min_dist if min_dist > 0 else 0.0
        centers = centers * scale
    return centers


def _make_blobs(n, d, clusters, separation, seed, deviation):
    if clusters < 1:
        raise ValueError("need at least one cluster")
    rng = substream(seed, "synth-blobs")
    centers = _blob_centers(clusters, d, separation, deviation, rng)
    labels = np.arange(n) % clusters
    values = centers[labels] + deviation * rng.standard_normal((n, d))
    return values, labels, centers


def synth_blobs(n: int, d: int, clusters: int, separation: float, seed: int,
                deviation: float = 1.0) -> DataMatrix:
    """Isotropic Gaussian blobs whose centers sit at least
    separation * deviation apart; labels are the blob ids."""
    values, labels, _ = _make_blobs(n, d, clusters, separation, seed, deviation)
    return DataMatrix(values=values, labels=labels)


def synth_corrupted_blobs(n: int, d: int, clusters: int, separation: float, seed: int,
                          corrupt_frac: float = 0.05, deviation: float = 1.0) -> DataMatrix:
    """Blobs with a fraction of points dragged partway toward another
    blob's center (labels kept), planting cross-cluster bridges in any
    proximity graph built on the coordinates."""
    if clusters < 2:
        raise ValueError("corruption needs at least two clusters")
    values, labels, centers = _make_blobs(n, d, clusters, separation, seed, deviation)
    rng = substream(seed, "synth-corrupt")
    n_bad = int(round(corrupt_frac * n))
    bad = rng.choice(n, size=n_bad, replace=False)
    for i in bad:
        own = labels[i]
        other = int(rng.integers(clusters - 1))
        if other >= own:
            other += 1
        t = rng.uniform(0.3, 0.7)
        values[i] = centers[own] + t * (centers[other] - centers[own]) \
            + deviation * rng.standard_normal(d)
    return DataMatrix(values=values, labels=labels)
