"""MNIST IDX ingestion, stratified subsets, batching and synthetic blobs."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from terelu.numerics import Rng

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

DATA_DIR_ENV = "TERELU_DATA_DIR"

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class IdxFormatError(ValueError):
    pass


class DatasetMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = ""

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got {self.features.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DatasetMismatchError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, idx: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.class_count,
                       self.name if name is None else name)


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def read_idx(path) -> tuple[int, np.ndarray]:
    """Parse an unsigned-byte IDX file; returns ``(magic, array)``."""
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise OSError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic >> 8 != 0x08 or magic & 0xFF == 0:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise OSError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise OSError(f"{path}: truncated, expected {count} data bytes, found {len(raw) - header}")
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)
    return magic, data


def write_idx(path, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    with open(path, "wb") as fh:
        fh.write(struct.pack(f">I{array.ndim}I", magic, *array.shape))
        fh.write(array.tobytes())


def load_mnist_idx(images_path, labels_path, name: str = "mnist") -> Dataset:
    magic, images = read_idx(images_path)
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(f"{images_path}: expected image magic 0x{IMAGES_MAGIC:08x}, "
                             f"got 0x{magic:08x}")
    magic, labels = read_idx(labels_path)
    if magic != LABELS_MAGIC:
        raise IdxFormatError(f"{labels_path}: expected label magic 0x{LABELS_MAGIC:08x}, "
                             f"got 0x{magic:08x}")
    if images.shape[0] != labels.shape[0]:
        raise DatasetMismatchError(
            f"{images.shape[0]} images in {images_path} but {labels.shape[0]} labels in {labels_path}")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64), 10, name)


def mnist_paths(data_dir) -> dict[str, Path]:
    data_dir = Path(data_dir)
    return {key: data_dir / fname for key, fname in MNIST_FILES.items()}


def load_mnist_train(data_dir) -> Dataset:
    p = mnist_paths(data_dir)
    return load_mnist_idx(p["train_images"], p["train_labels"], "mnist-train")


def split(ds: Dataset, holdout: int, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded split into ``(rest, held_out)`` with ``holdout`` rows held out."""
    if not 0 < holdout < len(ds):
        raise ValueError(f"holdout must be in (0, {len(ds)}), got {holdout}")
    perm = Rng(seed).permutation(len(ds))
    return ds.take(np.sort(perm[holdout:])), ds.take(np.sort(perm[:holdout]))


def subset(ds: Dataset, n: int, seed: int) -> Dataset:
    """Seeded stratified sample of ``n`` rows.

    Class quotas use largest remainders, so each class count is within one
    of its proportional share.
    """
    if not 1 <= n <= len(ds):
        raise ValueError(f"subset size must be in [1, {len(ds)}], got {n}")
    rng = Rng(seed)
    counts = np.bincount(ds.labels, minlength=ds.class_count)
    exact = counts * n / len(ds)
    quota = np.floor(exact).astype(int)
    short = n - quota.sum()
    if short:
        # largest remainders first; seeded jitter breaks exact ties
        order = np.lexsort((rng.permutation(ds.class_count), -(exact - quota)))
        quota[order[:short]] += 1
    picked = []
    for c in range(ds.class_count):
        members = np.flatnonzero(ds.labels == c)
        picked.append(members[rng.permutation(members.size)[: quota[c]]])
    idx = np.concatenate(picked)
    return ds.take(idx[rng.permutation(idx.size)])


def batch_indices(n: int, batch_size: int, rng: Rng) -> list[np.ndarray]:
    if batch_size < 2:
        raise ValueError(f"batch_size must be >= 2, got {batch_size}")
    perm = rng.permutation(n)
    chunks = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and chunks[-1].size == 1:
        last = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], last])
    return chunks


def batches(ds: Dataset, batch_size: int, seed) -> list[tuple[np.ndarray, np.ndarray]]:
    rng = seed if isinstance(seed, Rng) else Rng(seed)
    return [(ds.features[i], ds.labels[i]) for i in batch_indices(len(ds), batch_size, rng)]


def synthetic_blobs(n_per_class: int, classes: int, dim: int, separation: float,
                    seed: int) -> Dataset:
    """Unit-variance Gaussian clusters whose centres are ``separation`` apart.

    With ``classes <= dim`` the centres sit on a scaled simplex (all pairs
    equidistant); otherwise they are spaced along the first axis.
    """
    if n_per_class < 1 or classes < 1 or dim < 1:
        raise ValueError("blob counts must be positive")
    if separation < 0:
        raise ValueError(f"separation must be >= 0, got {separation}")
    centers = np.zeros((classes, dim))
    if classes <= dim:
        centers[np.arange(classes), np.arange(classes)] = separation / np.sqrt(2.0)
    else:
        centers[:, 0] = separation * np.arange(classes)
    rng = Rng(seed)
    labels = np.repeat(np.arange(classes), n_per_class)
    features = centers[labels] + rng.normal(labels.size, dim, 1.0)
    perm = rng.permutation(labels.size)
    return Dataset(features[perm], labels[perm].astype(np.int64), classes, "blobs")
