"""Dataset ingestion: IDX (MNIST) files and synthetic Gaussian clusters."""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .learner import Dataset

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

BUNDLED_DIR = Path(__file__).parent / "datasets"
BUNDLED_MNIST = {
    "train": (BUNDLED_DIR / "train-images-idx3-ubyte.gz", BUNDLED_DIR / "train-labels-idx1-ubyte.gz"),
    "test": (BUNDLED_DIR / "t10k-images-idx3-ubyte.gz", BUNDLED_DIR / "t10k-labels-idx1-ubyte.gz"),
}


class IdxError(ValueError):
    pass


def _read_bytes(path) -> bytes:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    try:
        with opener(path, "rb") as fh:
            return fh.read()
    except (OSError, EOFError) as exc:
        raise IdxError(f"{path}: {exc}") from exc


def read_idx(path, expected_magic: int) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise IdxError(f"{path}: truncated header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxError(f"{path}: magic {magic:#010x}, expected {expected_magic:#010x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxError(f"{path}: truncated header")
    shape = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(shape))
    if len(raw) - header != count:
        raise IdxError(f"{path}: expected {count} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(shape)


def write_idx(path, array) -> None:
    """Write a uint8 array as an (uncompressed) IDX file."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x0800 | array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + array.tobytes())


def load_mnist_idx(images_path, labels_path, n_classes: int = 10) -> Dataset:
    """Load an IDX image/label pair (optionally gzipped); pixels scaled to [0, 1]."""
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(features, labels.astype(np.int64), n_classes)


def load_bundled_mnist():
    """The bundled 10,000-digit MNIST subset as ``(train, test)`` (8004 / 1996 samples)."""
    return load_mnist_idx(*BUNDLED_MNIST["train"]), load_mnist_idx(*BUNDLED_MNIST["test"])


def synth_dataset(n_classes, per_class, n_features, separation, rng) -> Dataset:
    """Isotropic unit-variance Gaussian clusters with centroids ``separation`` apart on average.

    Centroids are random directions scaled so pairwise distances are about
    ``separation``; with ``separation=0`` all classes share one distribution.
    """
    if n_classes < 2 or per_class < 1:
        raise ValueError("need n_classes >= 2 and per_class >= 1")
    dirs = rng.standard_normal((n_classes, n_features))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    centroids = dirs * separation / np.sqrt(2.0)
    labels = np.repeat(np.arange(n_classes), per_class)
    features = centroids[labels] + rng.standard_normal((labels.size, n_features))
    return Dataset(features, labels, n_classes)
