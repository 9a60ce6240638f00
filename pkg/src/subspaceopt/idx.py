"""Reader/writer for the big-endian IDX image and label format (MNIST files).

Image files carry magic 0x00000803 (ubyte, 3 dimensions), label files
0x00000801 (ubyte, 1 dimension).  Images come back flattened to (N, rows*cols)
float64 scaled to [0, 1]; labels come back as a 1-d int array.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "IMAGE_MAGIC",
    "LABEL_MAGIC",
    "IdxFormatError",
    "load_idx",
    "write_idx_images",
    "write_idx_labels",
    "load_mnist",
    "DATA_DIR_ENV",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# Refuse to allocate for headers claiming more than this many elements;
# guards against corrupt size fields.
_MAX_ELEMENTS = 1 << 33

DATA_DIR_ENV = "SUBSPACEOPT_DATA"


class IdxFormatError(ValueError):
    """Raised for bad magic numbers, truncated files, or absurd dimensions."""


def load_idx(path) -> np.ndarray:
    """Parse one IDX file; returns images (2-d, [0,1] floats) or labels (1-d ints)."""
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise IdxFormatError(f"{path}: truncated header")
    magic = struct.unpack(">I", data[:4])[0]
    if magic == IMAGE_MAGIC:
        ndim = 3
    elif magic == LABEL_MAGIC:
        ndim = 1
    else:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x}")
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise IdxFormatError(f"{path}: truncated dimension header")
    sizes = struct.unpack(f">{ndim}I", data[4:header_len])
    count = 1
    for s in sizes:
        count *= s
    if count > _MAX_ELEMENTS:
        raise IdxFormatError(f"{path}: dimension overflow {sizes}")
    payload = data[header_len:]
    if len(payload) != count:
        raise IdxFormatError(
            f"{path}: expected {count} bytes of data, found {len(payload)}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8)
    if magic == IMAGE_MAGIC:
        n, rows, cols = sizes
        return raw.reshape(n, rows * cols).astype(np.float64) / 255.0
    return raw.astype(np.int64)


def write_idx_images(path, images: np.ndarray) -> None:
    """Write a (N, rows, cols) uint8 array as an IDX image file."""
    arr = np.asarray(images, dtype=np.uint8)
    if arr.ndim != 3:
        raise ValueError("images must be (N, rows, cols)")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, *arr.shape))
        fh.write(arr.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    arr = np.asarray(labels, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("labels must be 1-d")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, arr.shape[0]))
        fh.write(arr.tobytes())


_MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
}


def load_mnist(data_dir: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Load the MNIST training set from ``data_dir`` (default: $SUBSPACEOPT_DATA).

    Returns (images, labels) with images (N, 784) in [0, 1].
    """
    root = Path(data_dir or os.environ.get(DATA_DIR_ENV, "."))
    img_path = root / _MNIST_FILES["train_images"]
    lbl_path = root / _MNIST_FILES["train_labels"]
    if not img_path.exists() or not lbl_path.exists():
        raise FileNotFoundError(
            f"MNIST IDX files not found under {root} "
            f"(set {DATA_DIR_ENV} or pass data_dir)"
        )
    images = load_idx(img_path)
    labels = load_idx(lbl_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError("image/label counts differ")
    return images, labels


def synthetic_digits(n: int, seed: int = 0, digits: tuple[int, ...] = tuple(range(10))):
    """Deterministic random stand-in for MNIST (28x28 noise images).

    Used by the reduced classifier preset when no real dataset directory is
    available; carries no semantic signal, only the shapes and value ranges.
    """
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(n, 28, 28), dtype=np.uint8)
    labels = rng.choice(digits, size=n).astype(np.int64)
    return images.reshape(n, 784).astype(np.float64) / 255.0, labels
