"""IDX (MNIST) reader: big-endian header, unsigned-byte payload."""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .types import Dataset

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049


class IDXError(ValueError):
    pass


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _header(buf: bytes, fields: int, what: str) -> tuple[int, ...]:
    need = 4 * fields
    if len(buf) < need:
        raise IDXError(f"{what}: truncated header, expected {need} bytes at offset 0, got {len(buf)}")
    return struct.unpack(f">{fields}I", buf[:need])


def parse_idx_images(buf: bytes) -> np.ndarray:
    magic, count, rows, cols = _header(buf, 4, "images")
    if magic != IMAGE_MAGIC:
        raise IDXError(f"images: bad magic {magic} at offset 0, expected {IMAGE_MAGIC}")
    need = 16 + count * rows * cols
    if len(buf) < need:
        raise IDXError(f"images: truncated payload, data ends at offset {len(buf)}, expected {need}")
    return np.frombuffer(buf, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(
        count, rows, cols
    )


def parse_idx_labels(buf: bytes) -> np.ndarray:
    magic, count = _header(buf, 2, "labels")
    if magic != LABEL_MAGIC:
        raise IDXError(f"labels: bad magic {magic} at offset 0, expected {LABEL_MAGIC}")
    if len(buf) < 8 + count:
        raise IDXError(f"labels: truncated payload, data ends at offset {len(buf)}, expected {8 + count}")
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=8)


def load_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Images scaled to [0, 1] by /255 with their labels. Gzipped files are accepted."""
    images = parse_idx_images(_read_bytes(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise IDXError(
            f"count mismatch: {images.shape[0]} images (offset 4) vs {labels.shape[0]} labels (offset 4)"
        )
    return Dataset(images.astype(np.float64) / 255.0, labels.astype(np.int64))


def write_idx(images_path: str | Path, labels_path: str | Path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 images ``(N, H, W)`` and labels in IDX layout (used for fixtures)."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, h, w = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">4I", IMAGE_MAGIC, n, h, w))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">2I", LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def find_mnist(directory: str | Path, part: str) -> tuple[Path, Path]:
    """Locate the standard MNIST file pair (plain or ``.gz``) in a directory."""
    directory = Path(directory)
    found = []
    for stem in MNIST_FILES[part]:
        for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
            if (directory / name).exists():
                found.append(directory / name)
                break
        else:
            raise FileNotFoundError(f"no {stem}[.gz] in {directory}")
    return found[0], found[1]
