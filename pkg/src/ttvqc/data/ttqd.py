"""Canonical little-endian dataset file.

Layout: ``b"TTQD"``, u16 version, u32 count, u32 H, u32 W, u16 class count,
then ``count*H*W`` float32 pixels and ``count`` uint16 labels.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .types import Dataset

MAGIC = b"TTQD"
VERSION = 1
_HEADER = struct.Struct("<4sHIIIH")


class TTQDError(ValueError):
    pass


def write_ttqd(path: str | Path, ds: Dataset, num_classes: int | None = None) -> None:
    n, h, w = ds.images.shape
    if ds.images.size and (ds.images.min() < 0.0 or ds.images.max() > 1.0):
        raise ValueError("pixels must lie in [0, 1]")
    c = ds.num_classes if num_classes is None else num_classes
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, h, w, c))
        fh.write(ds.images.astype("<f4").tobytes())
        fh.write(ds.labels.astype("<u2").tobytes())


def read_ttqd(path: str | Path) -> Dataset:
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise TTQDError(f"{path}: truncated header")
    magic, version, n, h, w, c = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise TTQDError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise TTQDError(f"{path}: unsupported version {version}")
    npix = n * h * w
    need = _HEADER.size + 4 * npix + 2 * n
    if len(buf) != need:
        raise TTQDError(f"{path}: expected {need} bytes, found {len(buf)}")
    pixels = np.frombuffer(buf, dtype="<f4", count=npix, offset=_HEADER.size)
    labels = np.frombuffer(buf, dtype="<u2", count=n, offset=_HEADER.size + 4 * npix)
    ds = Dataset(pixels.reshape(n, h, w).astype(np.float64), labels.astype(np.int64))
    ds.meta["num_classes"] = c
    return ds
