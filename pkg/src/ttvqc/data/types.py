from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np


@dataclass(frozen=True)
class LabeledGrid:
    pixels: np.ndarray  # (H, W) in [0, 1]
    label: int


@dataclass
class Dataset:
    """Images ``(N, H, W)`` with integer labels.

    ``index`` records each item's position in the collection it was drawn from,
    which is how split disjointness is checked. ``classes`` maps the stored
    (contiguous) labels back to original class ids when labels were remapped.
    """

    images: np.ndarray
    labels: np.ndarray
    index: np.ndarray | None = None
    classes: tuple[int, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3:
            raise ValueError(f"images must be (N, H, W), got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )
        if self.index is None:
            self.index = np.arange(self.labels.shape[0])

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __iter__(self) -> Iterator[LabeledGrid]:
        for img, lab in zip(self.images, self.labels):
            yield LabeledGrid(img, int(lab))

    @property
    def num_classes(self) -> int:
        if self.classes is not None:
            return len(self.classes)
        return int(self.labels.max()) + 1 if len(self) else 0

    @property
    def flat(self) -> np.ndarray:
        return self.images.reshape(len(self), -1)

    def subset(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx], self.index[idx], self.classes)

    @classmethod
    def from_grids(cls, grids: list[LabeledGrid]) -> "Dataset":
        if not grids:
            return cls(np.zeros((0, 1, 1)), np.zeros(0, dtype=np.int64))
        return cls(np.stack([g.pixels for g in grids]), np.array([g.label for g in grids]))
