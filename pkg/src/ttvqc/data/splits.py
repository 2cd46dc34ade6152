"""Source / target / test split construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import Dataset


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    source_classes: tuple[int, ...]
    source_count: int
    target_classes: tuple[int, ...]
    target_count: int
    seed: int = 0

    def __post_init__(self):
        if self.source_count < 0 or self.target_count < 0:
            raise SplitError("split counts must be >= 0")
        object.__setattr__(self, "source_classes", tuple(sorted(int(c) for c in self.source_classes)))
        object.__setattr__(self, "target_classes", tuple(sorted(int(c) for c in self.target_classes)))


def _per_class(count: int, classes: tuple[int, ...]) -> dict[int, int]:
    # remainder goes to the lowest class ids
    base, extra = divmod(count, len(classes)) if classes else (0, 0)
    return {c: base + (1 if i < extra else 0) for i, c in enumerate(classes)}


def _remap(ds: Dataset, classes: tuple[int, ...]) -> Dataset:
    lut = {c: i for i, c in enumerate(classes)}
    labels = np.array([lut[int(v)] for v in ds.labels], dtype=np.int64)
    return Dataset(ds.images, labels, ds.index, classes)


def build_splits(dataset: Dataset, spec: SplitSpec, test_pool: Dataset) -> tuple[Dataset, Dataset, Dataset]:
    """Draw disjoint, class-balanced S0 and ST without replacement, and the target-class test set.

    Labels are remapped to ``0..C-1`` by ascending original class id (separately
    for the source and target class sets). Item order within each split is by
    class, then by draw order.
    """
    available = set(int(c) for c in np.unique(dataset.labels))
    for c in spec.target_classes + spec.source_classes:
        if c not in available:
            raise SplitError(f"class {c} not present in the dataset")
    rng = np.random.default_rng(spec.seed)
    pools = {
        c: rng.permutation(np.flatnonzero(dataset.labels == c)).tolist()
        for c in sorted(available)
    }
    taken: dict[int, int] = {c: 0 for c in pools}

    def draw(count: int, classes: tuple[int, ...], what: str) -> np.ndarray:
        want = _per_class(count, classes)
        deficits = {
            c: n - (len(pools[c]) - taken[c]) for c, n in want.items() if n > len(pools[c]) - taken[c]
        }
        if deficits:
            detail = ", ".join(f"class {c} short by {d}" for c, d in deficits.items())
            raise SplitError(f"{what}: insufficient items ({detail})")
        picked = []
        for c, n in want.items():
            picked += pools[c][taken[c] : taken[c] + n]
            taken[c] += n
        return np.array(picked, dtype=np.int64)

    src = dataset.subset(draw(spec.source_count, spec.source_classes, "source"))
    tgt = dataset.subset(draw(spec.target_count, spec.target_classes, "target"))
    test_idx = np.flatnonzero(np.isin(test_pool.labels, spec.target_classes))
    test = test_pool.subset(test_idx)
    return _remap(src, spec.source_classes), _remap(tgt, spec.target_classes), _remap(test, spec.target_classes)


def stratified_split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Per-class shuffled split; each class contributes ``round(n_c * train_fraction)`` to train."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(ds.labels):
        idx = rng.permutation(np.flatnonzero(ds.labels == c))
        k = int(round(len(idx) * train_fraction))
        train.append(idx[:k])
        test.append(idx[k:])
    tr = np.concatenate(train) if train else np.zeros(0, dtype=np.int64)
    te = np.concatenate(test) if test else np.zeros(0, dtype=np.int64)
    return ds.subset(tr), ds.subset(te)
