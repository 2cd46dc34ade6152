from .dots import DotGenConfig, gen_charge_diagrams
from .idx import IDXError, find_mnist, load_idx, parse_idx_images, parse_idx_labels, write_idx
from .splits import SplitError, SplitSpec, build_splits, stratified_split
from .ttqd import TTQDError, read_ttqd, write_ttqd
from .types import Dataset, LabeledGrid

__all__ = [
    "DotGenConfig",
    "gen_charge_diagrams",
    "IDXError",
    "find_mnist",
    "load_idx",
    "parse_idx_images",
    "parse_idx_labels",
    "write_idx",
    "SplitError",
    "SplitSpec",
    "build_splits",
    "stratified_split",
    "TTQDError",
    "read_ttqd",
    "write_ttqd",
    "Dataset",
    "LabeledGrid",
]
