"""Principal component projection onto the qubit count."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import top_eigh


@dataclass
class PCABasis:
    basis: np.ndarray  # (D, U), orthonormal columns
    mean: np.ndarray  # (D,)
    explained_variance: np.ndarray  # (U,), non-increasing
    degenerate: bool = False

    @property
    def num_components(self) -> int:
        return self.basis.shape[1]


def pca_fit(data: np.ndarray, num_components: int) -> PCABasis:
    """Fit by eigendecomposition of the (population) covariance.

    All-constant data has no preferred directions; the basis is then an
    arbitrary orthonormal set and ``degenerate`` is set.
    """
    x = np.asarray(data, dtype=np.float64)
    x = x.reshape(x.shape[0], -1)
    n, d = x.shape
    if not 1 <= num_components <= min(n, d):
        raise ValueError(f"cannot take {num_components} components from {n}x{d} data")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / n
    vals, vecs = top_eigh(cov, num_components)
    vals = np.maximum(vals, 0.0)
    # sign convention: largest-magnitude entry of each column positive
    pivot = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    degenerate = bool(np.trace(cov) <= 1e-300)
    return PCABasis(vecs, mean, vals, degenerate)


def pca_project(x: np.ndarray, pca: PCABasis) -> np.ndarray:
    """``basis.T @ (x - mean)``; a leading batch axis is accepted."""
    x = np.asarray(x, dtype=np.float64)
    d = pca.mean.shape[0]
    flat = x.reshape(1, -1) if x.ndim == 1 else x.reshape(x.shape[0], -1)
    if flat.shape[1] != d:
        raise ValueError(f"input of shape {x.shape} does not match PCA dimension {d}")
    out = (flat - pca.mean) @ pca.basis
    return out[0] if x.ndim == 1 else out
