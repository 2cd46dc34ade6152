"""Tensor-train vectors and matrices, and the TT linear layer.

Index flattening is row-major throughout: for input indices ``(i_1, ..., i_K)``
the flat position is ``((i_1 * I_2 + i_2) * I_3 + i_3) ...`` (last index
fastest), and the same convention is used for the output indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Sequence

import numpy as np

from .linalg import jacobi_eigh


class TTShapeError(ValueError):
    """Raised when tensor extents disagree with a TT layout."""


@dataclass(frozen=True)
class TTShape:
    input_dims: tuple[int, ...]
    output_dims: tuple[int, ...]
    ranks: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))
        object.__setattr__(self, "output_dims", tuple(int(d) for d in self.output_dims))
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        k = len(self.input_dims)
        if k < 1:
            raise TTShapeError("a TT layout needs at least one core")
        if len(self.output_dims) != k:
            raise TTShapeError(
                f"{k} input dims but {len(self.output_dims)} output dims"
            )
        if len(self.ranks) != k + 1:
            raise TTShapeError(f"expected {k + 1} ranks, got {len(self.ranks)}")
        if self.ranks[0] != 1 or self.ranks[-1] != 1:
            raise TTShapeError(f"boundary ranks must be 1, got {self.ranks}")
        if min(self.input_dims + self.output_dims + self.ranks) < 1:
            raise TTShapeError("all dims and ranks must be >= 1")

    @property
    def order(self) -> int:
        return len(self.input_dims)

    @property
    def in_size(self) -> int:
        return prod(self.input_dims)

    @property
    def out_size(self) -> int:
        return prod(self.output_dims)

    def core_shape(self, k: int) -> tuple[int, int, int, int]:
        return (self.ranks[k], self.input_dims[k], self.output_dims[k], self.ranks[k + 1])


@dataclass
class TTLayer:
    """A linear map stored as a chain of 4-way cores ``(r_k, I_k, J_k, r_{k+1})``."""

    shape: TTShape
    cores: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.cores) != self.shape.order:
            raise TTShapeError(
                f"{len(self.cores)} cores for a layout of order {self.shape.order}"
            )
        cores = []
        for k, core in enumerate(self.cores):
            core = np.asarray(core, dtype=np.float64)
            if core.shape != self.shape.core_shape(k):
                raise TTShapeError(
                    f"core {k} has extents {core.shape}, expected {self.shape.core_shape(k)}"
                )
            if not np.all(np.isfinite(core)):
                raise ValueError(f"core {k} contains non-finite entries")
            cores.append(core)
        self.cores = cores

    @classmethod
    def random(cls, shape: TTShape, rng: np.random.Generator) -> "TTLayer":
        """Gaussian cores with std ``(r_k * I_k * r_{k+1}) ** -0.5``."""
        cores = []
        for k in range(shape.order):
            r0, i, j, r1 = shape.core_shape(k)
            cores.append(rng.normal(0.0, (r0 * i * r1) ** -0.5, size=(r0, i, j, r1)))
        return cls(shape, cores)

    @classmethod
    def zeros(cls, shape: TTShape) -> "TTLayer":
        return cls(shape, [np.zeros(shape.core_shape(k)) for k in range(shape.order)])

    def copy(self) -> "TTLayer":
        return TTLayer(self.shape, [c.copy() for c in self.cores])


@dataclass
class TTVector:
    """A K-way tensor stored as 3-way cores ``(r_k, I_k, r_{k+1})``."""

    dims: tuple[int, ...]
    ranks: tuple[int, ...]
    cores: list[np.ndarray]
    error: float = 0.0

    def full(self) -> np.ndarray:
        out = np.ones((1, 1))
        for core in self.cores:
            r0, i, r1 = core.shape
            out = (out @ core.reshape(r0, i * r1)).reshape(-1, r1)
        return out.reshape(self.dims)


def _check_input(shape: TTShape, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    dims = shape.input_dims
    if x.shape == dims:
        return x.reshape(1, -1)
    if x.ndim == len(dims) + 1 and x.shape[1:] == dims:
        return x.reshape(x.shape[0], -1)
    raise TTShapeError(f"input extents {x.shape} do not match layer input dims {dims}")


def _contract(layer: TTLayer, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched sweep; returns output ``(B, prod J)`` and per-core inputs for backprop.

    The running tensor at step k has axes ``(b, p, r, i, m)``: batch, flattened
    outputs produced so far, bond, current input index, flattened remaining inputs.
    """
    shape = layer.shape
    b = x.shape[0]
    t = x.reshape(b, 1, 1, shape.input_dims[0], -1)
    saved = []
    for k, core in enumerate(layer.cores):
        saved.append(t)
        y = np.einsum("bprim,rijs->bpjsm", t, core, optimize=True)
        bb, p, j, s, m = y.shape
        if k + 1 < shape.order:
            t = y.reshape(bb, p * j, s, shape.input_dims[k + 1], m // shape.input_dims[k + 1])
        else:
            t = y.reshape(bb, p * j)
    return t, saved


def tt_forward(layer: TTLayer, x: np.ndarray) -> np.ndarray:
    """Apply the TT linear map to a dense input of extents ``I_1 x ... x I_K``.

    A leading batch axis is accepted; the output is then ``(B, prod J)``.
    """
    batched = np.ndim(x) == layer.shape.order + 1
    flat = _check_input(layer.shape, x)
    out, _ = _contract(layer, flat)
    return out if batched else out[0]


def tt_backward(
    layer: TTLayer, x: np.ndarray, upstream: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Gradients of ``<upstream, tt_forward(layer, x)>`` w.r.t. the input and every core.

    Batched inputs accumulate core gradients over the batch axis.
    """
    shape = layer.shape
    batched = np.ndim(x) == shape.order + 1
    flat = _check_input(shape, x)
    g = np.asarray(upstream, dtype=np.float64).reshape(flat.shape[0], -1)
    if g.shape[1] != shape.out_size:
        raise TTShapeError(f"upstream length {g.shape[1]} != output size {shape.out_size}")
    _, saved = _contract(layer, flat)
    grads: list[np.ndarray] = [np.zeros(0)] * shape.order
    for k in reversed(range(shape.order)):
        t = saved[k]
        bb, p, r, i, m = t.shape
        core = layer.cores[k]
        j, s = core.shape[2], core.shape[3]
        gy = g.reshape(bb, p, j, s, m)
        grads[k] = np.einsum("bprim,bpjsm->rijs", t, gy, optimize=True)
        gt = np.einsum("bpjsm,rijs->bprim", gy, core, optimize=True)
        if k > 0:
            pj = shape.output_dims[k - 1]
            # undo the reshape that produced t from the previous step's output
            g = gt.reshape(bb, p // pj, pj, r, i * m)
        else:
            g = gt
    grad_x = g.reshape((flat.shape[0],) + shape.input_dims)
    return (grad_x if batched else grad_x[0]), grads


def tt_reconstruct(layer: TTLayer) -> np.ndarray:
    """Dense ``(prod J) x (prod I)`` matrix represented by the layer."""
    shape = layer.shape
    # full tensor with axes (i_1, j_1, i_2, j_2, ...)
    out = np.ones((1, 1))
    for core in layer.cores:
        r0, i, j, r1 = core.shape
        out = (out @ core.reshape(r0, i * j * r1)).reshape(-1, r1)
    pairs = []
    for k in range(shape.order):
        pairs += [shape.input_dims[k], shape.output_dims[k]]
    full = out.reshape(pairs)
    k = shape.order
    perm = [2 * n + 1 for n in range(k)] + [2 * n for n in range(k)]
    return full.transpose(perm).reshape(shape.out_size, shape.in_size)


def tt_param_count(layer: TTLayer) -> int:
    return sum(int(np.prod(layer.shape.core_shape(k))) for k in range(layer.shape.order))


def exact_tt_ranks(tensor: np.ndarray, rtol: float = 1e-10) -> tuple[int, ...]:
    """Numerical ranks of the sequential unfoldings, boundary ones included."""
    tensor = np.asarray(tensor, dtype=np.float64)
    dims = tensor.shape
    ranks = [1]
    for k in range(1, len(dims)):
        unf = tensor.reshape(prod(dims[:k]), -1)
        sv = np.linalg.svd(unf, compute_uv=False)
        ranks.append(int(np.sum(sv > rtol * max(sv[0], 1e-300))) if sv.size else 0)
        ranks[-1] = max(ranks[-1], 1)
    ranks.append(1)
    return tuple(ranks)


def tt_decompose(tensor: np.ndarray, ranks: Sequence[int]) -> TTVector:
    """Sequential unfolding factorization into TT cores of the given ranks.

    Each left factor is the leading eigenvectors of the unfolding's Gram matrix.
    At the exact TT-ranks the cores reproduce the tensor; at smaller ranks the
    result is a truncation and ``error`` holds the relative Frobenius error.
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    dims = tensor.shape
    k_order = len(dims)
    ranks = tuple(int(r) for r in ranks)
    if k_order < 1:
        raise TTShapeError("tensor must have at least one axis")
    if len(ranks) != k_order + 1:
        raise TTShapeError(f"expected {k_order + 1} ranks, got {len(ranks)}")
    if ranks[0] != 1 or ranks[-1] != 1:
        raise TTShapeError(f"boundary ranks must be 1, got {ranks}")
    for k in range(1, k_order):
        limit = min(prod(dims[:k]), prod(dims[k:]))
        if not 1 <= ranks[k] <= limit:
            raise TTShapeError(
                f"rank r_{k + 1}={ranks[k]} exceeds unfolding dimension {limit}"
            )

    cores = []
    rest = tensor.reshape(1, -1)
    for k in range(k_order - 1):
        mat = rest.reshape(ranks[k] * dims[k], -1)
        _, vecs = jacobi_eigh(mat @ mat.T)
        left = vecs[:, : ranks[k + 1]]
        cores.append(left.reshape(ranks[k], dims[k], ranks[k + 1]))
        rest = left.T @ mat
    cores.append(rest.reshape(ranks[-2], dims[-1], 1))

    tv = TTVector(dims, ranks, cores)
    norm = np.linalg.norm(tensor)
    diff = np.linalg.norm(tv.full() - tensor)
    tv.error = float(diff / norm) if norm > 0 else float(diff)
    return tv
