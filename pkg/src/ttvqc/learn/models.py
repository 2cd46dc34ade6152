"""Composed pipelines: TTN + dense head, TTN + VQC, and PCA + VQC."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .. import qsim
from ..qsim import EncodingSpec, PQCParams
from ..tt import TTLayer, tt_backward, tt_forward, tt_param_count
from .losses import batch_softmax_ce
from .pca import PCABasis, pca_project


class Variant(str, enum.Enum):
    TTN_HEAD = "ttn_head"
    TTN_VQC = "ttn_vqc"
    PCA_VQC = "pca_vqc"


@dataclass
class DenseHead:
    """Affine map ``U -> C`` producing logits."""

    weight: np.ndarray  # (C, U)
    bias: np.ndarray  # (C,)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError(
                f"head weight {self.weight.shape} and bias {self.bias.shape} disagree"
            )

    @classmethod
    def random(cls, num_inputs: int, num_classes: int, rng: np.random.Generator) -> "DenseHead":
        w = rng.normal(0.0, num_inputs**-0.5, size=(num_classes, num_inputs))
        return cls(w, np.zeros(num_classes))

    def copy(self) -> "DenseHead":
        return DenseHead(self.weight.copy(), self.bias.copy())


@dataclass
class ModelAssembly:
    variant: Variant
    num_classes: int
    ttn: TTLayer | None = None
    head: DenseHead | None = None
    pqc: PQCParams | None = None
    pca: PCABasis | None = None
    freeze_ttn: bool = False
    readout_gain: float = 5.0
    # optional trainable affine map from all U expectations to logits
    readout: DenseHead | None = None
    ring: bool = False
    name: str = ""

    def __post_init__(self):
        self.variant = Variant(self.variant)
        need = {
            Variant.TTN_HEAD: ("ttn", "head"),
            Variant.TTN_VQC: ("ttn", "pqc"),
            Variant.PCA_VQC: ("pca", "pqc"),
        }[self.variant]
        for part in need:
            if getattr(self, part) is None:
                raise ValueError(f"{self.variant.value} model needs a {part}")
        u = self.feature_dim
        if self.head is not None and self.head.weight.shape != (self.num_classes, u):
            raise ValueError(
                f"head is {self.head.weight.shape}, expected ({self.num_classes}, {u})"
            )
        if self.pqc is not None:
            if self.pqc.num_qubits != u:
                raise ValueError(f"circuit has {self.pqc.num_qubits} qubits, features give {u}")
            if self.readout is None and self.num_classes > u:
                raise ValueError(f"{self.num_classes} classes cannot be read from {u} qubits")

    @property
    def feature_dim(self) -> int:
        if self.variant == Variant.PCA_VQC:
            return self.pca.num_components
        return self.ttn.shape.out_size

    @property
    def encoding(self) -> EncodingSpec:
        return EncodingSpec(self.feature_dim, squash=True)

    def parameters(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        if self.ttn is not None:
            for k, core in enumerate(self.ttn.cores):
                out[f"ttn.core{k}"] = core
        if self.head is not None:
            out["head.weight"] = self.head.weight
            out["head.bias"] = self.head.bias
        if self.pqc is not None:
            out["pqc.angles"] = self.pqc.angles
        if self.readout is not None:
            out["readout.weight"] = self.readout.weight
            out["readout.bias"] = self.readout.bias
        if self.pca is not None:
            out["pca.basis"] = self.pca.basis
            out["pca.mean"] = self.pca.mean
        return out

    def trainable_names(self) -> list[str]:
        names = []
        for name in self.parameters():
            if name.startswith("pca."):
                continue
            if name.startswith("ttn.") and self.freeze_ttn:
                continue
            names.append(name)
        return names

    def param_count(self) -> int:
        """Scalars in the model's learned components (PCA basis excluded)."""
        n = 0
        if self.ttn is not None:
            n += tt_param_count(self.ttn)
        for part in (self.head, self.readout):
            if part is not None:
                n += part.weight.size + part.bias.size
        if self.pqc is not None:
            n += self.pqc.angles.size
        return n

    def ttn_digest(self) -> str:
        h = hashlib.sha256()
        for core in self.ttn.cores:
            h.update(np.ascontiguousarray(core).tobytes())
        return h.hexdigest()

    def _features(self, x: np.ndarray) -> np.ndarray:
        if self.variant == Variant.PCA_VQC:
            return pca_project(x.reshape(x.shape[0], -1), self.pca)
        dims = self.ttn.shape.input_dims
        return tt_forward(self.ttn, x.reshape((x.shape[0],) + dims))

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        """Logits ``(B, C)`` for a batch, plus what ``backward`` needs."""
        x = np.asarray(x, dtype=np.float64)
        z = self._features(x)
        cache = {"x": x, "z": z}
        if self.variant == Variant.TTN_HEAD:
            a = qsim.sigmoid(z)
            cache["a"] = a
            return a @ self.head.weight.T + self.head.bias, cache
        psi = qsim.vqc_states_batch(z, self.encoding, self.pqc, self.ring)
        e = qsim.expval_z_batch(psi, self.feature_dim)
        cache["e"] = e
        cache["psi"] = psi
        if self.readout is not None:
            return e @ self.readout.weight.T + self.readout.bias, cache
        return self.readout_gain * e[:, : self.num_classes], cache

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: dict, grad_logits: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of ``sum(grad_logits * logits)`` for every trainable parameter."""
        g = np.asarray(grad_logits, dtype=np.float64)
        grads: dict[str, np.ndarray] = {}
        x, z = cache["x"], cache["z"]
        if self.variant == Variant.TTN_HEAD:
            a = cache["a"]
            grads["head.weight"] = g.T @ a
            grads["head.bias"] = g.sum(axis=0)
            gz = (g @ self.head.weight) * a * (1.0 - a)
        else:
            e = cache["e"]
            if self.readout is not None:
                grads["readout.weight"] = g.T @ e
                grads["readout.bias"] = g.sum(axis=0)
                ge = g @ self.readout.weight
            else:
                ge = np.zeros_like(e)
                ge[:, : self.num_classes] = self.readout_gain * g
            ga, gz = qsim.adjoint_batch(
                z, self.encoding, self.pqc, ge, self.ring, final=cache["psi"]
            )
            grads["pqc.angles"] = ga
        if self.variant != Variant.PCA_VQC and not self.freeze_ttn:
            dims = self.ttn.shape.input_dims
            _, gcores = tt_backward(self.ttn, x.reshape((x.shape[0],) + dims), gz)
            for k, gc in enumerate(gcores):
                grads[f"ttn.core{k}"] = gc
        return grads

    def loss_and_grads(
        self, x: np.ndarray, y: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy over the batch and its gradients."""
        logits, cache = self.forward(x)
        losses, g = batch_softmax_ce(logits, y)
        grads = self.backward(cache, g / x.shape[0])
        return float(losses.mean()), grads
