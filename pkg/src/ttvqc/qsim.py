"""Dense statevector simulation of the variational circuit.

Qubit 0 is the most significant bit of a basis index, so a product state is the
Kronecker product of single-qubit vectors in wire order. The batched helpers
(``*_batch``) operate on ``(B, 2**U)`` complex arrays and drive training; the
single-state functions wrap them for direct use.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

AXES = ("X", "Y", "Z")

_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


class CircuitError(ValueError):
    """Raised for wire indices or parameter extents that do not fit the register."""


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.num_qubits < 1 or self.amplitudes.shape != (2**self.num_qubits,):
            raise CircuitError(
                f"{self.amplitudes.shape} amplitudes for {self.num_qubits} qubits"
            )

    @classmethod
    def zero(cls, num_qubits: int) -> "StateVector":
        amps = np.zeros(2**num_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


@dataclass
class PQCParams:
    """Rotation angles ``(L, U, 3)`` ordered (alpha, beta, gamma) = (R_X, R_Y, R_Z)."""

    angles: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.ndim != 3 or self.angles.shape[2] != 3 or 0 in self.angles.shape:
            raise CircuitError(f"angles must have shape (L, U, 3), got {self.angles.shape}")
        if not np.all(np.isfinite(self.angles)):
            raise ValueError("angles contain non-finite entries")

    @property
    def depth(self) -> int:
        return self.angles.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.angles.shape[1]

    @classmethod
    def random(cls, depth: int, num_qubits: int, rng: np.random.Generator) -> "PQCParams":
        return cls(rng.uniform(-np.pi / 4, np.pi / 4, size=(depth, num_qubits, 3)))

    def copy(self) -> "PQCParams":
        return PQCParams(self.angles.copy())


@dataclass(frozen=True)
class EncodingSpec:
    num_qubits: int
    squash: bool = True

    def __post_init__(self):
        if self.num_qubits < 1:
            raise CircuitError("encoding needs at least one qubit")


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def rotation_matrix(axis: str, angle: float | np.ndarray) -> np.ndarray:
    """``exp(-i angle P / 2)``; a vector of angles gives a ``(B, 2, 2)`` stack."""
    theta = np.asarray(angle, dtype=np.float64)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    if axis == "X":
        m = [[c, -1j * s], [-1j * s, c]]
    elif axis == "Y":
        m = [[c, -s], [s, c]]
    elif axis == "Z":
        zero = np.zeros_like(c)
        m = [[np.exp(-0.5j * theta), zero], [zero, np.exp(0.5j * theta)]]
    else:
        raise CircuitError(f"unknown rotation axis {axis!r}")
    out = np.array(m, dtype=np.complex128)
    if theta.ndim:
        out = np.moveaxis(out, (0, 1), (-2, -1))
    return out


@lru_cache(maxsize=None)
def z_signs(num_qubits: int) -> np.ndarray:
    """``(U, 2**U)`` table of ``1 - 2 * bit_j(b)``."""
    idx = np.arange(2**num_qubits)
    bits = (idx[None, :] >> (num_qubits - 1 - np.arange(num_qubits))[:, None]) & 1
    return (1 - 2 * bits).astype(np.float64)


@lru_cache(maxsize=None)
def _cnot_perm(num_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**num_qubits)
    cbit = (idx >> (num_qubits - 1 - control)) & 1
    return np.where(cbit == 1, idx ^ (1 << (num_qubits - 1 - target)), idx)


def _check_wire(num_qubits: int, wire: int) -> None:
    if not 0 <= wire < num_qubits:
        raise CircuitError(f"wire {wire} out of range for {num_qubits} qubits")


def apply_1q_batch(psi: np.ndarray, mat: np.ndarray, wire: int, num_qubits: int) -> np.ndarray:
    b = psi.shape[0]
    view = psi.reshape(b, 2**wire, 2, 2 ** (num_qubits - wire - 1))
    if mat.ndim == 3:
        out = np.einsum("bij,bxjy->bxiy", mat, view)
    else:
        out = np.einsum("ij,bxjy->bxiy", mat, view)
    return out.reshape(b, -1)


def apply_cnot_batch(psi: np.ndarray, control: int, target: int, num_qubits: int) -> np.ndarray:
    return psi[:, _cnot_perm(num_qubits, control, target)]


def encode_batch(v: np.ndarray) -> np.ndarray:
    """Product states with per-qubit amplitudes ``(cos(pi v / 2), sin(pi v / 2))``."""
    v = np.asarray(v, dtype=np.float64)
    b, u = v.shape
    c = np.cos(0.5 * np.pi * v)
    s = np.sin(0.5 * np.pi * v)
    psi = np.ones((b, 1))
    for w in range(u):
        psi = np.stack([psi * c[:, w : w + 1], psi * s[:, w : w + 1]], axis=2).reshape(b, -1)
    return psi.astype(np.complex128)


def circuit_ops(depth: int, num_qubits: int, ring: bool = False) -> Iterator[tuple]:
    """Gate sequence: per layer a CNOT chain, then R_X, R_Y, R_Z on every wire.

    Rotation entries are ``("rot", axis_index, wire, layer)``.
    """
    for layer in range(depth):
        for k in range(num_qubits - 1):
            yield ("cnot", k, k + 1)
        if ring and num_qubits > 2:
            yield ("cnot", num_qubits - 1, 0)
        for w in range(num_qubits):
            for a in range(3):
                yield ("rot", a, w, layer)


def _depolarize(psi, wires, num_qubits, p, rng):
    for w in wires:
        hit = rng.random(psi.shape[0]) < p
        if not hit.any():
            continue
        which = rng.integers(0, 3, size=psi.shape[0])
        mats = np.broadcast_to(np.eye(2, dtype=np.complex128), (psi.shape[0], 2, 2)).copy()
        for a, name in enumerate(AXES):
            mats[hit & (which == a)] = _PAULI[name]
        psi = apply_1q_batch(psi, mats, w, num_qubits)
    return psi


def fused_rotation(angles_wire: np.ndarray) -> np.ndarray:
    """``R_Z(gamma) R_Y(beta) R_X(alpha)`` for one wire's (alpha, beta, gamma)."""
    a, b, g = angles_wire
    return rotation_matrix("Z", g) @ rotation_matrix("Y", b) @ rotation_matrix("X", a)


def pqc_forward_batch(
    psi: np.ndarray,
    angles: np.ndarray,
    ring: bool = False,
    depolarizing: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    depth, u, _ = angles.shape
    if depolarizing > 0.0:
        if rng is None:
            raise ValueError("depolarizing noise needs an rng")
        # gate-by-gate so noise can follow every gate
        for op in circuit_ops(depth, u, ring):
            if op[0] == "cnot":
                psi = apply_cnot_batch(psi, op[1], op[2], u)
                touched = (op[1], op[2])
            else:
                _, a, w, layer = op
                psi = apply_1q_batch(psi, rotation_matrix(AXES[a], angles[layer, w, a]), w, u)
                touched = (w,)
            psi = _depolarize(psi, touched, u, depolarizing, rng)
        return psi
    for layer in range(depth):
        for c, t in _chain(u, ring):
            psi = apply_cnot_batch(psi, c, t, u)
        for w in range(u):
            psi = apply_1q_batch(psi, fused_rotation(angles[layer, w]), w, u)
    return psi


def _chain(num_qubits: int, ring: bool) -> list[tuple[int, int]]:
    pairs = [(k, k + 1) for k in range(num_qubits - 1)]
    if ring and num_qubits > 2:
        pairs.append((num_qubits - 1, 0))
    return pairs


def _cross_density(lam: np.ndarray, psi: np.ndarray, wire: int, num_qubits: int) -> np.ndarray:
    """Per-sample 2x2 ``rho[i, j] = sum_rest psi[.., i, ..] * conj(lam[.., j, ..])``."""
    b = psi.shape[0]
    shape = (b, 2**wire, 2, 2 ** (num_qubits - wire - 1))
    return np.einsum("bxiy,bxjy->bij", psi.reshape(shape), np.conj(lam).reshape(shape))


def _grad_from_density(rho: np.ndarray, gen: np.ndarray) -> np.ndarray:
    # Im <lam| gen |psi> = Im tr(gen rho), per sample
    return np.imag(np.einsum("ij,bji->b", gen, rho))


def expval_z_batch(psi: np.ndarray, num_qubits: int) -> np.ndarray:
    probs = psi.real**2 + psi.imag**2
    return probs @ z_signs(num_qubits).T


def encoding_values(features: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != spec.num_qubits:
        raise CircuitError(f"{x.shape[-1]} features for {spec.num_qubits} qubits")
    if spec.squash:
        return sigmoid(x)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("unsquashed features must lie in [0, 1]")
    return x


def vqc_states_batch(
    features: np.ndarray, spec: EncodingSpec, params: PQCParams, ring: bool = False
) -> np.ndarray:
    v = encoding_values(np.atleast_2d(features), spec)
    _check_params(spec, params)
    return pqc_forward_batch(encode_batch(v), params.angles, ring)


def vqc_expectations_batch(
    features: np.ndarray, spec: EncodingSpec, params: PQCParams, ring: bool = False
) -> np.ndarray:
    return expval_z_batch(vqc_states_batch(features, spec, params, ring), spec.num_qubits)


def _check_params(spec: EncodingSpec, params: PQCParams) -> None:
    if params.num_qubits != spec.num_qubits:
        raise CircuitError(
            f"circuit has {params.num_qubits} qubits, encoding has {spec.num_qubits}"
        )


def adjoint_batch(
    features: np.ndarray,
    spec: EncodingSpec,
    params: PQCParams,
    upstream: np.ndarray,
    ring: bool = False,
    final: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Reverse-mode gradients of ``sum_b sum_j upstream[b, j] <Z_j>_b``.

    Returns the angle gradient summed over the batch and the per-sample gradient
    with respect to the raw features (through the sigmoid when squashing).
    ``final`` may carry the already-simulated output states to skip the forward pass.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    _check_params(spec, params)
    u = spec.num_qubits
    up = np.asarray(upstream, dtype=np.float64).reshape(x.shape[0], -1)
    if up.shape[1] != u:
        raise CircuitError(f"upstream has {up.shape[1]} entries per sample, expected {u}")
    v = encoding_values(x, spec)
    angles = params.angles

    psi = pqc_forward_batch(encode_batch(v), angles, ring) if final is None else final
    lam = psi * (up @ z_signs(u))
    grad_angles = np.zeros_like(angles)
    chain = _chain(u, ring)
    for layer in reversed(range(params.depth)):
        for w in reversed(range(u)):
            al, be, ga = angles[layer, w]
            rz = rotation_matrix("Z", ga)
            ry = rotation_matrix("Y", be)
            rho = _cross_density(lam, psi, w, u)
            # generators conjugated to the point after the fused gate
            gz = _PAULI["Z"]
            gy = rz @ _PAULI["Y"] @ rz.conj().T
            rzy = rz @ ry
            gx = rzy @ _PAULI["X"] @ rzy.conj().T
            grad_angles[layer, w, 0] = _grad_from_density(rho, gx).sum()
            grad_angles[layer, w, 1] = _grad_from_density(rho, gy).sum()
            grad_angles[layer, w, 2] = _grad_from_density(rho, gz).sum()
            inv = fused_rotation(angles[layer, w]).conj().T
            psi = apply_1q_batch(psi, inv, w, u)
            lam = apply_1q_batch(lam, inv, w, u)
        for c, t in reversed(chain):
            psi = apply_cnot_batch(psi, c, t, u)
            lam = apply_cnot_batch(lam, c, t, u)

    # encoding layer: R_Y(pi * v_w) on each wire of |0...0>
    grad_v = np.zeros_like(v)
    for w in reversed(range(u)):
        rho = _cross_density(lam, psi, w, u)
        grad_v[:, w] = np.pi * _grad_from_density(rho, _PAULI["Y"])
        inv = rotation_matrix("Y", -np.pi * v[:, w])
        psi = apply_1q_batch(psi, inv, w, u)
        lam = apply_1q_batch(lam, inv, w, u)
    grad_x = grad_v * v * (1.0 - v) if spec.squash else grad_v
    return grad_angles, grad_x


def param_shift_batch(
    features: np.ndarray,
    spec: EncodingSpec,
    params: PQCParams,
    upstream: np.ndarray,
    ring: bool = False,
) -> np.ndarray:
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    _check_params(spec, params)
    up = np.asarray(upstream, dtype=np.float64).reshape(x.shape[0], -1)
    if up.shape[1] != spec.num_qubits:
        raise CircuitError(
            f"upstream has {up.shape[1]} entries per sample, expected {spec.num_qubits}"
        )
    psi0 = encode_batch(encoding_values(x, spec))
    grad = np.zeros_like(params.angles)
    for idx in np.ndindex(params.angles.shape):
        shifted = params.angles.copy()
        shifted[idx] += np.pi / 2
        plus = expval_z_batch(pqc_forward_batch(psi0, shifted, ring), spec.num_qubits)
        shifted[idx] -= np.pi
        minus = expval_z_batch(pqc_forward_batch(psi0, shifted, ring), spec.num_qubits)
        grad[idx] = np.sum(up * (plus - minus)) / 2.0
    return grad


# single-state surface


def encode_tpe(features: np.ndarray, spec: EncodingSpec) -> StateVector:
    v = encoding_values(np.asarray(features, dtype=np.float64).reshape(1, -1), spec)
    return StateVector(spec.num_qubits, encode_batch(v)[0])


def apply_rotation(state: StateVector, axis: str, wire: int, angle: float) -> StateVector:
    _check_wire(state.num_qubits, wire)
    psi = apply_1q_batch(
        state.amplitudes[None, :], rotation_matrix(axis, angle), wire, state.num_qubits
    )
    return StateVector(state.num_qubits, psi[0])


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_wire(state.num_qubits, control)
    _check_wire(state.num_qubits, target)
    if control == target:
        raise CircuitError("control and target must differ")
    psi = apply_cnot_batch(state.amplitudes[None, :], control, target, state.num_qubits)
    return StateVector(state.num_qubits, psi[0])


def pqc_forward(
    state: StateVector,
    params: PQCParams,
    ring: bool = False,
    depolarizing: float = 0.0,
    rng: np.random.Generator | None = None,
) -> StateVector:
    if params.num_qubits != state.num_qubits:
        raise CircuitError(
            f"circuit has {params.num_qubits} qubits, state has {state.num_qubits}"
        )
    psi = pqc_forward_batch(state.amplitudes[None, :], params.angles, ring, depolarizing, rng)
    return StateVector(state.num_qubits, psi[0])


def measure_z(state: StateVector) -> np.ndarray:
    return expval_z_batch(state.amplitudes[None, :], state.num_qubits)[0]


def vqc_grad_adjoint(
    features: np.ndarray,
    spec: EncodingSpec,
    params: PQCParams,
    upstream: np.ndarray,
    ring: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    ga, gx = adjoint_batch(np.reshape(features, (1, -1)), spec, params, upstream, ring)
    return ga, gx[0]


def vqc_grad_param_shift(
    features: np.ndarray,
    spec: EncodingSpec,
    params: PQCParams,
    upstream: np.ndarray,
    ring: bool = False,
) -> np.ndarray:
    return param_shift_batch(np.reshape(features, (1, -1)), spec, params, upstream, ring)
