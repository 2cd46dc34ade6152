import itertools
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttvqc import qsim
from ttvqc.qsim import (
    CircuitError,
    EncodingSpec,
    PQCParams,
    StateVector,
    apply_cnot,
    apply_rotation,
    encode_tpe,
    measure_z,
    pqc_forward,
    vqc_grad_adjoint,
    vqc_grad_param_shift,
)

# dense reference built from Kronecker products; qubit 0 is the leftmost factor
I2 = np.eye(2)
PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0 + 0j, -1.0]),
}


def dense_rot(axis, theta):
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * PAULI[axis]


def embed(gate, wire, n):
    return reduce(np.kron, [gate if k == wire else I2 for k in range(n)])


def dense_cnot(c, t, n):
    dim = 2**n
    m = np.zeros((dim, dim))
    for b in range(dim):
        bits = [(b >> (n - 1 - k)) & 1 for k in range(n)]
        if bits[c]:
            bits[t] ^= 1
        m[int("".join(map(str, bits)), 2), b] = 1
    return m


def dense_circuit(angles, ring=False):
    depth, n, _ = angles.shape
    u = np.eye(2**n, dtype=complex)
    pairs = [(k, k + 1) for k in range(n - 1)] + ([(n - 1, 0)] if ring and n > 2 else [])
    for layer in range(depth):
        for c, t in pairs:
            u = dense_cnot(c, t, n) @ u
        for w in range(n):
            a, b, g = angles[layer, w]
            for axis, th in (("X", a), ("Y", b), ("Z", g)):
                u = embed(dense_rot(axis, th), w, n) @ u
    return u


def dense_expvals(psi, n):
    return np.array([np.real(np.conj(psi) @ embed(PAULI["Z"], j, n) @ psi) for j in range(n)])


def dense_pipeline(x, angles, squash=True, ring=False):
    v = 1 / (1 + np.exp(-x)) if squash else x
    psi = reduce(np.kron, [np.array([np.cos(np.pi * t / 2), np.sin(np.pi * t / 2)]) for t in v])
    return dense_expvals(dense_circuit(angles, ring) @ psi, len(x))


def random_state(n, rng):
    a = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, a / np.linalg.norm(a))


class TestEncoding:
    def test_zero_features_unsquashed(self):
        s = encode_tpe(np.zeros(3), EncodingSpec(3, squash=False))
        expected = np.zeros(8)
        expected[0] = 1
        np.testing.assert_array_equal(s.amplitudes, expected)

    def test_half_angle(self):
        s = encode_tpe(np.array([0.5]), EncodingSpec(1, squash=False))
        np.testing.assert_allclose(s.amplitudes, [np.sqrt(0.5)] * 2, atol=1e-15)

    def test_kronecker_oracle(self):
        v = np.random.default_rng(0).uniform(0, 1, size=3)
        s = encode_tpe(v, EncodingSpec(3, squash=False))
        vecs = [np.array([np.cos(np.pi * t / 2), np.sin(np.pi * t / 2)]) for t in v]
        np.testing.assert_allclose(s.amplitudes, np.kron(np.kron(vecs[0], vecs[1]), vecs[2]), atol=1e-15)
        assert s.norm() == pytest.approx(1.0, abs=1e-14)

    def test_squash_applies_sigmoid(self):
        x = np.array([-1.0, 2.0])
        a = encode_tpe(x, EncodingSpec(2, squash=True))
        b = encode_tpe(1 / (1 + np.exp(-x)), EncodingSpec(2, squash=False))
        np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-15)

    def test_domain_error(self):
        with pytest.raises(ValueError, match="unsquashed"):
            encode_tpe(np.array([1.2]), EncodingSpec(1, squash=False))

    def test_length_checked(self):
        with pytest.raises(CircuitError):
            encode_tpe(np.zeros(2), EncodingSpec(3))


class TestGates:
    def test_ry_pi_flips(self):
        s = apply_rotation(StateVector.zero(1), "Y", 0, np.pi)
        np.testing.assert_allclose(s.amplitudes, [0, 1], atol=1e-15)

    def test_rz_phase_only(self):
        theta = 0.7
        s = apply_rotation(StateVector.zero(1), "Z", 0, theta)
        assert s.amplitudes[0] == pytest.approx(np.exp(-0.5j * theta))
        assert measure_z(s)[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("axis", "XYZ")
    def test_rotation_dense_oracle(self, axis):
        rng = np.random.default_rng(1)
        for n in (1, 2, 3, 4):
            s = random_state(n, rng)
            wire = int(rng.integers(n))
            theta = float(rng.uniform(-np.pi, np.pi))
            out = apply_rotation(s, axis, wire, theta)
            ref = embed(dense_rot(axis, theta), wire, n) @ s.amplitudes
            np.testing.assert_allclose(out.amplitudes, ref, atol=1e-14)

    def test_wire_range(self):
        with pytest.raises(CircuitError):
            apply_rotation(StateVector.zero(2), "X", 2, 0.1)

    def test_cnot_basis(self):
        s = StateVector(2, np.array([0, 0, 1, 0]))  # |10>
        np.testing.assert_array_equal(apply_cnot(s, 0, 1).amplitudes, [0, 0, 0, 1])

    def test_cnot_involution_bit_exact(self):
        s = random_state(3, np.random.default_rng(2))
        back = apply_cnot(apply_cnot(s, 2, 0), 2, 0)
        assert np.array_equal(back.amplitudes, s.amplitudes)

    def test_cnot_dense_oracle(self):
        s = random_state(3, np.random.default_rng(3))
        for c, t in itertools.permutations(range(3), 2):
            np.testing.assert_allclose(apply_cnot(s, c, t).amplitudes, dense_cnot(c, t, 3) @ s.amplitudes, atol=1e-15)

    def test_cnot_bad_wires(self):
        with pytest.raises(CircuitError):
            apply_cnot(StateVector.zero(2), 1, 1)
        with pytest.raises(CircuitError):
            apply_cnot(StateVector.zero(2), 0, 5)


class TestCircuit:
    def test_identity_on_zero_state(self):
        out = pqc_forward(StateVector.zero(3), PQCParams(np.zeros((1, 3, 3))))
        np.testing.assert_array_equal(out.amplitudes, StateVector.zero(3).amplitudes)

    def test_depth_composes(self):
        rng = np.random.default_rng(4)
        p = PQCParams.random(2, 3, rng)
        s = random_state(3, rng)
        once = pqc_forward(s, p)
        twice = pqc_forward(pqc_forward(s, PQCParams(p.angles[:1])), PQCParams(p.angles[1:]))
        np.testing.assert_allclose(once.amplitudes, twice.amplitudes, atol=1e-14)

    @pytest.mark.parametrize("ring", [False, True])
    def test_dense_oracle(self, ring):
        rng = np.random.default_rng(5)
        p = PQCParams(rng.uniform(-np.pi, np.pi, size=(2, 3, 3)))
        s = random_state(3, rng)
        out = pqc_forward(s, p, ring=ring)
        np.testing.assert_allclose(out.amplitudes, dense_circuit(p.angles, ring) @ s.amplitudes, atol=1e-13)

    def test_qubit_mismatch(self):
        with pytest.raises(CircuitError):
            pqc_forward(StateVector.zero(2), PQCParams(np.zeros((1, 3, 3))))

    def test_angle_extents(self):
        with pytest.raises(CircuitError):
            PQCParams(np.zeros((2, 3)))

    def test_random_init_range(self):
        p = PQCParams.random(3, 4, np.random.default_rng(0))
        assert p.angles.shape == (3, 4, 3)
        assert np.all(np.abs(p.angles) < np.pi / 4)

    def test_depolarizing_hook_keeps_norm(self):
        rng = np.random.default_rng(6)
        p = PQCParams.random(2, 3, rng)
        out = pqc_forward(random_state(3, rng), p, depolarizing=0.3, rng=rng)
        assert out.norm() == pytest.approx(1.0, abs=1e-12)


class TestMeasure:
    def test_zero_state(self):
        np.testing.assert_array_equal(measure_z(StateVector.zero(4)), np.ones(4))

    def test_uniform_superposition(self):
        s = StateVector(3, np.full(8, 8**-0.5))
        np.testing.assert_allclose(measure_z(s), 0.0, atol=1e-15)

    def test_enumeration_oracle(self):
        s = random_state(4, np.random.default_rng(7))
        probs = np.abs(s.amplitudes) ** 2
        expected = [sum(probs[b] * (1 - 2 * ((b >> (3 - j)) & 1)) for b in range(16)) for j in range(4)]
        np.testing.assert_allclose(measure_z(s), expected, atol=1e-14)


class TestGradients:
    def test_zero_upstream(self):
        rng = np.random.default_rng(8)
        p = PQCParams.random(2, 3, rng)
        ga, gx = vqc_grad_adjoint(rng.normal(size=3), EncodingSpec(3), p, np.zeros(3))
        assert not np.any(ga) and not np.any(gx)
        assert not np.any(vqc_grad_param_shift(rng.normal(size=3), EncodingSpec(3), p, np.zeros(3)))

    @pytest.mark.parametrize("engine", ["adjoint", "shift"])
    def test_single_qubit_closed_form(self, engine):
        beta = 0.83
        p = PQCParams(np.array([[[0.0, beta, 0.0]]]))
        spec = EncodingSpec(1, squash=False)
        assert measure_z(pqc_forward(encode_tpe(np.zeros(1), spec), p))[0] == pytest.approx(np.cos(beta))
        if engine == "adjoint":
            g = vqc_grad_adjoint(np.zeros(1), spec, p, np.ones(1))[0]
        else:
            g = vqc_grad_param_shift(np.zeros(1), spec, p, np.ones(1))
        assert g[0, 0, 1] == pytest.approx(-np.sin(beta), abs=1e-14)

    def test_adjoint_finite_differences(self):
        rng = np.random.default_rng(9)
        spec = EncodingSpec(4)
        p = PQCParams.random(2, 4, rng)
        x, up = rng.normal(size=4), rng.normal(size=4)
        ga, gx = vqc_grad_adjoint(x, spec, p, up)
        h = 1e-6

        def f(angles, feats):
            return float(up @ dense_pipeline(feats, angles))

        for idx in np.ndindex(p.angles.shape):
            ap, am = p.angles.copy(), p.angles.copy()
            ap[idx] += h
            am[idx] -= h
            fd = (f(ap, x) - f(am, x)) / (2 * h)
            assert abs(fd - ga[idx]) <= 1e-6 * max(1.0, abs(fd))
        for i in range(4):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd = (f(p.angles, xp) - f(p.angles, xm)) / (2 * h)
            assert abs(fd - gx[i]) <= 1e-6 * max(1.0, abs(fd))

    def test_shift_matches_adjoint_3q(self):
        rng = np.random.default_rng(10)
        p = PQCParams(rng.uniform(-np.pi, np.pi, size=(2, 3, 3)))
        x, up = rng.normal(size=3), rng.normal(size=3)
        ga, _ = vqc_grad_adjoint(x, EncodingSpec(3), p, up)
        gs = vqc_grad_param_shift(x, EncodingSpec(3), p, up)
        assert np.max(np.abs(ga - gs)) <= 1e-9

    def test_batch_adjoint_sums_samples(self):
        rng = np.random.default_rng(11)
        p = PQCParams.random(2, 3, rng)
        xs, ups = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        ga, gx = qsim.adjoint_batch(xs, EncodingSpec(3), p, ups)
        singles = [vqc_grad_adjoint(xs[b], EncodingSpec(3), p, ups[b]) for b in range(4)]
        np.testing.assert_allclose(ga, sum(s[0] for s in singles), atol=1e-13)
        np.testing.assert_allclose(gx, np.array([s[1] for s in singles]), atol=1e-13)

    def test_upstream_shape_checked(self):
        p = PQCParams.random(1, 3, np.random.default_rng(0))
        with pytest.raises(CircuitError):
            vqc_grad_param_shift(np.zeros(3), EncodingSpec(3), p, np.zeros(2))


@st.composite
def circuits(draw, max_qubits=6, max_depth=3):
    n = draw(st.integers(1, max_qubits))
    depth = draw(st.integers(1, max_depth))
    seed = draw(st.integers(0, 2**32 - 1))
    ring = draw(st.booleans())
    return n, depth, seed, ring


@settings(max_examples=30, deadline=None)
@given(circuits())
def test_norm_preserved(case):
    n, depth, seed, ring = case
    rng = np.random.default_rng(seed)
    p = PQCParams(rng.uniform(-np.pi, np.pi, size=(depth, n, 3)))
    out = pqc_forward(random_state(n, rng), p, ring=ring)
    assert abs(out.norm() - 1.0) <= 1e-12
    e = measure_z(out)
    assert np.all(np.abs(e) <= 1.0 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(circuits())
def test_inner_products_preserved(case):
    n, depth, seed, ring = case
    rng = np.random.default_rng(seed)
    p = PQCParams(rng.uniform(-np.pi, np.pi, size=(depth, n, 3)))
    a, b = random_state(n, rng), random_state(n, rng)
    before = np.vdot(a.amplitudes, b.amplitudes)
    after = np.vdot(pqc_forward(a, p, ring).amplitudes, pqc_forward(b, p, ring).amplitudes)
    assert abs(after - before) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(circuits(max_qubits=6, max_depth=3))
def test_shift_agrees_with_adjoint(case):
    n, depth, seed, ring = case
    rng = np.random.default_rng(seed)
    p = PQCParams(rng.uniform(-np.pi, np.pi, size=(depth, n, 3)))
    x, up = rng.normal(size=n), rng.normal(size=n)
    ga, _ = vqc_grad_adjoint(x, EncodingSpec(n), p, up, ring)
    gs = vqc_grad_param_shift(x, EncodingSpec(n), p, up, ring)
    assert np.max(np.abs(ga - gs)) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(circuits(max_qubits=4, max_depth=3))
def test_pipeline_matches_dense_algebra(case):
    n, depth, seed, ring = case
    rng = np.random.default_rng(seed)
    p = PQCParams(rng.uniform(-np.pi, np.pi, size=(depth, n, 3)))
    x = rng.normal(size=n)
    got = qsim.vqc_expectations_batch(x, EncodingSpec(n), p, ring)[0]
    np.testing.assert_allclose(got, dense_pipeline(x, p.angles, ring=ring), rtol=0, atol=1e-12)
