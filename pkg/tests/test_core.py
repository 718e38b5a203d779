"""Core statevector simulator tests, anchored on explicit dense oracles."""
import numpy as np
import pytest

from mcvqc.core import (
    CapacityError,
    CircuitSpec,
    GateOp,
    StateVector,
    apply_gate,
    encode_ry,
    expectation_z,
    gate_matrix,
    init_zero_state,
    run_circuit,
)

from oracles import circuit_unitary, embed_unitary, random_angles, random_circuit


class TestInitZeroState:
    def test_one_qubit(self):
        assert np.array_equal(init_zero_state(1).amplitudes, [1, 0])

    def test_two_qubits(self):
        assert np.array_equal(init_zero_state(2).amplitudes, [1, 0, 0, 0])

    def test_capacity_cap(self):
        with pytest.raises(CapacityError):
            init_zero_state(25)
        with pytest.raises(CapacityError):
            init_zero_state(0)


class TestApplyGate:
    def test_ry_zero_is_identity(self):
        state = init_zero_state(1)
        out = apply_gate(state, GateOp("RY", (0,), (0,)), [0.0])
        np.testing.assert_allclose(out.amplitudes, state.amplitudes, atol=1e-12)

    def test_ry_pi_flips(self):
        out = apply_gate(init_zero_state(1), GateOp("RY", (0,), (0,)), [np.pi])
        assert expectation_z(out, 0) == pytest.approx(-1.0, abs=1e-12)

    def test_crx_inactive_control(self):
        # control wire 1 stays |0>, so the target must be untouched
        state = init_zero_state(2)
        state = apply_gate(state, GateOp("RY", (0,), (0,)), [0.7])
        out = apply_gate(state, GateOp("CRX", (1, 0), (0,)), [1.3])
        np.testing.assert_allclose(out.amplitudes, state.amplitudes, atol=1e-12)

    def test_isingzz_diagonal_phase_only(self):
        # oracle: explicit 4x4 diag(e^-ia/2, e^ia/2, e^ia/2, e^-ia/2)
        for phi in (0.3, 1.1, np.pi):
            oracle = np.diag(
                [
                    np.exp(-1j * phi / 2),
                    np.exp(1j * phi / 2),
                    np.exp(1j * phi / 2),
                    np.exp(-1j * phi / 2),
                ]
            )
            np.testing.assert_allclose(gate_matrix("IsingZZ", [phi]), oracle, atol=1e-12)
            out = apply_gate(init_zero_state(2), GateOp("IsingZZ", (0, 1), (0,)), [phi])
            # |00> only picks up a phase: <Z (x) Z> stays 1
            zz = expectation_z(out, 0) * expectation_z(out, 1)
            assert zz == pytest.approx(1.0, abs=1e-12)

    def test_wire_out_of_range(self):
        with pytest.raises(ValueError, match="wire"):
            apply_gate(init_zero_state(1), GateOp("RY", (1,), (0,)), [0.1])

    def test_missing_angle(self):
        with pytest.raises(ValueError, match="slot"):
            apply_gate(init_zero_state(1), GateOp("RY", (0,), (3,)), [0.1])

    def test_gate_op_validation(self):
        with pytest.raises(ValueError):
            GateOp("CRX", (0, 0), (0,))  # duplicate wires
        with pytest.raises(ValueError):
            GateOp("U3", (0,), (0,))  # U3 needs 3 slots
        with pytest.raises(ValueError):
            GateOp("NOPE", (0,), (0,))

    def test_all_gates_unitary_against_embedding_oracle(self):
        rng = np.random.default_rng(7)
        for kind in ("RX", "RY", "RZ", "U3", "CRX", "IsingXX", "IsingYY", "IsingZZ"):
            nslots = 3 if kind == "U3" else 1
            angles = rng.uniform(0, 2 * np.pi, size=nslots)
            wires = (0,) if kind in ("RX", "RY", "RZ", "U3") else (2, 0)
            op = GateOp(kind, wires, tuple(range(nslots)))
            state = StateVector(3, _random_state(3, rng))
            out = apply_gate(state, op, angles)
            full = embed_unitary(gate_matrix(kind, angles), wires, 3)
            np.testing.assert_allclose(out.amplitudes, full @ state.amplitudes, atol=1e-10)
            assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-10


def _random_state(n, rng):
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return amps / np.linalg.norm(amps)


class TestEncodeRy:
    def test_zero_features_identity(self):
        state = init_zero_state(3)
        out = encode_ry(state, [0.0, 0.0, 0.0])
        np.testing.assert_allclose(out.amplitudes, state.amplitudes, atol=1e-12)

    def test_pi_feature_flips(self):
        out = encode_ry(init_zero_state(1), [np.pi])
        assert expectation_z(out, 0) == pytest.approx(-1.0, abs=1e-12)

    def test_half_pi_features(self):
        out = encode_ry(init_zero_state(2), [np.pi / 2, np.pi / 2])
        assert expectation_z(out, 0) == pytest.approx(0.0, abs=1e-12)
        assert expectation_z(out, 1) == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="features"):
            encode_ry(init_zero_state(2), [0.1])


class TestRunCircuit:
    def test_empty_trainable_equals_encode_ry(self):
        circ = CircuitSpec(2, tuple(GateOp("RY", (w,), (w,)) for w in range(2)), (), (0,))
        enc = [0.4, 1.2]
        out = run_circuit(circ, enc, [])
        ref = encode_ry(init_zero_state(2), enc)
        np.testing.assert_allclose(out.amplitudes, ref.amplitudes, atol=1e-12)

    def test_all_zero_angles_gives_zero_state(self):
        rng = np.random.default_rng(3)
        circ = random_circuit(3, 2, rng, kinds=["RX", "RY", "CRX"])
        out = run_circuit(circ, np.zeros(circ.num_encoding_params), np.zeros(circ.num_trainable_params))
        expected = np.zeros(8)
        expected[0] = 1.0
        np.testing.assert_allclose(out.amplitudes, expected, atol=1e-12)

    def test_matches_dense_matrix_chain_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            circ = random_circuit(3, 2, rng)
            enc, theta = random_angles(circ, rng)
            out = run_circuit(circ, enc, theta)
            full = circuit_unitary(circ, enc, theta)
            init = np.zeros(8, dtype=complex)
            init[0] = 1.0
            np.testing.assert_allclose(out.amplitudes, full @ init, atol=1e-10)

    def test_slot_count_mismatch(self):
        circ = CircuitSpec(1, (GateOp("RY", (0,), (0,)),), (GateOp("RX", (0,), (0,)),), (0,))
        with pytest.raises(ValueError):
            run_circuit(circ, [0.1, 0.2], [0.3])
        with pytest.raises(ValueError):
            run_circuit(circ, [0.1], [])


class TestExpectationZ:
    def test_zero_state(self):
        assert expectation_z(init_zero_state(1), 0) == pytest.approx(1.0)

    def test_one_state(self):
        out = apply_gate(init_zero_state(1), GateOp("RX", (0,), (0,)), [np.pi])
        assert expectation_z(out, 0) == pytest.approx(-1.0, abs=1e-12)

    def test_ry_closed_form(self):
        # oracle: <Z> after RY(theta)|0> is cos(theta)
        for theta in (0.0, np.pi / 3, np.pi / 2):
            out = apply_gate(init_zero_state(1), GateOp("RY", (0,), (0,)), [theta])
            assert expectation_z(out, 0) == pytest.approx(np.cos(theta), abs=1e-12)

    def test_invalid_wire(self):
        with pytest.raises(ValueError):
            expectation_z(init_zero_state(1), 1)


class TestInvariants:
    def test_norm_preserved_on_random_circuits(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            circ = random_circuit(4, 3, rng)
            enc, theta = random_angles(circ, rng)
            out = run_circuit(circ, enc, theta)
            assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-10

    def test_unitarity_oracle_up_to_four_qubits(self):
        rng = np.random.default_rng(37)
        for n in (2, 3, 4):
            circ = random_circuit(n, 2, rng)
            enc, theta = random_angles(circ, rng)
            out = run_circuit(circ, enc, theta)
            init = np.zeros(2**n, dtype=complex)
            init[0] = 1.0
            np.testing.assert_allclose(
                out.amplitudes, circuit_unitary(circ, enc, theta) @ init, atol=1e-10
            )

    def test_rotation_inverses_restore_state(self):
        rng = np.random.default_rng(41)
        state = StateVector(3, _random_state(3, rng))
        for kind in ("RX", "RY", "RZ", "IsingXX", "IsingYY", "IsingZZ", "CRX"):
            wires = (0,) if kind in ("RX", "RY", "RZ") else (1, 2)
            phi = rng.uniform(0, 2 * np.pi)
            fwd = apply_gate(state, GateOp(kind, wires, (0,)), [phi])
            back = apply_gate(fwd, GateOp(kind, wires, (0,)), [-phi])
            np.testing.assert_allclose(back.amplitudes, state.amplitudes, atol=1e-10)

    def test_expectation_bounds(self):
        rng = np.random.default_rng(43)
        for _ in range(20):
            circ = random_circuit(3, 2, rng)
            enc, theta = random_angles(circ, rng)
            out = run_circuit(circ, enc, theta)
            for w in range(3):
                assert -1 - 1e-12 <= expectation_z(out, w) <= 1 + 1e-12

    def test_statevector_validation(self):
        with pytest.raises(ValueError):
            StateVector(2, np.array([1.0, 0.0]))  # wrong length
        with pytest.raises(ValueError):
            StateVector(1, np.array([1.0, 1.0]))  # unnormalized
