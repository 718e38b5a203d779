"""Ideal statevector simulation of parameterized quantum circuits.

States are little-endian: wire 0 is the least significant bit of the
amplitude index.  All rotation-style gates use the half-angle convention
exp(-i * angle * G / 2) for their generator G, which is what the shift-rule
gradients in :mod:`mcvqc.gradients` assume.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 24  # statevector memory cap: 2**24 complex128 ~ 256 MB
NORM_ATOL = 1e-10

SINGLE_QUBIT_KINDS = ("RX", "RY", "RZ", "U3")
TWO_QUBIT_KINDS = ("CRX", "IsingXX", "IsingYY", "IsingZZ", "IsingZX")
GATE_KINDS = SINGLE_QUBIT_KINDS + TWO_QUBIT_KINDS

# IsingZX is internal plumbing (CRX shows up as RX/IsingZX in gradient
# evaluation); it is a valid gate kind everywhere but builders never emit it.

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)

PAULI = {"X": _X, "Y": _Y, "Z": _Z, "I": _I2}


class CapacityError(ValueError):
    """Raised when a requested register exceeds the simulator's size cap."""


def num_gate_params(kind: str) -> int:
    return 3 if kind == "U3" else 1


def gate_arity(kind: str) -> int:
    return 1 if kind in SINGLE_QUBIT_KINDS else 2


def gate_matrix(kind: str, angles: np.ndarray | list[float]) -> np.ndarray:
    """Unitary matrix of a gate, in the (first wire, second wire) local basis.

    For two-qubit kinds the first listed wire is the most significant bit of
    the 4-dimensional local basis; for CRX the first wire is the control.
    """
    a = np.asarray(angles, dtype=float)
    if kind == "RX":
        c, s = np.cos(a[0] / 2), np.sin(a[0] / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        c, s = np.cos(a[0] / 2), np.sin(a[0] / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[np.exp(-1j * a[0] / 2), 0], [0, np.exp(1j * a[0] / 2)]])
    if kind == "U3":
        t, p, l = a
        c, s = np.cos(t / 2), np.sin(t / 2)
        return np.array(
            [[c, -np.exp(1j * l) * s], [np.exp(1j * p) * s, np.exp(1j * (p + l)) * c]]
        )
    if kind == "CRX":
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = gate_matrix("RX", a)
        return m
    if kind == "IsingXX":
        c, s = np.cos(a[0] / 2), np.sin(a[0] / 2)
        return c * np.eye(4) - 1j * s * np.kron(_X, _X)
    if kind == "IsingYY":
        c, s = np.cos(a[0] / 2), np.sin(a[0] / 2)
        return c * np.eye(4) - 1j * s * np.kron(_Y, _Y)
    if kind == "IsingZZ":
        e_m, e_p = np.exp(-1j * a[0] / 2), np.exp(1j * a[0] / 2)
        return np.diag([e_m, e_p, e_p, e_m])
    if kind == "IsingZX":
        c, s = np.cos(a[0] / 2), np.sin(a[0] / 2)
        return c * np.eye(4) - 1j * s * np.kron(_Z, _X)
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class GateOp:
    """One gate application: kind, target wires, and parameter-slot bindings.

    ``param_slots`` index into the parameter vector the op belongs to
    (encoding angles or trainable angles).  ``param_scales`` multiply the
    fetched values before they enter the gate; folding uses -1 scales to
    realize inverses without new parameter storage.
    """

    kind: str
    wires: tuple[int, ...]
    param_slots: tuple[int, ...]
    param_scales: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        object.__setattr__(self, "param_slots", tuple(int(s) for s in self.param_slots))
        if len(self.wires) != gate_arity(self.kind):
            raise ValueError(f"{self.kind} takes {gate_arity(self.kind)} wires, got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"wires must be distinct, got {self.wires}")
        if len(self.param_slots) != num_gate_params(self.kind):
            raise ValueError(
                f"{self.kind} takes {num_gate_params(self.kind)} parameter slots, "
                f"got {len(self.param_slots)}"
            )
        if not self.param_scales:
            object.__setattr__(self, "param_scales", (1.0,) * len(self.param_slots))
        elif len(self.param_scales) != len(self.param_slots):
            raise ValueError("param_scales must match param_slots in length")

    def angles(self, params: np.ndarray) -> np.ndarray:
        """Fetch this gate's angles from a parameter vector."""
        params = np.asarray(params, dtype=float)
        if self.param_slots and max(self.param_slots) >= params.shape[-1]:
            raise ValueError(
                f"gate needs slot {max(self.param_slots)} but only "
                f"{params.shape[-1]} angles were supplied"
            )
        return params[..., list(self.param_slots)] * np.asarray(self.param_scales)


@dataclass
class StateVector:
    """Pure state over ``num_qubits`` wires, little-endian amplitude order."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise CapacityError(f"num_qubits must be in [1, {MAX_QUBITS}], got {self.num_qubits}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.num_qubits,):
            raise ValueError(
                f"expected {2**self.num_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"state norm {norm} deviates from 1 by more than {NORM_ATOL}")


@dataclass(frozen=True)
class CircuitSpec:
    """Gate program: data-encoding ops, then trainable ops, then Z readout.

    ``encoding_ops`` slots index an encoding-angle vector, ``trainable_ops``
    slots index a trainable parameter vector.  ``observables`` lists wires
    read out as single-qubit Pauli-Z expectations (the first one is the
    chip's scalar output).
    """

    num_qubits: int
    encoding_ops: tuple[GateOp, ...] = ()
    trainable_ops: tuple[GateOp, ...] = ()
    observables: tuple[int, ...] = (0,)

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise CapacityError(f"num_qubits must be in [1, {MAX_QUBITS}], got {self.num_qubits}")
        object.__setattr__(self, "encoding_ops", tuple(self.encoding_ops))
        object.__setattr__(self, "trainable_ops", tuple(self.trainable_ops))
        object.__setattr__(self, "observables", tuple(int(w) for w in self.observables))
        for op in self.encoding_ops + self.trainable_ops:
            for w in op.wires:
                if not 0 <= w < self.num_qubits:
                    raise ValueError(f"gate wire {w} outside circuit of width {self.num_qubits}")
        if not self.observables:
            raise ValueError("circuit needs at least one observable")
        for w in self.observables:
            if not 0 <= w < self.num_qubits:
                raise ValueError(f"observable wire {w} outside circuit of width {self.num_qubits}")

    @property
    def num_encoding_params(self) -> int:
        return 1 + max((max(op.param_slots) for op in self.encoding_ops), default=-1)

    @property
    def num_trainable_params(self) -> int:
        return 1 + max((max(op.param_slots) for op in self.trainable_ops), default=-1)


def _wire_axes(num_qubits: int, wires: tuple[int, ...], offset: int = 0) -> list[int]:
    # little-endian: wire w lives on tensor axis (num_qubits - 1 - w)
    return [offset + num_qubits - 1 - w for w in wires]


def apply_matrix(amps: np.ndarray, mat: np.ndarray, wires: tuple[int, ...], num_qubits: int) -> np.ndarray:
    """Apply a 2^m x 2^m matrix to the given wires of an amplitude array.

    ``amps`` may carry arbitrary leading batch axes; the last axis must have
    length 2^num_qubits.  Returns a new array.
    """
    m = len(wires)
    batch = amps.shape[:-1]
    t = amps.reshape(batch + (2,) * num_qubits)
    axes = _wire_axes(num_qubits, wires, offset=len(batch))
    mt = mat.reshape((2,) * (2 * m))
    t = np.tensordot(mt, t, axes=(list(range(m, 2 * m)), axes))
    t = np.moveaxis(t, list(range(m)), axes)
    return np.ascontiguousarray(t).reshape(batch + (2**num_qubits,))


def init_zero_state(num_qubits: int) -> StateVector:
    """All-zeros computational basis state |0...0>."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise CapacityError(f"qubit count must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def apply_gate(state: StateVector, gate: GateOp, angles: np.ndarray | list[float]) -> StateVector:
    """Evolve ``state`` by one gate; ``angles`` is the vector its slots index."""
    for w in gate.wires:
        if not 0 <= w < state.num_qubits:
            raise ValueError(f"gate wire {w} outside register of width {state.num_qubits}")
    mat = gate_matrix(gate.kind, gate.angles(np.asarray(angles, dtype=float)))
    amps = apply_matrix(state.amplitudes, mat, gate.wires, state.num_qubits)
    return StateVector(state.num_qubits, amps)


def encode_ry(state: StateVector, features: np.ndarray | list[float]) -> StateVector:
    """Apply RY(features[j]) to wire j; one feature per wire."""
    features = np.asarray(features, dtype=float)
    if features.shape != (state.num_qubits,):
        raise ValueError(
            f"need {state.num_qubits} features for {state.num_qubits} wires, "
            f"got shape {features.shape}"
        )
    amps = state.amplitudes
    for j, angle in enumerate(features):
        amps = apply_matrix(amps, gate_matrix("RY", [angle]), (j,), state.num_qubits)
    return StateVector(state.num_qubits, amps)


def run_circuit(
    circuit: CircuitSpec,
    enc_angles: np.ndarray | list[float],
    theta: np.ndarray | list[float],
) -> StateVector:
    """Run |0...0> -> encoding ops -> trainable ops, in declared order."""
    enc_angles = np.asarray(enc_angles, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if enc_angles.shape != (circuit.num_encoding_params,):
        raise ValueError(
            f"circuit uses {circuit.num_encoding_params} encoding angles, "
            f"got shape {enc_angles.shape}"
        )
    if theta.shape != (circuit.num_trainable_params,):
        raise ValueError(
            f"circuit uses {circuit.num_trainable_params} trainable angles, "
            f"got shape {theta.shape}"
        )
    amps = init_zero_state(circuit.num_qubits).amplitudes
    for op in circuit.encoding_ops:
        amps = apply_matrix(amps, gate_matrix(op.kind, op.angles(enc_angles)), op.wires, circuit.num_qubits)
    for op in circuit.trainable_ops:
        amps = apply_matrix(amps, gate_matrix(op.kind, op.angles(theta)), op.wires, circuit.num_qubits)
    return StateVector(circuit.num_qubits, amps)


def expectation_z_amplitudes(amps: np.ndarray, wire: int, num_qubits: int) -> np.ndarray:
    """<Z_wire> for an amplitude array with arbitrary leading batch axes."""
    batch = amps.shape[:-1]
    probs = (amps.real**2 + amps.imag**2).reshape(batch + (2,) * num_qubits)
    axis = len(batch) + num_qubits - 1 - wire
    keep = probs.sum(axis=tuple(a for a in range(len(batch), probs.ndim) if a != axis))
    return keep[..., 0] - keep[..., 1]


def expectation_z(state: StateVector, wire: int) -> float:
    """Exact (infinite-shot) single-qubit Pauli-Z expectation."""
    if not 0 <= wire < state.num_qubits:
        raise ValueError(f"wire {wire} outside register of width {state.num_qubits}")
    return float(expectation_z_amplitudes(state.amplitudes, wire, state.num_qubits))


def rotation_matrices_batch(kind: str, angles: np.ndarray) -> np.ndarray:
    """[B, 2, 2] rotation matrices for a batch of angles (RX/RY/RZ only)."""
    angles = np.asarray(angles, dtype=float)
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    out = np.empty(angles.shape + (2, 2), dtype=complex)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
        out[..., 1, 1] = c
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
    elif kind == "RZ":
        out[..., 0, 0] = c - 1j * s
        out[..., 0, 1] = 0
        out[..., 1, 0] = 0
        out[..., 1, 1] = c + 1j * s
    else:
        raise ValueError(f"batched angles only supported for RX/RY/RZ, got {kind!r}")
    return out


def apply_1q_batch(amps: np.ndarray, mats: np.ndarray, wire: int, num_qubits: int) -> np.ndarray:
    """Apply per-sample 2x2 matrices ([B,2,2]) to one wire of a [B, 2^n] batch."""
    B = amps.shape[0]
    left = 2 ** (num_qubits - 1 - wire)
    right = 2**wire
    t = amps.reshape(B, left, 2, right)
    out = np.einsum("bij,bljr->blir", mats, t)
    return out.reshape(B, 2**num_qubits)


def encode_angles_batch(circuit: CircuitSpec, angles_batch: np.ndarray) -> np.ndarray:
    """Run just the encoding layer on a [B, n_enc] batch of angle vectors.

    Supports the builders' encoding structure: single-qubit rotation ops.
    Returns [B, 2^n] amplitudes.
    """
    angles_batch = np.atleast_2d(np.asarray(angles_batch, dtype=float))
    if angles_batch.shape[1] != circuit.num_encoding_params:
        raise ValueError(
            f"circuit uses {circuit.num_encoding_params} encoding angles per sample, "
            f"got {angles_batch.shape[1]}"
        )
    B = angles_batch.shape[0]
    amps = np.zeros((B, 2**circuit.num_qubits), dtype=complex)
    amps[:, 0] = 1.0
    for op in circuit.encoding_ops:
        if op.kind not in ("RX", "RY", "RZ"):
            raise ValueError(
                f"batched encoding supports single-qubit rotations, got {op.kind}"
            )
        ang = angles_batch[:, op.param_slots[0]] * op.param_scales[0]
        amps = apply_1q_batch(amps, rotation_matrices_batch(op.kind, ang), op.wires[0], circuit.num_qubits)
    return amps
