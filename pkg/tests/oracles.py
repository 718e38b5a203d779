"""Independent brute-force oracles used to cross-check the library.

Everything here deliberately avoids the library's tensor-contraction code
paths: embeddings are built by explicit basis-index loops and partial traces
by explicit sums, so agreement with the library is a genuine dual-route
check.
"""
from __future__ import annotations

import numpy as np


def embed_unitary(gate_mat: np.ndarray, wires: tuple[int, ...], num_qubits: int) -> np.ndarray:
    """Embed a 2^m x 2^m gate into the full 2^n space by basis-index loops.

    Little-endian convention: wire 0 is the least significant bit of the
    global index.  The first listed wire is the most significant bit of the
    gate's local basis.
    """
    m = len(wires)
    dim = 2**num_qubits
    full = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        # local input index: first wire -> most significant local bit
        loc_in = 0
        for w in wires:
            loc_in = (loc_in << 1) | ((col >> w) & 1)
        for loc_out in range(2**m):
            amp = gate_mat[loc_out, loc_in]
            if amp == 0:
                continue
            row = col
            for pos, w in enumerate(wires):
                bit = (loc_out >> (m - 1 - pos)) & 1
                row = (row & ~(1 << w)) | (bit << w)
            full[row, col] += amp
    return full


def circuit_unitary(circuit, enc_angles, theta) -> np.ndarray:
    """Dense matrix-chain product of a circuit's per-gate unitaries."""
    from mcvqc.core import gate_matrix

    enc_angles = np.asarray(enc_angles, dtype=float)
    theta = np.asarray(theta, dtype=float)
    dim = 2**circuit.num_qubits
    full = np.eye(dim, dtype=complex)
    for op in circuit.encoding_ops:
        g = embed_unitary(gate_matrix(op.kind, op.angles(enc_angles)), op.wires, circuit.num_qubits)
        full = g @ full
    for op in circuit.trainable_ops:
        g = embed_unitary(gate_matrix(op.kind, op.angles(theta)), op.wires, circuit.num_qubits)
        full = g @ full
    return full


def partial_trace_brute(amps: np.ndarray, keep_wires: tuple[int, ...], num_qubits: int) -> np.ndarray:
    """Reduced density matrix over ``keep_wires`` via explicit index sums."""
    keep = list(keep_wires)
    env = [w for w in range(num_qubits) if w not in keep]
    dim_keep = 2 ** len(keep)
    rho = np.zeros((dim_keep, dim_keep), dtype=complex)

    def global_index(kept_bits: int, env_bits: int) -> int:
        idx = 0
        for pos, w in enumerate(keep):
            idx |= ((kept_bits >> (len(keep) - 1 - pos)) & 1) << w
        for pos, w in enumerate(env):
            idx |= ((env_bits >> pos) & 1) << w
        return idx

    for a in range(dim_keep):
        for b in range(dim_keep):
            acc = 0.0 + 0.0j
            for e in range(2 ** len(env)):
                acc += amps[global_index(a, e)] * np.conj(amps[global_index(b, e)])
            rho[a, b] = acc
    return rho


def ghz_state(num_qubits: int) -> np.ndarray:
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return amps


def w_state(num_qubits: int) -> np.ndarray:
    amps = np.zeros(2**num_qubits, dtype=complex)
    for w in range(num_qubits):
        amps[1 << w] = 1 / np.sqrt(num_qubits)
    return amps


def random_product_state(num_qubits: int, rng: np.random.Generator) -> np.ndarray:
    amps = np.array([1.0 + 0.0j])
    for _ in range(num_qubits):
        q = rng.normal(size=2) + 1j * rng.normal(size=2)
        q /= np.linalg.norm(q)
        amps = np.kron(q, amps)  # new qubit becomes the most significant bit
    return amps


def random_state(num_qubits: int, rng: np.random.Generator) -> np.ndarray:
    amps = rng.normal(size=2**num_qubits) + 1j * rng.normal(size=2**num_qubits)
    return amps / np.linalg.norm(amps)


def random_circuit(num_qubits: int, depth: int, rng: np.random.Generator, kinds=None):
    """Random CircuitSpec over the library gate set, with RY encoding."""
    from mcvqc.core import CircuitSpec, GateOp

    if kinds is None:
        kinds = ["RX", "RY", "RZ", "U3", "CRX", "IsingXX", "IsingYY", "IsingZZ"]
    enc_ops = [GateOp("RY", (w,), (w,)) for w in range(num_qubits)]
    ops = []
    slot = 0
    for _ in range(depth):
        for w in range(num_qubits):
            kind = kinds[rng.integers(len(kinds))]
            if kind in ("RX", "RY", "RZ", "U3"):
                wires = (w,)
            else:
                other = (w + 1 + rng.integers(num_qubits - 1)) % num_qubits
                wires = (w, int(other))
            nslots = 3 if kind == "U3" else 1
            ops.append(GateOp(kind, wires, tuple(range(slot, slot + nslots))))
            slot += nslots
    return CircuitSpec(num_qubits, tuple(enc_ops), tuple(ops), (0,))


def random_angles(circuit, rng: np.random.Generator):
    enc = rng.uniform(0, 2 * np.pi, size=circuit.num_encoding_params)
    theta = rng.uniform(0, 2 * np.pi, size=circuit.num_trainable_params)
    return enc, theta


def combine_chips(chips, observable_offsets=True):
    """Monolithic n-qubit circuit for k disjoint chips (tensor-product oracle).

    Chip i's wires are shifted by i*l and its slots are appended, so running
    the combined circuit simulates all chips jointly with no shared gates.
    """
    from mcvqc.core import CircuitSpec, GateOp

    total = sum(c.num_qubits for c in chips)
    enc_ops, th_ops, obs = [], [], []
    wire_off = enc_off = th_off = 0
    for chip in chips:
        for op in chip.encoding_ops:
            enc_ops.append(GateOp(op.kind, tuple(w + wire_off for w in op.wires),
                                  tuple(s + enc_off for s in op.param_slots), op.param_scales))
        for op in chip.trainable_ops:
            th_ops.append(GateOp(op.kind, tuple(w + wire_off for w in op.wires),
                                 tuple(s + th_off for s in op.param_slots), op.param_scales))
        obs.append(chip.observables[0] + wire_off)
        wire_off += chip.num_qubits
        enc_off += chip.num_encoding_params
        th_off += chip.num_trainable_params
    return CircuitSpec(total, tuple(enc_ops), tuple(th_ops), tuple(obs))
