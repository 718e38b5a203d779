"""Shift-rule gradients for quantum parameters and hybrid backpropagation.

Rotation-generated gates (RX/RY/RZ, the Ising pair rotations, and each U3
Euler angle) obey the exact two-point rule

    df/dtheta = [f(theta + pi/2) - f(theta - pi/2)] / 2.

CRX needs the standard four-point controlled-rotation extension because its
generator has eigenvalues {0, +-1}; equivalently it factors into two
commuting involutory rotations (RX on the target and a ZX pair rotation at
half angle), which is how the batched evaluator handles it.  Both routes
give the analytic derivative and are cross-checked against finite
differences in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CircuitSpec,
    GateOp,
    PAULI,
    apply_1q_batch,
    apply_matrix,
    encode_angles_batch,
    expectation_z,
    expectation_z_amplitudes,
    gate_matrix,
    rotation_matrices_batch,
    run_circuit,
)
from .ensemble import Backend, EnsembleModel, IDEAL, LinearLayer
from .noise import NoiseModel, expectation_dm, run_noisy_circuit

# four-point rule coefficients for controlled rotations
_C_PLUS = (np.sqrt(2) + 1) / (4 * np.sqrt(2))
_C_MINUS = (np.sqrt(2) - 1) / (4 * np.sqrt(2))

_GENERATORS = {
    "RX": PAULI["X"],
    "RY": PAULI["Y"],
    "RZ": PAULI["Z"],
    "IsingXX": np.kron(PAULI["X"], PAULI["X"]),
    "IsingYY": np.kron(PAULI["Y"], PAULI["Y"]),
    "IsingZZ": np.kron(PAULI["Z"], PAULI["Z"]),
    "IsingZX": np.kron(PAULI["Z"], PAULI["X"]),
}


@dataclass
class GradientVector:
    """Flat gradient aligned with a model's parameter layout."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.isfinite(self.values).all():
            raise ValueError("gradient contains non-finite entries")


def finite_diff_oracle(f, x: np.ndarray, slot: int, h: float) -> float:
    """Central finite difference (f(x+h e) - f(x-h e)) / 2h."""
    if h <= 0:
        raise ValueError(f"step h must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    up, down = x.copy(), x.copy()
    up[slot] += h
    down[slot] -= h
    return (f(up) - f(down)) / (2 * h)


def _expectation(circuit: CircuitSpec, enc, theta, wire: int, backend: str,
                 noise: NoiseModel | None) -> float:
    if backend == "ideal":
        return expectation_z(run_circuit(circuit, enc, theta), wire)
    if backend == "noisy":
        return expectation_dm(run_noisy_circuit(circuit, enc, theta, noise or NoiseModel()), wire)
    raise ValueError(f"backend must be 'ideal' or 'noisy', got {backend!r}")


def _shifted(values: np.ndarray, slot: int, delta: float) -> np.ndarray:
    out = np.asarray(values, dtype=float).copy()
    out[slot] += delta
    return out


def _shift_value(evaluate, values: np.ndarray, slot: int, four_term: bool) -> float:
    two = (evaluate(_shifted(values, slot, np.pi / 2))
           - evaluate(_shifted(values, slot, -np.pi / 2)))
    if not four_term:
        return two / 2
    wide = (evaluate(_shifted(values, slot, 3 * np.pi / 2))
            - evaluate(_shifted(values, slot, -3 * np.pi / 2)))
    return _C_PLUS * two - _C_MINUS * wide


def param_shift(circuit: CircuitSpec, enc, theta, slot: int, backend: str = "ideal",
                noise: NoiseModel | None = None, wire: int | None = None) -> float:
    """Shift-rule derivative of the designated <Z> output w.r.t. theta[slot].

    Assumes the slot feeds exactly one gate (true for every built circuit).
    """
    theta = np.asarray(theta, dtype=float)
    enc = np.asarray(enc, dtype=float)
    users = [op for op in circuit.trainable_ops if slot in op.param_slots]
    if not 0 <= slot < circuit.num_trainable_params or not users:
        raise ValueError(f"slot {slot} is not a trainable parameter of this circuit")
    if wire is None:
        wire = circuit.observables[0]
    four_term = any(op.kind == "CRX" for op in users)
    return _shift_value(lambda t: _expectation(circuit, enc, t, wire, backend, noise),
                        theta, slot, four_term)


def param_shift_encoding(circuit: CircuitSpec, enc, theta, slot: int,
                         backend: str = "ideal", noise: NoiseModel | None = None,
                         wire: int | None = None) -> float:
    """Shift-rule derivative w.r.t. an encoding angle (rotation encodings)."""
    enc = np.asarray(enc, dtype=float)
    theta = np.asarray(theta, dtype=float)
    users = [op for op in circuit.encoding_ops if slot in op.param_slots]
    if not 0 <= slot < circuit.num_encoding_params or not users:
        raise ValueError(f"slot {slot} is not an encoding parameter of this circuit")
    if wire is None:
        wire = circuit.observables[0]
    four_term = any(op.kind == "CRX" for op in users)
    return _shift_value(lambda e: _expectation(circuit, e, theta, wire, backend, noise),
                        enc, slot, four_term)


# --- batched exact shift-rule evaluation for training ---------------------

def _primitives(op: GateOp):
    """Involutory-rotation factorization of a gate, in application order.

    Each yielded primitive is exp(-i * scale * param[slot] * G / 2) with an
    involutory generator G, so the two-point rule applies per primitive and
    d/d(param) contributions sum with their scales.  U3 drops a global
    phase, which no expectation sees.
    """
    kind, wires, slots, scales = op.kind, op.wires, op.param_slots, op.param_scales
    if kind in _GENERATORS:
        yield (kind, wires, slots[0], scales[0])
    elif kind == "CRX":
        control, target = wires
        yield ("RX", (target,), slots[0], 0.5 * scales[0])
        yield ("IsingZX", (control, target), slots[0], -0.5 * scales[0])
    elif kind == "U3":
        yield ("RZ", wires, slots[2], scales[2])
        yield ("RY", wires, slots[0], scales[0])
        yield ("RZ", wires, slots[1], scales[1])
    else:  # pragma: no cover
        raise ValueError(f"no primitive decomposition for {kind!r}")


def _apply_z(amps: np.ndarray, wire: int, num_qubits: int) -> np.ndarray:
    out = amps.copy().reshape(amps.shape[0], -1)
    idx = np.arange(out.shape[1])
    out[:, ((idx >> wire) & 1) == 1] *= -1
    return out


def circuit_shift_gradients(circuit: CircuitSpec, enc_batch: np.ndarray, theta: np.ndarray,
                            wire: int | None = None, want_encoding: bool = True):
    """All shift-rule gradients of <Z_wire> for a batch of encoding vectors.

    Returns (values [B], dtheta [B, S], denc [B, L] or None).  Exactly equal
    to per-slot param_shift / param_shift_encoding, evaluated with shared
    prefix/suffix sweeps instead of independent circuit re-runs.
    """
    theta = np.asarray(theta, dtype=float)
    enc_batch = np.atleast_2d(np.asarray(enc_batch, dtype=float))
    n = circuit.num_qubits
    if wire is None:
        wire = circuit.observables[0]
    B = enc_batch.shape[0]

    enc_prims = [(p, "enc") for op in circuit.encoding_ops for p in _primitives(op)]
    th_prims = [(p, "theta") for op in circuit.trainable_ops for p in _primitives(op)]

    # forward pass (primitive form; equals run_circuit up to global phase)
    amps = encode_angles_batch(circuit, enc_batch)
    for (kind, wires, slot, scale), _ in th_prims:
        mat = gate_matrix(kind, [scale * theta[slot]])
        amps = apply_matrix(amps, mat, wires, n)
    values = expectation_z_amplitudes(amps, wire, n)

    mu = _apply_z(amps, wire, n)
    phi = amps
    dtheta = np.zeros((B, circuit.num_trainable_params))
    denc = np.zeros((B, circuit.num_encoding_params)) if want_encoding else None

    def emit(kind, wires, slot, scale, target):
        gen = _GENERATORS[kind]
        p_phi = apply_matrix(phi, gen, wires, n)
        v = np.einsum("bi,bi->b", mu.conj(), p_phi).imag
        target[:, slot] += scale * v

    for (kind, wires, slot, scale), _ in reversed(th_prims):
        emit(kind, wires, slot, scale, dtheta)
        inv = gate_matrix(kind, [-scale * theta[slot]])
        phi = apply_matrix(phi, inv, wires, n)
        mu = apply_matrix(mu, inv, wires, n)
    if want_encoding:
        rev = list(reversed(enc_prims))
        for idx, ((kind, wires, slot, scale), _) in enumerate(rev):
            emit(kind, wires, slot, scale, denc)
            if idx < len(rev) - 1:
                mats = rotation_matrices_batch(kind, -scale * enc_batch[:, slot])
                phi = apply_1q_batch(phi, mats, wires[0], n)
                mu = apply_1q_batch(mu, mats, wires[0], n)
    return values, dtheta, denc


# --- hybrid backpropagation ------------------------------------------------

def _chip_grad_from_outputs(model: EnsembleModel, g_final: np.ndarray,
                            agg_in: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backprop the decoder and aggregator: returns (dWd, dbd, g_agg, g_chip)."""
    dWd = g_final.T @ agg_in
    dbd = g_final.sum(axis=0)
    g_agg = g_final @ model.decoder.weights
    k = model.partition.num_chips
    if model.aggregator == "linear-map":
        g_chip = g_agg
    elif model.aggregator == "mean":
        g_chip = np.repeat(g_agg[:, :1] / k, k, axis=1)
    else:  # weighted-sum
        g_chip = g_agg[:, :1] * model.agg_weights[None, :]
    return dWd, dbd, g_agg, g_chip


def _assemble(model: EnsembleModel, enc_grads: list[tuple[np.ndarray, np.ndarray]],
              dtheta: np.ndarray, dWd: np.ndarray, dbd: np.ndarray) -> GradientVector:
    parts = []
    for dw, db in enc_grads:
        parts.append(dw.ravel())
        parts.append(db)
    parts.append(dtheta.ravel())
    parts.append(dWd.ravel())
    parts.append(dbd)
    return GradientVector(np.concatenate(parts))


def _encoder_grads(model: EnsembleModel, cache, g_angles: list[np.ndarray]):
    """Chain encoding-angle gradients through whichever encoder exists."""
    if model.encoder is None:
        return []
    if isinstance(model.encoder, LinearLayer):
        # angle blocks live in permuted coordinates; undo the permutation
        g_z = np.concatenate(g_angles, axis=1)
        g_e = np.empty_like(g_z)
        g_e[:, model.partition.permutation] = g_z
        dW = g_e.T @ cache.padded
        db = g_e.sum(axis=0)
        return [(dW, db)]
    grads = []
    for g_ang, block in zip(g_angles, cache.chip_blocks):
        grads.append((g_ang.T @ block, g_ang.sum(axis=0)))
    return grads


def hybrid_backward(model: EnsembleModel, x: np.ndarray, loss_grad_wrt_outputs: np.ndarray,
                    backend: Backend = IDEAL) -> GradientVector:
    """Gradients of a scalar loss through decoder, chips, and encoder.

    Requires a cached forward pass for exactly this input (run
    forward_ensemble first).  Chip parameters are differentiated with the
    shift rule scaled by the downstream gradient; classical layers
    analytically.
    """
    x = np.asarray(x, dtype=float)
    cache = model._cache
    if cache is None or cache.x.shape[0] != 1 or not np.array_equal(cache.x[0], x):
        raise ValueError("missing or stale forward cache: run forward_ensemble on this input first")
    g_final = np.atleast_2d(np.asarray(loss_grad_wrt_outputs, dtype=float))
    dWd, dbd, _, g_chip = _chip_grad_from_outputs(model, g_final, cache.aggregated)

    k = model.partition.num_chips
    backend_str = backend.kind
    dtheta = np.zeros_like(model.theta)
    g_angles = []
    want_enc = model.encoder is not None
    for i in range(k):
        chip = model.chips[i]
        angles_i = cache.chip_angles[i][0]
        if abs(g_chip[0, i]) > 0:
            for s in range(chip.num_trainable_params):
                dtheta[i, s] = g_chip[0, i] * param_shift(
                    chip, angles_i, model.theta[i], s, backend_str, backend.noise)
        g_ang = np.zeros((1, chip.num_encoding_params))
        if want_enc and abs(g_chip[0, i]) > 0:
            for j in range(chip.num_encoding_params):
                g_ang[0, j] = g_chip[0, i] * param_shift_encoding(
                    chip, angles_i, model.theta[i], j, backend_str, backend.noise)
        g_angles.append(g_ang)
    enc_grads = _encoder_grads(model, cache, g_angles)
    return _assemble(model, enc_grads, dtheta, dWd, dbd)


def hybrid_backward_batch(model: EnsembleModel, X: np.ndarray,
                          loss_grad_batch: np.ndarray) -> GradientVector:
    """Batched ideal-backend version of hybrid_backward, summed over samples.

    Uses the shared-sweep shift evaluator per chip; numerically identical to
    accumulating hybrid_backward over the batch.
    """
    cache = model._cache
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if cache is None or cache.x.shape != X.shape or not np.array_equal(cache.x, X):
        raise ValueError("missing or stale forward cache: run forward_ensemble_batch first")
    g_final = np.atleast_2d(np.asarray(loss_grad_batch, dtype=float))
    dWd, dbd, _, g_chip = _chip_grad_from_outputs(model, g_final, cache.aggregated)

    want_enc = model.encoder is not None
    dtheta = np.zeros_like(model.theta)
    g_angles = []
    for i in range(model.partition.num_chips):
        chip = model.chips[i]
        _, dth, denc = circuit_shift_gradients(
            chip, cache.chip_angles[i], model.theta[i], want_encoding=want_enc)
        dtheta[i] = g_chip[:, i] @ dth
        if want_enc:
            g_angles.append(g_chip[:, i : i + 1] * denc)
    enc_grads = _encoder_grads(model, cache, g_angles)
    return _assemble(model, enc_grads, dtheta, dWd, dbd)
