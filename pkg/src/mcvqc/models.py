"""Constructors for the experiment architectures.

All quantum models share the rotation + CRX-ring chip ansatz; the QCNN chips
use the U3/Ising convolution kernel with halving pool bookkeeping.  Builders
are pure functions of their seed: the RNG draw order is permutation, encoder
weights, chip angles, decoder weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CircuitSpec, GateOp
from .ensemble import EnsembleModel, LinearLayer, Partition

MAX_IDEAL_QUBITS = 24
MAX_NOISY_QUBITS = 12


def layered_ansatz(num_qubits: int, depth: int) -> CircuitSpec:
    """RY encoding, then per layer RX/RY/RZ on every wire and a CRX ring.

    The ring couples wire i to wire (i+1) mod n; single-qubit rotations use
    one slot each, so each layer holds 4n trainable angles (3n when n == 1
    and there is nothing to entangle).
    """
    enc_ops = tuple(GateOp("RY", (w,), (w,)) for w in range(num_qubits))
    ops: list[GateOp] = []
    slot = 0
    for _ in range(depth):
        for kind in ("RX", "RY", "RZ"):
            for w in range(num_qubits):
                ops.append(GateOp(kind, (w,), (slot,)))
                slot += 1
        if num_qubits >= 2:
            for w in range(num_qubits):
                ops.append(GateOp("CRX", (w, (w + 1) % num_qubits), (slot,)))
                slot += 1
    return CircuitSpec(num_qubits, enc_ops, tuple(ops), (0,))


def _uniform_layer(rng: np.random.Generator, out_dim: int, in_dim: int) -> LinearLayer:
    bound = 1.0 / np.sqrt(in_dim)
    return LinearLayer(rng.uniform(-bound, bound, (out_dim, in_dim)),
                       rng.uniform(-bound, bound, out_dim))


def build_multichip_ae_reduced(input_dim: int, n_qubits_total: int, k: int, depth: int,
                               seed: int = 0) -> EnsembleModel:
    """Autoencoder with a dimension-reducing encoder feeding k chips.

    encoder input_dim -> n_total, shuffled split into k chips of width
    n_total/k, one Z readout per chip, decoder k -> input_dim.
    """
    if n_qubits_total % k != 0:
        raise ValueError(f"{n_qubits_total} qubits do not divide into {k} chips")
    l = n_qubits_total // k
    if l > MAX_IDEAL_QUBITS:
        raise ValueError(f"chip width {l} exceeds the simulator cap {MAX_IDEAL_QUBITS}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_qubits_total)
    encoder = _uniform_layer(rng, n_qubits_total, input_dim)
    chip = layered_ansatz(l, depth)
    theta = rng.uniform(0, 2 * np.pi, (k, chip.num_trainable_params))
    decoder = _uniform_layer(rng, input_dim, k)
    model = EnsembleModel(
        Partition(k, l, perm), tuple(chip for _ in range(k)), theta, decoder,
        encoder, "linear-map", None, input_dim,
        meta={"kind": "multichip_ae_reduced", "seed": seed, "depth": depth,
              "expects_angles": False},
    )
    return model


def build_single_chip_ae(input_dim: int, n_qubits: int, depth: int, seed: int = 0) -> EnsembleModel:
    """Encoder input_dim -> n_qubits, one chip, decoder 1 -> input_dim."""
    model = build_multichip_ae_reduced(input_dim, n_qubits, 1, depth, seed)
    model.meta["kind"] = "single_chip_ae"
    return model


def build_multichip_ae_full(input_dim: int, chip_width: int, depth: int,
                            seed: int = 0) -> EnsembleModel:
    """Full-dimensional ensemble: no encoder, raw features become angles.

    Features are zero-padded to the next multiple of chip_width, shuffled,
    and split over input_dim/chip_width chips; the decoder maps the k chip
    readouts back to input_dim.  Inputs are expected in angle range (the
    data pipeline's [0, pi] scaling).
    """
    padded_dim = int(np.ceil(input_dim / chip_width)) * chip_width
    k = padded_dim // chip_width
    rng = np.random.default_rng(seed)
    perm = rng.permutation(padded_dim)
    chip = layered_ansatz(chip_width, depth)
    theta = rng.uniform(0, 2 * np.pi, (k, chip.num_trainable_params))
    decoder = _uniform_layer(rng, input_dim, k)
    return EnsembleModel(
        Partition(k, chip_width, perm), tuple(chip for _ in range(k)), theta,
        decoder, None, "linear-map", None, input_dim,
        meta={"kind": "multichip_ae_full", "seed": seed, "depth": depth,
              "padded_dim": padded_dim, "expects_angles": True},
    )


# --- QCNN -------------------------------------------------------------------


@dataclass(frozen=True)
class QcnnSpec:
    """Shape bookkeeping for one QCNN chip: n wires, d conv+pool pairs."""

    num_qubits: int
    depth: int

    def __post_init__(self):
        if self.num_qubits % (2**self.depth) != 0:
            raise ValueError(
                f"{self.num_qubits} wires cannot be pooled {self.depth} times"
            )

    @property
    def param_count(self) -> int:
        n, d = self.num_qubits, self.depth
        return 18 * d * n + 3 * d * (n // 2) + n

    @property
    def wires_after_pooling(self) -> int:
        return self.num_qubits // (2**self.depth)


def qcnn_chip_circuit(spec: QcnnSpec) -> CircuitSpec:
    """One QCNN chip: RY encoding, a trainable RY layer, then d conv+pool pairs.

    Each convolution layer makes two passes over the full wire ring applying
    U3 -> IsingZZ -> IsingYY -> IsingXX -> U3 per neighboring pair (9 angles
    a pair, 18n a layer).  Each pooling layer keeps every second wire of the
    active list and puts a trainable U3 on the n/2 even wires; the readout
    sits on the first surviving wire.
    """
    n, d = spec.num_qubits, spec.depth
    enc_ops = tuple(GateOp("RY", (w,), (w,)) for w in range(n))
    ops: list[GateOp] = []
    slot = 0

    def take(count: int) -> tuple[int, ...]:
        nonlocal slot
        slots = tuple(range(slot, slot + count))
        slot += count
        return slots

    for w in range(n):
        ops.append(GateOp("RY", (w,), take(1)))
    active = list(range(n))
    for _ in range(d):
        for _round in range(2):
            for i in range(n):
                a, b = i, (i + 1) % n
                ops.append(GateOp("U3", (a,), take(3)))
                ops.append(GateOp("IsingZZ", (a, b), take(1)))
                ops.append(GateOp("IsingYY", (a, b), take(1)))
                ops.append(GateOp("IsingXX", (a, b), take(1)))
                ops.append(GateOp("U3", (b,), take(3)))
        for w in range(0, n, 2):
            ops.append(GateOp("U3", (w,), take(3)))
        active = active[::2]
    circuit = CircuitSpec(n, enc_ops, tuple(ops), (active[0],))
    if circuit.num_trainable_params != spec.param_count:
        raise AssertionError(
            f"QCNN construction produced {circuit.num_trainable_params} parameters, "
            f"expected {spec.param_count}"
        )
    if len(active) != spec.wires_after_pooling:
        raise AssertionError("pooling bookkeeping lost track of the wire count")
    return circuit


def build_qcnn(n_qubits: int, depth: int, k: int, input_dim: int, num_classes: int = 2,
               seed: int = 0) -> EnsembleModel:
    """k QCNN chips over evenly split features, averaged into class logits.

    Every chip carries its own fully connected layer mapping its feature
    block to one rotation angle per wire.  Chip readouts are averaged and a
    final linear map produces the logits.
    """
    spec = QcnnSpec(n_qubits, depth)
    padded_dim = int(np.ceil(input_dim / k)) * k
    block = padded_dim // k
    rng = np.random.default_rng(seed)
    perm = rng.permutation(padded_dim)
    encoders = tuple(_uniform_layer(rng, n_qubits, block) for _ in range(k))
    chip = qcnn_chip_circuit(spec)
    theta = rng.uniform(0, 2 * np.pi, (k, chip.num_trainable_params))
    decoder = _uniform_layer(rng, num_classes, 1)
    return EnsembleModel(
        Partition(k, block, perm), tuple(chip for _ in range(k)), theta, decoder,
        encoders, "mean", None, input_dim,
        meta={"kind": "qcnn", "seed": seed, "depth": depth, "padded_dim": padded_dim,
              "num_classes": num_classes, "expects_angles": False,
              "quantum_params_per_chip": spec.param_count},
    )


# --- classical baseline ------------------------------------------------------


class ClassicalModel:
    """Linear-stack mirror of the hybrid autoencoder (no quantum stage)."""

    def __init__(self, layers: list[LinearLayer], meta: dict | None = None):
        self.layers = layers
        self.meta = meta or {}
        self.input_dim = layers[0].in_dim
        self._cache = None

    @property
    def num_params(self) -> int:
        return sum(l.num_params for l in self.layers)

    def get_params(self) -> np.ndarray:
        parts = []
        for l in self.layers:
            parts.append(l.weights.ravel())
            parts.append(l.bias)
        return np.concatenate(parts)

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got {flat.shape}")
        pos = 0
        for l in self.layers:
            w = l.weights.size
            l.weights = flat[pos : pos + w].reshape(l.weights.shape)
            pos += w
            l.bias = flat[pos : pos + l.bias.size].copy()
            pos += l.bias.size
        self._cache = None

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        acts = [X]
        for l in self.layers:
            acts.append(l(acts[-1]))
        self._cache = acts
        return acts[-1]

    def backward_batch(self, g_final: np.ndarray) -> np.ndarray:
        """Flat parameter gradient, summed over the batch."""
        if self._cache is None:
            raise ValueError("missing forward cache: run forward_batch first")
        acts = self._cache
        g = np.atleast_2d(np.asarray(g_final, dtype=float))
        per_layer: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        for i in reversed(range(len(self.layers))):
            per_layer[i] = (g.T @ acts[i], g.sum(axis=0))
            if i > 0:
                g = g @ self.layers[i].weights
        flat = []
        for dW, db in per_layer:
            flat.append(dW.ravel())
            flat.append(db)
        return np.concatenate(flat)


def build_classical_ae(input_dim: int, n_qubits: int, depth: int, k: int,
                       seed: int = 0) -> ClassicalModel:
    """Linear autoencoder mirroring the single-chip hybrid layout.

    input_dim -> n_qubits -> [depth hidden layers through width 32 ending
    at k] -> input_dim.
    """
    rng = np.random.default_rng(seed)
    dims = [input_dim, n_qubits]
    if depth == 1:
        dims.append(k)
    else:
        dims.append(32)
        dims.extend([32] * (depth - 2))
        dims.append(k)
    dims.append(input_dim)
    layers = [_uniform_layer(rng, dims[i + 1], dims[i]) for i in range(len(dims) - 1)]
    return ClassicalModel(layers, meta={"kind": "classical_ae", "seed": seed,
                                        "depth": depth, "expects_angles": False})
