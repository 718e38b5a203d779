"""Entanglement, trainability, generalization, and noise metrics.

The Meyer-Wallach score Q is built from single-qubit reduced-state
purities; its sampled mean over uniform random angles is the entangling
capability.  The gradient-variance probe measures the spread of one
parameter's loss derivative over random parameter draws, the standard
flatness diagnostic for deep parameterized circuits.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CircuitSpec, StateVector, expectation_z, run_circuit
from .ensemble import EnsembleModel
from .gradients import param_shift
from .models import layered_ansatz
from .noise import DensityMatrix, NoiseModel, expectation_dm, run_noisy_circuit, to_density


@dataclass
class MetricsRecord:
    """Per-epoch training metrics plus the optional diagnostics."""

    epoch: int
    train_loss: float
    val_loss: float
    test_loss: float | None = None
    gen_error: float | None = None
    quantum_error: float | None = None
    ent_capability: float | None = None
    grad_variance: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class ErrorDecomposition:
    """Shot-mean estimator MSE split into squared bias and shot variance."""

    bias_sq: float
    variance: float
    n_cir: int
    mse: float = field(init=False)

    def __post_init__(self):
        self.mse = self.bias_sq + self.variance


def reduced_density_qubit(state: StateVector, wire: int) -> np.ndarray:
    """Partial trace onto one qubit: 2x2, trace 1, Hermitian."""
    if not 0 <= wire < state.num_qubits:
        raise ValueError(f"wire {wire} outside register of width {state.num_qubits}")
    n = state.num_qubits
    t = state.amplitudes.reshape((2,) * n)
    t = np.moveaxis(t, n - 1 - wire, 0).reshape(2, -1)
    return t @ t.conj().T


def _reduced_density(amps: np.ndarray, wires: tuple[int, ...], num_qubits: int) -> np.ndarray:
    t = amps.reshape((2,) * num_qubits)
    axes = [num_qubits - 1 - w for w in wires]
    t = np.moveaxis(t, axes, range(len(wires)))
    t = t.reshape(2 ** len(wires), -1)
    return t @ t.conj().T


def meyer_wallach_q(state: StateVector) -> float:
    """Global entanglement score: (2/n) sum_j (1 - Tr rho_j^2), in [0, 1]."""
    n = state.num_qubits
    if n < 2:
        return 0.0
    total = 0.0
    for j in range(n):
        rho = reduced_density_qubit(state, j)
        total += 1.0 - float(np.real(np.trace(rho @ rho)))
    return 2.0 * total / n


def _meyer_wallach_amps(amps: np.ndarray, num_qubits: int) -> float:
    if num_qubits < 2:
        return 0.0
    total = 0.0
    for j in range(num_qubits):
        rho = _reduced_density(amps, (j,), num_qubits)
        total += 1.0 - float(np.real(np.trace(rho @ rho)))
    return 2.0 * total / num_qubits


def entangling_capability(target: CircuitSpec | EnsembleModel, num_samples: int, seed: int,
                          unnormalized: bool = False) -> float:
    """Mean Meyer-Wallach Q over uniformly sampled angles.

    Every trainable slot and every encoding angle is drawn uniformly from
    [0, 2pi).  For a multi-chip model the per-sample score is the arithmetic
    mean of the chips' scores, which equals the full product state's Q.
    With ``unnormalized=True`` the per-qubit purity deficits are summed
    rather than averaged (scale n/2 instead of 1).
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    chips = list(target.chips) if isinstance(target, EnsembleModel) else [target]
    rng = np.random.default_rng(seed)
    total_qubits = sum(c.num_qubits for c in chips)
    acc = 0.0
    for _ in range(num_samples):
        chip_qs = []
        for chip in chips:
            enc = rng.uniform(0, 2 * np.pi, chip.num_encoding_params)
            theta = rng.uniform(0, 2 * np.pi, chip.num_trainable_params)
            state = run_circuit(chip, enc, theta)
            chip_qs.append(_meyer_wallach_amps(state.amplitudes, chip.num_qubits))
        acc += float(np.mean(chip_qs))
    ent = acc / num_samples
    if unnormalized:
        return ent * total_qubits / 2.0
    return ent


def bipartite_entropy(state: StateVector, subset: tuple[int, ...]) -> float:
    """Von Neumann entropy (base 2) of the reduced state over ``subset``."""
    subset = tuple(sorted(set(int(w) for w in subset)))
    if not subset or len(subset) >= state.num_qubits:
        raise ValueError("subset must be a nonempty proper subset of the wires")
    if subset[0] < 0 or subset[-1] >= state.num_qubits:
        raise ValueError(f"subset {subset} outside register of width {state.num_qubits}")
    rho = _reduced_density(state.amplitudes, subset, state.num_qubits)
    evals = np.linalg.eigvalsh(rho)
    evals = evals[evals > 1e-12]
    return float(-(evals * np.log2(evals)).sum())


def gradient_variance(n: int, k: int, num_samples: int, seed: int, depth: int = 2,
                      target: float = 0.0, probe: str = "first",
                      chip_factory=None) -> float:
    """Sample variance of one parameter's loss gradient over random angles.

    The model is k chips of the layered ansatz on n/k wires with mean
    aggregation; the loss is the squared error of the aggregated output
    against a fixed target.  ``probe='first'`` differentiates the first
    rotation of chip 1's first layer; ``probe='all'`` averages the per-slot
    variances across chip 1's slots.
    """
    if num_samples < 30:
        raise ValueError("need at least 30 samples for a stable variance")
    if n % k != 0:
        raise ValueError(f"{n} qubits do not divide into {k} chips")
    make = chip_factory or layered_ansatz
    chip = make(n // k, depth)
    slots = range(chip.num_trainable_params) if probe == "all" else [0]
    rng = np.random.default_rng(seed)
    grads = np.empty((num_samples, len(slots)))
    for s in range(num_samples):
        encs = rng.uniform(0, 2 * np.pi, (k, chip.num_encoding_params))
        thetas = rng.uniform(0, 2 * np.pi, (k, chip.num_trainable_params))
        outputs = [
            expectation_z(run_circuit(chip, encs[i], thetas[i]), chip.observables[0])
            for i in range(k)
        ]
        y = float(np.mean(outputs))
        downstream = 2.0 * (y - target) / k
        for j, slot in enumerate(slots):
            grads[s, j] = downstream * param_shift(chip, encs[0], thetas[0], slot)
    return float(np.mean(np.var(grads, axis=0, ddof=1)))


def quantum_error(val_loss_noisy: float, val_loss_ideal: float) -> float:
    """Absolute difference between noisy and noiseless validation losses."""
    return abs(float(val_loss_noisy) - float(val_loss_ideal))


def error_decomposition(circuit: CircuitSpec, enc, theta, noise: NoiseModel,
                        n_cir: int) -> ErrorDecomposition:
    """Bias^2 and shot variance of the noisy Z estimator on the readout wire.

    bias^2 compares the exact noisy expectation against the exact ideal one;
    the variance term is (1 - <Z>_noisy^2) / n_cir since Z^2 = I.
    """
    if n_cir < 1:
        raise ValueError("n_cir must be >= 1")
    wire = circuit.observables[0]
    ideal = expectation_z(run_circuit(circuit, enc, theta), wire)
    noisy = expectation_dm(run_noisy_circuit(circuit, enc, theta, noise), wire)
    bias_sq = (noisy - ideal) ** 2
    variance = (1.0 - noisy**2) / n_cir
    return ErrorDecomposition(float(bias_sq), float(variance), n_cir)


METRIC_CSV_COLUMNS = ("metric", "n", "k", "l", "S", "seed", "value")


def write_metric_rows(path: str | Path, rows: list[dict]) -> Path:
    """Write metric sweep rows as CSV, validating the schema first."""
    path = Path(path)
    for row in rows:
        if set(row) != set(METRIC_CSV_COLUMNS):
            raise ValueError(
                f"metric row keys {sorted(row)} != schema {sorted(METRIC_CSV_COLUMNS)}"
            )
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return path
