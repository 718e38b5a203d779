"""Density-matrix simulation under per-gate depolarizing and damping noise.

Channels are applied after every gate, on exactly the wires the gate
touches: depolarizing first, then amplitude damping, one single-qubit
channel per touched wire.  Finite-shot readout is binomial sampling of a
single-wire Z observable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CapacityError, CircuitSpec, StateVector, gate_matrix, PAULI

MAX_DM_QUBITS = 12  # 2^12 x 2^12 complex128 ~ 256 MB; desk-scale ceiling
TRACE_ATOL = 1e-9


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate error rates; channels attach to every gate's wires."""

    depolarizing_eps: float = 0.01
    amp_damping_gamma: float = 0.01

    def __post_init__(self):
        if not 0 <= self.depolarizing_eps <= 1:
            raise ValueError(f"depolarizing_eps must be in [0, 1], got {self.depolarizing_eps}")
        if not 0 <= self.amp_damping_gamma <= 1:
            raise ValueError(f"amp_damping_gamma must be in [0, 1], got {self.amp_damping_gamma}")


@dataclass
class DensityMatrix:
    """Mixed state over ``num_qubits`` wires; same wire ordering as StateVector."""

    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_DM_QUBITS:
            raise CapacityError(
                f"density matrices support 1..{MAX_DM_QUBITS} qubits, got {self.num_qubits}"
            )
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dim = 2**self.num_qubits
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix, got {self.matrix.shape}")

    def validate(self, check_psd: bool = False) -> None:
        tr = np.trace(self.matrix)
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"trace {tr} deviates from 1")
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > TRACE_ATOL:
            raise ValueError("matrix is not Hermitian")
        if check_psd and np.min(np.linalg.eigvalsh(self.matrix)) < -1e-8:
            raise ValueError("matrix has a significantly negative eigenvalue")


def _left_right(mat_l: np.ndarray, rho: np.ndarray, mat_r: np.ndarray,
                wires: tuple[int, ...], n: int) -> np.ndarray:
    """Compute (L on wires) rho (R on wires) for small per-wire matrices."""
    m = len(wires)
    t = rho.reshape((2,) * (2 * n))
    row_axes = [n - 1 - w for w in wires]
    col_axes = [2 * n - 1 - w for w in wires]
    lt = mat_l.reshape((2,) * (2 * m))
    t = np.tensordot(lt, t, axes=(list(range(m, 2 * m)), row_axes))
    t = np.moveaxis(t, list(range(m)), row_axes)
    # right factor contracts column indices: (rho R)_{ij} = rho_{ik} R_{kj}
    rt = mat_r.reshape((2,) * (2 * m))
    t = np.tensordot(t, rt, axes=(col_axes, list(range(m))))
    t = np.moveaxis(t, list(range(-m, 0)), col_axes)
    dim = 2**n
    return np.ascontiguousarray(t).reshape(dim, dim)


def _conjugate(rho: np.ndarray, mat: np.ndarray, wires: tuple[int, ...], n: int) -> np.ndarray:
    return _left_right(mat, rho, mat.conj().T, wires, n)


def to_density(state: StateVector) -> DensityMatrix:
    """|psi><psi| of a pure state."""
    if state.num_qubits > MAX_DM_QUBITS:
        raise CapacityError(
            f"density matrices support at most {MAX_DM_QUBITS} qubits, got {state.num_qubits}"
        )
    rho = np.outer(state.amplitudes, state.amplitudes.conj())
    return DensityMatrix(state.num_qubits, rho)


def _check_wire(dm: DensityMatrix, wire: int) -> None:
    if not 0 <= wire < dm.num_qubits:
        raise ValueError(f"wire {wire} outside register of width {dm.num_qubits}")


def apply_depolarizing(dm: DensityMatrix, wire: int, eps: float) -> DensityMatrix:
    """(1-eps) rho + eps/3 (X rho X + Y rho Y + Z rho Z) on one wire."""
    _check_wire(dm, wire)
    if not 0 <= eps <= 1:
        raise ValueError(f"eps must be in [0, 1], got {eps}")
    if eps == 0:
        return DensityMatrix(dm.num_qubits, dm.matrix.copy())
    rho = (1 - eps) * dm.matrix
    for p in ("X", "Y", "Z"):
        rho = rho + (eps / 3) * _conjugate(dm.matrix, PAULI[p], (wire,), dm.num_qubits)
    return DensityMatrix(dm.num_qubits, rho)


def apply_amplitude_damping(dm: DensityMatrix, wire: int, gamma: float) -> DensityMatrix:
    """Two-Kraus energy dissipation: population decays |1> -> |0> with rate gamma."""
    _check_wire(dm, wire)
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    if gamma == 0:
        return DensityMatrix(dm.num_qubits, dm.matrix.copy())
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    rho = _conjugate(dm.matrix, k0, (wire,), dm.num_qubits)
    rho += _conjugate(dm.matrix, k1, (wire,), dm.num_qubits)
    return DensityMatrix(dm.num_qubits, rho)


def _apply_gate_noise(rho: np.ndarray, wires: tuple[int, ...], noise: NoiseModel, n: int) -> np.ndarray:
    eps, gamma = noise.depolarizing_eps, noise.amp_damping_gamma
    for w in wires:
        if eps > 0:
            acc = (1 - eps) * rho
            for p in ("X", "Y", "Z"):
                acc += (eps / 3) * _conjugate(rho, PAULI[p], (w,), n)
            rho = acc
        if gamma > 0:
            k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
            k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
            rho = _conjugate(rho, k0, (w,), n) + _conjugate(rho, k1, (w,), n)
    return rho


def run_noisy_circuit(
    circuit: CircuitSpec,
    enc_angles: np.ndarray | list[float],
    theta: np.ndarray | list[float],
    noise: NoiseModel,
) -> DensityMatrix:
    """Each gate as unitary conjugation followed by its wires' noise channels."""
    if circuit.num_qubits > MAX_DM_QUBITS:
        raise CapacityError(
            f"noisy simulation supports at most {MAX_DM_QUBITS} qubits, "
            f"got {circuit.num_qubits}"
        )
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
    n = circuit.num_qubits
    dim = 2**n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    for op, params in [(g, enc_angles) for g in circuit.encoding_ops] + [
        (g, theta) for g in circuit.trainable_ops
    ]:
        rho = _conjugate(rho, gate_matrix(op.kind, op.angles(params)), op.wires, n)
        rho = _apply_gate_noise(rho, op.wires, noise, n)
    return DensityMatrix(n, rho)


def expectation_dm(dm: DensityMatrix, wire: int) -> float:
    """Tr[Z_wire rho] from the diagonal."""
    _check_wire(dm, wire)
    diag = np.real(np.diagonal(dm.matrix))
    idx = np.arange(diag.size)
    signs = 1.0 - 2.0 * ((idx >> wire) & 1)
    return float(np.dot(diag, signs))


def sample_shots(dm: DensityMatrix, wire: int, n_cir: int, rng_seed: int) -> float:
    """Mean of ``n_cir`` +/-1 draws with P(+1) = (1 + <Z>)/2, seeded."""
    if n_cir < 1:
        raise ValueError(f"n_cir must be >= 1, got {n_cir}")
    p_plus = np.clip((1.0 + expectation_dm(dm, wire)) / 2.0, 0.0, 1.0)
    rng = np.random.default_rng(rng_seed)
    successes = rng.binomial(n_cir, p_plus)
    return float((2 * successes - n_cir) / n_cir)
