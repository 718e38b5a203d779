"""Multi-chip composition: feature partitioning, per-chip evaluation, and
classical aggregation.

No gates ever cross chip boundaries; the only coupling between chips is the
classical function applied to their scalar readouts.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    CircuitSpec,
    apply_matrix,
    encode_angles_batch,
    expectation_z,
    expectation_z_amplitudes,
    gate_matrix,
    run_circuit,
)
from .noise import NoiseModel, expectation_dm, run_noisy_circuit, sample_shots

AGGREGATORS = ("mean", "weighted-sum", "linear-map")


@dataclass(frozen=True)
class Partition:
    """Feature split: a fixed permutation followed by k contiguous blocks."""

    num_chips: int
    chip_width: int
    permutation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "permutation", np.asarray(self.permutation, dtype=np.intp))
        n = self.num_chips * self.chip_width
        if self.permutation.shape != (n,):
            raise ValueError(
                f"permutation length {self.permutation.shape} != num_chips*chip_width = {n}"
            )
        if not np.array_equal(np.sort(self.permutation), np.arange(n)):
            raise ValueError("permutation is not a bijection on 0..n-1")

    @property
    def total_features(self) -> int:
        return self.num_chips * self.chip_width

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(self.permutation.size)
        return inv


def partition_features(x: np.ndarray, partition: Partition) -> list[np.ndarray]:
    """Permute then split into num_chips blocks of chip_width (last axis)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != partition.total_features:
        raise ValueError(f"expected {partition.total_features} features, got {x.shape[-1]}")
    permuted = x[..., partition.permutation]
    l = partition.chip_width
    return [permuted[..., i * l : (i + 1) * l] for i in range(partition.num_chips)]


@dataclass
class LinearLayer:
    """Dense affine map y = W x + b."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (out, in) with matching bias length")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def num_params(self) -> int:
        return self.weights.size + self.bias.size

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.weights.T + self.bias


@dataclass(frozen=True)
class Backend:
    """Where chip expectations come from: exact statevector, or a noisy
    density-matrix run optionally followed by finite-shot sampling."""

    kind: str = "ideal"
    noise: NoiseModel | None = None
    n_cir: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("ideal", "noisy"):
            raise ValueError(f"backend kind must be 'ideal' or 'noisy', got {self.kind!r}")
        if self.kind == "noisy" and self.noise is None:
            object.__setattr__(self, "noise", NoiseModel())

    @classmethod
    def ideal(cls) -> "Backend":
        return cls("ideal")

    @classmethod
    def noisy(cls, eps: float = 0.01, gamma: float = 0.01, n_cir: int | None = None,
              seed: int = 0) -> "Backend":
        return cls("noisy", NoiseModel(eps, gamma), n_cir, seed)


IDEAL = Backend.ideal()


@dataclass
class ForwardCache:
    """Activations retained between a forward pass and hybrid_backward."""

    x: np.ndarray                      # raw model input, [B, input_dim]
    padded: np.ndarray                 # after zero-padding, [B, n_features]
    encoder_out: np.ndarray | None     # global encoder output, [B, n_total]
    chip_blocks: list[np.ndarray]      # per chip raw feature blocks, [B, block]
    chip_angles: list[np.ndarray]      # per chip encoding angles, [B, n_enc]
    chip_outputs: np.ndarray           # [B, k]
    aggregated: np.ndarray             # decoder input, [B, dec_in]
    final: np.ndarray                  # [B, m]


@dataclass
class EnsembleModel:
    """k independent chips plus the classical layers around them.

    ``encoder`` is None (raw features are the encoding angles), a single
    LinearLayer applied before partitioning, or one LinearLayer per chip
    applied to that chip's raw feature block.  ``aggregator`` decides how
    chip readouts enter the decoder: 'linear-map' feeds all k readouts to
    the decoder directly, 'mean'/'weighted-sum' collapse them to a scalar
    first.  Aggregator weights are fixed at construction, not trained.
    """

    partition: Partition
    chips: tuple[CircuitSpec, ...]
    theta: np.ndarray                      # [k, slots_per_chip]
    decoder: LinearLayer
    encoder: LinearLayer | tuple[LinearLayer, ...] | None = None
    aggregator: str = "linear-map"
    agg_weights: np.ndarray | None = None
    input_dim: int = 0
    meta: dict = field(default_factory=dict)
    _cache: ForwardCache | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        k = self.partition.num_chips
        if len(self.chips) != k:
            raise ValueError(f"expected {k} chips, got {len(self.chips)}")
        widths = {c.num_qubits for c in self.chips}
        slots = {(c.num_encoding_params, c.num_trainable_params) for c in self.chips}
        if len(widths) != 1 or len(slots) != 1:
            raise ValueError("all chips must share width and slot layout")
        chip0 = self.chips[0]
        if isinstance(self.encoder, tuple):
            if len(self.encoder) != k:
                raise ValueError(f"need one encoder per chip, got {len(self.encoder)}")
            for e in self.encoder:
                if e.in_dim != self.partition.chip_width:
                    raise ValueError("per-chip encoder input must match the feature block width")
                if e.out_dim != chip0.num_encoding_params:
                    raise ValueError("per-chip encoder output must match the chip's angle count")
        elif self.partition.chip_width != chip0.num_encoding_params:
            raise ValueError(
                f"feature blocks of width {self.partition.chip_width} cannot feed chips "
                f"taking {chip0.num_encoding_params} encoding angles"
            )
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (k, chip0.num_trainable_params):
            raise ValueError(
                f"theta must be [{k}, {chip0.num_trainable_params}], got {self.theta.shape}"
            )
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if self.aggregator == "linear-map":
            if self.decoder.in_dim != k * len(chip0.observables):
                raise ValueError(
                    f"decoder arity {self.decoder.in_dim} != observables x chips = "
                    f"{k * len(chip0.observables)}"
                )
        elif self.decoder.in_dim != 1:
            raise ValueError("mean/weighted-sum aggregation feeds a 1-input decoder")
        if self.aggregator == "weighted-sum":
            self.agg_weights = np.asarray(self.agg_weights, dtype=float)
            if self.agg_weights.shape != (k,):
                raise ValueError(f"weighted-sum needs {k} weights")
        if self.input_dim <= 0:
            self.input_dim = self._infer_input_dim()

    def _infer_input_dim(self) -> int:
        if isinstance(self.encoder, LinearLayer):
            return self.encoder.in_dim
        return self.partition.total_features

    # --- flat parameter layout: encoder blocks, per-chip theta, decoder ---

    def encoder_layers(self) -> tuple[LinearLayer, ...]:
        if self.encoder is None:
            return ()
        if isinstance(self.encoder, LinearLayer):
            return (self.encoder,)
        return self.encoder

    @property
    def num_params(self) -> int:
        n = sum(e.num_params for e in self.encoder_layers())
        return n + self.theta.size + self.decoder.num_params

    def get_params(self) -> np.ndarray:
        parts = []
        for e in self.encoder_layers():
            parts.append(e.weights.ravel())
            parts.append(e.bias)
        parts.append(self.theta.ravel())
        parts.append(self.decoder.weights.ravel())
        parts.append(self.decoder.bias)
        return np.concatenate(parts)

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got {flat.shape}")
        pos = 0
        for e in self.encoder_layers():
            w = e.weights.size
            e.weights = flat[pos : pos + w].reshape(e.weights.shape)
            pos += w
            e.bias = flat[pos : pos + e.bias.size].copy()
            pos += e.bias.size
        self.theta = flat[pos : pos + self.theta.size].reshape(self.theta.shape)
        pos += self.theta.size
        w = self.decoder.weights.size
        self.decoder.weights = flat[pos : pos + w].reshape(self.decoder.weights.shape)
        pos += w
        self.decoder.bias = flat[pos : pos + self.decoder.bias.size].copy()
        self._cache = None

    def theta_offset(self) -> int:
        return sum(e.num_params for e in self.encoder_layers())

    def decoder_offset(self) -> int:
        return self.theta_offset() + self.theta.size


def aggregate(outputs: np.ndarray, aggregator: str, weights=None) -> np.ndarray:
    """Combine k chip readouts into the decoder input (last-axis semantics)."""
    outputs = np.asarray(outputs, dtype=float)
    if aggregator == "mean":
        return outputs.mean(axis=-1, keepdims=True)
    if aggregator == "weighted-sum":
        w = np.asarray(weights, dtype=float)
        if w.shape != (outputs.shape[-1],):
            raise ValueError(f"need {outputs.shape[-1]} weights, got {w.shape}")
        return (outputs @ w)[..., None]
    if aggregator == "linear-map":
        w, b = weights
        return outputs @ np.asarray(w, dtype=float).T + np.asarray(b, dtype=float)
    raise ValueError(f"unknown aggregator {aggregator!r}")


def forward_chip(chip: CircuitSpec, x_i: np.ndarray, theta_i: np.ndarray,
                 backend: Backend = IDEAL) -> float:
    """Scalar chip output: <Z> on the chip's first observable wire."""
    x_i = np.asarray(x_i, dtype=float)
    if x_i.shape != (chip.num_encoding_params,):
        raise ValueError(f"chip takes {chip.num_encoding_params} angles, got {x_i.shape}")
    wire = chip.observables[0]
    if backend.kind == "ideal":
        return expectation_z(run_circuit(chip, x_i, theta_i), wire)
    dm = run_noisy_circuit(chip, x_i, theta_i, backend.noise)
    if backend.n_cir is None:
        return expectation_dm(dm, wire)
    return sample_shots(dm, wire, backend.n_cir, backend.seed)


def run_chip_batch(chip: CircuitSpec, angles: np.ndarray, theta_i: np.ndarray) -> np.ndarray:
    """Ideal chip readouts for a [B, n_enc] batch of encoding angles."""
    amps = encode_angles_batch(chip, angles)
    for op in chip.trainable_ops:
        amps = apply_matrix(amps, gate_matrix(op.kind, op.angles(theta_i)), op.wires, chip.num_qubits)
    return expectation_z_amplitudes(amps, chip.observables[0], chip.num_qubits)


def _pad_input(model: EnsembleModel, x: np.ndarray) -> np.ndarray:
    padded_dim = model.meta.get("padded_dim", x.shape[-1])
    if padded_dim == x.shape[-1]:
        return x
    pad = padded_dim - x.shape[-1]
    return np.concatenate([x, np.zeros(x.shape[:-1] + (pad,))], axis=-1)


def forward_ensemble_batch(model: EnsembleModel, X: np.ndarray,
                           backend: Backend = IDEAL) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    """Forward a [B, input_dim] batch; returns (final, chip_outputs, cache)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[-1] != model.input_dim:
        raise ValueError(f"model takes inputs of dim {model.input_dim}, got {X.shape[-1]}")
    padded = _pad_input(model, X)
    enc = model.encoder
    encoder_out = None
    if isinstance(enc, LinearLayer):
        encoder_out = enc(padded)
        chip_blocks = partition_features(encoder_out, model.partition)
        chip_angles = chip_blocks
    else:
        chip_blocks = partition_features(padded, model.partition)
        if isinstance(enc, tuple):
            chip_angles = [e(b) for e, b in zip(enc, chip_blocks)]
        else:
            chip_angles = chip_blocks
    k = model.partition.num_chips
    B = X.shape[0]
    outputs = np.empty((B, k))
    if backend.kind == "ideal":
        for i in range(k):
            outputs[:, i] = run_chip_batch(model.chips[i], chip_angles[i], model.theta[i])
    else:
        for i in range(k):
            for b in range(B):
                per_call = Backend("noisy", backend.noise, backend.n_cir,
                                   _derive_seed(backend.seed, i, b))
                outputs[b, i] = forward_chip(model.chips[i], chip_angles[i][b],
                                             model.theta[i], per_call)
    if model.aggregator == "linear-map":
        agg_in = outputs
    else:
        agg_in = aggregate(outputs, model.aggregator, model.agg_weights)
    final = model.decoder(agg_in)
    cache = ForwardCache(X, padded, encoder_out, list(chip_blocks), list(chip_angles),
                         outputs, agg_in, final)
    model._cache = cache
    return final, outputs, cache


def forward_ensemble(model: EnsembleModel, x: np.ndarray,
                     backend: Backend = IDEAL) -> tuple[np.ndarray, np.ndarray]:
    """Single-sample forward pass; returns (final output, chip outputs)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("forward_ensemble takes a single feature vector")
    final, outputs, _ = forward_ensemble_batch(model, x[None, :], backend)
    return final[0], outputs[0]


def _derive_seed(base: int, chip_index: int, sample_index: int) -> int:
    seq = np.random.SeedSequence([int(base), int(chip_index), int(sample_index)])
    return int(seq.generate_state(1)[0])
