"""Dense feedforward substrate for the learner: parameter containers, ReLU
MLP forward/backward passes, the Adam update, and a small versioned binary
container for checkpoint arrays.  Everything is float64 and hand-derived;
no autodiff framework.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np


@dataclass
class DenseParams:
    """Weights (out x in) and biases per layer, shapes chaining input to output."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases disagree in layer count")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError("layer shapes are inconsistent")
        for prev, nxt in zip(self.weights[:-1], self.weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise ValueError("layer widths do not chain")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def layer_sizes(self) -> List[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def clone(self) -> "DenseParams":
        return DenseParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "DenseParams":
        return DenseParams([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )


@dataclass
class ForwardCache:
    """Intermediate values retained for the matching backward pass."""

    inputs: np.ndarray
    pre_activations: List[np.ndarray]
    activations: List[np.ndarray]  # post-ReLU hidden activations
    output: np.ndarray
    output_activation: str


def init_params(seed: int, sizes: List[int]) -> DenseParams:
    """Uniform +-sqrt(1/fan_in) weights, zero biases, deterministic per seed."""
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError("need at least an input and an output size, all >= 1")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = (1.0 / fan_in) ** 0.5
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseParams(weights, biases)


def forward(params: DenseParams, x: np.ndarray, output_activation: str = "linear") -> Tuple[np.ndarray, ForwardCache]:
    """Batched forward pass: ReLU hidden layers, linear or tanh output."""
    if output_activation not in ("linear", "tanh"):
        raise ValueError(f"unknown output activation {output_activation!r}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[1]:
        raise ValueError(
            f"input shape {x.shape} does not match first layer width {params.weights[0].shape[1]}"
        )
    pre_activations: List[np.ndarray] = []
    activations: List[np.ndarray] = []
    h = x
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        pre = h @ w.T + b
        pre_activations.append(pre)
        if i < last:
            h = np.maximum(pre, 0.0)
            activations.append(h)
        else:
            h = np.tanh(pre) if output_activation == "tanh" else pre
    return h, ForwardCache(x, pre_activations, activations, h, output_activation)


def backward(params: DenseParams, cache: ForwardCache, grad_output: np.ndarray) -> Tuple[DenseParams, np.ndarray]:
    """Exact gradients of the forward map.

    Returns (parameter gradients, gradient w.r.t. the input batch) for the
    scalar objective whose gradient at the network output is grad_output.
    """
    grad_output = np.asarray(grad_output, dtype=float)
    if grad_output.shape != cache.output.shape:
        raise ValueError("grad_output shape does not match the forward output")
    if len(cache.pre_activations) != params.n_layers:
        raise ValueError("cache does not match the parameter stack")

    grads = params.zeros_like()
    if cache.output_activation == "tanh":
        delta = grad_output * (1.0 - cache.output**2)
    else:
        delta = grad_output
    for i in range(params.n_layers - 1, -1, -1):
        below = cache.inputs if i == 0 else cache.activations[i - 1]
        grads.weights[i][...] = delta.T @ below
        grads.biases[i][...] = delta.sum(axis=0)
        delta = delta @ params.weights[i]
        if i > 0:
            delta = delta * (cache.pre_activations[i - 1] > 0.0)
    return grads, delta


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the parameters."""

    m: DenseParams
    v: DenseParams
    t: int = 0

    @classmethod
    def zeros_like(cls, params: DenseParams) -> "AdamState":
        return cls(m=params.zeros_like(), v=params.zeros_like(), t=0)


def adam_step(
    params: DenseParams,
    grads: DenseParams,
    state: AdamState,
    lr: float = 3e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[DenseParams, AdamState]:
    """One bias-corrected Adam update; rejects non-finite gradients."""
    if not grads.is_finite():
        raise FloatingPointError("non-finite gradient, refusing to update parameters")
    t = state.t + 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    new_w, new_b, m_w, m_b, v_w, v_b = [], [], [], [], [], []
    for p, g, m, v in zip(params.weights, grads.weights, state.m.weights, state.v.weights):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        new_w.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        m_w.append(m)
        v_w.append(v)
    for p, g, m, v in zip(params.biases, grads.biases, state.m.biases, state.v.biases):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        new_b.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        m_b.append(m)
        v_b.append(v)
    return DenseParams(new_w, new_b), AdamState(DenseParams(m_w, m_b), DenseParams(v_w, v_b), t)


# ----------------------------------------------------------------------
# Checkpoint container: named float64 arrays in a little-endian layout.
#
#   magic "SCPK" | u32 version | u32 entry count, then per entry:
#   u16 name length | name utf-8 | u8 ndim | u32 dims... | f64 data
#
# Round trips are bit exact.
_MAGIC = b"SCPK"
_VERSION = 1


def save_arrays(path, arrays: Dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(arrays)))
        for name in sorted(arrays):
            arr = np.asarray(arrays[name], dtype="<f8")
            if not arr.flags.c_contiguous:
                arr = arr.copy()
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_arrays(path) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    arrays: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        n_bytes = 8 * int(np.prod(shape)) if ndim else 8
        arr = np.frombuffer(data[offset : offset + n_bytes], dtype="<f8").reshape(shape)
        offset += n_bytes
        arrays[name] = arr.astype(float)
    return arrays


def pack_params(prefix: str, params: DenseParams, arrays: Dict[str, np.ndarray]) -> None:
    """Write a parameter stack into a checkpoint dict under layer-indexed names."""
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"{prefix}.w{i}"] = w
        arrays[f"{prefix}.b{i}"] = b


def unpack_params(prefix: str, arrays: Dict[str, np.ndarray]) -> DenseParams:
    weights, biases = [], []
    i = 0
    while f"{prefix}.w{i}" in arrays:
        weights.append(np.array(arrays[f"{prefix}.w{i}"]))
        biases.append(np.array(arrays[f"{prefix}.b{i}"]))
        i += 1
    if not weights:
        raise ValueError(f"checkpoint holds no parameters under {prefix!r}")
    return DenseParams(weights, biases)
