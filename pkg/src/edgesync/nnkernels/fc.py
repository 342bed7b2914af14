"""Fully-connected layers: per-neuron parallel forward pass and SGD on squared error."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .. import _accel
from . import _kernels
from .parallel import partition, run_tasks

ACTIVATIONS = {
    "identity": _kernels.ACT_IDENTITY,
    "sigmoid": _kernels.ACT_SIGMOID,
    "relu": _kernels.ACT_RELU,
}


@dataclass(frozen=True)
class FCLayer:
    weights: np.ndarray  # (n_out, n_in); weights[i, j] connects input j to neuron i
    bias: np.ndarray  # (n_out,)
    activation: str = "identity"

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        b = np.ascontiguousarray(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise ValueError(f"bias length {b.shape[0]} != layer width {w.shape[0]}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


def activate(z, activation: str):
    if activation == "sigmoid":
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-z))
    if activation == "relu":
        return np.where(z > 0.0, z, 0.0)
    if activation == "identity":
        return z
    raise ValueError(f"unknown activation {activation!r}")


def _derivative(a: np.ndarray, activation: str) -> np.ndarray:
    # expressed through the layer output a = f(z)
    if activation == "sigmoid":
        return a * (1.0 - a)
    if activation == "relu":
        return (a > 0.0).astype(np.float64)
    return np.ones_like(a)


def fc_neuron(x, w, bias: float, activation: str = "identity") -> float:
    """One neuron: f(sum_j w_j x_j + bias), accumulated in index order."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if x.shape != w.shape:
        raise ValueError(f"input length {x.shape[0]} != weight length {w.shape[0]}")
    acc = 0.0
    for j in range(x.shape[0]):
        acc += float(w[j]) * float(x[j])
    return float(activate(np.float64(acc + bias), activation))


def fc_subtasks(layer: FCLayer) -> range:
    """Independent sub-tasks of a layer: one per neuron."""
    return range(layer.n_out)


def fc_layer_forward(layer: FCLayer, x, workers: int = 1) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0 or x.shape[0] != layer.n_in:
        raise ValueError(f"input length {x.shape[0]} != layer fan-in {layer.n_in}")
    out = np.empty(layer.n_out)
    act = ACTIVATIONS[layer.activation]
    kern = _kernels.fc_range_nb if _accel.use_numba() else _kernels.fc_range_np
    run_tasks(len(fc_subtasks(layer)), workers,
              lambda s, e: kern(layer.weights, x, layer.bias, act, s, e, out))
    return out


def fc_max_parallelism(layer_sizes: Sequence[int]) -> int:
    if not len(layer_sizes):
        raise ValueError("layer_sizes must be non-empty")
    if any(int(n) < 1 for n in layer_sizes):
        raise ValueError("layer sizes must be positive")
    return max(int(n) for n in layer_sizes)


def fc_schedule(layers: Sequence[FCLayer], workers: int) -> list[list[tuple[int, int]]]:
    """Chunk plan per layer, as executed by :func:`fc_layer_forward`."""
    return [partition(len(fc_subtasks(l)), workers) for l in layers]


def fc_forward(layers: Sequence[FCLayer], x, workers: int = 1) -> list[np.ndarray]:
    """Activations of every layer, input first."""
    acts = [np.asarray(x, dtype=np.float64).reshape(-1)]
    for layer in layers:
        acts.append(fc_layer_forward(layer, acts[-1], workers))
    return acts


def fc_loss(layers: Sequence[FCLayer], x, target) -> float:
    y = fc_forward(layers, x)[-1]
    t = np.asarray(target, dtype=np.float64).reshape(-1)
    if y.shape != t.shape:
        raise ValueError(f"target length {t.shape[0]} != output width {y.shape[0]}")
    return 0.5 * float(np.sum((y - t) ** 2))


def fc_gradients(layers: Sequence[FCLayer], x, target) -> list[tuple[np.ndarray, np.ndarray]]:
    """Analytic gradients of 0.5*||y - target||^2 w.r.t. every (weights, bias)."""
    acts = fc_forward(layers, x)
    t = np.asarray(target, dtype=np.float64).reshape(-1)
    if acts[-1].shape != t.shape:
        raise ValueError(f"target length {t.shape[0]} != output width {acts[-1].shape[0]}")
    grads = [None] * len(layers)
    delta = (acts[-1] - t) * _derivative(acts[-1], layers[-1].activation)
    for k in range(len(layers) - 1, -1, -1):
        grads[k] = (np.outer(delta, acts[k]), delta.copy())
        if k:
            delta = (layers[k].weights.T @ delta) * _derivative(acts[k], layers[k - 1].activation)
    return grads


def fc_backprop_step(layers: Sequence[FCLayer], x, target, lr: float) -> list[FCLayer]:
    grads = fc_gradients(layers, x, target)
    return [
        replace(l, weights=l.weights - lr * gw, bias=l.bias - lr * gb)
        for l, (gw, gb) in zip(layers, grads)
    ]
