"""LSTM cell and sequence model.

Gates follow the classic formulation in which the output gate has no bias
unless ``b_o`` is supplied; the hidden state is ``h_t = o_t * tanh(C_t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .fc import FCLayer, fc_layer_forward


def sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class LstmParams:
    W_i: np.ndarray  # (hidden, input + hidden), acts on [X_t, h_{t-1}]
    W_f: np.ndarray
    W_C: np.ndarray
    W_xo: np.ndarray  # (hidden, input)
    W_ho: np.ndarray  # (hidden, hidden)
    b_i: np.ndarray
    b_f: np.ndarray
    b_C: np.ndarray
    b_o: np.ndarray | None = None

    def __post_init__(self):
        for name in ("W_i", "W_f", "W_C", "W_xo", "W_ho", "b_i", "b_f", "b_C", "b_o"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.atleast_1d(np.asarray(v, dtype=np.float64)))
        h = self.hidden_size
        n = self.input_size
        for name in ("W_i", "W_f", "W_C"):
            if getattr(self, name).shape != (h, n + h):
                raise ValueError(f"{name} must have shape {(h, n + h)}, got {getattr(self, name).shape}")
        if self.W_xo.shape != (h, n):
            raise ValueError(f"W_xo must have shape {(h, n)}, got {self.W_xo.shape}")
        if self.W_ho.shape != (h, h):
            raise ValueError(f"W_ho must have shape {(h, h)}, got {self.W_ho.shape}")
        for name in ("b_i", "b_f", "b_C", "b_o"):
            v = getattr(self, name)
            if v is not None and v.shape != (h,):
                raise ValueError(f"{name} must have shape {(h,)}, got {v.shape}")

    @property
    def hidden_size(self) -> int:
        return self.W_ho.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_xo.shape[1]

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int, output_bias: bool = False) -> "LstmParams":
        h, n = hidden_size, input_size
        z = np.zeros
        return cls(z((h, n + h)), z((h, n + h)), z((h, n + h)), z((h, n)), z((h, h)),
                   z(h), z(h), z(h), z(h) if output_bias else None)

    @classmethod
    def random(cls, rng: np.random.Generator, input_size: int, hidden_size: int,
               scale: float = 0.3, output_bias: bool = False) -> "LstmParams":
        h, n = hidden_size, input_size

        def r(*shape):
            return rng.normal(0.0, scale, size=shape)

        return cls(r(h, n + h), r(h, n + h), r(h, n + h), r(h, n), r(h, h),
                   r(h), r(h), r(h), r(h) if output_bias else None)


class LstmStep(NamedTuple):
    h: np.ndarray
    C: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    C_tilde: np.ndarray


def lstm_cell(x_t, h_prev, C_prev, p: LstmParams) -> LstmStep:
    x_t = np.atleast_1d(np.asarray(x_t, dtype=np.float64))
    h_prev = np.atleast_1d(np.asarray(h_prev, dtype=np.float64))
    C_prev = np.atleast_1d(np.asarray(C_prev, dtype=np.float64))
    if x_t.shape != (p.input_size,):
        raise ValueError(f"input length {x_t.shape} != {p.input_size}")
    if h_prev.shape != (p.hidden_size,) or C_prev.shape != (p.hidden_size,):
        raise ValueError(f"state length must be {p.hidden_size}")
    xh = np.concatenate([x_t, h_prev])
    i = sigmoid(p.W_i @ xh + p.b_i)
    f = sigmoid(p.W_f @ xh + p.b_f)
    zo = p.W_xo @ x_t + p.W_ho @ h_prev
    if p.b_o is not None:
        zo = zo + p.b_o
    o = sigmoid(zo)
    C_tilde = np.tanh(p.W_C @ xh + p.b_C)
    C = f * C_prev + i * C_tilde
    h = o * np.tanh(C)
    return LstmStep(h, C, i, f, o, C_tilde)


@dataclass(frozen=True)
class LstmModel:
    cell: LstmParams
    head: FCLayer  # identity output layer on h_T

    def __post_init__(self):
        if self.head.n_in != self.cell.hidden_size:
            raise ValueError("output layer fan-in must equal the hidden size")


def lstm_hidden(p: LstmParams, sequence) -> np.ndarray:
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim == 1:
        seq = seq[:, None]
    if seq.shape[0] < 1:
        raise ValueError("sequence must contain at least one step")
    h = np.zeros(p.hidden_size)
    C = np.zeros(p.hidden_size)
    for x_t in seq:
        h, C, *_ = lstm_cell(x_t, h, C, p)
    return h


def lstm_forward(model: LstmModel, sequence, workers: int = 1) -> np.ndarray:
    return fc_layer_forward(model.head, lstm_hidden(model.cell, sequence), workers)
