"""CNN built as {conv -> pool} x 2 followed by three fully-connected layers."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .conv import ConvSpec, ShapeError, TensorShape, conv_forward, conv_output_shape, pool_forward, pool_output_shape
from .fc import FCLayer, fc_forward


@dataclass(frozen=True)
class CnnModel:
    input_shape: TensorShape
    convs: tuple[ConvSpec, ...]
    fc: tuple[FCLayer, ...]
    pool_window: int = 2
    pool_stride: int = 2

    def __post_init__(self):
        object.__setattr__(self, "input_shape", TensorShape(*self.input_shape))
        self.feature_shape()  # raises on a broken chain
        if not self.fc:
            raise ShapeError("at least one fully-connected layer is required")
        if self.fc[0].n_in != int(np.prod(self.feature_shape())):
            raise ShapeError(
                f"first FC fan-in {self.fc[0].n_in} != flattened features {int(np.prod(self.feature_shape()))}"
            )
        for a, b in zip(self.fc, self.fc[1:]):
            if b.n_in != a.n_out:
                raise ShapeError(f"FC chain broken: {a.n_out} -> {b.n_in}")

    def feature_shape(self) -> TensorShape:
        shp = self.input_shape
        for c in self.convs:
            shp = conv_output_shape(shp, c.shape, c.padding, c.stride)
            shp = pool_output_shape(shp, self.pool_window, self.pool_stride)
        return shp

    def with_fc(self, fc: Sequence[FCLayer]) -> "CnnModel":
        return replace(self, fc=tuple(fc))


def build_cnn(rng: np.random.Generator, input_shape, conv_layers, fc_sizes,
              hidden_activation: str = "relu", weight_scale: float = 0.3) -> CnnModel:
    """``conv_layers`` is a list of (filter_h, filter_w, padding, stride) tuples."""
    shp = TensorShape(*input_shape)
    convs = []
    for fh, fw, p, s in conv_layers:
        f = rng.normal(0.0, 1.0 / np.sqrt(fh * fw), size=(shp.depth, fh, fw))
        spec = ConvSpec(f, padding=p, stride=s)
        convs.append(spec)
        shp = pool_output_shape(conv_output_shape(shp, spec.shape, p, s))
    fan_in = shp.depth * shp.height * shp.width
    layers = []
    for k, n in enumerate(fc_sizes):
        act = "sigmoid" if k == len(fc_sizes) - 1 else hidden_activation
        w = rng.normal(0.0, weight_scale / np.sqrt(fan_in), size=(n, fan_in))
        layers.append(FCLayer(w, np.zeros(n), act))
        fan_in = n
    return CnnModel(TensorShape(*input_shape), tuple(convs), tuple(layers))


def cnn_features(model: CnnModel, frame, workers: int = 1) -> np.ndarray:
    a = np.asarray(getattr(frame, "tensor", frame), dtype=np.float64)
    if a.shape != tuple(model.input_shape):
        raise ShapeError(f"frame shape {a.shape} != model input {tuple(model.input_shape)}")
    for c in model.convs:
        a = conv_forward(a, c, workers)
        a = pool_forward(a, model.pool_window, model.pool_stride, workers)
    return a.reshape(-1)


def cnn_forward(model: CnnModel, frame, workers: int = 1) -> np.ndarray:
    return fc_forward(model.fc, cnn_features(model, frame, workers), workers)[-1]
