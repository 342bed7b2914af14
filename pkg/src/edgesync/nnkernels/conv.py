"""Depthwise convolution and max pooling with per-element parallel tasks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .. import _accel
from . import _kernels
from .parallel import run_tasks


class ShapeError(ValueError):
    pass


class TensorShape(NamedTuple):
    depth: int
    height: int
    width: int


@dataclass(frozen=True)
class ConvSpec:
    filter: np.ndarray  # (D_f, H_f, W_f)
    padding: int = 0
    stride: int = 1

    def __post_init__(self):
        f = np.asarray(self.filter, dtype=np.float64)
        if f.ndim == 2:
            f = f[None]
        if f.ndim != 3:
            raise ShapeError(f"filter must be 3-D, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ShapeError("filter values must be finite")
        if self.stride < 1:
            raise ShapeError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ShapeError(f"padding must be >= 0, got {self.padding}")
        object.__setattr__(self, "filter", f)

    @property
    def shape(self) -> TensorShape:
        return TensorShape(*self.filter.shape)


@dataclass(frozen=True)
class ConvPlan:
    output: TensorShape
    n_tasks: int
    padding: int
    stride: int
    filter_shape: TensorShape

    def region(self, t: int) -> tuple[int, int, int, int]:
        """Region bounds of flat task ``t`` in the padded input."""
        plane = self.output.height * self.output.width
        i, j = divmod(t % plane, self.output.width)
        return conv_area(i, j, self.stride, self.filter_shape)


def conv_output_shape(x, f, padding: int, stride: int) -> TensorShape:
    x, f = TensorShape(*x), TensorShape(*f)
    if min(x) < 1 or min(f) < 1:
        raise ShapeError(f"shapes must be positive, got {tuple(x)} and {tuple(f)}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"need stride >= 1 and padding >= 0, got S={stride}, P={padding}")
    if x.depth != f.depth:
        raise ShapeError(f"depth mismatch: input {x.depth} vs filter {f.depth}")
    dims = []
    for name, xs, fs in (("height", x.height, f.height), ("width", x.width, f.width)):
        span = xs - fs + 2 * padding
        if span < 0:
            raise ShapeError(f"filter {name} {fs} exceeds padded input {xs + 2 * padding}")
        q, r = divmod(span, stride)
        if r:
            raise ShapeError(
                f"non-integral output {name}: ({xs} - {fs} + 2*{padding})/{stride} + 1"
            )
        dims.append(q + 1)
    return TensorShape(x.depth, dims[0], dims[1])


def conv_area(i: int, j: int, stride: int, f) -> tuple[int, int, int, int]:
    """(r_s, r_e, c_s, c_e), end-exclusive, in padded-input coordinates."""
    f = TensorShape(*f)
    rs, cs = i * stride, j * stride
    return rs, rs + f.height, cs, cs + f.width


def conv_plan(x_shape, spec: ConvSpec) -> ConvPlan:
    out = conv_output_shape(x_shape, spec.shape, spec.padding, spec.stride)
    return ConvPlan(out, out.depth * out.height * out.width, spec.padding, spec.stride, spec.shape)


def pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return np.ascontiguousarray(x, dtype=np.float64)
    return np.pad(np.asarray(x, dtype=np.float64), ((0, 0), (p, p), (p, p)))


def conv_forward(x: np.ndarray, spec: ConvSpec, workers: int = 1) -> np.ndarray:
    """Depthwise convolution: one task per output element, any worker count."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.ndim == 2
    if flat:
        x = x[None]
    plan = conv_plan(x.shape, spec)
    xpad = pad(x, spec.padding)
    out = np.empty(plan.n_tasks)
    ha, wa = plan.output.height, plan.output.width
    kern = _kernels.conv_range_nb if _accel.use_numba() else _kernels.conv_range_np
    f = spec.filter
    run_tasks(plan.n_tasks, workers,
              lambda s, e: kern(xpad, f, spec.stride, ha, wa, s, e, out))
    out = out.reshape(plan.output)
    return out[0] if flat else out


def pool_output_shape(a_shape, window: int = 2, stride: int = 2) -> TensorShape:
    a = TensorShape(*a_shape)
    if window < 1 or stride < 1:
        raise ShapeError("pool window and stride must be >= 1")
    dims = []
    for name, n in (("height", a.height), ("width", a.width)):
        if n < window or (n - window) % stride:
            raise ShapeError(f"non-integral pooled {name}: ({n} - {window})/{stride} + 1")
        dims.append((n - window) // stride + 1)
    return TensorShape(a.depth, dims[0], dims[1])


def pool_forward(a: np.ndarray, window: int = 2, stride: int = 2, workers: int = 1) -> np.ndarray:
    """Max pooling per depth slice."""
    a = np.asarray(a, dtype=np.float64)
    flat = a.ndim == 2
    if flat:
        a = a[None]
    shp = pool_output_shape(a.shape, window, stride)
    n = shp.depth * shp.height * shp.width
    out = np.empty(n)
    kern = _kernels.maxpool_range_nb if _accel.use_numba() else _kernels.maxpool_range_np
    a = np.ascontiguousarray(a)
    run_tasks(n, workers,
              lambda s, e: kern(a, window, stride, shp.height, shp.width, s, e, out))
    out = out.reshape(shp)
    return out[0] if flat else out
