"""Inner loops for convolution, pooling, and fully-connected neurons.

Each kernel evaluates the flat task range ``[start, stop)`` and writes only
``out[start:stop]``. The numba and numpy variants accumulate every output
element in the same row-major order.
"""

import numpy as np

from .._accel import njit

ACT_IDENTITY, ACT_SIGMOID, ACT_RELU = 0, 1, 2


@njit
def conv_range_nb(xpad, f, stride, ha, wa, start, stop, out):
    hf = f.shape[1]
    wf = f.shape[2]
    plane = ha * wa
    for t in range(start, stop):
        d = t // plane
        r = t - d * plane
        i = r // wa
        j = r - i * wa
        rs = i * stride
        cs = j * stride
        acc = 0.0
        for u in range(hf):
            for v in range(wf):
                acc += xpad[d, rs + u, cs + v] * f[d, u, v]
        out[t] = acc


def conv_range_np(xpad, f, stride, ha, wa, start, stop, out):
    t = np.arange(start, stop)
    plane = ha * wa
    d = t // plane
    r = t - d * plane
    i = r // wa
    j = r - i * wa
    rs = i * stride
    cs = j * stride
    acc = np.zeros(t.shape[0])
    for u in range(f.shape[1]):
        for v in range(f.shape[2]):
            acc += xpad[d, rs + u, cs + v] * f[d, u, v]
    out[start:stop] = acc


@njit
def maxpool_range_nb(a, window, stride, hp, wp, start, stop, out):
    plane = hp * wp
    for t in range(start, stop):
        d = t // plane
        r = t - d * plane
        i = r // wp
        j = r - i * wp
        best = a[d, i * stride, j * stride]
        for u in range(window):
            for v in range(window):
                x = a[d, i * stride + u, j * stride + v]
                if x > best:
                    best = x
        out[t] = best


def maxpool_range_np(a, window, stride, hp, wp, start, stop, out):
    t = np.arange(start, stop)
    plane = hp * wp
    d = t // plane
    r = t - d * plane
    i = r // wp
    j = r - i * wp
    best = a[d, i * stride, j * stride]
    for u in range(window):
        for v in range(window):
            best = np.maximum(best, a[d, i * stride + u, j * stride + v])
    out[start:stop] = best


@njit
def fc_range_nb(w, x, bias, act, start, stop, out):
    n_in = w.shape[1]
    for i in range(start, stop):
        acc = 0.0
        for j in range(n_in):
            acc += w[i, j] * x[j]
        z = acc + bias[i]
        if act == ACT_SIGMOID:
            out[i] = 1.0 / (1.0 + np.exp(-z))
        elif act == ACT_RELU:
            out[i] = z if z > 0.0 else 0.0
        else:
            out[i] = z


def fc_range_np(w, x, bias, act, start, stop, out):
    acc = np.zeros(stop - start)
    for j in range(w.shape[1]):
        acc += w[start:stop, j] * x[j]
    z = acc + bias[start:stop]
    if act == ACT_SIGMOID:
        with np.errstate(over="ignore"):
            z = 1.0 / (1.0 + np.exp(-z))
    elif act == ACT_RELU:
        z = np.where(z > 0.0, z, 0.0)
    out[start:stop] = z
