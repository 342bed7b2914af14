"""Compare the numba and pure-numpy kernel backends.

Times convolution, pooling, a fully-connected layer and one CNN forward pass
on each backend, checks the outputs agree, and prints a table. The numba
column excludes JIT compilation (one warm-up call first).

    python benchmarks/bench_kernels.py --repeat 20
"""

import argparse
import time

import numpy as np

from edgesync import _accel
from edgesync.nnkernels import ConvSpec, FCLayer, build_cnn, cnn_forward, conv_forward, fc_layer_forward, pool_forward


def cases(rng, size):
    x = rng.normal(size=(3, size, size))
    spec = ConvSpec(rng.normal(size=(3, 3, 3)), padding=1, stride=1)
    pooled_in = rng.normal(size=(3, size, size))
    layer = FCLayer(rng.normal(size=(256, 1024)), rng.normal(size=256), "sigmoid")
    v = rng.normal(size=1024)
    model = build_cnn(rng, (1, size, size), [(3, 3, 1, 1), (3, 3, 1, 1)], [32, 16, 4])
    frame = rng.random((1, size, size))
    return {
        "conv": lambda: conv_forward(x, spec),
        "pool": lambda: pool_forward(pooled_in),
        "fc": lambda: fc_layer_forward(layer, v),
        "cnn_forward": lambda: cnn_forward(model, frame),
    }


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=64, help="input height and width (even)")
    ap.add_argument("--repeat", type=int, default=10)
    args = ap.parse_args(argv)

    backends = ["numba", "numpy"] if _accel.HAS_NUMBA else ["numpy"]
    if not _accel.HAS_NUMBA:
        print("numba unavailable: timing the numpy backend only")
    work = cases(np.random.default_rng(0), args.size)
    prev = _accel.get_backend()
    times, outputs = {}, {}
    try:
        for b in backends:
            _accel.set_backend(b)
            for name, fn in work.items():
                outputs[b, name] = fn()  # warm-up, compiles under numba
                times[b, name] = best_of(fn, args.repeat)
    finally:
        _accel.set_backend(prev)

    print(f"{'kernel':<12}" + "".join(f"{b + ' ms':>12}" for b in backends)
          + (f"{'speedup':>10}{'max |diff|':>13}" if len(backends) == 2 else ""))
    for name in work:
        row = f"{name:<12}" + "".join(f"{times[b, name] * 1e3:>12.3f}" for b in backends)
        if len(backends) == 2:
            diff = float(np.max(np.abs(outputs["numba", name] - outputs["numpy", name])))
            row += f"{times['numpy', name] / times['numba', name]:>9.1f}x{diff:>13.1e}"
        print(row)


if __name__ == "__main__":
    main()
