"""Compare the compiled and NumPy B-spline kernels, alone and inside a training epoch.

    python benchmarks/bench_kernels.py [--repeats 20]

Prints per-call kernel time for a few (batch, features) shapes and the
per-epoch training time of a KAN on synthetic standardized data, for every
backend that imports.
"""

import argparse
import time

import numpy as np

from kanbench import kernels
from kanbench.autodiff import Tensor, backward, softmax_cross_entropy
from kanbench.kan import SplineGrid, kan_init
from kanbench.optim import AdamW

SHAPES = [(256, 10), (256, 57), (256, 166), (4096, 30)]


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def kernel_table(backends, grid, repeats):
    rng = np.random.default_rng(0)
    print(f"{'shape':>12} " + " ".join(f"{name:>12}" for name in backends) + "   speedup")
    for shape in SHAPES:
        x = rng.normal(size=shape)
        times = {name: best_of(lambda f=f: f(x, grid.knots, grid.spline_order), repeats)
                 for name, f in backends.items()}
        cells = " ".join(f"{times[n] * 1e3:10.3f}ms" for n in backends)
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{str(shape):>12} {cells}   {speedup:6.2f}x")


def epoch_table(backends, grid, repeats):
    rng = np.random.default_rng(1)
    n, d, h, c = 4096, 30, 10, 2
    x = rng.normal(size=(n, d))
    y = rng.integers(0, c, n)

    def epoch():
        net = kan_init([d, h, c], grid, 0)
        opt = AdamW(net.parameters())
        for s in range(0, n, 256):
            opt.zero_grad()
            loss = softmax_cross_entropy(net(Tensor(x[s:s + 256])), y[s:s + 256])
            backward(loss)
            opt.step()

    print(f"\nKAN [{d}, {h}, {c}] epoch over {n} rows, batch 256")
    original = kernels.bspline_basis
    try:
        for name, f in backends.items():
            kernels.bspline_basis = f
            print(f"  {name:>8}: {best_of(epoch, max(3, repeats // 4)) * 1e3:9.2f} ms")
    finally:
        kernels.bspline_basis = original


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default: {kernels.BACKEND})\n")
    grid = SplineGrid()
    kernel_table(backends, grid, args.repeats)
    epoch_table(backends, grid, args.repeats)


if __name__ == "__main__":
    main()
