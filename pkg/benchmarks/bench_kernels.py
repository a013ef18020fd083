"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat R]

Prints one CSV row per (kernel, size): median seconds for each backend,
the speedup, and the largest difference between their results.
"""
import argparse
import statistics
import time

import numpy as np

from antisymrnn._kernels import _pykernels
from antisymrnn.core import SeededRng

try:
    from antisymrnn._kernels import _ckernels
except ImportError:
    _ckernels = None


def timed(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times), out


def cases(rng):
    for n in (16, 64, 128):
        a = rng.normal(n * n).reshape(n, n)
        b = rng.normal(n * n).reshape(n, n)
        yield "matmul_lr", n, (a, b), lambda r: r
    for n in (16, 64, 128):
        m = rng.normal(n * n).reshape(n, n)
        yield "eigvals_real", n, (m, 1e-12, 100 * n), lambda r: np.sort(np.abs(r[0] + 1j * r[1]))
    for k in (5, 21):
        h0 = rng.normal(2 * k * k).reshape(k * k, 2)
        x = rng.normal(k * k * 200 * 2).reshape(k * k, 200, 2)
        yield "euler_portrait", k * k, (np.array([[0.3, 1.2], [-0.8, 0.1]]), True, h0, x, 0.1, 200, 1e12), \
            lambda r: r[0]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e .` first")
    print("kernel,size,cython_s,python_s,speedup,max_abs_diff")
    for name, size, inputs, view in cases(SeededRng(0)):
        tc, rc = timed(lambda: getattr(_ckernels, name)(*inputs), args.repeat)
        tp, rp = timed(lambda: getattr(_pykernels, name)(*inputs), args.repeat)
        diff = float(np.max(np.abs(view(rc) - view(rp))))
        print(f"{name},{size},{tc:.3e},{tp:.3e},{tp / tc:.1f},{diff:.1e}")


if __name__ == "__main__":
    main()
