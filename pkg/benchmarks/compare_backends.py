"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/compare_backends.py [--sizes 256,1024,4096] [--repeat 3]

Both backends run the same kernel thinning call on the same input, so the
coreset indices are checked for equality alongside the timings.
"""
import argparse
import time

import numpy as np

from kthin import _backend
from kthin.kernels import KernelSpec
from kthin.thinning import kernel_thinning

KERNELS = {
    "gaussian": lambda d: KernelSpec.gaussian(d, np.sqrt(2.0 * d)),
    "matern": lambda d: KernelSpec.matern(d, d + 1.5, 1.0),
    "bspline": lambda d: KernelSpec.bspline(d, 3),
}


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="256,1024,4096")
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--kernels", default="gaussian,matern,bspline")
    args = ap.parse_args()
    if "compiled" not in _backend.BACKENDS:
        raise SystemExit("compiled extension not built; run `pip install -e .` first")

    print(f"{'kernel':<9} {'n':>6} {'compiled_s':>11} {'python_s':>10} {'speedup':>8}  same")
    for name in args.kernels.split(","):
        k = KERNELS[name](args.dim)
        for n in map(int, args.sizes.split(",")):
            m = int(np.log2(n)) // 2
            X = np.random.default_rng(n).standard_normal((n, args.dim))
            times, outs = {}, {}
            for backend in ("compiled", "python"):
                _backend.use(backend)
                times[backend], outs[backend] = best_time(lambda: kernel_thinning(k, None, X, m, seed=1), args.repeat)
            same = np.array_equal(outs["compiled"].indices, outs["python"].indices)
            ratio = times["python"] / times["compiled"]
            print(f"{name:<9} {n:>6} {times['compiled']:>11.4f} {times['python']:>10.4f} {ratio:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
