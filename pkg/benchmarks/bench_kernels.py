"""Compiled kernels vs the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 16 64 256]

Part one times ``twisted_products`` and ``bilinear_form`` from both modules
directly. Part two times an end-to-end ``mul`` of two dense elements in a
fresh interpreter per backend, since the backend is fixed at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from nctorus import _kernels_py

try:
    from nctorus import _kernels as _compiled
except ImportError:
    _compiled = None

END_TO_END = """
import timeit
from nctorus import kernels
from nctorus.torus import DeformationPoint, SkewMatrix, TorusElement, mul
import numpy as np
rng = np.random.default_rng(0)
n, size = 3, {size}
th = SkewMatrix.from_lower(n, {{(2, 1): 0.31, (3, 1): -0.27, (3, 2): 0.77}})
p = DeformationPoint(th, 0.9)
def elem():
    idx = rng.integers(-6, 7, (size, n))
    return TorusElement(n, {{tuple(int(v) for v in a): complex(*rng.normal(size=2)) for a in idx}})
x, y = elem(), elem()
fn = lambda: mul(x, y, p)
number = 1
while timeit.timeit(fn, number=number) < 0.05:
    number *= 2
best = min(timeit.repeat(fn, number=number, repeat={repeat})) / number
print(kernels.BACKEND, best)
"""


def inputs(size, n=3, seed=0):
    rng = np.random.default_rng(seed)
    ia = rng.integers(-8, 9, (size, n)).astype(np.int64)
    ib = rng.integers(-8, 9, (size, n)).astype(np.int64)
    ca = rng.normal(size=size) + 1j * rng.normal(size=size)
    cb = rng.normal(size=size) + 1j * rng.normal(size=size)
    lower = np.zeros((n, n))
    lower[1, 0], lower[2, 0], lower[2, 1] = 0.31, -0.27, 0.77
    return ia, ca, ib, cb, lower


def best_of(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def kernel_rows(sizes, repeat):
    print(f"{'kernel':<18} {'size':>6} {'python [s]':>12} {'compiled [s]':>13} {'speedup':>8}")
    for size in sizes:
        ia, ca, ib, cb, lower = inputs(size)
        cases = {
            "twisted_products": lambda m: m.twisted_products(ia, ca, ib, cb, lower, 0.9),
            "bilinear_form": lambda m: m.bilinear_form(lower, ia, ib),
        }
        for name, call in cases.items():
            tp = best_of(lambda: call(_kernels_py), repeat)
            if _compiled is None:
                print(f"{name:<18} {size:>6} {tp:12.3e} {'n/a':>13} {'':>8}")
                continue
            tc = best_of(lambda: call(_compiled), repeat)
            print(f"{name:<18} {size:>6} {tp:12.3e} {tc:13.3e} {tp / tc:8.2f}")


def end_to_end(sizes, repeat):
    print(f"\n{'mul (end to end)':<18} {'size':>6} {'python [s]':>12} {'compiled [s]':>13} {'speedup':>8}")
    for size in sizes:
        times = {}
        for pure in ("1", "0"):
            env = dict(os.environ, NCT_PURE=pure)
            out = subprocess.run(
                [sys.executable, "-c", END_TO_END.format(size=size, repeat=repeat)],
                env=env, capture_output=True, text=True, check=True,
            )
            backend, t = out.stdout.split()
            times[backend] = float(t)
        tp, tc = times.get("python"), times.get("compiled")
        if tc is None:
            print(f"{'mul':<18} {size:>6} {tp:12.3e} {'n/a':>13}")
        else:
            print(f"{'mul':<18} {size:>6} {tp:12.3e} {tc:13.3e} {tp / tc:8.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 64, 256])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _compiled is None:
        print("compiled extension not built; only the fallback is timed\n")
    kernel_rows(args.sizes, args.repeat)
    end_to_end(args.sizes, args.repeat)


if __name__ == "__main__":
    main()
