"""Compare the compiled and numpy backends on the dense kernel sums.

    python3 benchmarks/bench_accel.py [--n 4096] [--repeat 3]

The numpy path is selected per call through ZYGCOMM_DISABLE_NUMBA, so both
runs share one process and identical inputs.
"""

import argparse
import os
import time

import numpy as np

from zygcomm import _accel
from zygcomm.kernels import get_kernel


def _timed(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _backend(disabled):
    if disabled:
        os.environ["ZYGCOMM_DISABLE_NUMBA"] = "1"
    else:
        os.environ.pop("ZYGCOMM_DISABLE_NUMBA", None)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    X = rng.uniform(0.0, 1.0, size=(args.n, 3))
    Y = X + np.array([2.0, 2.0, 5.0])
    w = rng.uniform(-1.0, 1.0, size=args.n)
    bx, by = X[:, 2].copy(), Y[:, 2].copy()
    k = get_kernel("nagel-wainger")

    cases = {
        "apply": lambda: _accel.apply(k, X, Y, w),
        "apply^T": lambda: _accel.apply(k, X, Y, w, transpose=True),
        "commutator": lambda: _accel.commutator_rows(k, X, Y, bx, by, w),
    }
    if not _accel.HAVE_NUMBA:
        print("numba not importable; only the numpy backend is available")
    print(f"n = {args.n}  ({args.n * args.n:.2e} kernel evaluations per call)")
    print(f"{'case':<12}{'numba s':>10}{'numpy s':>10}{'speedup':>9}{'max rel diff':>14}")
    for name, fn in cases.items():
        _backend(False)
        fn()  # compile outside the timing
        t_nb, a = _timed(fn, args.repeat)
        _backend(True)
        t_np, b = _timed(fn, args.repeat)
        _backend(False)
        diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
        print(f"{name:<12}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>9.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
