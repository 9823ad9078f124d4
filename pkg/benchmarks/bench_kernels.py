"""Time the numba and pure-numpy flavour of every hot kernel.

    python benchmarks/bench_kernels.py [--repeat 5] [--json]

Both flavours are imported explicitly, so ``FIBO_NO_NUMBA`` does not matter
here. Without numba installed the "numba" column runs the plain-Python loop.
"""
import argparse
import json
import timeit

import numpy as np

from fibomask import _accel, kernels
from fibomask.maskgen import HeadMaskConfig, fibottention_base_masks


def cases():
    mask = fibottention_base_masks(HeadMaskConfig(n_patches=784, w_max=260))[-1]
    offsets = np.asarray(mask.offsets, dtype=np.int64)
    rng = np.random.default_rng(0)
    q = rng.normal(size=(785, 64))
    k = rng.normal(size=(785, 64))
    rows, cols = mask.pairs()
    rows, cols = rows.astype(np.int64), cols.astype(np.int64)
    return {
        "band_mask N=784": (
            lambda: kernels.band_mask_numba(784, offsets, False, True),
            lambda: kernels.band_mask_numpy(784, offsets, False, True),
        ),
        f"pair_dots {rows.size} pairs, d_h=64": (
            lambda: kernels.pair_dots_numba(q, k, rows, cols, 0.125),
            lambda: kernels.pair_dots_numpy(q, k, rows, cols, 0.125),
        ),
        "sample_distinct 4000 of 614656": (
            lambda: kernels.sample_distinct_numba(784 * 784, 4000, 42),
            lambda: kernels.sample_distinct_numpy(784 * 784, 4000, 42),
        ),
        "row_membership 1e4 rows": (
            lambda: kernels.row_membership_numba(10_000, 10_000, False),
            lambda: kernels.row_membership_numpy(10_000, 10_000, False),
        ),
    }


def best_of(fn, repeat):
    fn()  # warm-up, includes jit compilation
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", action="store_true", help="print machine-readable results")
    args = parser.parse_args()

    results = []
    for name, (fast, slow) in cases().items():
        t_fast, t_slow = best_of(fast, args.repeat), best_of(slow, args.repeat)
        results.append({"kernel": name, "numba_s": t_fast, "numpy_s": t_slow, "speedup": t_slow / t_fast})

    if args.json:
        print(json.dumps({"numba_available": _accel.HAVE_NUMBA, "results": results}, indent=2))
        return
    print(f"numba available: {_accel.HAVE_NUMBA}")
    print(f"{'kernel':<36}{'numba':>12}{'numpy':>12}{'speedup':>9}")
    for r in results:
        print(f"{r['kernel']:<36}{r['numba_s'] * 1e3:>10.3f}ms{r['numpy_s'] * 1e3:>10.3f}ms{r['speedup']:>8.1f}x")


if __name__ == "__main__":
    main()
