"""Time A u on G_N^1 (p = 2) for the numpy and numba backends and the dense product.

    python benchmarks/bench_matvec.py --N 3 5 7 9 --repeat 5

Run with PADR_THREADS=k to cap the numba pool.  Times are the best of
``--repeat`` batches, reported per application.
"""
import argparse
import timeit

import numpy as np

from padr import _accel
from padr.grid import GridParams
from padr.kernel import RadialKernel, normalize, truncate
from padr.operator import DENSE_LIMIT, build, dense_matrix, matvec_dense, matvec_fast


def per_call(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--N", type=int, nargs="+", default=[3, 5, 6, 8, 10])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--gamma", type=float, default=1.0)
    args = ap.parse_args()

    J = normalize(RadialKernel.exp_landscape(args.gamma), args.p, 1)
    rng = np.random.default_rng(0)
    print(f"numba available: {_accel.HAVE_NUMBA}, threads: {_accel.thread_count()}")
    print(f"{'N':>3} {'M':>9} {'numpy_us':>10} {'numba_us':>10} {'dense_us':>10} {'speedup':>8} {'max_diff':>10}")
    for N in args.N:
        params = GridParams(args.p, 1, N)
        op = build(params, truncate(J, params))
        u = rng.standard_normal(op.M)
        ref = matvec_fast(op, u, backend="numpy")
        t_np = per_call(lambda: matvec_fast(op, u, backend="numpy"), args.repeat)
        t_nb = diff = float("nan")
        if _accel.HAVE_NUMBA:
            diff = float(np.abs(matvec_fast(op, u, backend="numba") - ref).max())
            t_nb = per_call(lambda: matvec_fast(op, u, backend="numba"), args.repeat)
        t_dense = float("nan")
        if op.M <= DENSE_LIMIT:
            dense_matrix(op)
            t_dense = per_call(lambda: matvec_dense(op, u), args.repeat)
        print(f"{N:>3} {op.M:>9} {t_np * 1e6:>10.1f} {t_nb * 1e6:>10.1f} {t_dense * 1e6:>10.1f} {t_np / t_nb:>8.2f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
