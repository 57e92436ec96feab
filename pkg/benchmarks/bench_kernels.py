"""Compare the compiled and NumPy kernel backends on the solver hot loops.

Usage: python3 benchmarks/bench_kernels.py [--m 100] [--n 200] [--iters 2000]
"""
import argparse
import time

import numpy as np

from parqo import kernels
from parqo.solvers import LinearSystem, default_drs_gamma, solve_ls
from parqo.streams import complex_normal, make_rng


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=100)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = make_rng(7)
    sys = LinearSystem(complex_normal(rng, (args.m, args.n)), complex_normal(rng, (args.m,)))
    x0 = solve_ls(sys)
    gamma = default_drs_gamma(sys)
    V = complex_normal(rng, (2048, 128))
    k = args.iters

    cases = {
        "fbs (4,2)": lambda: kernels.fbs_run(x0, sys.A, sys.gram_factor, sys.y, 4.0, 2.0, 0.25, k),
        "fbs (2,1)": lambda: kernels.fbs_run(x0, sys.A, sys.gram_factor, sys.y, 2.0, 1.0, 2**-7, k),
        "drs linf": lambda: kernels.drs_run(x0, np.zeros_like(x0), sys.A, sys.gram_factor,
                                            sys.y, gamma, 4.0, 2.0, k),
        "grad cols 2048x128": lambda: kernels.grad_lplq_cols(V, 4.0, 2.0),
        "l1 proj cols 2048x128": lambda: kernels.project_l1_ball_cols(V, 1.0),
    }
    per_iter = {"fbs (4,2)", "fbs (2,1)", "drs linf"}
    backends = kernels.available()
    active = kernels.BACKEND
    print(f"system {args.m}x{args.n}, {k} iterations, best of {args.repeat}")
    print(f"{'case':<24}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    try:
        for name, fn in cases.items():
            times = []
            for b in backends:
                kernels.use(b)
                t = bench(fn, args.repeat)
                times.append(t / k * 1e6 if name in per_iter else t * 1e3)
            unit = "us/it" if name in per_iter else "ms"
            cols = "".join(f"{t:>9.2f} {unit:<4}" for t in times)
            speed = f"{times[-1] / times[0]:>9.1f}x" if len(times) > 1 else ""
            print(f"{name:<24}{cols}{speed}")
    finally:
        kernels.use(active)


if __name__ == "__main__":
    main()
