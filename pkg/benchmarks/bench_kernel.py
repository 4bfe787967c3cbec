"""Benchmark the compiled Grassmann-ascent kernel against the numpy fallback.

Usage: python3 benchmarks/bench_kernel.py [--reps 20]

Times value_and_grad and the full ascent loop on random problems of growing
size, and checks that both backends reach the same optimum.
"""

import argparse
import time

import numpy as np

from pfcr.kernels import pure

try:
    from pfcr.kernels import _grassmann as compiled
except ImportError:
    compiled = None


def random_problem(rng, p, d):
    M = rng.standard_normal((p, p))
    A = M @ M.T + p * np.eye(p)
    M = rng.standard_normal((p, p))
    B = M @ M.T + p * np.eye(p)
    S, _ = np.linalg.qr(rng.standard_normal((p, d)))
    return (np.ascontiguousarray(S), np.ascontiguousarray(A),
            np.ascontiguousarray(B))


def time_call(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()

    if compiled is None:
        print("compiled extension not available; benchmarking pure backend only")

    rng = np.random.default_rng(0)
    print(f"{'p':>4} {'d':>3} | {'grad pure':>11} {'grad cy':>11} {'speedup':>8} "
          f"| {'ascend pure':>12} {'ascend cy':>12} {'speedup':>8} | f agreement")
    for p, d in [(6, 2), (10, 3), (20, 4), (40, 6), (80, 8)]:
        S, A, B = random_problem(rng, p, d)
        g = np.empty_like(S)

        tp = time_call(lambda: pure.value_and_grad(S, A, B, g), args.reps)
        ap_ = time_call(lambda: pure.ascend(S, A, B, 500, 1e-7, 1.0, 0.5, 1e-4),
                        max(3, args.reps // 4))
        _, fp, _ = pure.ascend(S, A, B, 500, 1e-7, 1.0, 0.5, 1e-4)

        if compiled is not None:
            tc = time_call(lambda: compiled.value_and_grad(S, A, B, g), args.reps)
            ac = time_call(lambda: compiled.ascend(S, A, B, 500, 1e-7, 1.0, 0.5, 1e-4),
                           max(3, args.reps // 4))
            _, fc, _ = compiled.ascend(S, A, B, 500, 1e-7, 1.0, 0.5, 1e-4)
            print(f"{p:>4} {d:>3} | {tp * 1e6:>9.1f}us {tc * 1e6:>9.1f}us "
                  f"{tp / tc:>7.1f}x | {ap_ * 1e3:>10.2f}ms {ac * 1e3:>10.2f}ms "
                  f"{ap_ / ac:>7.1f}x | |df| = {abs(fp - fc):.2e}")
        else:
            print(f"{p:>4} {d:>3} | {tp * 1e6:>9.1f}us {'n/a':>11} {'':>8} "
                  f"| {ap_ * 1e3:>10.2f}ms {'n/a':>12} {'':>8} |")


if __name__ == "__main__":
    main()
