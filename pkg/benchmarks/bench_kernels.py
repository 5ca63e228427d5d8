"""Timing comparison of the numba kernels against the numpy fallbacks.

Run: python3 benchmarks/bench_kernels.py
The numpy path is what you get with CEXDEX_DISABLE_NUMBA=1; both paths are
exercised here directly so one process can report both.
"""

import time

import numpy as np

from cexdex import _kernels as k


def bench(fn, *args, repeat=5, warmup=1):
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(7)

    n_quotes, n_lookups = 2_000_000, 500_000
    ts = np.cumsum(rng.integers(1, 200, n_quotes)).astype(np.int64)
    bid = 100.0 + rng.normal(0, 0.1, n_quotes).cumsum()
    ask = bid + 0.01
    queries = rng.integers(ts[0], ts[-1], n_lookups).astype(np.int64)
    queries.sort()

    n_trades, n_offsets = 200_000, 23
    pa = 100.0 + rng.normal(0, 1, (n_trades, n_offsets))
    pb = 1.0 + rng.normal(0, 0.001, (n_trades, n_offsets))
    x = rng.uniform(0.1, 10.0, n_trades)
    y = x * 100.0

    cases = [
        ("step_mid_lookup", (ts, bid, ask, queries, 5000),
         k._step_mid_lookup_np, getattr(k, "_step_mid_lookup_nb", None)),
        ("markout_matrix", (pa, pb, x, y, 0.0001725),
         k._markout_matrix_np, getattr(k, "_markout_matrix_nb", None)),
        ("splitmix64", (np.uint64(42), np.uint64(0), 5_000_000),
         k._splitmix64_np, getattr(k, "_splitmix64_nb", None)),
    ]

    print(f"numba active in package: {k.USING_NUMBA}")
    print(f"{'kernel':<18} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, args, np_fn, nb_fn in cases:
        t_np = bench(np_fn, *args) * 1e3
        if nb_fn is None:
            print(f"{name:<18} {t_np:>12.2f} {'n/a':>12} {'n/a':>9}")
            continue
        t_nb = bench(nb_fn, *args) * 1e3
        print(f"{name:<18} {t_np:>12.2f} {t_nb:>12.2f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
