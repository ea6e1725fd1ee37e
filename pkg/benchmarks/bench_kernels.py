"""Time the numba kernels against the numpy fallbacks on the same inputs.

    python benchmarks/bench_kernels.py --N 16 20 --repeat 3

Both modules are imported directly, so REMLAB_NUMBA does not matter here.
Each row reports the best wall time of ``repeat`` runs and the largest
absolute difference between the two outputs.
"""
import argparse
import time

import numpy as np

from remlab import _kernels_numba as nb
from remlab import _kernels_numpy as npk
from remlab.rng import derive_key


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    same = (a == b) | (np.isnan(a) & np.isnan(b))  # infinities and empty windows
    with np.errstate(invalid="ignore"):
        d = np.where(same, 0.0, np.abs(a - b))
    return float(d.max()) if d.size else 0.0


def cases(N):
    m = 1 << (N // 2)
    rng = np.random.default_rng(N)
    x1 = rng.normal(scale=np.sqrt(0.6 * N), size=m)
    x2 = rng.normal(scale=np.sqrt(0.4 * N), size=m)
    key = np.uint64(derive_key("bench", N))
    scale = np.sqrt(0.4 * N * 4 * np.log(N) / N)
    table = npk.energy_table(x1, x2, key, scale)
    a1 = N * np.sqrt(0.6 * np.log(2))
    a2 = N * np.sqrt(0.4 * np.log(2))
    return {
        "normal_stream": lambda k: k.normal_stream(key, 0, m * m),
        "energy_table": lambda k: k.energy_table(x1, x2, key, scale),
        "gibbs_reduce": lambda k: k.gibbs_reduce(table, 2.0),
        "window_scan": lambda k: k.window_scan(table, x1, a1, a2, -2.0, 2.0),
        "survey_reduce": lambda k: k.survey_reduce(x1, x2, key, scale, 2.0, a1, a2, -2.0, 2.0),
        "top_k": lambda k: k.top_k(x1, x2, key, scale, 100),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, nargs="+", default=[16, 20])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    # compile once outside the timings
    for fn in cases(8).values():
        fn(nb)
    print(f"{'N':>3} {'kernel':<14} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8} {'max |diff|':>11}")
    for N in args.N:
        for name, fn in cases(N).items():
            tb, ob = best_of(lambda: fn(nb), args.repeat)
            tn, on = best_of(lambda: fn(npk), args.repeat)
            print(f"{N:>3} {name:<14} {tb:>10.4f} {tn:>10.4f} {tn / tb:>8.1f} {max_diff(ob, on):>11.2e}")


if __name__ == "__main__":
    main()
