"""Time the joint payoff kernel on both backends.

    python3 benchmarks/bench_kernels.py [--grid 8] [--repeat 5]
"""

import argparse
import time

import numpy as np

from offload_commons import kernels as K
from offload_commons._jit import HAVE_NUMBA
from offload_commons.scenario import random_scenario


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    params = K.pack(random_scenario(np.random.default_rng(0), "scarcity"))
    si, sj = K.wifi_grid(args.grid), K.combined_grid(args.grid)
    cells = len(si) * len(sj)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    results = {}
    for b in backends:
        K.joint_payoffs(params, si, sj, b)  # warm-up, includes JIT compilation
        results[b] = _best(lambda: K.joint_payoffs(params, si, sj, b), args.repeat)
        print(f"{b:6s} {results[b] * 1e3:9.2f} ms  ({cells / results[b] / 1e6:6.2f} M profile pairs/s)")
    if len(results) == 2:
        same = all(np.array_equal(x, y) for x, y in zip(K.joint_payoffs(params, si, sj, "numpy"),
                                                        K.joint_payoffs(params, si, sj, "numba")))
        print(f"speed-up {results['numpy'] / results['numba']:.1f}x, identical tables: {same}")


if __name__ == "__main__":
    main()
