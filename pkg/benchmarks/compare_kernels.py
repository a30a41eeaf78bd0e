#!/usr/bin/env python3
"""Benchmark the compiled kernel against the pure-Python twin.

Run:  python benchmarks/compare_kernels.py [--short]
"""

import argparse
import math
import time

import numpy as np

import stadium_limits._kernel_py as KP

try:
    import stadium_limits._kernel_cy as KC
except ImportError:
    KC = None

ELL = 2.0
EMPTY = np.empty(0)
EMPTY2 = np.empty((0, 0))
PARS = np.zeros(8)


def bench(label, fn, *, number=1):
    t0 = time.perf_counter()
    for _ in range(number):
        fn()
    dt = (time.perf_counter() - t0) / number
    return label, dt


def starts(m, seed=0):
    g = np.random.default_rng(seed)
    r = g.uniform(0, 2 * math.pi + 2 * ELL, m)
    th = np.arcsin(2 * g.uniform(size=m) - 1)
    return r, th


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--short", action="store_true",
                    help="cut the workload by 10x")
    args = ap.parse_args()
    scale = 0.1 if args.short else 1.0

    n_orbit = int(200_000 * scale)
    n_birk = int(100_000 * scale)
    r1, th1 = starts(100)
    rx, thx = starts(int(20_000 * scale), seed=1)

    cases = []

    def orbit(K):
        def run():
            K.tau_sum_batch(ELL, r1, th1, n_orbit // 100)
        return run

    def birkhoff(K):
        def run():
            out = np.empty(r1.size)
            K.birkhoff_batch(ELL, r1, th1, n_birk // 100, 2, PARS, EMPTY,
                             EMPTY, EMPTY2, None, out)
        return run

    def excursions(K):
        phi = np.empty(rx.size, dtype=np.int64)
        fs = np.empty(rx.size)
        ns = np.empty(rx.size, dtype=np.int64)
        na = np.empty(rx.size, dtype=np.int64)
        # restrict to X starts
        keep = np.array([K.in_X(ELL, rx[i], thx[i]) for i in range(rx.size)])
        rr = rx[keep]
        tt = thx[keep]
        phi = phi[: rr.size]
        fs = fs[: rr.size]
        ns = ns[: rr.size]
        na = na[: rr.size]

        def run():
            K.excursion_batch(ELL, rr, tt, 1, 10**7, 3,
                              np.array([4.375, 0.5, 0, 0, 0, 0, 0, 0.0]),
                              EMPTY, EMPTY, EMPTY2, None, phi, fs, ns, na)
        return run, rr.size

    backends = [("pure", KP)] + ([("compiled", KC)] if KC else [])
    print(f"{'case':<28}" + "".join(f"{name:>14}" for name, _ in backends)
          + f"{'speedup':>10}")
    for case_name, mk, unit in (
        ("orbit steps", orbit, n_orbit),
        ("birkhoff sums (tau)", birkhoff, n_birk),
    ):
        times = []
        for _, K in backends:
            _, dt = bench(case_name, mk(K))
            times.append(dt)
        rate = [unit / t / 1e6 for t in times]
        row = f"{case_name:<28}" + "".join(f"{v:>11.2f} M/s" for v in rate)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)

    times = []
    sizes = []
    for _, K in backends:
        run, m = excursions(K)
        _, dt = bench("excursions", run)
        times.append(dt)
        sizes.append(m)
    rate = [s / t / 1e3 for s, t in zip(sizes, times)]
    row = f"{'induced excursions':<28}" + "".join(f"{v:>11.2f} k/s" for v in rate)
    if len(times) == 2:
        row += f"{times[0] / times[1]:>9.1f}x"
    print(row)


if __name__ == "__main__":
    main()
