"""Time the numba and numpy flavours of each hot kernel.

    python3 benchmarks/bench_kernels.py [--repeats 5]

The first numba call compiles (or loads the on-disk cache); it is timed
separately and excluded from the steady-state numbers.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from infogame import kernels
from infogame.synthetic import random_joint_gaussian


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def lorenz_case():
    rng = np.random.default_rng(0)
    y = 8.0 + rng.standard_normal((256, 36, 9))
    return ("l95_rk4 (256 members, 50 steps)",
            lambda: kernels.l95_rk4_nb(y, 0.01, 50, 8.0, 4.0),
            lambda: kernels.l95_rk4_np(y, 0.01, 50, 8.0, 4.0))


def enumeration_case():
    rng = np.random.default_rng(1)
    jg, regions = random_joint_gaussian(rng, [8] * 6, 12)
    from infogame import GaussianEngine

    eng = GaussianEngine(jg)
    pts = np.array([[[p] for p in r] for r in regions], dtype=np.int64)
    kk = np.ones(6, dtype=np.int64)
    nact = np.full(6, 8, dtype=np.int64)
    c1, c2 = eng._z_prior, eng._z_post
    return ("enumerate_logdet_gap (8^6 joint actions)",
            lambda: kernels.enumerate_logdet_gap_nb(c1, c2, pts, kk, nact),
            lambda: kernels.enumerate_logdet_gap_np(c1, c2, pts, kk, nact))


def mixture_case():
    rng = np.random.default_rng(2)
    q = rng.uniform(0, 1, (2304, 12, 60))
    wr = rng.uniform(0, 1, 2304)
    wc = rng.uniform(0, 1, (12, 60))
    return ("mixture_entropy (2304 x 12 x 60 cells)",
            lambda: kernels.mixture_entropy_nb(q, wr, wc),
            lambda: kernels.mixture_entropy_np(q, wr, wc))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<44}{'first nb':>10}{'numba':>10}{'numpy':>10}{'speedup':>9}")
    for name, nb, np_ in (lorenz_case(), enumeration_case(), mixture_case()):
        t0 = time.perf_counter()
        nb()
        first = time.perf_counter() - t0
        t_nb = best_of(nb, args.repeats)
        t_np = best_of(np_, args.repeats)
        print(f"{name:<44}{first:>9.3f}s{t_nb:>9.4f}s{t_np:>9.4f}s{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
