"""Time the numba kernels against their pure-numpy twins.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3]

Each kernel is run once per backend before timing so that numba
compilation is excluded; the best of ``--repeat`` runs is reported, along
with a check that both backends return identical arrays.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from eastlab import kernels
from eastlab._accel import HAS_NUMBA, backend
from eastlab.core import all_states, spin_of


def cases():
    L, q = 8, 0.2
    keys = kernels.seed_keys(range(2000), L)
    target = spin_of(all_states(L), L) == 1
    start = (1 << (L - 1)) - 1
    yield "hitting_times_batch (L=8, 2000 seeds)", lambda: kernels.hitting_times_batch(keys, 1 - q, start, target, 1e6)

    keys6 = kernels.seed_keys(range(2000), 6)
    starts = np.full(2000, (1 << 5) - 1, dtype=np.int64)
    times = np.linspace(0.0, 50.0, 11)
    yield "states_at_batch (L=6, 2000 seeds, 11 times)", lambda: kernels.states_at_batch(keys6, 0.8, starts, times)

    rng = np.random.default_rng(0)
    sites = rng.integers(1, 13, size=200_000)
    coins = rng.integers(0, 2, size=200_000)
    yield "replay (L=12, 2e5 rings)", lambda: kernels.replay((1 << 12) - 1, sites, coins)

    yield "det_final_all (L=14)", lambda: kernels.det_final_all(14)


def best_of(fn, repeat: int) -> float:
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not HAS_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    print(f"{'kernel':<45} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}  identical")
    for name, fn in cases():
        with backend("numba"):
            a = fn()
            t_nb = best_of(fn, args.repeat)
        with backend("numpy"):
            b = fn()
            t_np = best_of(fn, args.repeat)
        print(f"{name:<45} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>8.1f}  {same(a, b)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
