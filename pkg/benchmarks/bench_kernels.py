"""Compiled vs. pure-Python kernels.

    python3 benchmarks/bench_kernels.py --trips 2000 --repeat 5
"""
import argparse
import time

import numpy as np

from balstag import kernels
from balstag.instance import generate_synthetic
from balstag.network import grid_network
from balstag.schedule import construct_schedule
from balstag.solvers import build_rduo


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trips", type=int, default=2000)
    ap.add_argument("--grid", type=int, default=8)
    ap.add_argument("--arrivals", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not kernels.compiled:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return
    inst = generate_synthetic(grid_network(args.grid, args.grid, seed=args.seed), args.trips,
                              seed=args.seed, horizon=1800)
    sol = build_rduo(inst)
    gaps = np.random.default_rng(args.seed).exponential(1 / 0.8, args.arrivals)
    rows = []
    results = {}
    for name, backend in (("python", kernels.python), ("compiled", kernels.compiled)):
        t_sched, sched = best_of(lambda: construct_schedule(inst, sol, backend=backend), args.repeat)
        t_sim, sim = best_of(lambda: backend.simulate_bottleneck(gaps, 1.0), args.repeat)
        results[name] = (sched, sim)
        rows.append((name, t_sched, t_sim))

    labels = sum(len(a) for a in results["python"][0].arcs)
    same = results["python"][0].max_abs_diff(results["compiled"][0]) == 0.0
    same_sim = np.array_equal(results["python"][1][0], results["compiled"][1][0])
    print(f"construct_schedule: {args.trips} trips, {labels} labels; simulate_bottleneck: {args.arrivals} arrivals")
    print(f"{'backend':<10}{'schedule_s':>12}{'bottleneck_s':>14}")
    for name, a, b in rows:
        print(f"{name:<10}{a:>12.4f}{b:>14.4f}")
    py, cc = rows[0], rows[1]
    print(f"speedup   {py[1] / cc[1]:>12.1f}x{py[2] / cc[2]:>13.1f}x")
    print(f"identical outputs: schedule={same} bottleneck={same_sim}")


if __name__ == "__main__":
    main()
