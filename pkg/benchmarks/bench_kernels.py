"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--duration 700] [--epochs 20000] [--repeat 3]

The first numba call includes JIT compilation (or cache load); it is timed
separately as "warmup" and excluded from the reported best-of times.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from immunesom import datagen, dca, signals, som


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--duration", type=int, default=700)
    parser.add_argument("--epochs", type=int, default=20_000)
    parser.add_argument("--bmu-queries", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    session = datagen.generate_session(datagen.ScenarioConfig.an(rng_seed=0, duration=args.duration))
    ft, fx = signals.frames_to_array(signals.normalize_session(session.samples()))
    events = (session.antigen_t, session.antigen_pid)
    rng = np.random.default_rng(0)
    params = som.SomParams(epoch_limit=max(args.epochs, 50_000))
    fresh = som.init_map(params)
    queries = rng.uniform(0, 100, (args.bmu_queries, 7))

    cases = {
        f"dca replay ({len(events[0])} antigen)":
            lambda b: dca.replay((ft, fx), events, dca.EXPERIMENT_PARAMS, backend=b),
        f"som train ({args.epochs} epochs)":
            lambda b: som.train(fresh, fx, params, epochs=args.epochs, backend=b),
        f"bmu batch ({args.bmu_queries} queries)":
            lambda b: som.bmu_batch(fresh, queries, backend=b),
    }
    print(f"{'kernel':40s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>9s}")
    for name, fn in cases.items():
        start = time.perf_counter()
        fn("numba")
        warm = time.perf_counter() - start
        t_numba = best_of(lambda: fn("numba"), args.repeat)
        t_numpy = best_of(lambda: fn("numpy"), max(1, args.repeat // 3))
        print(f"{name:40s} {t_numba:10.4f} {t_numpy:10.4f} {t_numpy / t_numba:8.1f}x"
              f"   (warmup {warm:.2f} s)")


if __name__ == "__main__":
    main()
