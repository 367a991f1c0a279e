"""Compiled vs pure-Python kernel timings.

Runs the same workloads under each available backend and prints one row per
(workload, backend) plus the speedup of the compiled kernels.

    python3 benchmarks/bench_kernels.py [--cycles 100] [--repeats 3] [--csv out.csv]
"""
import argparse
import csv
import sys
import time
import warnings

import numpy as np

from tredkit import _backend, mapkit, oracle, synth, tred


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(cycles):
    shape = synth.ShapeSpec("circle")
    traj = synth.noisy_sample(shape, synth.NoiseSpec.for_shape("circle", 1), cycles=cycles)
    params = tred.TredParams(6.0, 5, 0)
    grid = oracle.Raster.covering((0.0, 0.0), 6.0, 250)
    rng = np.random.default_rng(0)
    a = np.cumsum(rng.normal(size=(400, 2)), axis=0)
    b = a + rng.normal(scale=0.5, size=a.shape)

    def build():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tred.build_offline([traj], params)

    return {
        "build_offline": build,
        "tlde_sweep": lambda: oracle.tlde_counts([traj], 0.3, grid, "sweep"),
        "frechet_400x400": lambda: mapkit.discrete_frechet(a, b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--cycles", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--csv", help="also write the table as CSV")
    args = ap.parse_args(argv)

    rows = []
    for name, fn in workloads(args.cycles).items():
        times = {}
        for backend in _backend.available():
            with _backend.use(backend):
                times[backend] = _time(fn, args.repeats)
        speedup = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        for backend, t in times.items():
            rows.append((name, backend, t))
        print(f"{name:18s} " + "  ".join(f"{b}={t:.4f}s" for b, t in times.items())
              + f"  speedup={speedup:.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["workload", "backend", "seconds"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
