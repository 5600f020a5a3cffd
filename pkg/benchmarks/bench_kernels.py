"""Time the compiled and pure-numpy path kernels on the same workload.

    python benchmarks/bench_kernels.py --paths 20000 --repeat 3
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from davislab.brownian import PathModel, simulate_paths
from davislab.kernels import get_backend


def run(backend: str, model: PathModel, n_paths: int, repeat: int):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        s = simulate_paths(model, n_paths, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times), s


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    model = PathModel(seed=args.seed, n_steps=args.steps)
    backends = ["python"]
    try:
        get_backend("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled extension not built; timing the fallback only")

    results = {b: run(b, model, args.paths, args.repeat) for b in backends}
    print(f"{'backend':<8} {'best [s]':>9} {'paths/s':>10}   E[Y_T]")
    for b, (t, s) in results.items():
        print(f"{b:<8} {t:9.3f} {args.paths / t:10.0f}   {s.Y_T.mean():.6f}")
    if len(results) == 2:
        (tc, sc), (tp, sp) = results["cython"], results["python"]
        diff = float(np.max(np.abs(sc.Y_T - sp.Y_T)))
        print(f"speed-up {tp / tc:.1f}x; max |Y_T difference| {diff:.1e}")


if __name__ == "__main__":
    main()
