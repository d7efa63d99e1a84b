"""Time the reference solve with the numba kernel against the numpy fallback.

    python benchmarks/bench_kernels.py --preset ex5_1 --n 499 --repeat 3

The numba kernel is compiled (or loaded from numba's on-disk cache) before
timing starts, so the numbers are steady-state.
"""
import argparse
import time

import numpy as np

from ibcsplit import kernels
from ibcsplit.bench.config import preset_spec
from ibcsplit.bench.study import build_problem
from ibcsplit.integrators import reference_solve


def time_backend(prob, t_end, backend, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        u, stats = reference_solve(prob.op, prob.f, prob.u0, t_end, backend=backend, return_stats=True)
        best = min(best, time.perf_counter() - t0)
    return u, stats, best


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--preset", default="ex5_1")
    ap.add_argument("--n", type=int, default=None, help="interior nodes (1D presets)")
    ap.add_argument("--t-end", type=float, default=None)
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()

    overrides = {"n_interior": (args.n,)} if args.n else {}
    spec = preset_spec(args.preset, **overrides)
    prob = build_problem(spec)
    t_end = args.t_end or spec.t_end

    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    # warm-up: triggers JIT compilation or cache load
    reference_solve(prob.op, prob.f, prob.u0, min(t_end, 1e-4), backend="numba")

    print(f"{spec.preset}: {prob.op.dim} unknowns, t_end={t_end:g}, best of {args.repeat}")
    results = {}
    for backend in ("numba", "numpy"):
        u, stats, wall = time_backend(prob, t_end, backend, args.repeat)
        results[backend] = (u, wall)
        print(f"  {backend:6s} {wall:9.3f} s  accepted={stats['accepted']}  rejected={stats['rejected']}")
    gap = np.max(np.abs(results["numba"][0] - results["numpy"][0]))
    print(f"  speedup {results['numpy'][1] / results['numba'][1]:.1f}x, max endpoint difference {gap:.2e}")


if __name__ == "__main__":
    main()
