"""Compiled vs scipy Dijkstra kernel on the round S^3 lattice.

    python3 benchmarks/bench_kernels.py [--sizes 128 256 512] [--repeat 3]

Prints one line per lattice size with the best wall time of each backend,
the speedup and the largest disagreement between the two distance fields.
"""

import argparse
import time

import numpy as np

from ghflat import _kernels
from ghflat.geodesics import MetricGrid
from ghflat.manifold import round_sphere


def best_time(graph, src, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = graph.solve(src)
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels._core is None:
        print("compiled kernel not built; only the scipy fallback is available")
    print(f"{'size':>6} {'cython s':>10} {'python s':>10} {'speedup':>8} {'max |diff|':>11}")
    M = round_sphere(3)
    for n in args.sizes:
        g = MetricGrid(M, n, n, 16).graph
        src = g.index(n // 3, 0)
        py = g.with_active(g.active)
        py.backend = "python"
        tp, dp = best_time(py, src, args.repeat)
        if _kernels._core is None:
            print(f"{n:>6} {'-':>10} {tp:>10.3f} {'-':>8} {'-':>11}")
            continue
        cy = g.with_active(g.active)
        cy.backend = "cython"
        tc, dc = best_time(cy, src, args.repeat)
        ok = np.isfinite(dp) & np.isfinite(dc)
        diff = float(np.max(np.abs(dp[ok] - dc[ok]))) if ok.any() else 0.0
        print(f"{n:>6} {tc:>10.3f} {tp:>10.3f} {tp / tc:>8.1f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
