"""Benchmark the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]

Times the two hot loops (cluster labelling and worm moves) on a range of
box sizes and prints the speedup of the compiled extension.
"""

import argparse
import time

import numpy as np

from critarm.exact_oracle import CouplingSpec, beta_to_p
from critarm.kernels import get_backend
from critarm.lattice import build_box


def _labelling_case(d, N, beta, seed):
    g = build_box(d, N)
    rng = np.random.default_rng(seed)
    open_ = rng.random(len(g.edges)) < beta_to_p(beta)
    return g.n_vertices, g.edges, open_.astype(np.uint8)


def bench_labelling(repeat):
    cases = [(2, 32, 0.44), (2, 128, 0.44), (3, 12, 0.22), (4, 5, 0.15)]
    print("cluster labelling")
    print(f"{'case':>16} {'compiled':>12} {'fallback':>12} {'speedup':>9}")
    for d, N, beta in cases:
        nv, edges, open_ = _labelling_case(d, N, beta, seed=d * 100 + N)
        times = {}
        for name in ("compiled", "fallback"):
            impl = get_backend(name)
            impl.label_clusters(nv, edges, open_)  # warm up
            t0 = time.perf_counter()
            for _ in range(repeat):
                impl.label_clusters(nv, edges, open_)
            times[name] = (time.perf_counter() - t0) / repeat
        print(f"{f'd={d} N={N}':>16} {times['compiled'] * 1e3:>10.3f}ms "
              f"{times['fallback'] * 1e3:>10.3f}ms "
              f"{times['fallback'] / times['compiled']:>8.1f}x")


def bench_worm(repeat):
    cases = [(2, 16, 0.44), (3, 6, 0.22)]
    print("worm moves (one sweep = one move per edge)")
    print(f"{'case':>16} {'compiled':>12} {'fallback':>12} {'speedup':>9}")
    for d, N, beta in cases:
        g = build_box(d, N)
        spec = CouplingSpec(J=beta)
        indptr, nbrs, eids = g.adjacency()
        beta_e = spec.edge_couplings(g)
        moves = len(g.edges)
        times = {}
        for name in ("compiled", "fallback"):
            impl = get_backend(name)
            rng = np.random.default_rng(7)
            n = np.zeros(len(g.edges), dtype=np.int64)
            ab = np.array([g.origin, g.origin], dtype=np.int64)
            closed = np.empty(moves, dtype=np.uint8)
            impl.worm_run(n, ab, indptr, nbrs, eids, beta_e,
                          rng.random(5 * moves), closed, g.n_vertices)
            t0 = time.perf_counter()
            for _ in range(repeat):
                impl.worm_run(n, ab, indptr, nbrs, eids, beta_e,
                              rng.random(5 * moves), closed, g.n_vertices)
            times[name] = (time.perf_counter() - t0) / repeat
        print(f"{f'd={d} N={N}':>16} {times['compiled'] * 1e3:>10.3f}ms "
              f"{times['fallback'] * 1e3:>10.3f}ms "
              f"{times['fallback'] / times['compiled']:>8.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    bench_labelling(args.repeat)
    bench_worm(args.repeat)


if __name__ == "__main__":
    main()
