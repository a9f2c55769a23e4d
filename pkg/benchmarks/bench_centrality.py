"""Compare the compiled centrality kernels against the pure-Python fallback.

Generates random digraphs of increasing size, times closeness, betweenness,
and pagerank on both backends, and checks that the scores agree.

Usage:
    python3 benchmarks/bench_centrality.py [--sizes 100,300,1000] [--degree 8]
"""

from __future__ import annotations

import argparse
import importlib
import random
import time

import numpy as np

from pilot import centrality


def random_csr(n: int, avg_degree: int, seed: int):
    rng = random.Random(seed)
    edges = set()
    for u in range(n):
        for _ in range(avg_degree):
            v = rng.randrange(n)
            if u != v:
                edges.add((u, v))
    indptr = np.zeros(n + 1, dtype=np.int64)
    for u, _ in edges:
        indptr[u + 1] += 1
    indptr = np.cumsum(indptr).astype(np.int64)
    fill = indptr[:-1].copy()
    indices = np.zeros(len(edges), dtype=np.int64)
    for u, v in sorted(edges):
        indices[fill[u]] = v
        fill[u] += 1
    return indptr, indices


def load_backends():
    pure = importlib.import_module("pilot._kernels_py")
    try:
        compiled = importlib.import_module("pilot._kernels")
    except ImportError:
        compiled = None
    return compiled, pure


def time_call(fn, *args) -> tuple[float, object]:
    start = time.perf_counter()
    out = fn(*args)
    return time.perf_counter() - start, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="100,300,1000")
    parser.add_argument("--degree", type=int, default=8)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    compiled, pure = load_backends()
    if compiled is None:
        print("compiled backend unavailable; timing pure python only")
    print(f"active backend in pilot.centrality: {centrality.kernel_backend()}")

    kernels = [
        ("closeness", lambda mod, n, ip, ix: mod.closeness(n, ip, ix)),
        ("betweenness", lambda mod, n, ip, ix: mod.betweenness(n, ip, ix, True)),
        ("pagerank", lambda mod, n, ip, ix: mod.pagerank(n, ip, ix, 0.85, 1e-12, 200)),
    ]

    sizes = [int(s) for s in args.sizes.split(",")]
    header = f"{'kernel':<12} {'n':>6} {'python_s':>10} {'cython_s':>10} {'speedup':>8} {'max_diff':>10}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        indptr, indices = random_csr(n, args.degree, args.seed)
        for name, call in kernels:
            t_py, out_py = time_call(call, pure, n, indptr, indices)
            if compiled is None:
                print(f"{name:<12} {n:>6} {t_py:>10.4f} {'-':>10} {'-':>8} {'-':>10}")
                continue
            t_cy, out_cy = time_call(call, compiled, n, indptr, indices)
            diff = float(np.max(np.abs(np.asarray(out_py) - np.asarray(out_cy))))
            speedup = t_py / t_cy if t_cy > 0 else float("inf")
            print(f"{name:<12} {n:>6} {t_py:>10.4f} {t_cy:>10.4f} {speedup:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
