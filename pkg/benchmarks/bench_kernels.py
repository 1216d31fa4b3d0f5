"""Compiled vs pure-Python kernels on a synthetic torus scene.

    python benchmarks/bench_kernels.py --n 5000 --repeat 3

Prints one row per kernel with the best-of-``repeat`` wall time of each
backend and the speedup. Inputs are the real arrays the pipeline feeds the
kernels, so the numbers track end-to-end behaviour.
"""
import argparse
import time

import numpy as np

from trip import (SceneConfig, build_constraint_graph, enumerate_triangles, generate_scene,
                  prefilter_triangles)
from trip import _pykernels as py

try:
    from trip import _ckernels as cy
except ImportError:  # extension not built
    cy = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n, seed):
    sc = generate_scene(SceneConfig(geometry="torus", n=n, q=0.1, seed=seed))
    g = sc.graph()
    tri = enumerate_triangles(g)
    pool = prefilter_triangles(g, tri)
    cons = build_constraint_graph(pool)
    m = len(cons)
    rng = np.random.default_rng(seed)
    order_c = rng.permutation(m).astype(np.int64)
    keep = np.asarray(py.kruskal_forest(len(pool), cons.u, cons.t, order_c), dtype=bool)
    delta = cons.g[keep][:, None]
    order_p = rng.permutation(len(pool)).astype(np.int64)
    x3 = np.zeros((g.n, 3))
    w = np.ones(g.num_edges)
    off = g.dirs.copy()
    yield "enumerate_triangles", lambda k: k.enumerate_triangles(g.adj_indptr, g.adj_indices,
                                                                   g.adj_edges)
    yield "kruskal_forest", lambda k: k.kruskal_forest(len(pool), cons.u, cons.t, order_c)
    yield "tree_propagate", lambda k: k.tree_propagate(len(pool), cons.u[keep], cons.t[keep], delta)
    yield "prefix_coverage", lambda k: k.prefix_coverage(g.n, order_p, pool.edges, pool.in_fiber,
                                                         g.edges[:, 0], g.edges[:, 1], 2, g.n + 1)
    yield "average_sweeps x20", lambda k: k.average_sweeps(g.n, g.edges[:, 0], g.edges[:, 1], w,
                                                           off, x3, 20, 0.7, 0.0)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5000, help="camera count")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)
    if cy is None:
        raise SystemExit("compiled extension not built; run `pip install -e .` first")
    print(f"torus scene, n={a.n}, best of {a.repeat}")
    print(f"{'kernel':<22}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}")
    for name, fn in cases(a.n, a.seed):
        tc = best_of(lambda: fn(cy), a.repeat)
        tp = best_of(lambda: fn(py), a.repeat)
        print(f"{name:<22}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
