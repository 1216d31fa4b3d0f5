"""Viewing graph with unit direction measurements, and triangle enumeration."""
from dataclasses import dataclass

import numpy as np

from . import kernels

DEDUP_ANGLE = 1e-6


class GraphInputError(ValueError):
    """Raised for malformed measurement input."""


@dataclass(frozen=True)
class DirectionMeasurement:
    """Unit direction d_ij for the pair i < j, pointing from j toward i."""

    i: int
    j: int
    d: np.ndarray


class ViewingGraph:
    """Undirected simple graph on nodes 0..n-1 with one direction per edge.

    Edges are stored in canonical orientation (``i < j``) and sorted
    lexicographically; ``dirs[e]`` is d_ij for ``edges[e] = (i, j)``. Use
    :meth:`direction` to read d_ji = -d_ij.
    """

    def __init__(self, n, edges, dirs):
        self.n = int(n)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
        self._keys = self.edges[:, 0] * self.n + self.edges[:, 1]
        self._build_adjacency()
        self._edge_index = None

    def _build_adjacency(self):
        n = self.n
        m = len(self.edges)
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((dst, src))
        self.adj_indices = dst[order]
        self.adj_edges = eid[order]
        self.adj_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=self.adj_indptr[1:])

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def adjacency(self):
        """Per-node sorted neighbor lists."""
        p = self.adj_indptr
        return [self.adj_indices[p[u]:p[u + 1]].tolist() for u in range(self.n)]

    @property
    def edge_index(self):
        """Map from unordered pair (i, j), i < j, to edge ordinal."""
        if self._edge_index is None:
            self._edge_index = {
                (int(i), int(j)): e for e, (i, j) in enumerate(self.edges.tolist())
            }
        return self._edge_index

    def degree(self):
        return np.diff(self.adj_indptr)

    def edge_id(self, i, j):
        """Edge ordinal(s) for pairs (i, j) in either order; -1 if absent."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        keys = lo * self.n + hi
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, max(len(self._keys) - 1, 0))
        if len(self._keys) == 0:
            out = np.full(keys.shape, -1, dtype=np.int64)
        else:
            out = np.where(self._keys[pos] == keys, pos, -1)
        return out if out.ndim else int(out)

    def direction(self, i, j):
        """Measured unit direction from j toward i."""
        e = self.edge_id(i, j)
        if e < 0:
            raise KeyError((i, j))
        return self.dirs[e] if i < j else -self.dirs[e]

    def measurements(self):
        for (i, j), d in zip(self.edges.tolist(), self.dirs):
            yield DirectionMeasurement(i, j, d.copy())

    def subgraph_edges(self, mask):
        """New graph on the same node set keeping edges where ``mask`` holds."""
        mask = np.asarray(mask, dtype=bool)
        return ViewingGraph(self.n, self.edges[mask], self.dirs[mask])

    def __repr__(self):
        return f"ViewingGraph(n={self.n}, edges={self.num_edges})"


def build_viewing_graph(n, measurements):
    """Validate and canonicalize raw ``(i, j, vec)`` measurements.

    Vectors are renormalized, pairs with ``i > j`` are flipped (and their
    vector negated), and consistent duplicates are dropped keeping the first.
    Duplicates disagreeing by more than 1e-6 rad, zero vectors, self-loops and
    out-of-range ids raise :class:`GraphInputError`.
    """
    n = int(n)
    if n < 0:
        raise GraphInputError("node count must be nonnegative")
    if isinstance(measurements, tuple) and len(measurements) == 2:
        ij, vec = measurements
        ij = np.asarray(ij, dtype=np.int64).reshape(-1, 2)
        vec = np.asarray(vec, dtype=np.float64).reshape(-1, 3)
    else:
        rows = list(measurements)
        ij = np.array([(int(r[0]), int(r[1])) for r in rows], dtype=np.int64).reshape(-1, 2)
        vec = np.array([np.asarray(r[2], dtype=np.float64) for r in rows]).reshape(-1, 3)
    if len(ij) != len(vec):
        raise GraphInputError("pair and vector counts differ")
    if len(ij) == 0:
        return ViewingGraph(n, ij, vec)

    if np.any(ij < 0) or np.any(ij >= n):
        bad = int(np.flatnonzero((ij < 0).any(1) | (ij >= n).any(1))[0])
        raise GraphInputError(f"measurement {bad}: node id out of range [0, {n})")
    loops = np.flatnonzero(ij[:, 0] == ij[:, 1])
    if len(loops):
        raise GraphInputError(f"measurement {int(loops[0])}: self-loop on node {int(ij[loops[0], 0])}")
    if not np.all(np.isfinite(vec)):
        raise GraphInputError("non-finite direction vector")
    norms = np.linalg.norm(vec, axis=1)
    zero = np.flatnonzero(norms == 0)
    if len(zero):
        raise GraphInputError(f"measurement {int(zero[0])}: zero direction vector")
    vec = vec / norms[:, None]

    flip = ij[:, 0] > ij[:, 1]
    vec[flip] = -vec[flip]
    ij = np.sort(ij, axis=1)

    keys = ij[:, 0] * n + ij[:, 1]
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    if len(uniq) < len(keys):
        ref = vec[first[inverse]]
        # acos loses precision near 1; use the chord instead
        ang = 2.0 * np.arcsin(np.clip(np.linalg.norm(ref - vec, axis=1) / 2.0, 0.0, 1.0))
        bad = np.flatnonzero(ang > DEDUP_ANGLE)
        if len(bad):
            b = int(bad[0])
            raise GraphInputError(
                f"duplicate pair ({int(ij[b, 0])}, {int(ij[b, 1])}) with inconsistent "
                f"directions (angle {ang[b]:.3g} rad)"
            )
    # np.unique returns keys sorted, which fixes lexicographic edge order
    return ViewingGraph(n, ij[first], vec[first])


@dataclass
class TriangleIndex:
    """All triangles (i < j < k) of a graph.

    ``edges[t]`` holds the ordinals of (i, j), (j, k), (i, k). Fibers are a
    CSR map from edge ordinal to the triangles containing it.
    """

    triples: np.ndarray
    edges: np.ndarray
    fiber_indptr: np.ndarray
    fiber_tri: np.ndarray

    def __len__(self):
        return len(self.triples)

    def fiber(self, e):
        return self.fiber_tri[self.fiber_indptr[e]:self.fiber_indptr[e + 1]]


def _fibers(tri_edges, num_edges):
    flat = tri_edges.ravel()
    tri = np.repeat(np.arange(len(tri_edges)), 3)
    order = np.lexsort((tri, flat))
    indptr = np.zeros(num_edges + 1, dtype=np.int64)
    np.cumsum(np.bincount(flat, minlength=num_edges), out=indptr[1:])
    return indptr, tri[order]


def enumerate_triangles(g):
    """Every 3-clique of ``g`` exactly once, in lexicographic order."""
    triples, tri_edges = kernels.enumerate_triangles(g.adj_indptr, g.adj_indices, g.adj_edges)
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    tri_edges = np.asarray(tri_edges, dtype=np.int64).reshape(-1, 3)
    indptr, ftri = _fibers(tri_edges, g.num_edges)
    return TriangleIndex(triples, tri_edges, indptr, ftri)
