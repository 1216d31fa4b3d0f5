"""Triangle side ratios, closure residuals and the capped per-edge pool."""
from dataclasses import dataclass

import numpy as np


class DegenerateTriangleError(ValueError):
    pass


@dataclass(frozen=True)
class PrefilterParams:
    collinearity_eps: float = 1e-3
    residual_max: float = 0.05
    pool_cap: int = 8
    reliability_scale: float = 0.05

    def __post_init__(self):
        if self.collinearity_eps <= 0 or self.residual_max <= 0 or self.reliability_scale <= 0:
            raise ValueError("prefilter thresholds must be positive")
        if int(self.pool_cap) < 1:
            raise ValueError("pool_cap must be >= 1")


@dataclass(frozen=True)
class TriangleRecord:
    tri: tuple
    h: np.ndarray
    r: float
    pi: float


def side_ratios(a, b, c):
    """Cross-product magnitudes (|b x c|, |c x a|, |a x b|).

    For a noiseless triangle with a = d_ij, b = d_jk, c = d_ki these are
    proportional to the side lengths |ij|, |jk|, |ki| (law of sines).
    Works on single 3-vectors or stacks of shape (..., 3).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    return np.stack(
        [
            np.linalg.norm(np.cross(b, c), axis=-1),
            np.linalg.norm(np.cross(c, a), axis=-1),
            np.linalg.norm(np.cross(a, b), axis=-1),
        ],
        axis=-1,
    )


def closure_residual(a, b, c, h):
    """Normalized closure |h1 a + h2 b + h3 c| / |h|."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    hn = np.linalg.norm(h, axis=-1)
    if np.any(hn == 0):
        raise DegenerateTriangleError("side-ratio vector is zero; filter collinear triples first")
    s = h[..., 0:1] * a + h[..., 1:2] * b + h[..., 2:3] * c
    return np.linalg.norm(s, axis=-1) / hn


def reliability(r, scale):
    """Cauchy-shaped reliability 1 / (1 + (r/scale)^2), strictly decreasing in r."""
    r = np.asarray(r, dtype=np.float64)
    return 1.0 / (1.0 + (r / scale) ** 2)


def triangle_directions(g, tri):
    """(a, b, c) = (d_ij, d_jk, d_ki) for every triangle of ``tri``."""
    a = g.dirs[tri.edges[:, 0]]
    b = g.dirs[tri.edges[:, 1]]
    c = -g.dirs[tri.edges[:, 2]]
    return a, b, c


class TrianglePool:
    """Retained triangles with their scores and capped edge fibers.

    Record arrays are indexed by pool ordinal. ``in_fiber[t, s]`` says whether
    triangle t survived the cap in the fiber of its s-th edge
    (slot 0: (i, j), 1: (j, k), 2: (k, i)). ``fiber_tri``/``fiber_slot`` list
    fiber members per edge (CSR by ``fiber_indptr``), sorted by r ascending.
    """

    def __init__(self, num_edges, tri, edges, h, r, pi, source, in_fiber):
        self.num_edges = int(num_edges)
        self.tri = tri
        self.edges = edges
        self.h = h
        self.r = r
        self.pi = pi
        self.source = source
        self.in_fiber = in_fiber
        self._build_fibers()

    def _build_fibers(self):
        t_idx, slot = np.nonzero(self.in_fiber)
        e = self.edges[t_idx, slot]
        i, j, k = self.tri[t_idx].T if len(t_idx) else (t_idx, t_idx, t_idx)
        order = np.lexsort((k, j, i, self.r[t_idx], e))
        self.fiber_tri = t_idx[order]
        self.fiber_slot = slot[order]
        self.fiber_edge = e[order]
        self.fiber_indptr = np.zeros(self.num_edges + 1, dtype=np.int64)
        np.cumsum(np.bincount(e, minlength=self.num_edges), out=self.fiber_indptr[1:])

    def __len__(self):
        return len(self.tri)

    def record(self, t):
        return TriangleRecord(tuple(int(v) for v in self.tri[t]), self.h[t].copy(),
                              float(self.r[t]), float(self.pi[t]))

    @property
    def records(self):
        return [self.record(t) for t in range(len(self))]

    def fiber(self, e):
        """Pool ordinals in the fiber of edge ``e``, sorted by r ascending."""
        return self.fiber_tri[self.fiber_indptr[e]:self.fiber_indptr[e + 1]]


def prefilter_triangles(g, tri, params=None):
    """Score triangles, drop collinear and inconsistent ones, cap each edge fiber.

    A triangle is kept if it survives the cap in at least one of its three
    fibers; ties in r are broken by the lexicographic triple.
    """
    params = params or PrefilterParams()
    cap = int(params.pool_cap)
    a, b, c = triangle_directions(g, tri)
    h = side_ratios(a, b, c)
    ok = h.min(axis=1) >= params.collinearity_eps
    r = np.full(len(tri), np.inf)
    if ok.any():
        r[ok] = closure_residual(a[ok], b[ok], c[ok], h[ok])
    ok &= r <= params.residual_max
    cand = np.flatnonzero(ok)

    # rank each candidate within its three fibers
    t_rep = np.repeat(cand, 3)
    slot = np.tile(np.arange(3), len(cand))
    e = tri.edges[t_rep, slot]
    ti, tj, tk = tri.triples[t_rep].T
    order = np.lexsort((tk, tj, ti, r[t_rep], e))
    e_sorted = e[order]
    starts = np.searchsorted(e_sorted, e_sorted, side="left")
    rank = np.arange(len(order)) - starts
    keep_entry = np.zeros(len(order), dtype=bool)
    keep_entry[order] = rank < cap

    in_fiber = keep_entry.reshape(-1, 3)
    alive = in_fiber.any(axis=1)
    src = cand[alive]
    rr = r[src]
    return TrianglePool(
        g.num_edges,
        tri.triples[src],
        tri.edges[src],
        h[src],
        rr,
        reliability(rr, params.reliability_scale),
        src,
        in_fiber[alive],
    )
