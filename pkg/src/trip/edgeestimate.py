"""Triangle selection by incident residual and robust edge-length aggregation."""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import graphsolve, kernels

log = logging.getLogger(__name__)

LENGTH_C = 0.1


@dataclass
class SelectionState:
    order: np.ndarray          # pool ordinals sorted by (bar_r, r, triple)
    k: int                     # prefix size
    support: np.ndarray        # per-edge count of supporting selected triangles
    active: np.ndarray         # edges with support >= m_min
    component: np.ndarray      # sorted node ids of the largest active component
    n: int
    gamma: float
    m_min: int
    shortfall: bool

    @property
    def coverage(self):
        return len(self.component) / self.n if self.n else 0.0

    @property
    def selected(self):
        return self.order[:self.k]


class EdgeLengthEstimate(NamedTuple):
    edge: int
    proposals: np.ndarray
    length: float
    dispersion: float
    weight: float


@dataclass
class EdgeLengths:
    """Array form of the per-edge estimates (one row per kept edge)."""

    edge: np.ndarray
    length: np.ndarray
    dispersion: np.ndarray
    weight: np.ndarray
    support: np.ndarray
    prop_indptr: np.ndarray
    proposals: np.ndarray

    def __len__(self):
        return len(self.edge)

    def __getitem__(self, k):
        p = self.proposals[self.prop_indptr[k]:self.prop_indptr[k + 1]]
        return EdgeLengthEstimate(int(self.edge[k]), p, float(self.length[k]),
                                  float(self.dispersion[k]), float(self.weight[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]


def selection_order(pool, bar_r):
    i, j, k = pool.tri.T
    return np.lexsort((k, j, i, pool.r, bar_r))


def _largest_component(n, g, active):
    ea = g.edges[active, 0]
    eb = g.edges[active, 1]
    _, labels = graphsolve.components(n, ea, eb)
    sizes = np.bincount(labels)
    # ties go to the component holding the smallest node id
    best = int(labels[np.flatnonzero(sizes[labels] == sizes.max())[0]])
    return np.flatnonzero(labels == best)


def select_triangle_prefix(pool, bar_r, g, gamma=1.0, m_min=1):
    """Smallest prefix of triangles (ascending bar_r) whose active-edge graph
    has a component covering at least ``gamma * n`` nodes.

    If the target is unreachable, every triangle is used and ``shortfall`` is
    set on the returned state.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if int(m_min) < 1:
        raise ValueError("m_min must be >= 1")
    n = g.n
    order = selection_order(pool, bar_r)
    target = max(1, math.ceil(gamma * n - 1e-9))
    k, support, best = kernels.prefix_coverage(
        n, order, pool.edges, pool.in_fiber, g.edges[:, 0], g.edges[:, 1], int(m_min), target
    )
    support = np.asarray(support, dtype=np.int64)
    active = support >= m_min
    comp = _largest_component(n, g, active)
    shortfall = len(comp) < target
    if shortfall:
        log.warning("coverage target %.3f unreachable; achieved %.3f", gamma, len(comp) / n)
    return SelectionState(order, int(k), support, active, comp, n, float(gamma), int(m_min), shortfall)


def _lower_median_grouped(keys, values, num_groups):
    """Lower median of ``values`` within each key group; returns (median, count, sort order)."""
    order = np.lexsort((values, keys))
    ks = keys[order]
    counts = np.bincount(ks, minlength=num_groups)
    starts = np.zeros(num_groups + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    med = np.full(num_groups, np.nan)
    has = counts > 0
    med[has] = values[order][starts[:-1][has] + (counts[has] - 1) // 2]
    return med, counts, order, starts


def edge_weight(dispersion, support, c=LENGTH_C):
    dispersion = np.asarray(dispersion, dtype=np.float64)
    support = np.asarray(support, dtype=np.float64)
    return 1.0 / (1.0 + (dispersion / c) ** 2) * (support / (support + 1.0))


def aggregate_edge_lengths(state, z, pool, g=None):
    """Median length proposal exp(z_t) h_{t,e} per active edge inside the component.

    ``g`` supplies edge endpoints for the component test; without it the
    state's active edges are taken as given.
    """
    zz = z.z if hasattr(z, "z") else np.asarray(z)
    sel = state.selected
    fib = pool.in_fiber[sel]
    t_idx, slot = np.nonzero(fib)
    t_idx = sel[t_idx]
    e = pool.edges[t_idx, slot]
    keep_edge = state.active.copy()
    if g is not None:
        incomp = np.zeros(g.n, dtype=bool)
        incomp[state.component] = True
        keep_edge &= incomp[g.edges[:, 0]] & incomp[g.edges[:, 1]]
    m = keep_edge[e]
    t_idx, slot, e = t_idx[m], slot[m], e[m]
    lam = np.exp(zz[t_idx]) * pool.h[t_idx, slot]

    num_e = len(keep_edge)
    med, counts, order, starts = _lower_median_grouped(e, lam, num_e)
    dev = np.abs(lam / med[e] - 1.0)
    disp, _, _, _ = _lower_median_grouped(e, dev, num_e)

    edges = np.flatnonzero(counts > 0)
    length = med[edges]
    dispersion = disp[edges]
    support = counts[edges]
    weight = edge_weight(dispersion, support)
    props = lam[order]
    indptr = np.zeros(len(edges) + 1, dtype=np.int64)
    np.cumsum(support, out=indptr[1:])
    return EdgeLengths(edges, length, dispersion, weight, support, indptr, props)


def proposal_statistics(proposals, c=LENGTH_C):
    """(length, dispersion, weight) for a single proposal list."""
    lam = np.sort(np.asarray(proposals, dtype=np.float64))
    if len(lam) == 0:
        raise ValueError("no proposals")
    med = lam[(len(lam) - 1) // 2]
    dev = np.sort(np.abs(lam / med - 1.0))
    disp = dev[(len(dev) - 1) // 2]
    return float(med), float(disp), float(edge_weight(disp, len(lam), c))
