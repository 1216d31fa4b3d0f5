"""Camera locations from length-resolved edge displacements (robust IRLS)."""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import graphsolve
from .losses import LossSpec, loss_value, loss_weight

log = logging.getLogger(__name__)


class DisconnectedGraphError(ValueError):
    def __init__(self, comps):
        self.components = comps
        desc = "; ".join(
            "{" + ", ".join(str(v) for v in c[:8]) + (", ..." if len(c) > 8 else "") + "}"
            for c in comps
        )
        super().__init__(f"edge set is disconnected into {len(comps)} components: {desc}")


@dataclass
class LocationEstimate:
    nodes: np.ndarray           # sorted node ids with an estimate
    x: np.ndarray               # (len(nodes), 3), zero mean
    iterations: int
    converged: bool
    objective: list = field(default_factory=list)
    length_unit: float = 1.0

    def as_dict(self):
        return {int(i): self.x[k] for k, i in enumerate(self.nodes)}

    def full(self, n):
        """(n, 3) array with NaN rows for nodes without an estimate."""
        out = np.full((n, 3), np.nan)
        out[self.nodes] = self.x
        return out


def continuation_schedule(r0, c, tau=0.5):
    """Scales r0, r0*tau, ... strictly above c, then c itself."""
    out = []
    s = float(r0)
    while s > c and len(out) < 60:
        out.append(s)
        s *= tau
    out.append(c)
    return out


def recover_locations(g, estimates, solver="exact", spec=None, max_outer=100,
                      max_inner=None, tol=1e-9, rtol=1e-10, continuation=True):
    """Minimize sum_e w_e rho(|x_i - x_j - l_e d_e|) over the estimated edges.

    Lengths are divided by their median before solving so the Cauchy scale is
    relative to a typical edge; the result is scaled back, so output units
    follow the input lengths.

    With ``continuation`` the fixed-scale problem is approached through
    scales halving from the largest residual of the tree init, which keeps a
    single bad tree edge from pinning a whole subtree in a local minimum.
    The final stage always uses ``spec``'s own scale.
    """
    spec = spec or LossSpec("cauchy", 0.1)
    edges = np.asarray(estimates.edge, dtype=np.int64)
    if len(edges) == 0:
        raise ValueError("no edge estimates")
    ij = g.edges[edges]
    nodes = np.unique(ij)
    local = np.searchsorted(nodes, ij)
    head, tail = local[:, 0], local[:, 1]
    m = len(nodes)
    ncomp, labels = graphsolve.components(m, head, tail)
    if ncomp > 1:
        comps = [nodes[labels == c].tolist() for c in range(ncomp)]
        raise DisconnectedGraphError(comps)

    unit = float(np.median(estimates.length))
    if not unit > 0:
        raise ValueError("edge lengths must be positive")
    v = (np.asarray(estimates.length) / unit)[:, None] * g.dirs[edges]
    w = np.asarray(estimates.weight, dtype=np.float64)

    # init along a maximum-weight spanning tree, ties to the smaller ordinal
    x0, _ = graphsolve.spanning_tree_init(m, head, tail, v, -w)
    gauge = graphsolve.Gauge(labels, np.ones(m, dtype=bool))

    x = gauge.project(x0)
    if spec.annealed:
        stages = spec.schedule()
    elif continuation:
        r0 = np.linalg.norm(x[head] - x[tail] - v, axis=1)
        stages = continuation_schedule(r0.max() if len(r0) else 0.0, spec.scale)
    else:
        stages = [spec.scale]
    out = None
    for sigma in stages:
        sp = spec.with_scale(sigma)
        out = graphsolve.irls(
            m, head, tail, v, w, x,
            lambda r, sp=sp: loss_weight(r, sp),
            lambda r, sp=sp: loss_value(r, sp),
            solver=solver, max_outer=max_outer, max_inner=max_inner, tol=tol, rtol=rtol,
            gauge=gauge,
        )
        x = out.x
    if not out.converged:
        log.warning("location IRLS stopped after %d outer iterations", out.iterations)
    x = x * unit
    x -= x.mean(axis=0)
    return LocationEstimate(nodes, x, out.iterations, out.converged, out.objective, unit)
