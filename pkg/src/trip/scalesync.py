"""Log-scale synchronization of triangles over the shared-edge triangle graph.

Each retained triangle t gets a log-scale z_t such that exp(z_t) * h_{t,e}
predicts the length of its edge e. Two triangles sharing an edge e give the
constraint z_u - z_t = log(h_{t,e} / h_{u,e}).
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import graphsolve
from .losses import LossSpec, loss_value, loss_weight

log = logging.getLogger(__name__)


class ScaleConstraint(NamedTuple):
    t: int
    u: int
    e: int
    g: float
    w0: float


@dataclass
class ConstraintSet:
    """Array form of the constraint list; ``t < u`` on every row."""

    t: np.ndarray
    u: np.ndarray
    e: np.ndarray
    g: np.ndarray
    w0: np.ndarray
    num_triangles: int

    def __len__(self):
        return len(self.t)

    def __getitem__(self, k):
        return ScaleConstraint(int(self.t[k]), int(self.u[k]), int(self.e[k]),
                               float(self.g[k]), float(self.w0[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def with_unit_weights(self):
        return ConstraintSet(self.t, self.u, self.e, self.g, np.ones_like(self.w0), self.num_triangles)


@dataclass
class ScaleSolution:
    z: np.ndarray
    residuals: np.ndarray
    bar_r: np.ndarray
    iterations: int
    converged: bool
    objective: list = field(default_factory=list)
    stages: list = field(default_factory=list)

    @property
    def scales(self):
        return np.exp(self.z)


def build_constraint_graph(pool):
    """One constraint per pair of triangles co-resident in an edge fiber."""
    fe = pool.fiber_edge
    ft = pool.fiber_tri
    fs = pool.fiber_slot
    ptr = pool.fiber_indptr
    count = np.diff(ptr)
    pos = np.arange(len(ft)) - np.repeat(ptr[:-1], count)
    length = np.repeat(count, count)
    rows_p, rows_q = [], []
    maxlen = int(count.max()) if len(count) else 0
    for dq in range(1, maxlen):
        # pair each fiber entry with the one dq places later in its fiber
        p = np.flatnonzero(pos + dq < length)
        rows_p.append(p)
        rows_q.append(p + dq)
    if rows_p:
        p = np.concatenate(rows_p)
        q = np.concatenate(rows_q)
    else:
        p = q = np.zeros(0, dtype=np.int64)
    ta, tb = ft[p], ft[q]
    sa, sb = fs[p], fs[q]
    swap = ta > tb
    t = np.where(swap, tb, ta)
    u = np.where(swap, ta, tb)
    st = np.where(swap, sb, sa)
    su = np.where(swap, sa, sb)
    e = fe[p]
    g = np.log(pool.h[t, st] / pool.h[u, su])
    w0 = np.sqrt(pool.pi[t] * pool.pi[u])
    order = np.lexsort((e, u, t))
    return ConstraintSet(t[order], u[order], e[order], g[order], w0[order], len(pool))


def spanning_tree_init(constraints, pool):
    """Initial log-scales propagated along a minimum sqrt(r_t r_u) spanning forest."""
    n = constraints.num_triangles
    # floored so a clean-mixed pair does not tie a clean-clean pair at zero
    r = np.maximum(pool.r, graphsolve.RESIDUAL_FLOOR)
    cost = np.sqrt(r[constraints.t] * r[constraints.u])
    z0, _ = graphsolve.spanning_tree_init(n, constraints.u, constraints.t, constraints.g[:, None], cost)
    return z0[:, 0]


def sync_residuals(z, constraints):
    return np.abs(z[constraints.u] - z[constraints.t] - constraints.g)


def incident_residual_scores(solution, constraints):
    """Mean incident sync residual per triangle; +inf for isolated triangles."""
    n = constraints.num_triangles
    res = sync_residuals(solution.z if hasattr(solution, "z") else solution, constraints)
    tot = np.bincount(constraints.t, res, minlength=n) + np.bincount(constraints.u, res, minlength=n)
    cnt = np.bincount(constraints.t, minlength=n) + np.bincount(constraints.u, minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(cnt > 0, tot / np.maximum(cnt, 1), np.inf)
    return out


def _gauge(constraints):
    n = constraints.num_triangles
    _, labels = graphsolve.components(n, constraints.u, constraints.t)
    active = np.zeros(n, dtype=bool)
    active[constraints.t] = True
    active[constraints.u] = True
    return graphsolve.Gauge(labels, active)


def synchronize_scales(constraints, z0, spec=None, solver="exact", max_outer=50,
                       max_inner=None, tol=1e-8, rtol=1e-10, gauge=None, warn=True):
    """Robust IRLS on sum w0 * rho(|z_u - z_t - g|).

    Returns a :class:`ScaleSolution` with per-component mean-zero z. Hitting
    ``max_outer`` is reported through ``converged=False``.
    """
    spec = spec or LossSpec()
    n = constraints.num_triangles
    gauge = gauge or _gauge(constraints)
    out = graphsolve.irls(
        n, constraints.u, constraints.t, constraints.g, constraints.w0,
        np.asarray(z0, dtype=np.float64).reshape(n, 1),
        lambda r: loss_weight(r, spec),
        lambda r: loss_value(r, spec),
        solver=solver, max_outer=max_outer, max_inner=max_inner, tol=tol, rtol=rtol,
        gauge=gauge,
    )
    z = out.x[:, 0]
    res = sync_residuals(z, constraints)
    sol = ScaleSolution(z, res, None, out.iterations, out.converged, out.objective)
    sol.bar_r = incident_residual_scores(sol, constraints)
    if not out.converged and warn:
        log.warning("scale sync stopped after %d outer iterations without reaching tol", out.iterations)
    return sol


def annealed_synchronize(constraints, spec, z0=None, solver="exact", probe=None,
                         max_outer=50, max_inner=None, tol=1e-8, rtol=1e-10, sigma_min=0.0):
    """Run IRLS to stationarity at each sigma_k = sigma_0 * tau^k, warm-starting.

    With ``spec.scale`` unset, sigma_0 is the largest residual of the initial
    point, so stage 0 starts without hard downweighting. ``probe(k, sigma_k, z)``
    is called after every stage. Stages whose scale would fall below
    ``sigma_min`` are skipped (the first stage always runs).
    """
    n = constraints.num_triangles
    if z0 is None:
        z0 = np.zeros(n)
    z = np.asarray(z0, dtype=np.float64)
    sigma0 = spec.scale
    if sigma0 is None:
        r0 = sync_residuals(z, constraints)
        sigma0 = float(r0.max()) if len(r0) and r0.max() > 0 else 1.0
    gauge = _gauge(constraints)
    stages = []
    sol = None
    schedule = spec.schedule(sigma0)
    schedule = schedule[:1] + [s for s in schedule[1:] if s >= sigma_min]
    for k, sigma in enumerate(schedule):
        sol = synchronize_scales(constraints, z, spec.with_scale(sigma), solver=solver,
                                 max_outer=max_outer, max_inner=max_inner, tol=tol,
                                 rtol=rtol, gauge=gauge, warn=k == len(schedule) - 1)
        z = sol.z
        stages.append({"stage": k, "sigma": sigma, "iterations": sol.iterations,
                       "converged": sol.converged})
        if probe is not None:
            probe(k, sigma, z.copy())
    sol.stages = stages
    return sol
