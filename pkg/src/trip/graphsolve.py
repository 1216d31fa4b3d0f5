"""Weighted graph-Laplacian solvers shared by scale synchronization and
location recovery.

Both stages fit node values x (scalar or 3-vector) to edge offsets with
residual ``x[head] - x[tail] - offset`` under a robust IRLS loop. The weighted
least-squares step is solved either by Jacobi-preconditioned conjugate
gradients on the gauge-projected Laplacian system ("exact") or by damped
synchronous local averaging ("fast").
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels

log = logging.getLogger(__name__)

RESIDUAL_FLOOR = 1e-12
DAMPING = 0.7
FAST_MAX_SWEEPS = 20


class SolverDivergedError(FloatingPointError):
    """Non-finite values appeared during iteration."""


@dataclass
class IRLSResult:
    x: np.ndarray
    iterations: int
    converged: bool
    objective: list = field(default_factory=list)
    inner_iterations: int = 0


def components(n, head, tail):
    """Connected-component labels of the graph on n nodes."""
    if n == 0:
        return 0, np.zeros(0, dtype=np.int64)
    adj = sp.coo_matrix((np.ones(len(head)), (head, tail)), shape=(n, n)).tocsr()
    ncomp, labels = connected_components(adj, directed=False)
    return ncomp, labels.astype(np.int64)


def laplacian(n, head, tail, w):
    """Sparse weighted Laplacian sum_e w_e (e_h - e_t)(e_h - e_t)^T."""
    rows = np.concatenate([head, tail, head, tail])
    cols = np.concatenate([head, tail, tail, head])
    vals = np.concatenate([w, w, -w, -w])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def laplacian_rhs(n, head, tail, w, offset):
    """B^T W offset for residual x[head] - x[tail] - offset; shape (n, dim)."""
    dim = offset.shape[1]
    rhs = np.zeros((n, dim))
    wo = w[:, None] * offset
    for k in range(dim):
        rhs[:, k] = np.bincount(head, wo[:, k], minlength=n) - np.bincount(tail, wo[:, k], minlength=n)
    return rhs


class Gauge:
    """Projection onto per-component zero-mean vectors."""

    def __init__(self, labels, active):
        self.labels = labels
        self.active = active
        self.ncomp = int(labels.max()) + 1 if len(labels) else 0
        counts = np.bincount(labels[active], minlength=self.ncomp).astype(np.float64)
        self.counts = np.maximum(counts, 1.0)

    def project(self, v):
        out = np.array(v, dtype=np.float64, copy=True)
        for k in range(out.shape[1]):
            col = out[:, k]
            col[~self.active] = 0.0
            means = np.bincount(self.labels[self.active], col[self.active], minlength=self.ncomp) / self.counts
            col[self.active] -= means[self.labels[self.active]]
        return out


def pcg(L, rhs, gauge, x0=None, rtol=1e-10, maxiter=None):
    """Jacobi-preconditioned CG on the gauge-projected system L x = rhs.

    Columns of ``rhs`` are solved jointly (they share L). The all-ones vector
    of each component is projected out every iteration, so the iterate stays
    in the zero-mean subspace. Returns (x, iterations).
    """
    n = L.shape[0]
    if rhs.ndim == 1:
        rhs = rhs[:, None]
    diag = L.diagonal().copy()
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 0.0)[:, None]
    if maxiter is None:
        maxiter = max(1, int(np.ceil(10 * np.sqrt(max(n, 1)))))
    b = gauge.project(rhs)
    x = gauge.project(np.zeros_like(b) if x0 is None else x0)
    r = b - L @ x
    r = gauge.project(r)
    bnorm = np.linalg.norm(b, axis=0)
    bnorm = np.where(bnorm > 0, bnorm, 1.0)
    if np.all(np.linalg.norm(r, axis=0) <= rtol * bnorm):
        return x, 0
    z = gauge.project(inv_diag * r)
    p = z.copy()
    rz = np.einsum("ij,ij->j", r, z)
    it = 0
    for it in range(1, maxiter + 1):
        Ap = gauge.project(L @ p)
        pAp = np.einsum("ij,ij->j", p, Ap)
        alpha = np.where(pAp > 0, rz / np.where(pAp > 0, pAp, 1.0), 0.0)
        x += alpha * p
        r -= alpha * Ap
        if not np.all(np.isfinite(x)):
            raise SolverDivergedError("non-finite iterate in PCG")
        if np.all(np.linalg.norm(r, axis=0) <= rtol * bnorm):
            break
        z = gauge.project(inv_diag * r)
        rz_new = np.einsum("ij,ij->j", r, z)
        beta = np.where(rz > 0, rz_new / np.where(rz > 0, rz, 1.0), 0.0)
        p = z + beta * p
        rz = rz_new
    return gauge.project(x), it


def local_average(n, head, tail, w, offset, x, sweeps, damping=DAMPING, tol=0.0):
    """Damped synchronous averaging sweeps toward the weighted LS solution.

    Each node moves toward the weighted mean of the positions its neighbors
    predict for it: x[head] = x[tail] + offset, x[tail] = x[head] - offset.
    Stops early once a sweep moves no coordinate by more than ``tol``.
    Returns (x, sweeps performed).
    """
    offset = np.asarray(offset, dtype=np.float64)
    x, done = kernels.average_sweeps(n, head, tail, w, offset.reshape(len(offset), -1),
                                     np.asarray(x, dtype=np.float64).reshape(n, -1),
                                     int(sweeps), float(damping), float(tol))
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise SolverDivergedError("non-finite iterate in local averaging")
    return x, int(done)


def spanning_tree_init(n, head, tail, offset, cost):
    """Propagate offsets along a minimum-cost spanning forest.

    Ties in cost are broken by smaller edge ordinal. Each component's smallest
    node is the root and gets zero.
    """
    order = np.lexsort((np.arange(len(cost)), cost))
    keep = kernels.kruskal_forest(n, head, tail, order)
    keep = np.asarray(keep, dtype=bool)
    return np.asarray(kernels.tree_propagate(n, head[keep], tail[keep], offset[keep])), keep


def residuals(x, head, tail, offset):
    return x[head] - x[tail] - offset


def irls(n, head, tail, offset, w0, x0, weight_fn, loss_fn, solver="exact",
         max_outer=50, max_inner=None, tol=1e-8, rtol=1e-10, gauge=None):
    """Robust IRLS: reweight by ``w0 * weight_fn(|res|)``, re-solve, repeat.

    ``loss_fn`` maps residual norms to per-edge loss values and is only used to
    record the objective sum(w0 * loss) per outer iteration. Stops when the
    largest coordinate change is below ``tol``.
    """
    offset = np.asarray(offset, dtype=np.float64)
    if offset.ndim == 1:
        offset = offset[:, None]
    x = np.array(x0, dtype=np.float64).reshape(n, offset.shape[1])
    if gauge is None:
        _, labels = components(n, head, tail)
        active = np.zeros(n, dtype=bool)
        active[head] = True
        active[tail] = True
        gauge = Gauge(labels, active)
    x = gauge.project(x)
    objective = []
    converged = False
    inner_total = 0
    it = 0
    for it in range(1, max_outer + 1):
        res = np.linalg.norm(residuals(x, head, tail, offset), axis=1)
        objective.append(float(np.sum(w0 * loss_fn(res))))
        omega = w0 * weight_fn(np.maximum(res, RESIDUAL_FLOOR))
        if solver == "exact":
            L = laplacian(n, head, tail, omega)
            rhs = laplacian_rhs(n, head, tail, omega, offset)
            x_new, inner = pcg(L, rhs, gauge, x0=x, rtol=rtol, maxiter=max_inner)
        elif solver == "fast":
            x_new, inner = local_average(n, head, tail, omega, offset, x,
                                         max_inner or FAST_MAX_SWEEPS, tol=tol)
            x_new = gauge.project(x_new)
        else:
            raise ValueError(f"unknown solver {solver!r}")
        inner_total += inner
        if not np.all(np.isfinite(x_new)):
            raise SolverDivergedError("non-finite iterate in IRLS")
        change = float(np.max(np.abs(x_new - x))) if x.size else 0.0
        x = x_new
        if change <= tol:
            converged = True
            break
    res = np.linalg.norm(residuals(x, head, tail, offset), axis=1)
    objective.append(float(np.sum(w0 * loss_fn(res))))
    return IRLSResult(x, it, converged, objective, inner_total)
