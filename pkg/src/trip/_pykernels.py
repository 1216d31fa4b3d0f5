"""Pure-Python versions of the sequential graph kernels.

Same signatures and return values as the compiled ``_ckernels`` module; used
when the extension is not built or ``TRIP_PURE_PYTHON=1`` is set.
"""
from collections import deque
from bisect import bisect_right

import numpy as np


def enumerate_triangles(indptr, indices, edge_ids):
    """List every 3-clique (i < j < k) of a CSR graph with sorted rows.

    Returns ``(triples, tri_edges)`` where ``tri_edges`` holds the edge ids of
    (i, j), (j, k), (i, k) per row.
    """
    indptr = indptr.tolist()
    indices = indices.tolist()
    edge_ids = edge_ids.tolist()
    n = len(indptr) - 1
    out = []
    eout = []
    for u in range(n):
        ub, ue = indptr[u], indptr[u + 1]
        urow = indices[ub:ue]
        start = bisect_right(urow, u)
        for pu in range(start, len(urow)):
            v = urow[pu]
            e_uv = edge_ids[ub + pu]
            vb, ve = indptr[v], indptr[v + 1]
            vrow = indices[vb:ve]
            # tails beyond v in both rows; walk the shorter, probe the longer
            su = pu + 1
            sv = bisect_right(vrow, v)
            len_u = len(urow) - su
            len_v = len(vrow) - sv
            if len_u <= len_v:
                lookup = {w: vb + q for q, w in enumerate(vrow[sv:], start=sv)}
                for q in range(su, len(urow)):
                    w = urow[q]
                    pv = lookup.get(w)
                    if pv is not None:
                        out.append((u, v, w))
                        eout.append((e_uv, edge_ids[pv], edge_ids[ub + q]))
            else:
                lookup = {w: ub + q for q, w in enumerate(urow[su:], start=su)}
                for q in range(sv, len(vrow)):
                    w = vrow[q]
                    pw = lookup.get(w)
                    if pw is not None:
                        out.append((u, v, w))
                        eout.append((e_uv, edge_ids[vb + q], edge_ids[pw]))
    triples = np.array(out, dtype=np.int64).reshape(-1, 3)
    tri_edges = np.array(eout, dtype=np.int64).reshape(-1, 3)
    return triples, tri_edges


def _find(parent, a):
    root = a
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        parent[a], a = root, parent[a]
    return root


def kruskal_forest(n, a, b, order):
    """Spanning forest by scanning edges in ``order``; returns a boolean mask."""
    parent = list(range(n))
    rank = [0] * n
    a = a.tolist()
    b = b.tolist()
    keep = np.zeros(len(a), dtype=bool)
    for e in order.tolist():
        ra = _find(parent, a[e])
        rb = _find(parent, b[e])
        if ra == rb:
            continue
        if rank[ra] < rank[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        if rank[ra] == rank[rb]:
            rank[ra] += 1
        keep[e] = True
    return keep


def tree_propagate(n, head, tail, delta):
    """Propagate offsets along a forest so that x[head] - x[tail] = delta.

    Each component is rooted at its smallest node, which gets zero.
    ``delta`` has shape (m, dim). Returns (n, dim).
    """
    delta = np.asarray(delta, dtype=np.float64)
    dim = delta.shape[1]
    x = np.zeros((n, dim))
    adj = [[] for _ in range(n)]
    for e, (h, t) in enumerate(zip(head.tolist(), tail.tolist())):
        adj[h].append((t, e, -1.0))
        adj[t].append((h, e, 1.0))
    dl = delta.tolist()
    seen = [False] * n
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        while queue:
            p = queue.popleft()
            xp = x[p]
            for c, e, sgn in adj[p]:
                if seen[c]:
                    continue
                seen[c] = True
                # sgn=+1: c is the head of edge e, so x[c] = x[p] + delta
                x[c] = xp + sgn * np.asarray(dl[e])
                queue.append(c)
    return x


def prefix_coverage(n, order, tri_edges, in_fiber, edge_a, edge_b, m_min, target):
    """Add triangles in ``order`` until the largest active component has
    ``target`` nodes.

    Returns ``(k, support, best)``: triangles consumed, per-edge support counts
    after those k triangles, and the largest component size reached.
    """
    parent = list(range(n))
    size = [1] * n
    support = np.zeros(len(edge_a), dtype=np.int64)
    sup = support.tolist()
    ea = edge_a.tolist()
    eb = edge_b.tolist()
    te = tri_edges.tolist()
    fib = in_fiber.tolist()
    best = 1 if n > 0 else 0
    k = 0
    if best >= target:
        return 0, support, best
    for t in order.tolist():
        k += 1
        row = te[t]
        frow = fib[t]
        for s in range(3):
            if not frow[s]:
                continue
            e = row[s]
            sup[e] += 1
            if sup[e] != m_min:
                continue
            ra = _find(parent, ea[e])
            rb = _find(parent, eb[e])
            if ra == rb:
                continue
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]
            if size[ra] > best:
                best = size[ra]
        if best >= target:
            break
    return k, np.array(sup, dtype=np.int64), best


def average_sweeps(n, head, tail, w, offset, x, sweeps, damping, tol):
    """Damped synchronous averaging; stops early once a sweep moves no
    coordinate by more than ``tol``. Returns (x, sweeps performed)."""
    head = np.asarray(head, dtype=np.int64)
    tail = np.asarray(tail, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    offset = np.asarray(offset, dtype=np.float64)
    x = np.array(x, dtype=np.float64, copy=True)
    wsum = np.bincount(head, w, minlength=n) + np.bincount(tail, w, minlength=n)
    has = wsum > 0
    denom = np.where(has, wsum, 1.0)
    done = 0
    for _ in range(sweeps):
        new = np.empty_like(x)
        for k in range(x.shape[1]):
            acc = (np.bincount(head, w * (x[tail, k] + offset[:, k]), minlength=n)
                   + np.bincount(tail, w * (x[head, k] - offset[:, k]), minlength=n))
            new[:, k] = acc / denom
        step = damping * (new - x)
        step[~has] = 0.0
        x += step
        done += 1
        change = float(np.max(np.abs(step))) if step.size else 0.0
        if not change == change or change <= tol:
            break
    return x, done
