# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the sequential graph kernels (see _pykernels)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline Py_ssize_t _upper(const i64[::1] a, Py_ssize_t lo, Py_ssize_t hi, i64 key) noexcept nogil:
    # first position in a[lo:hi] with a[pos] > key
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= key:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _search(const i64[::1] a, Py_ssize_t lo, Py_ssize_t hi, i64 key) noexcept nogil:
    # first position in a[lo:hi] with a[pos] >= key
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def enumerate_triangles(indptr, indices, edge_ids):
    cdef const i64[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const i64[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const i64[::1] ed = np.ascontiguousarray(edge_ids, dtype=np.int64)
    cdef Py_ssize_t n = ip.shape[0] - 1
    cdef Py_ssize_t cap = 1024
    cdef Py_ssize_t cnt = 0
    cdef Py_ssize_t u, pu, su, sv, ue, ve, q, pos, hi
    cdef i64 v, w, e_uv
    cdef cnp.ndarray[i64, ndim=2] tri = np.empty((cap, 3), dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=2] tre = np.empty((cap, 3), dtype=np.int64)
    for u in range(n):
        ue = ip[u + 1]
        su = _upper(ix, ip[u], ue, u)
        for pu in range(su, ue):
            v = ix[pu]
            e_uv = ed[pu]
            ve = ip[v + 1]
            sv = _upper(ix, ip[v], ve, v)
            # walk the shorter tail (entries > v), binary-search the longer
            if ue - (pu + 1) <= ve - sv:
                for q in range(pu + 1, ue):
                    w = ix[q]
                    pos = _search(ix, sv, ve, w)
                    if pos < ve and ix[pos] == w:
                        if cnt == cap:
                            cap *= 2
                            tri = np.resize(tri, (cap, 3))
                            tre = np.resize(tre, (cap, 3))
                        tri[cnt, 0] = u
                        tri[cnt, 1] = v
                        tri[cnt, 2] = w
                        tre[cnt, 0] = e_uv
                        tre[cnt, 1] = ed[pos]
                        tre[cnt, 2] = ed[q]
                        cnt += 1
            else:
                for q in range(sv, ve):
                    w = ix[q]
                    pos = _search(ix, pu + 1, ue, w)
                    if pos < ue and ix[pos] == w:
                        if cnt == cap:
                            cap *= 2
                            tri = np.resize(tri, (cap, 3))
                            tre = np.resize(tre, (cap, 3))
                        tri[cnt, 0] = u
                        tri[cnt, 1] = v
                        tri[cnt, 2] = w
                        tre[cnt, 0] = e_uv
                        tre[cnt, 1] = ed[q]
                        tre[cnt, 2] = ed[pos]
                        cnt += 1
    return tri[:cnt].copy(), tre[:cnt].copy()


cdef inline i64 _find(i64[::1] parent, i64 a) noexcept nogil:
    cdef i64 root = a
    cdef i64 nxt
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


def kruskal_forest(Py_ssize_t n, a, b, order):
    cdef const i64[::1] ea = np.ascontiguousarray(a, dtype=np.int64)
    cdef const i64[::1] eb = np.ascontiguousarray(b, dtype=np.int64)
    cdef const i64[::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef i64[::1] parent = np.arange(n, dtype=np.int64)
    cdef i64[::1] rank = np.zeros(n, dtype=np.int64)
    keep_arr = np.zeros(ea.shape[0], dtype=np.bool_)
    cdef cnp.npy_bool[::1] keep = keep_arr
    cdef Py_ssize_t p
    cdef i64 e, ra, rb, tmp
    for p in range(od.shape[0]):
        e = od[p]
        ra = _find(parent, ea[e])
        rb = _find(parent, eb[e])
        if ra == rb:
            continue
        if rank[ra] < rank[rb]:
            tmp = ra
            ra = rb
            rb = tmp
        parent[rb] = ra
        if rank[ra] == rank[rb]:
            rank[ra] += 1
        keep[e] = 1
    return keep_arr


def tree_propagate(Py_ssize_t n, head, tail, delta):
    cdef const i64[::1] hd = np.ascontiguousarray(head, dtype=np.int64)
    cdef const i64[::1] tl = np.ascontiguousarray(tail, dtype=np.int64)
    cdef const double[:, ::1] dl = np.ascontiguousarray(delta, dtype=np.float64)
    cdef Py_ssize_t m = hd.shape[0]
    cdef Py_ssize_t dim = dl.shape[1]
    x_arr = np.zeros((n, dim), dtype=np.float64)
    cdef double[:, ::1] x = x_arr
    # CSR over both endpoints
    cdef i64[::1] deg = np.zeros(n + 1, dtype=np.int64)
    cdef Py_ssize_t e, i, r, c, qh, qt, s
    for e in range(m):
        deg[hd[e] + 1] += 1
        deg[tl[e] + 1] += 1
    for i in range(n):
        deg[i + 1] += deg[i]
    cdef i64[::1] fill = np.array(deg[:n], dtype=np.int64)
    cdef i64[::1] nb = np.empty(2 * m, dtype=np.int64)
    cdef i64[::1] ne = np.empty(2 * m, dtype=np.int64)
    cdef double[::1] sg = np.empty(2 * m, dtype=np.float64)
    for e in range(m):
        s = fill[hd[e]]
        nb[s] = tl[e]; ne[s] = e; sg[s] = -1.0
        fill[hd[e]] += 1
        s = fill[tl[e]]
        nb[s] = hd[e]; ne[s] = e; sg[s] = 1.0
        fill[tl[e]] += 1
    cdef cnp.npy_bool[::1] seen = np.zeros(n, dtype=np.bool_)
    cdef i64[::1] queue = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t k, p, ch
    for r in range(n):
        if seen[r]:
            continue
        seen[r] = 1
        qh = 0
        qt = 0
        queue[qt] = r
        qt += 1
        while qh < qt:
            p = queue[qh]
            qh += 1
            for s in range(deg[p], deg[p + 1]):
                ch = nb[s]
                if seen[ch]:
                    continue
                seen[ch] = 1
                e = ne[s]
                for k in range(dim):
                    x[ch, k] = x[p, k] + sg[s] * dl[e, k]
                queue[qt] = ch
                qt += 1
    return x_arr


def prefix_coverage(Py_ssize_t n, order, tri_edges, in_fiber, edge_a, edge_b,
                    i64 m_min, i64 target):
    cdef const i64[::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef const i64[:, ::1] te = np.ascontiguousarray(tri_edges, dtype=np.int64)
    cdef const cnp.npy_bool[:, ::1] fb = np.ascontiguousarray(in_fiber, dtype=np.bool_)
    cdef const i64[::1] ea = np.ascontiguousarray(edge_a, dtype=np.int64)
    cdef const i64[::1] eb = np.ascontiguousarray(edge_b, dtype=np.int64)
    cdef i64[::1] parent = np.arange(n, dtype=np.int64)
    cdef i64[::1] size = np.ones(n, dtype=np.int64)
    support_arr = np.zeros(ea.shape[0], dtype=np.int64)
    cdef i64[::1] sup = support_arr
    cdef i64 best = 1 if n > 0 else 0
    cdef Py_ssize_t k = 0
    cdef Py_ssize_t p, s
    cdef i64 t, e, ra, rb, tmp
    if best >= target:
        return 0, support_arr, best
    for p in range(od.shape[0]):
        t = od[p]
        k += 1
        for s in range(3):
            if not fb[t, s]:
                continue
            e = te[t, s]
            sup[e] += 1
            if sup[e] != m_min:
                continue
            ra = _find(parent, ea[e])
            rb = _find(parent, eb[e])
            if ra == rb:
                continue
            if size[ra] < size[rb]:
                tmp = ra
                ra = rb
                rb = tmp
            parent[rb] = ra
            size[ra] += size[rb]
            if size[ra] > best:
                best = size[ra]
        if best >= target:
            break
    return k, support_arr, best


def average_sweeps(Py_ssize_t n, head, tail, w, offset, x, Py_ssize_t sweeps,
                   double damping, double tol):
    cdef const i64[::1] h = np.ascontiguousarray(head, dtype=np.int64)
    cdef const i64[::1] t = np.ascontiguousarray(tail, dtype=np.int64)
    cdef const double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, ::1] off = np.ascontiguousarray(offset, dtype=np.float64)
    out = np.array(x, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] xx = out
    cdef Py_ssize_t m = h.shape[0], d = xx.shape[1]
    cdef double[::1] wsum = np.zeros(n)
    cdef double[:, ::1] acc = np.zeros((n, d))
    cdef Py_ssize_t e, v, k, s, a, b
    cdef double we, nv, change, step
    cdef Py_ssize_t done = 0
    with nogil:
        for e in range(m):
            wsum[h[e]] += ww[e]
            wsum[t[e]] += ww[e]
        for s in range(sweeps):
            for v in range(n):
                for k in range(d):
                    acc[v, k] = 0.0
            for e in range(m):
                a = h[e]
                b = t[e]
                we = ww[e]
                for k in range(d):
                    acc[a, k] += we * (xx[b, k] + off[e, k])
                    acc[b, k] += we * (xx[a, k] - off[e, k])
            change = 0.0
            for v in range(n):
                if wsum[v] > 0:
                    for k in range(d):
                        nv = acc[v, k] / wsum[v]
                        step = damping * (nv - xx[v, k])
                        xx[v, k] += step
                        if step > change:
                            change = step
                        elif -step > change:
                            change = -step
            done += 1
            if change != change:
                break
            if change <= tol:
                break
    return out, done
