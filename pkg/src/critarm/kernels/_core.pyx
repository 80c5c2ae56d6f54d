# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: union-find cluster labeling and the worm update loop.

Mirrors the pure-Python fallback bit-for-bit when fed the same inputs (same
pre-drawn uniform buffers), so the backends are interchangeable.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


cdef long _find(long* parent, long x) nogil:
    cdef long root = x
    while parent[root] != root:
        root = parent[root]
    # path compression
    cdef long nxt
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def label_clusters(long n_vertices, edges, open_mask):
    """Connected-component labels of the open subgraph; each vertex is
    labeled by the smallest vertex index in its component."""
    cdef cnp.ndarray[cnp.int32_t, ndim=2] e = np.ascontiguousarray(edges, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] mask = np.ascontiguousarray(open_mask, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] parent_arr = np.arange(n_vertices, dtype=np.int64)
    cdef long* parent = <long*> parent_arr.data
    cdef long m = e.shape[0]
    cdef long i, ra, rb
    for i in range(m):
        if mask[i]:
            ra = _find(parent, e[i, 0])
            rb = _find(parent, e[i, 1])
            if ra != rb:
                # union by smaller index keeps the root = min of the component
                if ra < rb:
                    parent[rb] = ra
                else:
                    parent[ra] = rb
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.empty(n_vertices, dtype=np.int64)
    for i in range(n_vertices):
        labels[i] = _find(parent, i)
    return labels


def worm_run(cnp.ndarray[cnp.int64_t, ndim=1] n,
             cnp.ndarray[cnp.int64_t, ndim=1] ab,
             cnp.ndarray[cnp.int64_t, ndim=1] indptr,
             cnp.ndarray[cnp.int32_t, ndim=1] nbrs,
             cnp.ndarray[cnp.int32_t, ndim=1] eids,
             cnp.ndarray[cnp.float64_t, ndim=1] beta,
             cnp.ndarray[cnp.float64_t, ndim=1] uniforms,
             cnp.ndarray[cnp.uint8_t, ndim=1] closed_out,
             long n_vertices):
    """Advance a worm chain by len(uniforms)//5 moves; ``beta`` is per-edge.
    See the fallback implementation for the move protocol.  Returns the
    accept count."""
    cdef long a = ab[0]
    cdef long b = ab[1]
    cdef long nmoves = uniforms.shape[0] // 5
    cdef long accepted = 0
    cdef long t, v, vp, e, deg, degp, k, w
    cdef double u_tel, u_choice, u_dir, u_pick, u_acc, ratio
    for t in range(nmoves):
        u_tel = uniforms[5 * t]
        u_choice = uniforms[5 * t + 1]
        u_dir = uniforms[5 * t + 2]
        u_pick = uniforms[5 * t + 3]
        u_acc = uniforms[5 * t + 4]
        if u_tel < 0.25:
            if a == b:
                w = <long>(u_pick * n_vertices)
                if w >= n_vertices:
                    w = n_vertices - 1
                a = w
                b = w
                accepted += 1
        else:
            if u_choice < 0.5:
                v = a
            else:
                v = b
            deg = indptr[v + 1] - indptr[v]
            if deg > 0:
                k = <long>(u_pick * deg)
                if k >= deg:
                    k = deg - 1
                vp = nbrs[indptr[v] + k]
                e = eids[indptr[v] + k]
                degp = indptr[vp + 1] - indptr[vp]
                if u_dir < 0.5:
                    ratio = beta[e] / (n[e] + 1.0) * deg / degp
                    if u_acc < ratio:
                        n[e] += 1
                        if u_choice < 0.5:
                            a = vp
                        else:
                            b = vp
                        accepted += 1
                else:
                    if n[e] > 0 and beta[e] > 0:
                        ratio = n[e] / beta[e] * deg / degp
                        if u_acc < ratio:
                            n[e] -= 1
                            if u_choice < 0.5:
                                a = vp
                            else:
                                b = vp
                            accepted += 1
        closed_out[t] = 1 if a == b else 0
    ab[0] = a
    ab[1] = b
    return accepted
