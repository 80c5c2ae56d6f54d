"""Pure-Python/numpy implementations of the hot kernels.

These mirror the compiled versions exactly: given the same inputs (including
the same pre-drawn uniform buffers) they produce bit-identical outputs, so the
two backends are interchangeable and the test suite can compare them directly.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

BACKEND = "fallback"


def label_clusters(n_vertices, edges, open_mask):
    """Connected-component labels of the subgraph of open edges.

    Each vertex is labeled by the smallest vertex index in its component
    (isolated vertices are their own label).

    Parameters
    ----------
    n_vertices : int
    edges : (m, 2) integer array
    open_mask : (m,) boolean array

    Returns
    -------
    (n_vertices,) int64 array of labels.
    """
    edges = np.asarray(edges)
    open_mask = np.asarray(open_mask, dtype=bool)
    u = edges[open_mask, 0]
    v = edges[open_mask, 1]
    data = np.ones(len(u), dtype=np.int8)
    adj = coo_matrix((data, (u, v)), shape=(n_vertices, n_vertices))
    _, comp = connected_components(adj, directed=False)
    # relabel each component by its minimum vertex index
    order = np.arange(n_vertices, dtype=np.int64)
    minimum = np.full(comp.max() + 1 if n_vertices else 0, n_vertices, dtype=np.int64)
    np.minimum.at(minimum, comp, order)
    return minimum[comp]


def worm_run(n, ab, indptr, nbrs, eids, beta, uniforms, closed_out, n_vertices):
    """Advance a worm chain by ``len(uniforms) // 5`` elementary moves.

    ``beta`` is a per-edge coupling array (field edges carry their own value).

    State: a multigraph edge multiplicity vector ``n`` plus two marked
    endpoints ``ab = [a, b]``; the invariant is that the odd-degree vertex set
    of ``n`` equals the symmetric difference of the (fixed) source set with
    {a} and {b}.  The stationary law gives every state weight
    prod_e beta^{n_e} / n_e!, so configurations observed while a == b are
    distributed as the source-set current measure.

    Each move consumes exactly 5 uniforms (teleport gate, endpoint choice,
    increment/decrement choice, edge/vertex choice, accept/reject), whether or
    not the corresponding branch uses them, keeping both backends in lockstep.

    ``closed_out`` (uint8, one slot per move) records whether the state was
    closed (a == b) after each move.  Returns the number of accepted moves.
    """
    n = n  # int64[:]
    a, b = int(ab[0]), int(ab[1])
    nmoves = len(uniforms) // 5
    accepted = 0
    for t in range(nmoves):
        u_tel = uniforms[5 * t]
        u_choice = uniforms[5 * t + 1]
        u_dir = uniforms[5 * t + 2]
        u_pick = uniforms[5 * t + 3]
        u_acc = uniforms[5 * t + 4]
        if u_tel < 0.25:
            # teleport: when closed, re-seat both endpoints at a uniform vertex
            if a == b:
                w = int(u_pick * n_vertices)
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
                k = int(u_pick * deg)
                if k >= deg:
                    k = deg - 1
                vp = int(nbrs[indptr[v] + k])
                e = int(eids[indptr[v] + k])
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
