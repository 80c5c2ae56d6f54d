"""Independent brute-force reference implementations.

These are deliberately naive (itertools loops, dict-based BFS) and share no
code with the package's enumeration machinery; the test suite checks the fast
oracles against these on tiny instances.
"""

import itertools
import math

import numpy as np


def _boundary_clamped(graph, bc):
    if bc == "plus":
        return set(int(v) for v in graph.boundary)
    return set()


def naive_spin_expectation(graph, J, h, A, bc="free", tau_field=None):
    """<sigma_A> by looping over all +-1 assignments.

    J: per-edge couplings over all edges of the graph (ghost edges included).
    h: per-vertex linear field (applied in addition to ghost edges, so pass
       zeros when the field is encoded by ghost edges).
    tau_field: optional per-vertex additive field from explicit exterior spins.
    """
    ns = graph.n_sites
    clamped = _boundary_clamped(graph, bc)
    lin = np.array(h, dtype=float).copy()
    if tau_field is not None:
        lin = lin + np.asarray(tau_field, dtype=float)
    free = [v for v in range(ns) if v not in clamped]
    num = 0.0
    den = 0.0
    for assign in itertools.product([1, -1], repeat=len(free)):
        s = {}
        for v in clamped:
            s[v] = 1
        for v, val in zip(free, assign):
            s[v] = val
        if graph.ghost:
            s[graph.ghost_index] = 1
        energy = 0.0
        for e in range(len(graph.edges)):
            u, v = int(graph.edges[e, 0]), int(graph.edges[e, 1])
            energy += J[e] * s[u] * s[v]
        for v in range(ns):
            energy += lin[v] * s[v]
        w = math.exp(energy)
        prod = 1
        for a in A:
            prod *= s[int(a)]
        num += w * prod
        den += w
    return num / den


def _components(n_vertices, edge_list):
    """List of frozensets of vertices, one per connected component."""
    adj = {v: [] for v in range(n_vertices)}
    for u, v in edge_list:
        adj[u].append(v)
        adj[v].append(u)
    seen = set()
    comps = []
    for start in range(n_vertices):
        if start in seen:
            continue
        stack = [start]
        comp = set()
        while stack:
            x = stack.pop()
            if x in comp:
                continue
            comp.add(x)
            stack.extend(adj[x])
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def naive_fk_probability(graph, p_edges, event, bc="free"):
    """Probability of event(open_tuple, components) under the random-cluster
    measure with q=2 and per-edge probability p_e.

    Wired bc identifies all exterior-boundary vertices before counting
    clusters (the identified vertex keeps the smallest boundary index).
    """
    m = len(graph.edges)
    nv = graph.n_vertices
    cmap = list(range(nv))
    if bc == "wired" and len(graph.boundary) > 0:
        b0 = int(graph.boundary[0])
        for v in graph.boundary:
            cmap[int(v)] = b0
    total = 0.0
    hit = 0.0
    for bits in itertools.product([0, 1], repeat=m):
        w = 1.0
        open_edges = []
        for e in range(m):
            if bits[e]:
                w *= p_edges[e]
                open_edges.append((cmap[int(graph.edges[e, 0])],
                                   cmap[int(graph.edges[e, 1])]))
            else:
                w *= 1.0 - p_edges[e]
        # count clusters of the contracted graph (skip identified duplicates)
        keep = sorted(set(cmap))
        remap = {v: i for i, v in enumerate(keep)}
        comps = _components(len(keep), [(remap[u], remap[v]) for u, v in open_edges])
        w *= 2.0 ** len(comps)

        def connected(a, b, _comps=comps, _remap=remap, _cmap=cmap):
            ca, cb = _remap[_cmap[int(a)]], _remap[_cmap[int(b)]]
            return any(ca in c and cb in c for c in _comps)

        total += w
        if event(bits, connected):
            hit += w
    return hit / total


def naive_current_sum(graph, beta_edges, A, Nmax):
    """Truncated sourced-current partition sum by looping over all
    multiplicity vectors with entries <= Nmax."""
    m = len(graph.edges)
    nv = graph.n_vertices
    target = set(int(a) for a in A)
    total = 0.0
    for n in itertools.product(range(Nmax + 1), repeat=m):
        deg = [0] * nv
        w = 1.0
        for e in range(m):
            u, v = int(graph.edges[e, 0]), int(graph.edges[e, 1])
            deg[u] += n[e]
            deg[v] += n[e]
            w *= beta_edges[e] ** n[e] / math.factorial(n[e])
        sources = {v for v in range(nv) if deg[v] % 2 == 1}
        if sources == target:
            total += w
    return total


def naive_cluster_law(graph, p):
    """Law of the origin's open edge-cluster under the free q=2 measure."""
    m = len(graph.edges)
    origin = graph.origin
    masses = {}
    total = 0.0
    for bits in itertools.product([0, 1], repeat=m):
        open_edges = [e for e in range(m) if bits[e]]
        pairs = [(int(graph.edges[e, 0]), int(graph.edges[e, 1])) for e in open_edges]
        comps = _components(graph.n_vertices, pairs)
        w = p ** len(open_edges) * (1 - p) ** (m - len(open_edges)) * 2.0 ** len(comps)
        comp0 = next(c for c in comps if origin in c)
        cluster = frozenset(e for e in open_edges
                            if int(graph.edges[e, 0]) in comp0)
        masses[cluster] = masses.get(cluster, 0.0) + w
        total += w
    return {c: v / total for c, v in masses.items()}
