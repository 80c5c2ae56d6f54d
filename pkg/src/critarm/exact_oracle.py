"""Exhaustive-enumeration ground truth on tiny graphs.

Provides exact spin expectations, random-cluster (FK) event probabilities,
truncated sourced-current sums with rigorous tail bounds, the law of the
origin's cluster, relative entropy between such laws, and a battery of
checkers for the correlation inequalities and coupling identities used
throughout the toolkit.

Model conventions (ferromagnetic regime throughout):
  * Spin measure on {-1,+1}^V with weight exp(sum_e J_e s_u s_v + sum_x h_x s_x),
    J_e >= 0, h_x >= 0.  A ghost vertex, when present, has s == +1 and its
    edges carry coupling h_x, which is an equivalent encoding of the field.
  * "plus" boundary condition clamps every vertex of the exterior boundary
    to +1; "explicit" boundary conditions assign spins tau in {-1,0,+1} to
    exterior sites, absorbed as an extra field on adjacent vertices.
  * FK (q=2 random-cluster) weights: 2^{k^xi(w)} (e^{2 beta} - 1)^{#open},
    equivalently per-edge probability p = 1 - e^{-2 beta}; "wired" identifies
    all exterior-boundary vertices when counting clusters.
  * Currents: integer edge multiplicities n with weight
    prod_e beta_e^{n_e}/n_e!, sources = vertices of odd total degree.
"""

from __future__ import annotations

import csv as _csv
import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import (CapacityError, LatticeGraph, build_box, build_grid,
                      build_cycle, build_path, induced_subgraph)

TOLERANCE = 1e-10

INEQUALITY_NAMES = (
    "griffiths", "monotonicity", "ding", "ghs", "double_truncated",
    "neighbor_comparison", "simon_lieb", "boundary_field", "bk_type",
    "tree_graph", "four_point", "es_identities", "edge_influence",
)


class BudgetError(CapacityError):
    """Instance exceeds the configured enumeration budget."""


class HypothesisError(ValueError):
    """Instance violates the hypotheses of the requested inequality."""


class InconsistentLawError(ValueError):
    """Relative entropy requested between laws with incompatible supports."""


# ---------------------------------------------------------------------------
# coupling specification
# ---------------------------------------------------------------------------

@dataclass
class CouplingSpec:
    """Couplings, field and boundary condition for a spin model on a graph.

    J: scalar or per-lattice-edge array of couplings (>= 0).
    h: scalar or per-vertex array of fields (>= 0).
    bc: "free", "plus" (exterior boundary clamped to +1), or "explicit"
        (exterior spins given by ``tau``).
    tau: for bc="explicit", a map from exterior coordinate tuples to values
         in {-1, 0, +1}; missing sites count as 0.
    boundary_coupling: coupling on graph-exterior bonds for bc="explicit";
         defaults to J when J is a scalar.
    """

    J: object
    h: object = 0.0
    bc: str = "free"
    tau: dict | None = None
    boundary_coupling: float | None = None

    def edge_couplings(self, graph: LatticeGraph) -> np.ndarray:
        """Couplings for every edge of the graph, ghost edges carrying h."""
        m = len(graph.edges)
        out = np.empty(m, dtype=float)
        out[: graph.n_lattice_edges] = np.broadcast_to(
            np.asarray(self.J, dtype=float), (graph.n_lattice_edges,))
        if graph.ghost:
            hv = np.broadcast_to(np.asarray(self.h, dtype=float), (graph.n_sites,))
            # ghost edges are appended in lattice-vertex order
            out[graph.n_lattice_edges:] = hv[
                graph.edges[graph.n_lattice_edges:, 0]]
        return out

    def linear_field(self, graph: LatticeGraph) -> np.ndarray:
        """Per-vertex field term (zero when the ghost encodes it), plus the
        effective field of explicit exterior spins."""
        if graph.ghost:
            lin = np.zeros(graph.n_sites)
        else:
            lin = np.broadcast_to(np.asarray(self.h, dtype=float),
                                  (graph.n_sites,)).astype(float).copy()
        if self.bc == "explicit":
            bj = self.boundary_coupling
            if bj is None:
                if np.ndim(self.J) != 0:
                    raise ValueError(
                        "explicit boundary spins need boundary_coupling when J is per-edge")
                bj = float(self.J)
            tau = self.tau or {}
            members = {tuple(c) for c in graph.coords.tolist()}
            for u in graph.boundary:
                cu = graph.coords[int(u)]
                for k in range(graph.d):
                    for s in (-1, 1):
                        cv = list(cu)
                        cv[k] += s
                        cv = tuple(cv)
                        if cv not in members:
                            lin[int(u)] += bj * tau.get(cv, 0)
        return lin

    def clamped(self, graph: LatticeGraph) -> set:
        if self.bc == "plus":
            return {int(v) for v in graph.boundary}
        return set()

    def validate(self, graph: LatticeGraph):
        J = np.asarray(self.J, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if np.any(J < 0) or np.any(h < 0):
            raise HypothesisError("ferromagnetic regime requires J >= 0 and h >= 0")
        if self.bc not in ("free", "plus", "explicit"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.bc == "explicit" and self.tau:
            if any(t not in (-1, 0, 1) for t in self.tau.values()):
                raise ValueError("explicit boundary spins must lie in {-1,0,+1}")


# ---------------------------------------------------------------------------
# spin enumeration
# ---------------------------------------------------------------------------

_CHUNK = 1 << 16


def _reduced_model(graph, spec):
    """Fold clamped/ghost vertices into an effective model on free spins.

    Returns (free, pos, Jf, iu, iv, lin) where ``free`` lists the free
    vertices, ``pos`` maps vertex -> position in ``free`` (clamped and ghost
    vertices map to -1), and the energy of an assignment s is
    sum Jf s_iu s_iv + lin . s up to an additive constant.
    """
    spec.validate(graph)
    clamped = spec.clamped(graph)
    J = spec.edge_couplings(graph)
    lin_full = spec.linear_field(graph)
    ns = graph.n_sites
    fixed = set(clamped)
    if graph.ghost:
        fixed.add(graph.ghost_index)
    free = [v for v in range(graph.n_vertices) if v not in fixed]
    pos = {v: i for i, v in enumerate(free)}
    lin = np.array([lin_full[v] if v < ns else 0.0 for v in free])
    iu, iv, Jf = [], [], []
    for e in range(len(graph.edges)):
        a, b = int(graph.edges[e, 0]), int(graph.edges[e, 1])
        fa, fb = a in pos, b in pos
        if fa and fb:
            iu.append(pos[a])
            iv.append(pos[b])
            Jf.append(J[e])
        elif fa:
            lin[pos[a]] += J[e]  # fixed neighbor has spin +1
        elif fb:
            lin[pos[b]] += J[e]
        # fixed-fixed edges contribute a constant
    return free, pos, np.asarray(Jf), np.asarray(iu, dtype=int), \
        np.asarray(iv, dtype=int), lin


def _enumerate_spins(nf):
    """Yield (codes, signs) chunks covering {-1,+1}^nf; bit b=0 means +1."""
    total = 1 << nf
    ks = np.arange(nf)
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = (codes[:, None] >> ks) & 1
        yield codes, 1 - 2 * bits.astype(np.float64)


def spin_expectation(graph: LatticeGraph, spec: CouplingSpec, A,
                     budget: int = 20) -> float:
    """<sigma_A> by direct summation over spin assignments.

    A is a collection of vertex indices (the ghost index allowed, with
    sigma_ghost = +1); repeated vertices cancel.  Empty A returns 1.
    """
    A = list(A)
    odd = set()
    for a in A:
        a = int(a)
        if a in odd:
            odd.remove(a)
        else:
            odd.add(a)
    free, pos, Jf, iu, iv, lin = _reduced_model(graph, spec)
    nf = len(free)
    if nf > budget:
        raise BudgetError(f"{nf} free spins exceed budget {budget}")
    cols = [pos[a] for a in odd if a in pos]  # fixed vertices contribute +1
    shift = float(np.sum(np.abs(Jf)) + np.sum(np.abs(lin)))
    num = 0.0
    den = 0.0
    for _, s in _enumerate_spins(nf):
        energy = s @ lin if nf else np.zeros(len(s))
        for e in range(len(Jf)):
            energy += Jf[e] * s[:, iu[e]] * s[:, iv[e]]
        w = np.exp(energy - shift)
        obs = np.ones(len(s))
        for c in cols:
            obs *= s[:, c]
        num += float(w @ obs)
        den += float(np.sum(w))
    return num / den


def spin_distribution(graph: LatticeGraph, spec: CouplingSpec,
                      budget: int = 14) -> np.ndarray:
    """Exact law over full spin assignments, as a vector of length
    2^{n_sites} indexed by sum over x of (sigma_x == +1) << x.

    Assignments violating clamps carry zero mass.
    """
    free, pos, Jf, iu, iv, lin = _reduced_model(graph, spec)
    nf = len(free)
    if graph.n_sites > budget:
        raise BudgetError(f"{graph.n_sites} spins exceed budget {budget}")
    free_sites = [v for v in free if v < graph.n_sites]
    base = 0
    for v in range(graph.n_sites):
        if v not in pos:
            base |= 1 << v  # clamped at +1
    out = np.zeros(1 << graph.n_sites)
    shift = float(np.sum(np.abs(Jf)) + np.sum(np.abs(lin)))
    for codes, s in _enumerate_spins(nf):
        energy = s @ lin if nf else np.zeros(len(s))
        for e in range(len(Jf)):
            energy += Jf[e] * s[:, iu[e]] * s[:, iv[e]]
        w = np.exp(energy - shift)
        idx = np.full(len(codes), base, dtype=np.int64)
        for v in free_sites:
            bit = (codes >> pos[v]) & 1  # bit 0 means +1
            idx |= (1 - bit) << v
        np.add.at(out, idx, w)
    return out / out.sum()


def truncated_correlation(graph, spec, A, B, budget: int = 20) -> float:
    """<sigma_A ; sigma_B> = <sigma_A sigma_B> - <sigma_A><sigma_B>."""
    AdB = set(A) ^ set(B)
    return (spin_expectation(graph, spec, AdB, budget)
            - spin_expectation(graph, spec, A, budget)
            * spin_expectation(graph, spec, B, budget))


# ---------------------------------------------------------------------------
# FK enumeration
# ---------------------------------------------------------------------------

def beta_to_p(beta):
    """Bond probability of the q=2 random-cluster measure at coupling beta."""
    return 1.0 - math.exp(-2.0 * beta)


class FKTable:
    """Exact q=2 random-cluster measure on a small graph, fully enumerated.

    Stores, for every edge subset (mask), its probability and the component
    label of every vertex (labels computed after the wired contraction when
    bc="wired").
    """

    def __init__(self, graph: LatticeGraph, p_edges, bc: str = "free",
                 budget: int = 24):
        m = len(graph.edges)
        if m > budget:
            raise BudgetError(f"{m} edges exceed budget {budget}")
        if bc not in ("free", "wired"):
            raise ValueError(f"unknown bond boundary condition {bc!r}")
        p = np.broadcast_to(np.asarray(p_edges, dtype=float), (m,)).copy()
        if np.any(p < 0) or np.any(p >= 1):
            raise ValueError("edge probabilities must lie in [0, 1)")
        self.graph = graph
        self.bc = bc
        self.p = p
        nv = graph.n_vertices
        cmap = np.arange(nv, dtype=np.int64)
        if bc == "wired" and len(graph.boundary) > 0:
            cmap[np.asarray(graph.boundary, dtype=np.int64)] = int(graph.boundary[0])
        keep = np.unique(cmap)
        compress = {int(v): i for i, v in enumerate(keep)}
        self.cmap = np.array([compress[int(cmap[v])] for v in range(nv)],
                             dtype=np.int64)
        self.nc = len(keep)
        cedges = self.cmap[graph.edges.astype(np.int64)]

        n_masks = 1 << m
        labels = np.empty((n_masks, self.nc), dtype=np.int8)
        k = np.empty(n_masks, dtype=np.int16)
        eu = cedges[:, 0].tolist()
        ev = cedges[:, 1].tolist()
        nc = self.nc
        for mask in range(n_masks):
            parent = list(range(nc))
            mm = mask
            e = 0
            while mm:
                if mm & 1:
                    ra = eu[e]
                    while parent[ra] != ra:
                        ra = parent[ra]
                    rb = ev[e]
                    while parent[rb] != rb:
                        rb = parent[rb]
                    if ra != rb:
                        if ra < rb:
                            parent[rb] = ra
                        else:
                            parent[ra] = rb
                mm >>= 1
                e += 1
            kk = 0
            for v in range(nc):
                r = v
                while parent[r] != r:
                    r = parent[r]
                parent[v] = r
                if r == v:
                    kk += 1
            labels[mask] = parent
            k[mask] = kk
        self.labels = labels
        self.k = k.astype(np.float64)
        masks = np.arange(n_masks, dtype=np.int64)
        self.open_bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
        with np.errstate(divide="ignore"):
            lodds = np.where(p > 0, np.log(np.maximum(p, 1e-300) / (1 - p)), -1e308)
        logw = self.k * math.log(2.0) + self.open_bits @ lodds
        logw -= logw.max()
        w = np.exp(logw)
        self.probs = w / w.sum()

    # -- event helpers (all return boolean vectors over masks) --------------

    def connected(self, a, b) -> np.ndarray:
        ca, cb = self.cmap[int(a)], self.cmap[int(b)]
        return self.labels[:, ca] == self.labels[:, cb]

    def connected_to_boundary(self, a) -> np.ndarray:
        if len(self.graph.boundary) == 0:
            raise HypothesisError("graph has no exterior boundary")
        if self.bc == "wired":
            return self.connected(a, int(self.graph.boundary[0]))
        out = np.zeros(len(self.probs), dtype=bool)
        for b in self.graph.boundary:
            out |= self.connected(a, int(b))
        return out

    def edge_open(self, e) -> np.ndarray:
        return self.open_bits[:, int(e)]

    def prob(self, indicator) -> float:
        return float(self.probs @ np.asarray(indicator, dtype=float))

    def pair_matrix(self) -> np.ndarray:
        """Matrix of connection probabilities over contracted classes."""
        out = np.zeros((self.nc, self.nc))
        eq = self.labels[:, :, None] == self.labels[:, None, :]
        out = np.einsum("m,mij->ij", self.probs, eq.astype(np.float64))
        return out


@dataclass
class _OracleBond:
    """Bond configuration handed to event predicates: the open-edge mask plus
    lazy connectivity helpers consistent with the boundary condition."""

    graph: LatticeGraph
    open: np.ndarray
    bc: str = "free"
    _table: object = None
    _mask: int = 0

    def connected(self, a, b) -> bool:
        return bool(self._table.labels[self._mask, self._table.cmap[int(a)]]
                    == self._table.labels[self._mask, self._table.cmap[int(b)]])

    def connected_to_boundary(self, a) -> bool:
        if self.bc == "wired":
            return self.connected(a, int(self.graph.boundary[0]))
        return any(self.connected(a, int(b)) for b in self.graph.boundary)

    def cluster_count(self) -> int:
        return int(self._table.k[self._mask])


def fk_event_probability(graph: LatticeGraph, beta: float, xi: str, event,
                         budget: int = 24) -> float:
    """Exact probability of ``event`` under the q=2 random-cluster measure at
    uniform coupling beta with boundary condition xi in {free, wired}.

    ``event`` is a predicate receiving a bond-configuration object with
    fields/methods: open (bool array over edges), connected(a, b),
    connected_to_boundary(a), cluster_count().
    """
    table = FKTable(graph, beta_to_p(beta), bc=xi, budget=budget)
    hit = np.zeros(len(table.probs), dtype=bool)
    for mask in range(len(table.probs)):
        bond = _OracleBond(graph, table.open_bits[mask], xi, table, mask)
        hit[mask] = bool(event(bond))
    return table.prob(hit)


# ---------------------------------------------------------------------------
# currents
# ---------------------------------------------------------------------------

def _truncated_series(beta, Nmax):
    """(even-part sum, odd-part sum) of exp restricted to exponents <= Nmax."""
    s0 = sum(beta ** k / math.factorial(k) for k in range(0, Nmax + 1, 2))
    s1 = sum(beta ** k / math.factorial(k) for k in range(1, Nmax + 1, 2))
    return s0, s1


def _current_edges(graph, spec):
    """Active edges for current enumeration: (edge index, u, v, beta_e) with
    beta_e > 0 (zero-coupling edges can only carry multiplicity 0)."""
    J = spec.edge_couplings(graph)
    out = []
    for e in range(len(graph.edges)):
        if J[e] > 0:
            out.append((e, int(graph.edges[e, 0]), int(graph.edges[e, 1]),
                        float(J[e])))
    return out


def _normalize_sources(graph, A):
    A = set(int(a) for a in A)
    if len(A) % 2 == 1:
        if graph.ghost and graph.ghost_index not in A:
            A.add(graph.ghost_index)
        else:
            raise HypothesisError("odd source sets require a ghost vertex")
    return A


def current_sum(graph: LatticeGraph, spec: CouplingSpec, A, Nmax: int,
                budget: int = 24):
    """Truncated partition sum over currents with sources A.

    Returns (value, residual): value = sum over currents with every
    multiplicity <= Nmax of prod_e beta_e^{n_e}/n_e!, and residual the exact
    mass lost to truncation (an upper bound on the error, from hyperbolic
    series tails).
    """
    if Nmax < 1:
        raise ValueError("Nmax >= 1 required")
    spec.validate(graph)
    A = _normalize_sources(graph, A)
    active = _current_edges(graph, spec)
    m = len(active)
    if m > budget:
        raise BudgetError(f"{m} active edges exceed budget {budget}")
    touched = set()
    for _, u, v, _b in active:
        touched.add(u)
        touched.add(v)
    if not A <= touched:
        return 0.0, 0.0  # a source needs at least one positive-coupling edge
    S0 = np.array([_truncated_series(b, Nmax)[0] for *_e, b in active])
    S1 = np.array([_truncated_series(b, Nmax)[1] for *_e, b in active])
    C0 = np.array([math.cosh(b) for *_e, b in active])
    C1 = np.array([math.sinh(b) for *_e, b in active])
    inc = {}
    for j, (_e, u, v, _b) in enumerate(active):
        inc.setdefault(u, 0)
        inc.setdefault(v, 0)
        inc[u] ^= 1 << j
        inc[v] ^= 1 << j
    verts = sorted(inc)
    inc_arr = np.array([inc[v] for v in verts], dtype=np.uint64)
    want = np.array([1 if v in A else 0 for v in verts], dtype=np.uint64)
    value = 0.0
    full = 0.0
    total = 1 << m
    for start in range(0, total, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, total), dtype=np.uint64)
        ok = np.ones(len(masks), dtype=bool)
        for j in range(len(verts)):
            par = np.bitwise_count(masks & inc_arr[j]) & np.uint64(1)
            ok &= par == want[j]
        if not ok.any():
            continue
        sel = masks[ok]
        bits = ((sel[:, None] >> np.arange(m, dtype=np.uint64)) & np.uint64(1)
                ).astype(bool)
        value += float(np.sum(np.prod(np.where(bits, S1, S0), axis=1)))
        full += float(np.sum(np.prod(np.where(bits, C1, C0), axis=1)))
    return value, max(full - value, 0.0)


# -- switching identity ------------------------------------------------------

SwitchingReport = namedtuple("SwitchingReport", ["lhs", "rhs", "gap", "residual"])


def _embed_edges(graphG, graphH):
    """Indices, in graphH's edge list, of graphG's edges (matched by endpoint
    coordinates; ghost matches ghost).  Raises if G is not a subgraph of H."""
    coordH = {tuple(c): i for i, c in enumerate(graphH.coords.tolist())}

    def to_h(v, graph):
        if graph.ghost and v == graph.ghost_index:
            if not graphH.ghost:
                raise HypothesisError("subgraph has a ghost but host does not")
            return graphH.ghost_index
        key = tuple(graph.coords[v])
        if key not in coordH:
            raise HypothesisError("subgraph vertex missing from host graph")
        return coordH[key]

    pair_to_idx = {}
    for e in range(len(graphH.edges)):
        a, b = int(graphH.edges[e, 0]), int(graphH.edges[e, 1])
        pair_to_idx[(min(a, b), max(a, b))] = e
    vmap = np.array([to_h(v, graphG) for v in range(graphG.n_vertices)],
                    dtype=np.int64)
    idx = []
    for e in range(len(graphG.edges)):
        a = int(vmap[graphG.edges[e, 0]])
        b = int(vmap[graphG.edges[e, 1]])
        key = (min(a, b), max(a, b))
        if key not in pair_to_idx:
            raise HypothesisError("subgraph edge missing from host graph")
        idx.append(pair_to_idx[key])
    return np.asarray(idx, dtype=np.int64), vmap


def _zeta(f):
    """In-place subset-sum (zeta) transform over the bit lattice."""
    f = f.copy()
    n = len(f)
    step = 1
    while step < n:
        mask = (np.arange(n) & step).astype(bool)
        f[mask] += f[~mask]
        step <<= 1
    return f


def _mobius(f):
    f = f.copy()
    n = len(f)
    step = 1
    while step < n:
        mask = (np.arange(n) & step).astype(bool)
        f[mask] -= f[~mask]
        step <<= 1
    return f


def _class_masses(edge_ids, endpoints, params, target, n_masks, Nmax):
    """(truncated, full) mass vectors over global trace masks for currents
    supported on the given edges with source set ``target``.

    Entry [t] sums prod_e beta^{n_e}/n_e! over currents whose support (set of
    edges with n_e > 0) maps to global mask t and whose sources equal target.
    Computed by a character sum over {-1,+1} vertex assignments, which
    enforces the parity constraint exactly.
    """
    verts = sorted({v for uv in endpoints for v in uv})
    if not set(target) <= set(verts):
        return np.zeros(n_masks), np.zeros(n_masks)
    vpos = {v: i for i, v in enumerate(verts)}
    nv = len(verts)
    mloc = len(edge_ids)
    S0 = np.array([_truncated_series(b, Nmax)[0] for b in params])
    S1 = np.array([_truncated_series(b, Nmax)[1] for b in params])
    C0 = np.cosh(np.asarray(params))
    C1 = np.sinh(np.asarray(params))
    acc_t = np.zeros(1 << mloc)
    acc_f = np.zeros(1 << mloc)
    tmask = 0
    for v in target:
        tmask |= 1 << vpos[v]
    for chi in range(1 << nv):
        sign = -1.0 if bin(chi & tmask).count("1") % 2 else 1.0
        ft = np.ones(1)
        ff = np.ones(1)
        for j in range(mloc):
            u, v = endpoints[j]
            s = -1.0 if bin(chi & ((1 << vpos[u]) | (1 << vpos[v]))).count("1") % 2 else 1.0
            ct = (S0[j] - 1.0) + s * S1[j]
            cf = (C0[j] - 1.0) + s * C1[j]
            ft = np.concatenate([ft, ft * ct])
            ff = np.concatenate([ff, ff * cf])
        acc_t += sign * ft
        acc_f += sign * ff
    acc_t /= 1 << nv
    acc_f /= 1 << nv
    out_t = np.zeros(n_masks)
    out_f = np.zeros(n_masks)
    for local in range(1 << mloc):
        g = 0
        for j in range(mloc):
            if local >> j & 1:
                g |= 1 << int(edge_ids[j])
        out_t[g] += acc_t[local]
        out_f[g] += acc_f[local]
    return out_t, out_f


def verify_switching(graphG: LatticeGraph, graphH: LatticeGraph,
                     spec: CouplingSpec, A, B, F, Nmax: int,
                     budget: int = 20):
    """Check the source-switching identity on truncated current pairs.

    lhs = sum over (n1 on G with sources A, n2 on H with sources B) of
          F(n1+n2) w(n1) w(n2);
    rhs = the switched sum (sources emptyset on G and A xor B on H) with the
          indicator that every cluster of (n1+n2) restricted to G meets A an
          even number of times.

    ``F`` must be measurable with respect to the trace of n1+n2 (the set of
    edges with positive multiplicity); it receives a boolean array over the
    edges of graphH.  Vertices of A are given as graphG indices, of B as
    graphH indices.  Returns SwitchingReport(lhs, rhs, gap, residual); the
    identity holds when gap <= residual (the truncation mass bound).
    """
    spec.validate(graphH)
    gidx, vmap = _embed_edges(graphG, graphH)
    JH = spec.edge_couplings(graphH)
    activeH = [(e, int(graphH.edges[e, 0]), int(graphH.edges[e, 1]), float(JH[e]))
               for e in range(len(graphH.edges)) if JH[e] > 0]
    m = len(activeH)
    if m > budget:
        raise BudgetError(f"{m} active edges exceed switching budget {budget}")
    glob = {e: j for j, (e, *_r) in enumerate(activeH)}
    G_edge_set = {int(e) for e in gidx if int(e) in glob}
    # currents on G live on G's edges (embedded); zero-coupling edges dropped
    edgesG = [glob[e] for e in sorted(G_edge_set)]
    endG = [(activeH[j][1], activeH[j][2]) for j in edgesG]
    parG = [activeH[j][3] for j in edgesG]
    edgesH = list(range(m))
    endH = [(u, v) for (_e, u, v, _b) in activeH]
    parH = [b for (*_r, b) in activeH]

    # sources of n1 re-expressed in H vertex indexing
    A_h = sorted(int(vmap[a]) for a in _normalize_sources(graphG, A))
    B_h = sorted(_normalize_sources(graphH, B))
    AdB = sorted(set(A_h) ^ set(B_h))

    n_masks = 1 << m
    UG_A, FG_A = _class_masses(edgesG, endG, parG, A_h, n_masks, Nmax)
    UH_B, FH_B = _class_masses(edgesH, endH, parH, B_h, n_masks, Nmax)
    UG_0, FG_0 = _class_masses(edgesG, endG, parG, [], n_masks, Nmax)
    UH_AB, FH_AB = _class_masses(edgesH, endH, parH, AdB, n_masks, Nmax)

    T_lhs = _mobius(_zeta(UG_A) * _zeta(UH_B))
    T_rhs = _mobius(_zeta(UG_0) * _zeta(UH_AB))

    # F and the even-intersection indicator per trace mask
    mH = len(graphH.edges)
    bitpos = np.array([e for (e, *_r) in activeH], dtype=np.int64)
    g_local = np.array(edgesG, dtype=np.int64)
    edge_uG = np.array([u for u, _v in endG], dtype=np.int32)
    edge_vG = np.array([v for _u, v in endG], dtype=np.int32)
    edgesG_arr = np.stack([edge_uG, edge_vG], axis=1) if endG else \
        np.empty((0, 2), dtype=np.int32)
    A_arr = np.asarray(A_h, dtype=np.int64)
    nvH = graphH.n_vertices
    Fv = np.empty(n_masks)
    Iv = np.empty(n_masks, dtype=bool)
    for t in range(n_masks):
        trace = np.zeros(mH, dtype=bool)
        for j in range(m):
            if t >> j & 1:
                trace[bitpos[j]] = True
        Fv[t] = float(F(trace))
        openG = np.array([(t >> int(j)) & 1 == 1 for j in g_local], dtype=bool)
        if len(A_arr) == 0:
            Iv[t] = True
        else:
            labels = kernels.label_clusters(nvH, edgesG_arr, openG)
            counts = {}
            for a in A_arr:
                r = int(labels[a])
                counts[r] = counts.get(r, 0) + 1
            Iv[t] = all(c % 2 == 0 for c in counts.values())
    Fbound = float(np.max(np.abs(Fv))) if n_masks else 0.0
    lhs = float(T_lhs @ Fv)
    rhs = float((T_rhs * Iv) @ Fv)
    residual = Fbound * ((FG_A.sum() * FH_B.sum() - UG_A.sum() * UH_B.sum())
                         + (FG_0.sum() * FH_AB.sum() - UG_0.sum() * UH_AB.sum()))
    return SwitchingReport(lhs, rhs, abs(lhs - rhs), residual + 1e-12 * Fbound)


# ---------------------------------------------------------------------------
# cluster-of-origin law and relative entropy
# ---------------------------------------------------------------------------

@dataclass
class ClusterLaw:
    """Exact law of the origin's open edge-cluster under the free q=2
    random-cluster measure; masses indexed by frozensets of edge indices
    (the empty set is the isolated-origin atom)."""

    graph: LatticeGraph
    p: float
    masses: dict = field(default_factory=dict)

    @property
    def isolated(self) -> float:
        return self.masses.get(frozenset(), 0.0)

    def event_probability(self, predicate) -> float:
        """Probability of a cluster-measurable event (predicate on the edge
        set of the origin's cluster)."""
        return sum(m for c, m in self.masses.items() if predicate(c))

    def validate(self):
        total = sum(self.masses.values())
        if abs(total - 1.0) > 1e-12:
            raise InconsistentLawError(f"masses sum to {total}, not 1")


def cluster_law(graph: LatticeGraph, p: float, budget: int = 24) -> ClusterLaw:
    """Exact distribution of the edge-cluster of the origin at bond
    parameter p, free boundary condition."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0,1)")
    table = FKTable(graph, p, bc="free", budget=budget)
    origin = graph.origin
    co = table.cmap[origin]
    masses = {}
    eu = table.cmap[graph.edges[:, 0].astype(np.int64)]
    for mask in range(len(table.probs)):
        lab = table.labels[mask]
        lo = lab[co]
        cluster = frozenset(
            int(e) for e in np.flatnonzero(table.open_bits[mask])
            if lab[eu[int(e)]] == lo)
        masses[cluster] = masses.get(cluster, 0.0) + float(table.probs[mask])
    law = ClusterLaw(graph, p, masses)
    law.validate()
    return law


def relative_entropy(law_pprime: ClusterLaw, law_p: ClusterLaw) -> float:
    """H(law_pprime || law_p) = sum_C phi'(C) log(phi'(C)/phi(C))."""
    out = 0.0
    for c, mp in law_pprime.masses.items():
        if mp <= 0:
            continue
        mq = law_p.masses.get(c, 0.0)
        if mq <= 0:
            raise InconsistentLawError("support of first law not contained in second")
        out += mp * math.log(mp / mq)
    return out


# ---------------------------------------------------------------------------
# inequality checkers
# ---------------------------------------------------------------------------

@dataclass
class InequalityReport:
    name: str
    instance: str
    lhs: float
    rhs: float
    margin: float
    passed: bool

    @staticmethod
    def make(name, instance, lhs, rhs, tolerance=TOLERANCE):
        margin = rhs - lhs
        return InequalityReport(name, instance, lhs, rhs, margin,
                                margin >= -tolerance)


def _random_graph(rng, min_sites=2, need_boundary=False, no_cycle=False):
    choices = ["path", "cycle", "box22", "box23", "box33"]
    if need_boundary or no_cycle:
        choices.remove("cycle")
    while True:
        kind = choices[rng.integers(len(choices))]
        if kind == "path":
            g = build_path(int(rng.integers(3, 7)))
        elif kind == "cycle":
            g = build_cycle(int(rng.integers(3, 7)))
        elif kind == "box22":
            g = build_grid((2, 2), kind="box")
        elif kind == "box23":
            g = build_grid((2, 3), kind="box")
        else:
            g = build_box(2, 1)
        if g.n_sites >= min_sites:
            return g


def _random_couplings(rng, graph):
    return rng.uniform(0.1, 1.2, graph.n_lattice_edges)


def _random_field(rng, graph):
    return rng.uniform(0.0, 0.5, graph.n_sites)


def _distinct_vertices(rng, graph, k):
    return [int(v) for v in rng.choice(graph.n_sites, size=k, replace=False)]


def _sub_couplings(graphG, graphH, JH):
    idx, _ = _embed_edges(graphG, graphH)
    return np.asarray(JH)[idx[: graphG.n_lattice_edges]]


def _check_griffiths(rng):
    g = _random_graph(rng)
    spec = CouplingSpec(J=_random_couplings(rng, g), h=_random_field(rng, g))
    A = set(_distinct_vertices(rng, g, int(rng.integers(1, 3))))
    B = set(_distinct_vertices(rng, g, int(rng.integers(1, 3))))
    lhs = spin_expectation(g, spec, A) * spin_expectation(g, spec, B)
    rhs = spin_expectation(g, spec, set(A) ^ set(B))
    return lhs, rhs, f"A={sorted(A)} B={sorted(B)} sites={g.n_sites}"


def _check_monotonicity(rng):
    H = _random_graph(rng, min_sites=4)
    JH = _random_couplings(rng, H)
    keep = sorted(rng.choice(H.n_sites, size=int(rng.integers(2, H.n_sites + 1)),
                             replace=False))
    G, index_map = induced_subgraph(H, keep)
    JG = _sub_couplings(G, H, JH)
    if rng.integers(2) == 0:
        # larger graph, larger couplings and fields increase correlations
        hH = _random_field(rng, H)
        shrink = rng.uniform(0.3, 1.0)
        hG = hH[index_map] * shrink
        A_G = set(_distinct_vertices(rng, G, min(2, G.n_sites)))
        A_H = {int(index_map[a]) for a in A_G}
        lhs = spin_expectation(G, CouplingSpec(J=JG * shrink, h=hG), A_G)
        rhs = spin_expectation(H, CouplingSpec(J=JH, h=hH), A_H)
        desc = "volume+coupling growth"
    else:
        # magnetisation under plus boundary decreases with the volume
        v_G = int(rng.integers(G.n_sites))
        v_H = int(index_map[v_G])
        lhs = spin_expectation(H, CouplingSpec(J=JH, bc="plus"), {v_H})
        rhs = spin_expectation(G, CouplingSpec(J=JG, bc="plus"), {v_G})
        desc = "plus-bc volume monotonicity"
    return lhs, rhs, desc


def _check_ding(rng):
    g = _random_graph(rng)
    beta = rng.uniform(0.1, 1.2)
    h = _random_field(rng, g)
    x, y = _distinct_vertices(rng, g, 2)
    with_field = CouplingSpec(J=beta, h=h)
    lhs = truncated_correlation(g, with_field, {x}, {y})
    rhs = spin_expectation(g, CouplingSpec(J=beta), {x, y})
    return lhs, rhs, f"x={x} y={y} beta={beta:.3f}"


def _check_ghs(rng):
    g = _random_graph(rng, min_sites=3)
    spec = CouplingSpec(J=_random_couplings(rng, g), h=_random_field(rng, g))
    o, x, y = _distinct_vertices(rng, g, 3)
    lhs = truncated_correlation(g, spec, {o}, {x, y})
    rhs = (truncated_correlation(g, spec, {o}, {x}) * spin_expectation(g, spec, {y})
           + truncated_correlation(g, spec, {o}, {y}) * spin_expectation(g, spec, {x}))
    return lhs, rhs, f"o={o} x={x} y={y}"


def _check_double_truncated(rng):
    g = _random_graph(rng, min_sites=6)
    spec = CouplingSpec(J=_random_couplings(rng, g))
    x, y, z1, z2, u1, u2 = _distinct_vertices(rng, g, 6)
    e = lambda A: spin_expectation(g, spec, A)
    lhs = (e({x, y, z1, z2, u1, u2})
           - e({x, y, z1, z2}) * e({u1, u2})
           - e({x, y}) * (e({z1, z2, u1, u2}) - e({z1, z2}) * e({u1, u2}))
           - e({z1, z2}) * (e({x, y, u1, u2}) - e({x, y}) * e({u1, u2})))
    zs = (z1, z2)
    us = (u1, u2)
    rhs = 0.0
    for a, b in ((x, y), (y, x)):
        for i in (0, 1):
            for j in (0, 1):
                rhs += 2.0 * e({a, zs[i]}) * e({zs[1 - i], us[j]}) \
                    * e({us[1 - j], b})
    return lhs, rhs, f"x={x} y={y} z=({z1},{z2}) u=({u1},{u2})"


def _check_neighbor_comparison(rng):
    g = _random_graph(rng, min_sites=3)
    J = _random_couplings(rng, g)
    e = int(rng.integers(g.n_lattice_edges))
    z, w = int(g.edges[e, 0]), int(g.edges[e, 1])
    if rng.integers(2) == 0:
        z, w = w, z
    t = math.tanh(J[e])
    if rng.integers(2) == 0:
        cands = [v for v in range(g.n_sites) if v not in (z, w)]
        x = int(cands[rng.integers(len(cands))])
        spec = CouplingSpec(J=J)
        lhs = spin_expectation(g, spec, {x, z})
        rhs = spin_expectation(g, spec, {x, w}) / t
        desc = f"pair form x={x} edge=({z},{w})"
    else:
        spec = CouplingSpec(J=J, h=_random_field(rng, g))
        lhs = spin_expectation(g, spec, {z})
        rhs = spin_expectation(g, spec, {w}) / t
        desc = f"field form edge=({z},{w})"
    return lhs, rhs, desc


def _check_simon_lieb(rng):
    H = _random_graph(rng, min_sites=4)
    beta = rng.uniform(0.1, 1.2)
    size = int(rng.integers(2, H.n_sites))  # proper subset
    keep = sorted(rng.choice(H.n_sites, size=size, replace=False))
    G, index_map = induced_subgraph(H, keep)
    back = {int(index_map[i]): i for i in range(G.n_sites)}
    x_G = int(rng.integers(G.n_sites))
    x = int(index_map[x_G])
    y = int(rng.choice([v for v in range(H.n_sites) if v != x]))
    specH = CouplingSpec(J=beta)
    specG = CouplingSpec(J=beta)
    keep_set = set(back)
    # vertices of G with an H-edge leaving G
    dV = set()
    for e in range(H.n_lattice_edges):
        a, b = int(H.edges[e, 0]), int(H.edges[e, 1])
        if a in keep_set and b not in keep_set:
            dV.add(a)
        if b in keep_set and a not in keep_set:
            dV.add(b)
    corrG_xy = spin_expectation(G, specG, {x_G, back[y]}) if y in back else 0.0
    lhs = spin_expectation(H, specH, {x, y}) - corrG_xy
    rhs = 0.0
    for u in sorted(dV):
        # duplicated vertices cancel: u == x gives <1> = 1, u == y likewise
        rhs += spin_expectation(G, specG, [x_G, back[u]]) \
            * spin_expectation(H, specH, [u, y])
    return lhs, rhs, f"|S|={size} x={x} y={y} beta={beta:.3f}"


def phi_beta_S(graph_S, beta, boundary_pair_count_or_pairs=None,
               root=None) -> float:
    """phi_beta(S) = beta * sum over ordered pairs (u in S, v outside S,
    u ~ v in Z^d) of <sigma_root sigma_u> on S at coupling beta, free bc."""
    from .lattice import SubsetRegion, edge_boundary
    root = graph_S.origin if root is None else root
    spec = CouplingSpec(J=beta)
    region = SubsetRegion(graph_S, frozenset(range(graph_S.n_sites)), root=root)
    total = 0.0
    for pair in edge_boundary(region):
        # duplicated vertices cancel: u == root gives <1> = 1
        total += spin_expectation(graph_S, spec, [root, pair.u])
    return beta * total


def _check_boundary_field(rng):
    # one-dimensional boxes keep the exact enumeration inside the spin budget
    n = int(rng.integers(1, 3))
    extra = int(rng.integers(0, 2))
    mbig = 2 * n + extra
    Lam = build_box(1, mbig)
    beta = rng.uniform(0.1, 1.2)
    h = rng.uniform(0.0, 0.5, Lam.n_sites)
    a = int(rng.integers(0, n + 1))
    b = int(rng.integers(0, n + 1))
    origin = Lam.origin
    S_members = [Lam.index_of((mbig + t,)) for t in range(-a, b + 1)]
    S_graph, s_map = induced_subgraph(Lam, S_members)
    s_root = int(np.flatnonzero(s_map == origin)[0])
    S_graph.meta["origin"] = s_root
    phi = phi_beta_S(S_graph, beta)
    spec_plus = CouplingSpec(J=beta, h=h, bc="plus")
    spec_free = CouplingSpec(J=beta, h=h)
    lhs = spin_expectation(Lam, spec_plus, {origin}) \
        - spin_expectation(Lam, spec_free, {origin})
    s_set = set(S_members)
    ext = set()
    for v in S_members:
        c = int(Lam.coords[v, 0])
        for cn in (c - 1, c + 1):
            if 0 <= cn <= 2 * mbig:
                w = Lam.index_of((cn,))
                if w not in s_set:
                    ext.add(w)
    mx = max(spin_expectation(Lam, spec_plus, {v}) for v in ext) if ext else 0.0
    rhs = phi * mx
    return lhs, rhs, f"n={n} box={mbig} S=[-{a},{b}] beta={beta:.3f}"


def _check_bk_type(rng):
    g = _random_graph(rng, min_sites=4, no_cycle=True)
    beta = rng.uniform(0.1, 1.2)
    origin = int(rng.integers(g.n_sites))
    size = int(rng.integers(1, g.n_sites - 1))
    others = [v for v in range(g.n_sites) if v != origin]
    S = {origin} | set(int(v) for v in
                       rng.choice(others, size=size - 1, replace=False)) \
        if size > 1 else {origin}
    outside = [v for v in range(g.n_sites) if v not in S]
    if not outside:
        raise HypothesisError("S must be a proper subset")
    B = set(int(v) for v in rng.choice(
        outside, size=int(rng.integers(1, len(outside) + 1)), replace=False))
    table = FKTable(g, beta_to_p(beta), bc="free")
    hitB = np.zeros(len(table.probs), dtype=bool)
    for bb in B:
        hitB |= table.connected(origin, bb)
    lhs = table.prob(hitB)
    S_graph, s_map = induced_subgraph(g, sorted(S))
    back = {int(s_map[i]): i for i in range(S_graph.n_sites)}
    tableS = FKTable(S_graph, beta_to_p(beta), bc="free")
    coords = {tuple(c): i for i, c in enumerate(g.coords.tolist())}
    rhs = 0.0
    for u in sorted(S):
        cu = g.coords[u]
        for k in range(g.d):
            for sgn in (-1, 1):
                cv = list(cu)
                cv[k] += sgn
                cv = tuple(cv)
                v = coords.get(cv)
                if v is None or v in S:
                    continue
                p_0u = tableS.prob(tableS.connected(back[origin], back[u]))
                hv = np.zeros(len(table.probs), dtype=bool)
                for bb in B:
                    hv |= table.connected(v, bb)
                rhs += p_0u * beta * table.prob(hv)
    return lhs, rhs, f"|S|={len(S)} |B|={len(B)} beta={beta:.3f}"


def _check_tree_graph(rng):
    g = _random_graph(rng, min_sites=3)
    beta = rng.uniform(0.1, 1.2)
    x, y, z = _distinct_vertices(rng, g, 3)
    table = FKTable(g, beta_to_p(beta), bc="free")
    lhs = table.prob(table.connected(x, y) & table.connected(x, z))
    P = table.pair_matrix()
    c = table.cmap
    rhs = 0.0
    for e in range(g.n_lattice_edges):
        u, v = int(g.edges[e, 0]), int(g.edges[e, 1])
        for uu, vv in ((u, v), (v, u)):
            rhs += P[c[x], c[vv]] * P[c[vv], c[z]] * P[c[uu], c[y]]
    return lhs, rhs, f"x={x} y={y} z={z} beta={beta:.3f}"


def _check_four_point(rng):
    g = _random_graph(rng, min_sites=4)
    beta = rng.uniform(0.1, 1.2)
    x, y, z, t = _distinct_vertices(rng, g, 4)
    table = FKTable(g, beta_to_p(beta), bc="free")
    lhs = table.prob(table.connected(x, y) & table.connected(x, z)
                     & table.connected(x, t))
    spec = CouplingSpec(J=beta)
    e = lambda a, b: spin_expectation(g, spec, {a, b})
    rhs = e(x, y) * e(z, t) + e(x, z) * e(y, t) + e(x, t) * e(y, z)
    return lhs, rhs, f"x={x} y={y} z={z} t={t} beta={beta:.3f}"


def _check_es_identities(rng):
    g = _random_graph(rng, need_boundary=True)
    beta = rng.uniform(0.1, 1.2)
    x, y = _distinct_vertices(rng, g, 2)
    p = beta_to_p(beta)
    free = FKTable(g, p, bc="free")
    wired = FKTable(g, p, bc="wired")
    spec0 = CouplingSpec(J=beta)
    specp = CouplingSpec(J=beta, bc="plus")
    gaps = [
        abs(free.prob(free.connected(x, y)) - spin_expectation(g, spec0, {x, y})),
        abs(wired.prob(wired.connected(x, y)) - spin_expectation(g, specp, {x, y})),
        abs(wired.prob(wired.connected_to_boundary(x))
            - spin_expectation(g, specp, {x})),
    ]
    worst = max(gaps)
    return worst, 0.0, f"x={x} y={y} beta={beta:.3f} sites={g.n_sites}"


def _check_edge_influence(rng):
    if rng.integers(2) == 0:
        g = _random_graph(rng, need_boundary=True)
        beta = rng.uniform(0.1, 1.2)
        e = int(rng.integers(g.n_lattice_edges))
        x, y = int(g.edges[e, 0]), int(g.edges[e, 1])
        p = beta_to_p(beta)
        free = FKTable(g, p, bc="free")
        wired = FKTable(g, p, bc="wired")
        lhs = wired.prob(wired.edge_open(e)) - free.prob(free.edge_open(e))
        specp = CouplingSpec(J=beta, bc="plus")
        rhs = spin_expectation(g, specp, {x}) * spin_expectation(g, specp, {y})
        desc = f"endpoint form e=({x},{y}) beta={beta:.3f}"
    else:
        # boxes: the open-probability gap on the double box is bounded by the
        # squared plus-magnetisation at the origin of the half box
        n = int(rng.integers(1, 4))
        beta = rng.uniform(0.1, 1.2)
        big = build_box(1, 2 * n)
        small = build_box(1, n)
        # pick an edge whose endpoints both lie within distance n of center
        rad = big.chebyshev_radius()
        inner = [e for e in range(big.n_lattice_edges)
                 if rad[big.edges[e, 0]] <= n and rad[big.edges[e, 1]] <= n]
        e = int(inner[rng.integers(len(inner))])
        p = beta_to_p(beta)
        free = FKTable(big, p, bc="free")
        wired = FKTable(big, p, bc="wired")
        lhs = wired.prob(wired.edge_open(e)) - free.prob(free.edge_open(e))
        m0 = spin_expectation(small, CouplingSpec(J=beta, bc="plus"),
                              {small.origin})
        rhs = m0 * m0
        desc = f"box form n={n} beta={beta:.3f}"
    return lhs, rhs, desc


_CHECKERS = {
    "griffiths": _check_griffiths,
    "monotonicity": _check_monotonicity,
    "ding": _check_ding,
    "ghs": _check_ghs,
    "double_truncated": _check_double_truncated,
    "neighbor_comparison": _check_neighbor_comparison,
    "simon_lieb": _check_simon_lieb,
    "boundary_field": _check_boundary_field,
    "bk_type": _check_bk_type,
    "tree_graph": _check_tree_graph,
    "four_point": _check_four_point,
    "es_identities": _check_es_identities,
    "edge_influence": _check_edge_influence,
}


def check_inequality(name: str, seed: int,
                     tolerance: float = TOLERANCE) -> InequalityReport:
    """Run the named inequality check on the randomized instance drawn from
    ``seed`` and report lhs, rhs, margin = rhs - lhs, and the pass flag
    (margin >= -tolerance)."""
    if name not in _CHECKERS:
        raise ValueError(f"unknown inequality {name!r}; "
                         f"choose from {sorted(_CHECKERS)}")
    rng = np.random.default_rng(seed)
    lhs, rhs, desc = _CHECKERS[name](rng)
    return InequalityReport.make(name, f"seed={seed} {desc}", lhs, rhs,
                                 tolerance)


def run_inequality_suite(names=None, n_instances: int = 1000,
                         base_seed: int = 0, csv_path=None):
    """Run every named checker on ``n_instances`` randomized instances each;
    optionally write a CSV (name, instance_seed, lhs, rhs, margin, pass)."""
    names = list(names) if names is not None else list(INEQUALITY_NAMES)
    reports = []
    for name in names:
        for i in range(n_instances):
            reports.append(check_inequality(name, base_seed + i))
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["name", "instance_seed", "lhs", "rhs",
                             "margin", "pass"])
            for r in reports:
                seed = r.instance.split()[0].split("=")[1]
                writer.writerow([r.name, seed, f"{r.lhs:.17g}",
                                 f"{r.rhs:.17g}", f"{r.margin:.17g}",
                                 int(r.passed)])
    return reports
