"""Worm sampler for sourced random currents, double-current traces,
backbone extraction, and the current-to-random-cluster sprinkling coupling.

A current assigns a nonnegative integer multiplicity n_e to every edge with
weight prod_e beta_e^{n_e}/n_e!; its sources are the vertices of odd total
degree.  The worm chain augments the current with a movable endpoint pair
(a, b); whenever a == b the configuration is "closed" and distributed as the
fixed-source current measure, which is how measurements are taken.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .analysis import Estimate
from .exact_oracle import CouplingSpec
from .lattice import LatticeGraph, build_box
from .spin_fk_mc import BondConfig, append_csv, _chain_rng


@dataclass
class CurrentConfig:
    """Integer edge multiplicities with a cached source set."""

    graph: LatticeGraph
    n: np.ndarray  # int64 per edge
    sources: frozenset = None

    def __post_init__(self):
        if self.sources is None:
            self.sources = self.compute_sources()

    def compute_sources(self) -> frozenset:
        deg = np.zeros(self.graph.n_vertices, dtype=np.int64)
        np.add.at(deg, self.graph.edges[:, 0].astype(np.int64), self.n)
        np.add.at(deg, self.graph.edges[:, 1].astype(np.int64), self.n)
        return frozenset(int(v) for v in np.flatnonzero(deg % 2 == 1))

    def check(self):
        if self.sources != self.compute_sources():
            raise ValueError("cached source set is stale")

    def trace(self) -> BondConfig:
        """Edge e open iff n_e > 0."""
        return BondConfig(self.graph, self.n > 0)


@dataclass
class WormState:
    graph: LatticeGraph
    beta_edges: np.ndarray  # per-edge couplings (ghost edges carry h)
    target: frozenset  # source set A the closed states realize
    n: np.ndarray
    ab: np.ndarray  # the two worm endpoints (a == b means closed)
    rng: np.random.Generator
    closed_samples: int = 0
    _adj: tuple = None

    @property
    def closed(self) -> bool:
        return int(self.ab[0]) == int(self.ab[1])

    def current(self) -> CurrentConfig:
        return CurrentConfig(self.graph, self.n.copy())


def make_worm(graph: LatticeGraph, spec: CouplingSpec, A,
              rng: np.random.Generator) -> WormState:
    """Initial worm state: n = 0 with the endpoint pair placed so that the
    source invariant holds (at the origin for A = {}, at the two sources for
    A = {x, y})."""
    spec.validate(graph)
    A = frozenset(int(a) for a in A)
    beta = spec.edge_couplings(graph)
    n = np.zeros(len(graph.edges), dtype=np.int64)
    if len(A) == 0:
        ab = np.array([graph.origin, graph.origin], dtype=np.int64)
    elif len(A) == 2:
        x, y = sorted(A)
        ab = np.array([x, y], dtype=np.int64)
    else:
        raise ValueError("worm targets source sets of size 0 or 2")
    state = WormState(graph=graph, beta_edges=np.asarray(beta, dtype=float),
                      target=A, n=n, ab=ab, rng=rng)
    state._adj = graph.adjacency()
    return state


def worm_sweep(state: WormState, moves: int | None = None) -> WormState:
    """Run ``moves`` elementary worm moves (default: one per edge).

    Moves mix a teleport of the closed endpoint pair with endpoint shifts
    along incident edges, accepting multiplicity increments with ratio
    beta_e/(n_e+1) and decrements with ratio n_e/beta_e (times the endpoint
    degree ratio).  Closedness after the sweep is exposed as state.closed.
    """
    if moves is None:
        moves = max(len(state.graph.edges), 1)
    indptr, nbrs, eids = state._adj
    uniforms = state.rng.random(5 * moves)
    closed_out = np.empty(moves, dtype=np.uint8)
    kernels.worm_run(state.n, state.ab, indptr, nbrs, eids,
                     state.beta_edges, uniforms, closed_out,
                     state.graph.n_vertices)
    if state.closed:
        state.closed_samples += 1
    return state


# ---------------------------------------------------------------------------
# double currents
# ---------------------------------------------------------------------------

def _paired_closed_traces(graph, spec, chains, sweeps, seed, burn=200,
                          keep=None):
    """Closed-sample traces of pairs of independent sourceless worm chains.

    For each chain pair, the i-th closed sample of one member is paired with
    the i-th closed sample of the other; yields (chain, trace) with trace the
    boolean union trace of the pair.  ``keep`` optionally caps the pairs per
    chain."""
    out = []
    for c in range(chains):
        worms = [make_worm(graph, spec, (), _chain_rng(seed, (c << 1) | j))
                 for j in (0, 1)]
        stashes = ([], [])
        for w in worms:
            for _ in range(burn):
                worm_sweep(w)
        pairs = []
        for _ in range(sweeps):
            for j, w in enumerate(worms):
                worm_sweep(w)
                if w.closed:
                    stashes[j].append(np.packbits(w.n > 0))
            while stashes[0] and stashes[1]:
                t1 = np.unpackbits(stashes[0].pop(0),
                                   count=len(graph.edges)).astype(bool)
                t2 = np.unpackbits(stashes[1].pop(0),
                                   count=len(graph.edges)).astype(bool)
                pairs.append(t1 | t2)
                if keep is not None and len(pairs) >= keep:
                    break
            if keep is not None and len(pairs) >= keep:
                break
        out.append(pairs)
    return out


def sample_double_current(d, N, beta, chains=2, sweeps=2000, seed=0,
                          burn=200):
    """Stream of double-current traces: pairs (n1, n2) of independent
    sourceless currents on the box of radius N, emitted as the bond
    configuration {e : n1_e + n2_e > 0}."""
    graph = build_box(d, N, ghost=False)
    spec = CouplingSpec(J=beta)
    for pairs in _paired_closed_traces(graph, spec, chains, sweeps, seed,
                                       burn):
        for trace in pairs:
            yield BondConfig(graph, trace)


def _binned_estimate(samples_per_chain, params, seed, extras=None,
                     min_bins=32):
    from .spin_fk_mc import _estimate_component
    flat = [np.asarray(s, dtype=float) for s in samples_per_chain if len(s)]
    if not flat:
        raise RuntimeError("no closed samples collected; increase sweeps")
    kept = min(len(s) for s in flat)
    arr = np.stack([s[:kept] for s in flat])
    return _estimate_component(arr, params, seed, extras=extras,
                               min_bins=min(min_bins, max(kept // 2, 1)))


def drc_one_arm(d, N, m, beta, chains=2, sweeps=2000, seed=0, burn=200,
                csv_path=None):
    """Estimate of P[0 <-> sphere of radius m in the union trace of two
    independent sourceless currents] on the box of radius N."""
    if m > N:
        raise ValueError("need m <= N")
    t0 = time.time()
    graph = build_box(d, N, ghost=False)
    spec = CouplingSpec(J=beta)
    shell = graph.shell(m)
    origin = graph.origin
    per_chain = []
    for pairs in _paired_closed_traces(graph, spec, chains, sweeps, seed,
                                       burn):
        arms = []
        for trace in pairs:
            labels = kernels.label_clusters(
                graph.n_sites, graph.edges[: graph.n_lattice_edges],
                trace[: graph.n_lattice_edges])
            arms.append(float(np.any(labels[shell] == labels[origin])))
        per_chain.append(arms)
    params = {"d": d, "N": N, "m": m, "beta": beta, "h": 0.0, "bc": "free"}
    est = _binned_estimate(per_chain, params, seed)
    est.extras["walltime_s"] = time.time() - t0
    if csv_path:
        append_csv(csv_path, "drc_one_arm", est)
    return est


def drc_pair_connectivity(d, N, beta, pairs, chains=2, sweeps=2000, seed=0,
                          burn=200):
    """Estimates of P[x <-> y in the double-current trace] for the given
    vertex pairs, from shared closed samples."""
    graph = build_box(d, N, ghost=False)
    spec = CouplingSpec(J=beta)
    series = {pq: [] for pq in map(tuple, pairs)}
    for chunk in _paired_closed_traces(graph, spec, chains, sweeps, seed,
                                       burn):
        per = {pq: [] for pq in series}
        for trace in chunk:
            labels = kernels.label_clusters(
                graph.n_sites, graph.edges[: graph.n_lattice_edges],
                trace[: graph.n_lattice_edges])
            for (a, b) in per:
                per[(a, b)].append(float(labels[a] == labels[b]))
        for pq in series:
            series[pq].append(per[pq])
    out = []
    for (a, b), chains_samples in series.items():
        params = {"d": d, "N": N, "m": 0, "beta": beta, "h": 0.0,
                  "bc": "free"}
        est = _binned_estimate(chains_samples, params, seed,
                               extras={"pair": [a, b]})
        out.append(est)
    return out


# ---------------------------------------------------------------------------
# backbone exploration
# ---------------------------------------------------------------------------

def extract_backbone(current: CurrentConfig, x, y, ordering=None):
    """The ordering-minimal edge-self-avoiding odd path from x to y.

    Exploration: from the current vertex, repeatedly take the earliest (for
    the ordering) unexplored incident edge of odd multiplicity, marking every
    earlier unexplored incident edge as explored; stop on first arrival
    at y.  Requires sources {x, y}.

    ``ordering`` maps edge index -> rank (default: the edge index itself,
    i.e. direction-major lattice edges first, ghost edges last, lower
    endpoint row-major within a direction).

    Returns (path, explored): the oriented path as a list of
    (from, to, edge index), and the full explored edge set (path edges plus
    passed-over even edges).
    """
    graph = current.graph
    x, y = int(x), int(y)
    if current.sources != frozenset((x, y)):
        raise ValueError(f"sources are {sorted(current.sources)}, "
                         f"expected {{{x}, {y}}}")
    rank = (np.arange(len(graph.edges)) if ordering is None
            else np.asarray(ordering))
    indptr, nbrs, eids = graph.adjacency()
    odd = current.n % 2 == 1
    explored = set()
    path = []
    cur = x
    while cur != y:
        incident = [(int(rank[e]), int(e), int(w))
                    for e, w in zip(eids[indptr[cur]: indptr[cur + 1]],
                                    nbrs[indptr[cur]: indptr[cur + 1]])
                    if int(e) not in explored]
        incident.sort()
        step = None
        for _, e, w in incident:
            explored.add(e)  # passed-over edges become explored
            if odd[e]:
                step = (cur, w, e)
                break
        if step is None:
            raise ValueError("exploration stuck; inconsistent current")
        path.append(step)
        cur = step[1]
    return path, explored


# ---------------------------------------------------------------------------
# sprinkling: currents -> random-cluster
# ---------------------------------------------------------------------------

def sprinkle_to_fk(current: CurrentConfig, beta: float,
                   rng: np.random.Generator) -> BondConfig:
    """eta_e = max(1{n_e > 0}, omega_e) with omega i.i.d.
    Bernoulli(1 - e^{-beta}); for a current with sources A the law of eta is
    the free random-cluster measure at p = 1 - e^{-2 beta} conditioned on
    every cluster meeting A evenly (for A = {} that is the unconditioned
    measure; for A = {x, y} it is conditioned on x connected to y)."""
    p = 1.0 - math.exp(-beta)
    omega = rng.random(len(current.graph.edges)) < p
    return BondConfig(current.graph, (current.n > 0) | omega)
