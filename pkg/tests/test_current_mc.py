import itertools
import math

import numpy as np
import pytest

from critarm import current_mc as cmc
from critarm import exact_oracle as eo
from critarm.current_mc import (CurrentConfig, extract_backbone, make_worm,
                                sprinkle_to_fk, worm_sweep)
from critarm.exact_oracle import CouplingSpec, FKTable
from critarm.lattice import build_box, build_cycle, build_grid, build_path
from critarm.spin_fk_mc import _chain_rng


def exact_trace_law(graph, beta, A):
    """Distribution of the trace pattern of a current with sources A, by
    summing per-edge parity masses (sinh for odd, cosh-1 for open-even)."""
    m = len(graph.edges)
    law = {}
    for par in itertools.product([0, 1], repeat=m):
        deg = np.zeros(graph.n_vertices, dtype=int)
        for e, (u, v) in enumerate(graph.edges):
            deg[u] += par[e]
            deg[v] += par[e]
        if frozenset(np.flatnonzero(deg % 2 == 1).tolist()) != frozenset(A):
            continue
        evens = [e for e in range(m) if par[e] == 0]
        odds = [e for e in range(m) if par[e] == 1]
        for sub in itertools.product([0, 1], repeat=len(evens)):
            w = math.sinh(beta) ** len(odds)
            pat = [False] * m
            for e in odds:
                pat[e] = True
            for e, s in zip(evens, sub):
                if s:
                    pat[e] = True
                    w *= math.cosh(beta) - 1
            law[tuple(pat)] = law.get(tuple(pat), 0.0) + w
    Z = sum(law.values())
    return {k: v / Z for k, v in law.items()}


def _closed_trace_tv(graph, A, beta, sweeps, seed):
    exact = exact_trace_law(graph, beta, A)
    w = make_worm(graph, CouplingSpec(J=beta), A, _chain_rng(seed, 0))
    for _ in range(500):
        worm_sweep(w, moves=10)
    counts = {}
    total = 0
    for _ in range(sweeps):
        worm_sweep(w, moves=10)
        if w.closed:
            pat = tuple((w.n > 0).tolist())
            counts[pat] = counts.get(pat, 0) + 1
            total += 1
    tv = 0.5 * sum(abs(counts.get(k, 0) / total - p)
                   for k, p in exact.items())
    tv += 0.5 * sum(c / total for k, c in counts.items() if k not in exact)
    return tv


def test_worm_closed_law_sourceless():
    assert _closed_trace_tv(build_cycle(3), (), 0.7, 120000, 9) < 0.02


def test_worm_closed_law_sourced():
    assert _closed_trace_tv(build_cycle(3), (0, 2), 0.7, 120000, 10) < 0.02


def test_worm_rejects_odd_source_set():
    g = build_path(3)
    with pytest.raises(ValueError):
        make_worm(g, CouplingSpec(J=0.5), (0,), _chain_rng(0, 0))


def test_current_config_sources_and_check():
    g = build_path(3)
    c = CurrentConfig(g, np.array([1, 2]))
    assert c.sources == frozenset({0, 1})
    c.check()
    c.n[1] += 1
    with pytest.raises(ValueError):
        c.check()


def test_backbone_on_path():
    g = build_path(3)
    c = CurrentConfig(g, np.array([1, 1]))
    path, explored = extract_backbone(c, 0, 2)
    assert path == [(0, 1, 0), (1, 2, 1)]
    assert explored == {0, 1}


def test_backbone_prefers_earliest_edge():
    # cycle3 edges: (0,1)=0, (1,2)=1, (0,2)=2; all odd except the doubled one
    g = build_cycle(3)
    c = CurrentConfig(g, np.array([1, 1, 2]))
    path, explored = extract_backbone(c, 0, 2)
    # from 0 the earliest incident odd edge is (0,1), not the direct (0,2)
    assert path == [(0, 1, 0), (1, 2, 1)]
    # the passed-over even edge is explored when scanned
    c2 = CurrentConfig(g, np.array([2, 0, 1]))
    path2, explored2 = extract_backbone(c2, 0, 2)
    assert path2 == [(0, 2, 2)]
    assert 0 in explored2  # the even (0,1) edge was scanned first


def test_backbone_stops_at_first_arrival():
    # figure with extra odd structure behind y: path 0-1-2-3 with n odd up to
    # 3; the walk from 0 to 2 must stop at 2 and leave edge (2,3) unexplored
    g = build_path(4)
    c = CurrentConfig(g, np.array([1, 1, 2]))
    path, explored = extract_backbone(c, 0, 2)
    assert [e for (_u, _v, e) in path] == [0, 1]
    assert 2 not in explored


def test_backbone_requires_matching_sources():
    g = build_path(3)
    c = CurrentConfig(g, np.array([1, 1]))
    with pytest.raises(ValueError):
        extract_backbone(c, 0, 1)


def _sprinkle_tv(graph, A, beta, sweeps, seed):
    p = eo.beta_to_p(beta)  # FK probability 1 - e^{-2 beta}
    tab = FKTable(graph, np.full(len(graph.edges), p), bc="free")
    probs = np.array(tab.probs, dtype=float)
    if A:
        cond = tab.connected(*A)
        probs = probs * cond
        probs /= probs.sum()
    w = make_worm(graph, CouplingSpec(J=beta), A, _chain_rng(seed, 0))
    rng = _chain_rng(seed, 99)
    for _ in range(300):
        worm_sweep(w)
    counts = {}
    total = 0
    for _ in range(sweeps):
        worm_sweep(w)
        if w.closed:
            eta = sprinkle_to_fk(w.current(), beta, rng)
            pat = tuple(eta.open.tolist())
            counts[pat] = counts.get(pat, 0) + 1
            total += 1
    tv = 0.0
    for mask in range(2 ** len(graph.edges)):
        pat = tuple(bool((mask >> i) & 1) for i in range(len(graph.edges)))
        tv += 0.5 * abs(counts.get(pat, 0) / total - float(probs[mask]))
    return tv


def test_sprinkling_sourceless_matches_free_fk():
    assert _sprinkle_tv(build_grid((2, 2)), (), 0.6, 150000, 21) < 0.02


def test_sprinkling_sourced_matches_conditioned_fk():
    assert _sprinkle_tv(build_grid((2, 2)), (0, 3), 0.6, 150000, 22) < 0.02


def test_drc_pair_connectivity_identity():
    # P[x <-> y in the double trace] equals the squared pair correlation
    beta = 0.6
    g = build_box(2, 1)
    nbr = None
    for u, v in g.edges.tolist():
        if u == g.origin or v == g.origin:
            nbr = v if u == g.origin else u
            break
    ests = cmc.drc_pair_connectivity(2, 1, beta, [(g.origin, nbr)],
                                     chains=2, sweeps=6000, seed=7)
    want = eo.spin_expectation(g, CouplingSpec(J=beta),
                               [g.origin, nbr]) ** 2
    est = ests[0]
    assert abs(est.mean - want) < 4 * max(est.stderr, 1e-3)


def test_drc_one_arm_determinism_and_range():
    a = cmc.drc_one_arm(2, 2, 1, 0.5, chains=2, sweeps=1500, seed=3)
    b = cmc.drc_one_arm(2, 2, 1, 0.5, chains=2, sweeps=1500, seed=3)
    assert a.mean == b.mean and a.stderr == b.stderr
    assert 0.0 <= a.mean <= 1.0


def test_sample_double_current_stream():
    traces = list(itertools.islice(
        cmc.sample_double_current(2, 1, 0.5, chains=1, sweeps=800, seed=4),
        20))
    assert len(traces) == 20
    for t in traces:
        assert t.open.dtype == bool
        assert len(t.open) == len(t.graph.edges)
