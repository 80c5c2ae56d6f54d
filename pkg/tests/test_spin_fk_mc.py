import math

import numpy as np
import pytest

from critarm import exact_oracle as eo
from critarm import kernels
from critarm import spin_fk_mc as smc
from critarm.exact_oracle import CouplingSpec, FKTable, beta_to_p
from critarm.lattice import build_box, build_grid
from critarm.spin_fk_mc import (BondConfig, SpinConfig, _chain_rng,
                                extract_fk, make_state, one_arm, sw_sweep)


def _empirical_spin_tv(graph, spec, sweeps, seed):
    state = make_state(graph, spec, _chain_rng(seed, 0))
    for _ in range(300):
        sw_sweep(state)
    counts = np.zeros(2 ** graph.n_sites)
    pows = 1 << np.arange(graph.n_sites)
    for _ in range(sweeps):
        sw_sweep(state)
        counts[int(np.sum((state.spins > 0) * pows))] += 1
    emp = counts / counts.sum()
    return 0.5 * np.abs(emp - eo.spin_distribution(graph, spec)).sum()


def test_sw_spin_law_free_with_field():
    g = build_grid((2, 2), ghost=True)
    spec = CouplingSpec(J=0.45, h=0.1)
    assert _empirical_spin_tv(g, spec, 60000, seed=3) < 0.02


def test_sw_spin_law_plus_bc():
    g = build_grid((3, 3), ghost=True)
    spec = CouplingSpec(J=0.4, bc="plus")
    exact = eo.spin_expectation(g, spec, [4])  # interior site
    state = make_state(g, spec, _chain_rng(5, 0))
    for _ in range(300):
        sw_sweep(state)
    acc = 0.0
    T = 60000
    for _ in range(T):
        sw_sweep(state)
        acc += state.spins[4]
    assert acc / T == pytest.approx(exact, abs=0.01)


def test_freeze_bonds_are_wired_fk_sample():
    # the bond layer of a plus-BC sweep follows the wired random-cluster law
    gg = build_grid((3, 3), ghost=True)
    g0 = build_grid((3, 3))
    beta = 0.35
    tab = FKTable(g0, np.full(len(g0.edges), beta_to_p(beta)), bc="wired")
    exact_open = np.array([tab.prob(tab.edge_open(e))
                           for e in range(len(g0.edges))])
    exact_conn = tab.prob(tab.connected(0, 4))
    st = make_state(gg, CouplingSpec(J=beta, bc="plus"), _chain_rng(7, 0))
    for _ in range(200):
        sw_sweep(st)
    T = 60000
    acc = np.zeros(g0.n_lattice_edges)
    conn = 0.0
    for _ in range(T):
        sw_sweep(st)
        acc += st.bonds[: gg.n_lattice_edges]
        lab = kernels.label_clusters(gg.n_vertices, gg.edges, st.bonds)
        conn += float(lab[0] == lab[4])
    assert np.abs(acc / T - exact_open).max() < 0.01
    assert conn / T == pytest.approx(exact_conn, abs=0.01)


def test_extract_fk_marginal_free():
    g = build_grid((2, 2))
    beta = 0.5
    tab = FKTable(g, np.full(len(g.edges), beta_to_p(beta)), bc="free")
    spec = CouplingSpec(J=beta)
    st = make_state(g, spec, _chain_rng(9, 0))
    rng = _chain_rng(9, 1)
    for _ in range(200):
        sw_sweep(st)
    counts = {}
    T = 60000
    for _ in range(T):
        sw_sweep(st)
        fk = extract_fk(SpinConfig(g, st.spins), spec, rng)
        key = tuple(fk.open.tolist())
        counts[key] = counts.get(key, 0) + 1
    tv = 0.0
    for mask in range(2 ** len(g.edges)):
        pat = tuple(bool((mask >> i) & 1) for i in range(len(g.edges)))
        tv += 0.5 * abs(counts.get(pat, 0) / T - float(tab.probs[mask]))
    assert tv < 0.02


def test_one_arm_event():
    g = build_box(2, 1)
    open_ = np.zeros(len(g.edges), dtype=bool)
    assert not one_arm(BondConfig(g, open_), 1)
    # open a straight path from the center to the right boundary
    a = g.index_of((1, 1))
    b = g.index_of((2, 1))
    for e, (u, v) in enumerate(g.edges.tolist()):
        if {u, v} == {a, b}:
            open_[e] = True
    assert one_arm(BondConfig(g, open_), 1)
    with pytest.raises(ValueError):
        one_arm(BondConfig(g, open_), 5)


def test_estimate_one_arm_matches_exact():
    beta = 0.35
    est = smc.estimate_one_arm(2, 1, beta, bc="wired", chains=4,
                               sweeps=4000, seed=1)
    g0 = build_box(2, 1)
    want = eo.fk_event_probability(
        g0, beta, "wired", lambda b: b.connected_to_boundary(g0.origin))
    assert abs(est.mean - want) < 4 * max(est.stderr, 1e-3)
    # wired arm at m = N agrees with the plus-measure magnetisation
    mag = est.extras["magnetisation"]
    assert abs(est.mean - mag.mean) < 4 * (est.stderr + mag.stderr + 1e-3)


def test_estimate_one_arm_free_matches_exact():
    beta = 0.35
    est = smc.estimate_one_arm(2, 1, beta, N=1, bc="free", chains=4,
                               sweeps=4000, seed=2)
    g0 = build_box(2, 1)
    want = eo.fk_event_probability(
        g0, beta, "free", lambda b: b.connected_to_boundary(g0.origin))
    assert abs(est.mean - want) < 4 * max(est.stderr, 1e-3)


def test_profile_consistent_with_single_radius():
    prof = smc.estimate_one_arm_profile(2, [1, 2], 0.42, 2, chains=2,
                                        sweeps=3000, seed=4)
    single = smc.estimate_one_arm(2, 2, 0.42, N=2, bc="wired", chains=2,
                                  sweeps=3000, seed=4)
    assert prof[2].mean == pytest.approx(single.mean, abs=1e-12)
    assert prof[1].mean >= prof[2].mean


def test_estimate_magnetisation_small_field():
    est = smc.estimate_magnetisation(2, 2, 0.3, 0.2, chains=2, sweeps=2500,
                                     seed=3)
    gg = build_box(2, 2, ghost=True)
    want = eo.spin_expectation(gg, CouplingSpec(J=0.3, h=0.2), [gg.origin],
                               budget=26)
    assert abs(est.mean - want) < 4 * max(est.stderr, 1e-3)


def test_volume_tail_monotone():
    ests = smc.estimate_volume_tail(2, 3, 0.45, [1, 4, 9, 16], chains=2,
                                    sweeps=1500, seed=5)
    means = [e.mean for e in ests]
    assert means == sorted(means, reverse=True)
    assert means[0] == 1.0  # the origin's cluster always has >= 1 vertex


def test_edge_influence_positive_and_bounded():
    est = smc.estimate_edge_influence(2, 3, 0.4, chains=2, sweeps=1200,
                                      seed=6)
    assert -0.05 <= est.mean <= 1.0
    assert "edge" in est.extras


def test_determinism():
    a = smc.estimate_one_arm(2, 2, 0.4, bc="wired", chains=2, sweeps=800,
                             seed=11)
    b = smc.estimate_one_arm(2, 2, 0.4, bc="wired", chains=2, sweeps=800,
                             seed=11)
    assert (a.mean, a.stderr, a.nsamples) == (b.mean, b.stderr, b.nsamples)


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "out.csv"
    est = smc.estimate_one_arm(2, 2, 0.4, bc="wired", chains=2, sweeps=500,
                               seed=12, csv_path=str(path))
    from critarm.analysis import read_results_csv
    rows = read_results_csv(str(path))
    assert len(rows) == 1
    assert rows[0]["observable"] == "one_arm"
    assert rows[0]["mean"] == est.mean
    assert rows[0]["stderr"] == est.stderr


def test_plus_bc_requires_ghost():
    g = build_box(2, 1, ghost=False)
    with pytest.raises(ValueError):
        smc.open_probabilities(g, CouplingSpec(J=0.4, bc="plus"))


def test_binder_beta_limits():
    # deep subcritical ~ Gaussian (U ~ 0); deep supercritical U -> 2/3
    lo = smc.sample_binder(2, 4, 0.05, chains=2, sweeps=1500, seed=1)
    hi = smc.sample_binder(2, 4, 1.2, chains=2, sweeps=1500, seed=1)
    assert lo < 0.25
    assert hi > 0.6
