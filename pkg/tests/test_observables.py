import numpy as np
import pytest

from critarm import observables as ob
from critarm.exact_oracle import BudgetError
from critarm.lattice import SubsetRegion, build_box


def test_phi_single_origin_is_2d_beta():
    for d in (1, 2, 3):
        box = build_box(d, 1)
        S = SubsetRegion(box, frozenset([box.origin]))
        res = ob.phi_S(S, 0.3)
        assert res.value == pytest.approx(2 * d * 0.3, abs=1e-12)
        assert res.stderr == 0.0


def test_phi_zero_beta_vanishes():
    box = build_box(2, 1)
    S = SubsetRegion(box, frozenset(range(box.n_sites)))
    assert ob.phi_S(S, 0.0).value == 0.0


def test_phi_mc_agrees_with_exact(monkeypatch):
    box = build_box(2, 1)
    S = SubsetRegion(box, frozenset(range(box.n_sites)))
    exact = ob.phi_S(S, 0.3).value
    monkeypatch.setattr(ob, "EXACT_SITE_BUDGET", 4)
    mc = ob.phi_S(S, 0.3, mc={"chains": 4, "sweeps": 4000, "seed": 1})
    assert abs(mc.value - exact) < 4 * max(mc.stderr, 1e-3)


def test_phi_budget_error_without_mc():
    box = build_box(2, 3)
    S = SubsetRegion(box, frozenset(range(box.n_sites)))
    with pytest.raises(BudgetError):
        ob.phi_S(S, 0.3)


def test_sharp_length_beta_zero():
    res = ob.sharp_length(2, 0.0, 3)
    assert res.k == 1
    assert res.witness == "box:0"
    assert not res.exceeded
    assert res.phi_value < 0.1


def test_sharp_length_witness_verified():
    res = ob.sharp_length(2, 0.2, 4,
                          mc={"chains": 2, "sweeps": 1500, "seed": 2})
    assert not res.exceeded
    assert res.phi_value < 0.1 + 4 * res.phi_stderr


def test_sharp_length_monotone_in_beta():
    mc = {"chains": 2, "sweeps": 1200, "seed": 3}
    ks = []
    for beta in (0.05, 0.15, 0.25):
        res = ob.sharp_length(2, beta, 5, mc=mc)
        assert not res.exceeded
        ks.append(res.k)
    assert ks == sorted(ks)


def test_sharp_length_exceeded():
    res = ob.sharp_length(2, 0.43, 1,
                          mc={"chains": 2, "sweeps": 500, "seed": 4})
    assert res.exceeded
    assert res.k is None


def test_diagrams_beta_zero_near_one():
    bub, tri = ob.diagrams(2, 1, 0.0, chains=2, sweeps=8000, seed=5)
    assert bub.value == pytest.approx(1.0, abs=0.05)
    assert tri.value == pytest.approx(1.0, abs=0.05)


def test_diagrams_match_exact_small_box():
    eb, et = ob.exact_diagrams(2, 1, 0.3)
    mb, mt = ob.diagrams(2, 1, 0.3, chains=4, sweeps=6000, seed=6)
    assert abs(mb.value - eb.value) < 4 * max(mb.stderr, 1e-3)
    assert abs(mt.value - et.value) < 4 * max(mt.stderr, 1e-3)


def test_bubble_below_triangle_and_symmetry():
    bub, tri = ob.diagrams(2, 2, 0.35, chains=2, sweeps=3000, seed=7)
    assert bub.value <= tri.value
    table = bub.extras["two_point"]
    # hyperoctahedral symmetry of the translation-averaged table
    assert np.allclose(table, table[::-1, :], atol=0.05)
    assert np.allclose(table, table.T, atol=0.05)
    assert bub.extras["susceptibility"] >= 1.0
