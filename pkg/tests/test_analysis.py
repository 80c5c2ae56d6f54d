import math

import numpy as np
import pytest

from critarm import analysis
from critarm.analysis import (Estimate, MissingRowError, NoCrossingError,
                              fit_log_slope, fit_log_slope_auto)


def _points(xs, ys, err=0.01):
    return [(x, Estimate(y, err * y, 100)) for x, y in zip(xs, ys)]


def test_exact_power_law_slope():
    xs = [2, 4, 8, 16]
    fit = fit_log_slope(_points(xs, [x ** -2.0 for x in xs]))
    assert fit.slope == pytest.approx(-2.0, abs=1e-12)
    assert fit.chi2_per_dof == pytest.approx(0.0, abs=1e-12)


def test_constant_slope_zero():
    xs = [1, 2, 3, 4]
    fit = fit_log_slope(_points(xs, [3.0] * 4))
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_noisy_slope_within_three_stderr():
    rng = np.random.default_rng(0)
    xs = np.array([2.0, 4.0, 8.0, 16.0, 32.0])
    hits = 0
    for _ in range(20):
        ys = xs ** -1.0 * (1 + 0.02 * rng.standard_normal(len(xs)))
        fit = fit_log_slope(_points(xs, ys, err=0.02))
        if abs(fit.slope + 1.0) <= 3 * fit.slope_stderr:
            hits += 1
    assert hits >= 17


def test_rescaling_invariance():
    xs = [2, 4, 8]
    ys = [x ** -1.5 for x in xs]
    a = fit_log_slope(_points(xs, ys))
    b = fit_log_slope(_points([10 * x for x in xs], ys))
    assert a.slope == pytest.approx(b.slope, abs=1e-12)


def test_requires_three_points_and_positive_means():
    with pytest.raises(ValueError):
        fit_log_slope(_points([1, 2], [1.0, 0.5]))
    with pytest.raises(ValueError):
        fit_log_slope(_points([1, 2, 3], [1.0, -0.5, 0.2]))


def test_auto_fit_drops_smallest_x():
    # strong finite-size bend at small x, clean power law beyond
    xs = [1, 2, 4, 8, 16, 32]
    ys = [5.0] + [x ** -1.0 for x in xs[1:]]
    fit = fit_log_slope_auto(_points(xs, ys, err=0.001))
    assert fit.slope == pytest.approx(-1.0, abs=1e-6)
    assert fit.fit_range[0] >= 2


def test_beta_c_crossing_synthetic(monkeypatch):
    # synthetic Binder curves: U = f((beta - bc) * size), crossing at bc
    bc_true = 0.37

    def fake_binder(d, size, beta, chains, sweeps, seed=0, **kw):
        return 0.5 - math.tanh((beta - bc_true) * size)

    import critarm.spin_fk_mc as smc
    monkeypatch.setattr(smc, "sample_binder", fake_binder)
    est, half = analysis.estimate_beta_c(2, [4, 8], [0.3, 0.36, 0.42],
                                         chains=1, sweeps=1, refine=2)
    assert est == pytest.approx(bc_true, abs=1e-3)
    assert half > 0


def test_beta_c_no_crossing(monkeypatch):
    import critarm.spin_fk_mc as smc
    monkeypatch.setattr(smc, "sample_binder",
                        lambda d, size, beta, *a, **k: 0.1 + 0.01 * size)
    with pytest.raises(NoCrossingError):
        analysis.estimate_beta_c(2, [4, 8], [0.1, 0.2, 0.3], chains=1,
                                 sweeps=1)


def test_beta_c_validation():
    with pytest.raises(ValueError):
        analysis.estimate_beta_c(2, [4], [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        analysis.estimate_beta_c(2, [4, 8], [0.1, 0.2])


def test_beta_c_cache_roundtrip():
    beta = analysis.load_beta_c(2)
    # the cached d=2 value must sit near the self-dual point
    assert abs(beta - math.log(1 + math.sqrt(2)) / 2) < 0.005
    with pytest.raises(KeyError):
        analysis.load_beta_c(11)


def test_exponent_report(tmp_path):
    rows = []
    for m in (2, 4, 8, 16):
        rows.append({"observable": "one_arm", "d": 5, "bc": "wired",
                     "m": m, "h": 0.0, "mean": m ** -1.0, "stderr": 1e-3,
                     "nsamples": 1000})
    report = analysis.exponent_report(rows, tolerance=0.35)
    assert len(report) == 1
    entry = report[0]
    assert entry["predicted"] == -1.0
    assert entry["pass"]
    out = tmp_path / "report.csv"
    analysis.write_report(report, str(out))
    assert out.read_text().startswith("observable,")


def test_exponent_report_missing_rows():
    rows = [{"observable": "one_arm", "d": 2, "bc": "wired", "m": 2,
             "h": 0.0, "mean": 0.5, "stderr": 0.01, "nsamples": 10}]
    with pytest.raises(MissingRowError):
        analysis.exponent_report(rows)
