"""Exponent fits, critical-point location, and comparison reports.

Turns tables of Monte Carlo estimates into log-log slope fits with
uncertainties, locates the critical coupling by Binder-cumulant crossings,
and compares fitted exponents against their predicted values.
"""

from __future__ import annotations

import csv as _csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

_DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
BETA_C_CACHE = os.path.join(_DATA_DIR, "beta_c.json")


class NoCrossingError(RuntimeError):
    """Binder cumulant curves do not intersect on the supplied grid."""


class MissingRowError(KeyError):
    """Required observable rows absent from the results table."""


@dataclass
class Estimate:
    """A Monte Carlo estimate with its parameter record."""

    mean: float
    stderr: float
    nsamples: int
    params: dict = field(default_factory=dict)  # d, N, m, beta, h, bc, ...
    seed: int = 0
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stderr < 0 or self.nsamples < 1:
            raise ValueError("stderr >= 0 and nsamples >= 1 required")


@dataclass
class SlopeFit:
    slope: float
    slope_stderr: float
    intercept: float
    fit_range: tuple
    chi2_per_dof: float
    npoints: int


def fit_log_slope(points) -> SlopeFit:
    """Weighted least squares of log(mean) against log(x).

    ``points`` is a list of (x, Estimate) with positive means; weights are
    (stderr/mean)^{-2} (the delta-method variance of log mean).  Estimates
    with zero stderr get the largest finite weight present (or 1 if none).
    """
    if len(points) < 3:
        raise ValueError("need at least 3 points")
    xs = np.array([float(x) for x, _ in points])
    means = np.array([e.mean for _, e in points])
    errs = np.array([e.stderr for _, e in points])
    if np.any(means <= 0):
        raise ValueError("all means must be positive for a log-log fit")
    ly = np.log(means)
    lx = np.log(xs)
    sigma = errs / means
    if np.all(sigma == 0):
        sigma = np.ones_like(sigma)
    else:
        sigma = np.where(sigma == 0, sigma[sigma > 0].min(), sigma)
    w = sigma ** -2
    W = w.sum()
    xbar = (w * lx).sum() / W
    ybar = (w * ly).sum() / W
    sxx = (w * (lx - xbar) ** 2).sum()
    slope = (w * (lx - xbar) * (ly - ybar)).sum() / sxx
    intercept = ybar - slope * xbar
    resid = ly - (intercept + slope * lx)
    dof = len(points) - 2
    chi2 = float((w * resid ** 2).sum())
    return SlopeFit(slope=float(slope),
                    slope_stderr=float(math.sqrt(1.0 / sxx)),
                    intercept=float(intercept),
                    fit_range=(float(xs.min()), float(xs.max())),
                    chi2_per_dof=chi2 / dof if dof > 0 else float("nan"),
                    npoints=len(points))


def fit_log_slope_auto(points, chi2_target: float = 2.0) -> SlopeFit:
    """fit_log_slope after dropping the smallest-x points one at a time until
    chi-square/dof <= chi2_target (finite-size correction handling)."""
    pts = sorted(points, key=lambda p: float(p[0]))
    while True:
        fit = fit_log_slope(pts)
        if fit.chi2_per_dof <= chi2_target or len(pts) <= 3:
            return fit
        pts = pts[1:]


# ---------------------------------------------------------------------------
# Binder-cumulant critical-point location
# ---------------------------------------------------------------------------

def _binder_curve(d, size, betas, chains, sweeps, seed):
    """Binder cumulant U = 1 - <M^4>/(3 <M^2>^2) at each beta (free bc)."""
    from .spin_fk_mc import sample_binder  # local import avoids a cycle
    return np.array([sample_binder(d, size, b, chains, sweeps,
                                   seed=seed + int(1e6 * b) + 1000 * size)
                     for b in betas])


def _crossing(betas, u_small, u_big):
    diff = u_big - u_small
    for i in range(len(betas) - 1):
        if diff[i] <= 0 <= diff[i + 1] or diff[i] >= 0 >= diff[i + 1]:
            if diff[i + 1] == diff[i]:
                return 0.5 * (betas[i] + betas[i + 1])
            t = -diff[i] / (diff[i + 1] - diff[i])
            return betas[i] + t * (betas[i + 1] - betas[i])
    return None


def estimate_beta_c(d, sizes, betas, chains=2, sweeps=4000, seed=0,
                    refine: int = 1):
    """Critical coupling from Binder-cumulant crossings of consecutive sizes,
    refined by grid bisection; returns (beta_c_hat, half_width).

    Raises NoCrossingError when no pair of consecutive-size curves crosses.
    """
    if len(sizes) < 2 or len(betas) < 3:
        raise ValueError("need >= 2 sizes and >= 3 grid points")
    betas = np.asarray(sorted(betas), dtype=float)
    curves = {s: _binder_curve(d, s, betas, chains, sweeps, seed)
              for s in sizes}
    crossings = []
    for s1, s2 in zip(sizes[:-1], sizes[1:]):
        c = _crossing(betas, curves[s1], curves[s2])
        if c is not None:
            for _ in range(refine):
                lo = max(betas.min(), c - (betas[1] - betas[0]))
                hi = min(betas.max(), c + (betas[1] - betas[0]))
                fine = np.linspace(lo, hi, 5)
                u1 = _binder_curve(d, s1, fine, chains, sweeps, seed + 7)
                u2 = _binder_curve(d, s2, fine, chains, sweeps, seed + 7)
                c2 = _crossing(fine, u1, u2)
                if c2 is None:
                    break
                c = c2
            crossings.append(c)
    if not crossings:
        raise NoCrossingError("Binder curves do not cross on the given grid")
    center = float(np.mean(crossings))
    half = float(max(np.max(np.abs(np.asarray(crossings) - center)),
                     (betas[1] - betas[0]) / 4))
    return center, half


# ---------------------------------------------------------------------------
# beta_c cache
# ---------------------------------------------------------------------------

def load_beta_c(d: int) -> float:
    """Cached critical-coupling estimate for dimension d."""
    with open(BETA_C_CACHE) as fh:
        cache = json.load(fh)
    key = str(d)
    if key not in cache["values"]:
        raise KeyError(f"no cached critical coupling for d={d}; "
                       f"run the betac command first")
    return float(cache["values"][key]["beta_c"])


def store_beta_c(d: int, beta_c: float, half_width: float, provenance: str):
    os.makedirs(_DATA_DIR, exist_ok=True)
    cache = {"version": 1, "values": {}}
    if os.path.exists(BETA_C_CACHE):
        with open(BETA_C_CACHE) as fh:
            cache = json.load(fh)
    cache["values"][str(d)] = {
        "beta_c": beta_c,
        "half_width": half_width,
        "provenance": provenance,
        "recorded": time.strftime("%Y-%m-%d"),
    }
    with open(BETA_C_CACHE, "w") as fh:
        json.dump(cache, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# exponent report
# ---------------------------------------------------------------------------

#: predicted one-arm / magnetisation exponents per (observable, d, bc)
PREDICTED_EXPONENTS = {
    ("one_arm", 2, "wired"): -0.125,
    ("one_arm", 5, "wired"): -1.0,
    ("one_arm", 6, "wired"): -1.0,
    ("one_arm", 7, "wired"): -1.0,
    ("one_arm", 7, "free"): -2.0,
    ("drc_one_arm", 4, "free"): -2.0,
    ("drc_one_arm", 5, "free"): -3.0,
    ("magnetisation_vs_h", 4, "free"): 1.0 / 3.0,
    ("magnetisation_vs_h", 5, "free"): 1.0 / 3.0,
}


def read_results_csv(path):
    """Rows of the standard results CSV as dicts with numeric fields parsed."""
    rows = []
    with open(path) as fh:
        for row in _csv.DictReader(fh):
            for key in ("d", "N", "m", "nsamples", "seed"):
                if row.get(key) not in (None, ""):
                    row[key] = int(float(row[key]))
            for key in ("beta", "h", "mean", "stderr", "walltime_s"):
                if row.get(key) not in (None, ""):
                    row[key] = float(row[key])
            rows.append(row)
    return rows


def exponent_report(rows, tolerance: float = 0.35, chi2_target: float = 2.0):
    """Fit one slope per (observable, d, bc) group and compare with the
    predicted exponent.

    For one-arm observables the abscissa is the arm radius m; for
    magnetisation-vs-field it is h.  Returns a list of dict rows
    (observable, d, bc, slope, stderr, predicted, pass).
    """
    groups = {}
    for row in rows:
        key = (row["observable"], row["d"], row["bc"])
        groups.setdefault(key, []).append(row)
    report = []
    for key, grp in sorted(groups.items()):
        obs, d, bc = key
        x_field = "h" if obs == "magnetisation_vs_h" else "m"
        pts = [(r[x_field],
                Estimate(r["mean"], r["stderr"], max(r["nsamples"], 1)))
               for r in grp if r["mean"] > 0]
        if len(pts) < 3:
            raise MissingRowError(
                f"fewer than 3 usable rows for {obs} d={d} bc={bc}")
        fit = fit_log_slope_auto(pts, chi2_target)
        predicted = PREDICTED_EXPONENTS.get(key)
        ok = (predicted is not None
              and abs(fit.slope - predicted) <= tolerance)
        report.append({
            "observable": obs, "d": d, "bc": bc,
            "slope": fit.slope, "slope_stderr": fit.slope_stderr,
            "chi2_per_dof": fit.chi2_per_dof,
            "predicted": predicted,
            "pass": ok,
        })
    return report


def write_report(report, path):
    with open(path, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=list(report[0].keys()))
        writer.writeheader()
        writer.writerows(report)
