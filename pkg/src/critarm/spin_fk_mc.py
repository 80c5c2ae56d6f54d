"""Swendsen-Wang sampler for the coupled spin / random-cluster system on
large boxes, plus the one-arm, magnetisation, cluster-volume and
edge-influence estimators built on it.

The field and the boundary condition both enter through a ghost vertex:
ghost edges open with probability 1 - e^{-2 h_x}, and the plus boundary
condition (wired on the bond side) is realized as always-open ghost edges
at exterior-boundary vertices.  The bond layer drawn during a sweep is a
random-cluster sample with matching boundary condition (free <-> free,
plus <-> wired).
"""

from __future__ import annotations

import csv as _csv
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .analysis import Estimate
from .exact_oracle import CouplingSpec
from .lattice import LatticeGraph, build_box

CSV_COLUMNS = ["observable", "d", "N", "m", "beta", "h", "bc",
               "mean", "stderr", "nsamples", "seed", "walltime_s"]


@dataclass
class SpinConfig:
    graph: LatticeGraph
    spins: np.ndarray  # int8, one sign per lattice vertex (ghost fixed +1)


@dataclass
class BondConfig:
    graph: LatticeGraph
    open: np.ndarray  # bool, one bit per edge (ghost edges included)


@dataclass
class SamplerState:
    graph: LatticeGraph
    spec: CouplingSpec
    spins: np.ndarray
    rng: np.random.Generator
    sweep: int = 0
    therm_target: int = 500
    bonds: np.ndarray | None = None  # freeze layer of the last sweep
    _p: np.ndarray | None = None


def open_probabilities(graph: LatticeGraph, spec: CouplingSpec) -> np.ndarray:
    """Per-edge freeze probability: 1 - e^{-2 J_e} on lattice edges,
    1 - e^{-2 h_x} on ghost edges, and 1 at boundary ghost edges under the
    plus boundary condition."""
    m = len(graph.edges)
    p = np.empty(m)
    J = np.broadcast_to(np.asarray(spec.J, dtype=float),
                        (graph.n_lattice_edges,))
    p[: graph.n_lattice_edges] = 1.0 - np.exp(-2.0 * J)
    if graph.ghost:
        hv = np.broadcast_to(np.asarray(spec.h, dtype=float),
                             (graph.n_sites,)).astype(float).copy()
        pg = 1.0 - np.exp(-2.0 * hv)
        if spec.bc == "plus":
            pg = pg.copy()
            pg[np.asarray(graph.boundary, dtype=np.int64)] = 1.0
        p[graph.n_lattice_edges:] = pg[graph.edges[graph.n_lattice_edges:, 0]]
    elif spec.bc == "plus":
        raise ValueError("plus boundary condition needs a ghost vertex "
                         "(build the box with ghost=True)")
    return p


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chain,))))


def make_state(graph: LatticeGraph, spec: CouplingSpec,
               rng: np.random.Generator) -> SamplerState:
    spins = np.where(rng.random(graph.n_sites) < 0.5, 1, -1).astype(np.int8)
    return SamplerState(graph=graph, spec=spec, spins=spins, rng=rng,
                        _p=open_probabilities(graph, spec))


def _freeze(graph, p, spins, uniforms):
    sv = np.empty(graph.n_vertices, dtype=np.int8)
    sv[: graph.n_sites] = spins
    if graph.ghost:
        sv[graph.ghost_index] = 1
    same = sv[graph.edges[:, 0]] == sv[graph.edges[:, 1]]
    return same & (uniforms < p)


def sw_sweep(state: SamplerState, u_edges=None, u_vertices=None) -> SamplerState:
    """One Swendsen-Wang update: freeze same-sign edges open with their edge
    probability, then resample every cluster's sign uniformly, with the ghost
    cluster forced to +1.  External uniform buffers may be supplied (used for
    common-random-number pairing); otherwise they come from the state RNG."""
    g = state.graph
    if u_edges is None:
        u_edges = state.rng.random(len(g.edges))
    if u_vertices is None:
        u_vertices = state.rng.random(g.n_vertices)
    open_ = _freeze(g, state._p, state.spins, u_edges[: len(g.edges)])
    labels = kernels.label_clusters(g.n_vertices, g.edges, open_)
    flips = np.where(u_vertices[: g.n_vertices] < 0.5, 1, -1).astype(np.int8)
    new = flips[labels[: g.n_sites]]
    if g.ghost:
        new = np.where(labels[: g.n_sites] == labels[g.ghost_index],
                       np.int8(1), new)
    state.spins = new
    state.bonds = open_
    state.sweep += 1
    return state


def extract_fk(spins: SpinConfig, spec: CouplingSpec,
               rng: np.random.Generator) -> BondConfig:
    """The conditional bond step of the spin/bond coupling: open each
    same-sign edge with its edge probability.  The marginal law of the output
    is the random-cluster measure with boundary condition matching the spin
    one (free <-> free, plus <-> wired)."""
    g = spins.graph
    p = open_probabilities(g, spec)
    return BondConfig(g, _freeze(g, p, spins.spins, rng.random(len(g.edges))))


def one_arm(bonds: BondConfig, m: int) -> bool:
    """True iff the origin's open cluster (lattice edges only; ghost edges
    excluded) meets the sphere of radius m."""
    g = bonds.graph
    if m > g.meta.get("n", -1):
        raise ValueError("arm radius exceeds the box radius")
    labels = kernels.label_clusters(
        g.n_sites, g.edges[: g.n_lattice_edges],
        np.asarray(bonds.open[: g.n_lattice_edges], dtype=bool))
    shell = g.shell(m)
    return bool(np.any(labels[shell] == labels[g.origin]))


def _lattice_labels(graph, open_mask):
    return kernels.label_clusters(graph.n_sites,
                                  graph.edges[: graph.n_lattice_edges],
                                  open_mask[: graph.n_lattice_edges])


# ---------------------------------------------------------------------------
# generic chain driver with adaptive burn-in and binned errors
# ---------------------------------------------------------------------------

def integrated_autocorrelation(series) -> float:
    """Windowed integrated autocorrelation time of a scalar series (>= 0.5);
    window grows until the autocorrelation drops below 0.05."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    x = x - x.mean()
    var = float(x @ x) / n
    if var <= 0 or n < 8:
        return 0.5
    tau = 0.5
    for t in range(1, n // 4):
        rho = float(x[:-t] @ x[t:]) / ((n - t) * var)
        if rho < 0.05:
            break
        tau += rho
    return tau


def _run_chains(graph, spec, measure, obs_dim, chains, sweeps, burn_in, seed):
    """Run independent chains; ``measure(state) -> tuple/array`` of obs_dim
    floats per sweep.  Returns (samples array (chains, kept, obs_dim), tau)."""
    floor = 500 if burn_in is None else burn_in
    out = np.empty((chains, sweeps, obs_dim))
    taus = []
    for c in range(chains):
        rng = _chain_rng(seed, c)
        state = make_state(graph, spec, rng)
        for _ in range(floor):
            sw_sweep(state)
        for t in range(sweeps):
            sw_sweep(state)
            out[c, t] = measure(state)
    # adaptive extension of the burn-in: drop a prefix worth 20 tau-hat when
    # the autocorrelation of the first observable demands more than the floor
    tau = max(integrated_autocorrelation(out[c, :, 0]) for c in range(chains))
    extra = int(20 * tau) - floor if burn_in is None else 0
    drop = min(max(extra, 0), sweeps // 2)
    return out[:, drop:, :], tau


def _not_thermalized(samples_k, binned_se):
    chain_means = samples_k.mean(axis=1)
    return np.max(np.abs(chain_means - chain_means.mean())) > 5 * binned_se \
        and binned_se > 0


def _estimate_component(samples_k, params, seed, extras=None, min_bins=32):
    """Estimate from (chains, kept) samples: per-chain binning (>= 32 bins)
    and across-chain variance; the larger standard error is reported."""
    chains, kept = samples_k.shape
    mean = float(samples_k.mean())
    nbins = min_bins
    binsize = max(kept // nbins, 1)
    usable = binsize * (kept // binsize)
    bins = samples_k[:, :usable].reshape(chains, -1, binsize).mean(axis=2)
    nb = bins.shape[1]
    se_bin = float(np.sqrt(bins.var(ddof=1) / (chains * nb))) if nb > 1 else 0.0
    if chains > 1:
        cm = samples_k.mean(axis=1)
        se_chain = float(np.sqrt(cm.var(ddof=1) / chains))
    else:
        se_chain = 0.0
    se = max(se_bin, se_chain)
    if _not_thermalized(samples_k, se_bin):
        warnings.warn("chain-to-chain spread exceeds 5x the binned standard "
                      "error; chains may not be thermalized", RuntimeWarning)
    return Estimate(mean=mean, stderr=se, nsamples=chains * kept,
                    params=dict(params), seed=seed, extras=extras or {})


def append_csv(path, observable, est: Estimate):
    exists = os.path.exists(path)
    with open(path, "a", newline="") as fh:
        writer = _csv.writer(fh)
        if not exists:
            writer.writerow(CSV_COLUMNS)
        p = est.params
        writer.writerow([
            observable, p.get("d", ""), p.get("N", ""), p.get("m", ""),
            repr(float(p.get("beta", 0.0))), repr(float(p.get("h", 0.0))),
            p.get("bc", ""), repr(est.mean), repr(est.stderr),
            est.nsamples, est.seed,
            f"{est.extras.get('walltime_s', 0.0):.3f}"])


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def estimate_one_arm(d, m, beta, N=None, bc="free", h=0.0, chains=4,
                     sweeps=2000, burn_in=None, seed=0, csv_path=None):
    """Monte Carlo estimate of P[0 <-> sphere of radius m] on the box of
    radius N (default: N = m for wired, N = 4m for free).

    Returns the one-arm Estimate; under the wired boundary condition its
    ``extras['magnetisation']`` carries the companion estimator <sigma_0>+,
    which agrees with the arm probability when m = N.
    """
    if N is None:
        N = m if bc == "wired" else 4 * m
    if m > N:
        raise ValueError("need m <= N")
    t0 = time.time()
    ghost = bc == "wired" or h > 0
    graph = build_box(d, N, ghost=ghost)
    spec = CouplingSpec(J=beta, h=h, bc="plus" if bc == "wired" else "free")
    shell = graph.shell(m)
    origin = graph.origin

    def measure(state):
        labels = _lattice_labels(graph, state.bonds)
        arm = float(np.any(labels[shell] == labels[origin]))
        return (arm, float(state.spins[origin]))

    samples, tau = _run_chains(graph, spec, measure, 2, chains, sweeps,
                               burn_in, seed)
    params = {"d": d, "N": N, "m": m, "beta": beta, "h": h, "bc": bc}
    est = _estimate_component(samples[:, :, 0], params, seed,
                              extras={"tau": tau})
    if bc == "wired":
        est.extras["magnetisation"] = _estimate_component(
            samples[:, :, 1], params, seed)
    est.extras["walltime_s"] = time.time() - t0
    if csv_path:
        append_csv(csv_path, "one_arm", est)
    return est


def estimate_one_arm_profile(d, ms, beta, N, bc="wired", chains=2,
                             sweeps=2000, burn_in=None, seed=0,
                             csv_path=None):
    """Simultaneous one-arm estimates at every radius in ``ms`` on a single
    box of radius N, sharing one connectivity pass per sweep (much cheaper
    than separate runs on large boxes).  Returns {m: Estimate}."""
    ms = sorted(int(m) for m in ms)
    if not ms or ms[-1] > N:
        raise ValueError("need 0 < m <= N for every requested radius")
    t0 = time.time()
    ghost = bc == "wired"
    graph = build_box(d, N, ghost=ghost)
    spec = CouplingSpec(J=beta, bc="plus" if bc == "wired" else "free")
    shells = [graph.shell(m) for m in ms]
    origin = graph.origin

    def measure(state):
        labels = _lattice_labels(graph, state.bonds)
        lo = labels[origin]
        return tuple(float(np.any(labels[sh] == lo)) for sh in shells)

    samples, tau = _run_chains(graph, spec, measure, len(ms), chains,
                               sweeps, burn_in, seed)
    out = {}
    for i, m in enumerate(ms):
        params = {"d": d, "N": N, "m": m, "beta": beta, "h": 0.0, "bc": bc}
        est = _estimate_component(samples[:, :, i], params, seed,
                                  extras={"tau": tau})
        est.extras["walltime_s"] = time.time() - t0
        out[m] = est
        if csv_path:
            append_csv(csv_path, "one_arm", est)
    return out


def estimate_magnetisation(d, N, beta, h, chains=4, sweeps=2000,
                           burn_in=None, seed=0, csv_path=None):
    """Estimate of <sigma_0> on the box of radius N with free lattice
    boundary and uniform field h (encoded by the ghost vertex)."""
    if h < 0:
        raise ValueError("h >= 0 required")
    t0 = time.time()
    graph = build_box(d, N, ghost=h > 0)
    spec = CouplingSpec(J=beta, h=h)
    origin = graph.origin

    def measure(state):
        return (float(state.spins[origin]),)

    samples, tau = _run_chains(graph, spec, measure, 1, chains, sweeps,
                               burn_in, seed)
    params = {"d": d, "N": N, "m": 0, "beta": beta, "h": h, "bc": "free"}
    est = _estimate_component(samples[:, :, 0], params, seed,
                              extras={"tau": tau})
    est.extras["walltime_s"] = time.time() - t0
    if csv_path:
        append_csv(csv_path, "magnetisation", est)
    return est


def estimate_volume_tail(d, N, beta, thresholds, chains=4, sweeps=2000,
                         burn_in=None, seed=0, csv_path=None):
    """Estimates of P[|C(0)| >= t] (origin cluster volume, free measure at
    coupling beta) for each threshold t, from shared samples."""
    thresholds = list(thresholds)
    if any(t2 <= t1 for t1, t2 in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be ascending")
    t0 = time.time()
    graph = build_box(d, N, ghost=False)
    spec = CouplingSpec(J=beta)
    origin = graph.origin

    def measure(state):
        labels = _lattice_labels(graph, state.bonds)
        return (float(np.count_nonzero(labels == labels[origin])),)

    samples, tau = _run_chains(graph, spec, measure, 1, chains, sweeps,
                               burn_in, seed)
    sizes = samples[:, :, 0]
    out = []
    for t in thresholds:
        params = {"d": d, "N": N, "m": t, "beta": beta, "h": 0.0,
                  "bc": "free"}
        est = _estimate_component((sizes >= t).astype(float), params, seed,
                                  extras={"tau": tau, "threshold": t})
        est.extras["walltime_s"] = time.time() - t0
        if csv_path:
            append_csv(csv_path, "volume_tail", est)
        out.append(est)
    return out


def estimate_edge_influence(d, N, beta, chains=4, sweeps=2000, burn_in=None,
                            seed=0, csv_path=None):
    """sup over edges e inside the half-radius box of
    phi^wired[e open] - phi^free[e open] on the box of radius N, estimated
    from paired wired/free chains driven by common random numbers."""
    t0 = time.time()
    gw = build_box(d, N, ghost=True)
    gf = build_box(d, N, ghost=False)
    spec_w = CouplingSpec(J=beta, bc="plus")
    spec_f = CouplingSpec(J=beta)
    rad = gw.chebyshev_radius()
    half = N // 2
    cand = np.flatnonzero(
        (rad[gw.edges[: gw.n_lattice_edges, 0]] <= half)
        & (rad[gw.edges[: gw.n_lattice_edges, 1]] <= half))
    floor = 500 if burn_in is None else burn_in
    nbins = 32
    acc = np.zeros((chains, nbins, len(cand)))
    counts = np.zeros((chains, nbins))
    for c in range(chains):
        rng = _chain_rng(seed, c)
        sw = make_state(gw, spec_w, rng)
        sf = make_state(gf, spec_f, rng)
        for t in range(floor + sweeps):
            ue = rng.random(len(gw.edges))
            uv = rng.random(gw.n_vertices)
            sw_sweep(sw, ue, uv)
            sw_sweep(sf, ue, uv)
            if t < floor:
                continue
            b = (t - floor) * nbins // sweeps
            acc[c, b] += sw.bonds[cand].astype(float) \
                - sf.bonds[cand].astype(float)
            counts[c, b] += 1
    bin_means = acc / counts[:, :, None]
    per_edge = bin_means.mean(axis=(0, 1))
    best = int(np.argmax(per_edge))
    series = bin_means[:, :, best]
    mean = float(per_edge[best])
    se_bin = float(np.sqrt(series.var(ddof=1) / series.size))
    cm = series.mean(axis=1)
    se_chain = float(np.sqrt(cm.var(ddof=1) / chains)) if chains > 1 else 0.0
    params = {"d": d, "N": N, "m": half, "beta": beta, "h": 0.0,
              "bc": "wired-free"}
    est = Estimate(mean=mean, stderr=max(se_bin, se_chain),
                   nsamples=chains * sweeps, params=params, seed=seed,
                   extras={"edge": [int(gw.edges[cand[best], 0]),
                                    int(gw.edges[cand[best], 1])],
                           "walltime_s": time.time() - t0})
    if csv_path:
        append_csv(csv_path, "edge_influence", est)
    return est


def sample_binder(d, size, beta, chains=2, sweeps=4000, burn=300, seed=0):
    """Binder cumulant U = 1 - <M^4>/(3 <M^2>^2) of the mean spin M on the
    free box of radius size at coupling beta."""
    graph = build_box(d, size, ghost=False)
    spec = CouplingSpec(J=beta)
    m2 = 0.0
    m4 = 0.0
    count = 0
    for c in range(chains):
        rng = _chain_rng(seed, c)
        state = make_state(graph, spec, rng)
        for _ in range(burn):
            sw_sweep(state)
        for _ in range(sweeps):
            sw_sweep(state)
            M = float(state.spins.mean())
            m2 += M * M
            m4 += M ** 4
            count += 1
    m2 /= count
    m4 /= count
    return 1.0 - m4 / (3.0 * m2 * m2)
