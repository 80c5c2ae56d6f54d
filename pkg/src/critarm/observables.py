"""Diagrammatic observables: the finite-volume activity phi_beta(S), the
sharp length it defines, and the bubble / triangle diagrams, computed exactly
on enumerable regions and by Monte Carlo otherwise.

Conventions: phi_beta(S) = beta * sum over ordered pairs (u in S, v outside
S, u ~ v in Z^d) of <sigma_root sigma_u>_{S, beta} with free boundary
condition on S.  The diagrams on a box Lambda are
B = sup_x sum_y <sigma_x sigma_y>^2 and
T = sup_x sum_{y,z} <sigma_x sigma_y><sigma_y sigma_z><sigma_z sigma_x>;
the sup is taken over a deterministic set of 32 well-spread roots in the
Monte Carlo regime, and the middle triangle leg uses the translation-averaged
two-point table.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import fftn, ifftn

from . import kernels
from .exact_oracle import BudgetError, CouplingSpec, spin_expectation
from .lattice import (LatticeGraph, SubsetRegion, build_box, edge_boundary,
                      induced_subgraph)
from .spin_fk_mc import _chain_rng, _estimate_component, make_state, sw_sweep

EXACT_SITE_BUDGET = 16  # largest region enumerated exactly (2^sites states)
PHI_THRESHOLD = 0.1


@dataclass
class DiagramResult:
    quantity: str  # phi_S | bubble | triangle | two_point | susceptibility
    value: float
    stderr: float  # 0 for exact evaluations
    region: str
    beta: float
    extras: dict = field(default_factory=dict)


@dataclass
class SharpLengthResult:
    beta: float
    k: int | None  # None means the search exceeded kmax
    witness: str
    phi_value: float
    phi_stderr: float = 0.0

    @property
    def exceeded(self) -> bool:
        return self.k is None


def _region_graph(S: SubsetRegion):
    """Induced subgraph of the region, its root index, and the multiset of
    boundary endpoints u (one entry per ordered pair (u, v))."""
    members = sorted(S.members)
    gS, imap = induced_subgraph(S.parent, members)
    back = {int(old): new for new, old in enumerate(imap)}
    root = back[S.root]
    us = [back[p.u] for p in edge_boundary(S)]
    return gS, root, us


def phi_S(S: SubsetRegion, beta: float, mc: dict | None = None,
          region_label: str | None = None) -> DiagramResult:
    """beta * sum over the region's outward edge boundary of the restricted
    two-point function from the root.  Exact when the region is enumerable;
    otherwise estimated by Swendsen-Wang restricted to the region (requires
    ``mc`` parameters: chains, sweeps, seed, optionally burn)."""
    gS, root, us = _region_graph(S)
    label = region_label or f"set:{len(S.members)}"
    if gS.n_sites <= EXACT_SITE_BUDGET:
        spec = CouplingSpec(J=beta)
        total = sum(spin_expectation(gS, spec, [root, u]) for u in us)
        return DiagramResult("phi_S", beta * float(total), 0.0, label, beta)
    if mc is None:
        raise BudgetError(
            f"region has {gS.n_sites} sites (> {EXACT_SITE_BUDGET}); supply "
            "mc={'chains':..., 'sweeps':..., 'seed':...} for a Monte Carlo "
            "estimate")
    chains = int(mc.get("chains", 4))
    sweeps = int(mc.get("sweeps", 2000))
    seed = int(mc.get("seed", 0))
    burn = int(mc.get("burn", 300))
    spec = CouplingSpec(J=beta)
    counts = np.bincount(np.asarray(us, dtype=int), minlength=gS.n_sites)
    samples = np.empty((chains, sweeps))
    for c in range(chains):
        st = make_state(gS, spec, _chain_rng(seed, c))
        for _ in range(burn):
            sw_sweep(st)
        for t in range(sweeps):
            sw_sweep(st)
            samples[c, t] = st.spins[root] * (counts @ st.spins)
    est = _estimate_component(samples, {"beta": beta}, seed)
    return DiagramResult("phi_S", beta * est.mean, beta * est.stderr,
                         label, beta)


def sharp_length(d: int, beta: float, kmax: int,
                 mc: dict | None = None) -> SharpLengthResult:
    """Smallest k <= kmax such that a centered box of radius j <= k has
    phi_beta < 1/10 (with j = 0, the single origin, reported as k = 1).

    The search family is centered boxes only, so the reported k is an upper
    bound for the sharp length over arbitrary regions of the same diameter.
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    for j in range(0, kmax + 1):
        box = build_box(d, max(j, 1), ghost=False)
        members = (frozenset([box.origin]) if j == 0
                   else frozenset(range(box.n_sites)))
        S = SubsetRegion(box, members, root=box.origin)
        res = phi_S(S, beta, mc=mc, region_label=f"box:{j}")
        if res.value < PHI_THRESHOLD:
            return SharpLengthResult(beta=beta, k=max(j, 1),
                                     witness=f"box:{j}",
                                     phi_value=res.value,
                                     phi_stderr=res.stderr)
    last = res
    return SharpLengthResult(beta=beta, k=None, witness=f"box:{kmax}",
                             phi_value=last.value, phi_stderr=last.stderr)


# ---------------------------------------------------------------------------
# bubble and triangle diagrams
# ---------------------------------------------------------------------------

def _well_spread_roots(graph: LatticeGraph, count: int = 32) -> np.ndarray:
    """Deterministic rank-1 lattice sample of the box's sites (origin always
    included)."""
    n = graph.n_sites
    if n <= count:
        return np.arange(n)
    phi = 0.6180339887498949
    picks = np.unique(((graph.origin + np.round(
        np.arange(count) * phi * n)) % n).astype(np.int64))
    return np.unique(np.concatenate([[graph.origin], picks]))[:count]


def _offset_average(t, root_coords, shape, side):
    """Translation-averaged two-point table over offsets in [-(side-1)//2,
    (side-1)//2]^d from per-root rows t[r, v]."""
    d = len(shape)
    off_shape = tuple(2 * s - 1 for s in shape)
    acc = np.zeros(off_shape)
    cnt = np.zeros(off_shape)
    grid = np.indices(shape).reshape(d, -1).T  # all site coords
    for i, rc in enumerate(root_coords):
        off = grid - rc + (np.asarray(shape) - 1)
        idx = tuple(off.T)
        np.add.at(acc, idx, t[i])
        np.add.at(cnt, idx, 1.0)
    with np.errstate(invalid="ignore"):
        c = np.where(cnt > 0, acc / np.maximum(cnt, 1), 0.0)
    return np.clip(c, 0.0, 1.0)


def diagrams(d: int, N: int, beta: float, chains: int = 4,
             sweeps: int = 2000, seed: int = 0, burn: int = 300,
             bins: int = 8, roots: int = 32):
    """Monte Carlo bubble and triangle diagrams on the box of radius N with
    free boundary condition.

    Returns (bubble, triangle) with value = max over the sampled roots, the
    stderr from per-bin spread across chains, the translation-averaged
    two-point table in extras["two_point"], and the susceptibility
    (sum of the origin-rooted two-point row) in extras["susceptibility"].
    The bubble never exceeds the triangle: the triangle's z = y diagonal
    term reproduces the bubble since the averaged table equals 1 at offset 0
    and every table entry is clipped to [0, 1].
    """
    t0 = time.time()
    graph = build_box(d, N, ghost=False)
    spec = CouplingSpec(J=beta)
    shape = tuple(2 * N + 1 for _ in range(d))
    ridx = _well_spread_roots(graph, roots)
    root_coords = graph.coords[ridx]  # already in [0, 2N]^d
    n = graph.n_sites
    per_bin = max(sweeps // bins, 1)
    tables = np.zeros((chains, bins, len(ridx), n))
    origin_rows = np.zeros((chains, bins, n))
    for c in range(chains):
        st = make_state(graph, spec, _chain_rng(seed, c))
        for _ in range(burn):
            sw_sweep(st)
        for b in range(bins):
            for _ in range(per_bin):
                sw_sweep(st)
                s = st.spins.astype(np.float64)
                tables[c, b] += s[ridx, None] * s[None, :]
                origin_rows[c, b] += s[graph.origin] * s
    tables /= per_bin
    origin_rows /= per_bin
    np.clip(tables, 0.0, 1.0, out=tables)

    bubbles = np.empty((chains, bins))
    triangles = np.empty((chains, bins))
    chis = np.empty((chains, bins))
    fshape = tuple(2 * s - 1 for s in shape)
    for c in range(chains):
        for b in range(bins):
            t = tables[c, b]
            cavg = _offset_average(t, root_coords, shape, 2 * N + 1)
            Fc = fftn(cavg, fshape)
            bub = (t ** 2).sum(axis=1)
            tri = np.empty(len(ridx))
            for i in range(len(ridx)):
                Tg = np.zeros(shape)
                Tg[tuple(graph.coords[:n].T)] = t[i]
                conv = ifftn(fftn(Tg, fshape) * Fc).real
                # conv[y + (shape-1)] = sum_z T(z) c(y - z)
                sl = tuple(slice(s - 1, 2 * s - 1) for s in shape)
                tri[i] = float((Tg * conv[sl]).sum())
            bubbles[c, b] = bub.max()
            triangles[c, b] = tri.max()
            chis[c, b] = np.clip(origin_rows[c, b], 0.0, 1.0).sum()

    region = f"box:{N}"
    mean_table = np.clip(tables.mean(axis=(0, 1)), 0.0, 1.0)
    cavg_mean = _offset_average(mean_table, root_coords, shape, 2 * N + 1)

    def _pack(name, vals):
        flat = vals.reshape(-1)
        se = float(np.sqrt(flat.var(ddof=1) / len(flat))) if len(flat) > 1 \
            else 0.0
        return DiagramResult(name, float(flat.mean()), se, region, beta)

    bubble = _pack("bubble", bubbles)
    triangle = _pack("triangle", triangles)
    chi = _pack("susceptibility", chis)
    for r in (bubble, triangle):
        r.extras["two_point"] = cavg_mean
        r.extras["susceptibility"] = chi.value
        r.extras["susceptibility_stderr"] = chi.stderr
        r.extras["walltime_s"] = time.time() - t0
    return bubble, triangle


def exact_diagrams(d: int, N: int, beta: float):
    """Exact bubble and triangle on an enumerable box (sup over all sites,
    full pair table)."""
    graph = build_box(d, N, ghost=False)
    if graph.n_sites > EXACT_SITE_BUDGET:
        raise BudgetError("box too large for exact diagram evaluation")
    spec = CouplingSpec(J=beta)
    n = graph.n_sites
    t = np.eye(n)
    for a in range(n):
        for b in range(a + 1, n):
            t[a, b] = t[b, a] = spin_expectation(graph, spec, [a, b])
    bub = (t ** 2).sum(axis=1).max()
    tri = np.einsum("xy,yz,zx->x", t, t, t).max()
    region = f"box:{N}"
    return (DiagramResult("bubble", float(bub), 0.0, region, beta,
                          {"two_point": t}),
            DiagramResult("triangle", float(tri), 0.0, region, beta,
                          {"two_point": t}))
