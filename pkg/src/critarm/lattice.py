"""Finite graphs for spin/percolation models: hypercubic boxes Lambda_n = [-n,n]^d,
rectangular grids, paths and cycles, optionally augmented with a ghost vertex
(one extra vertex joined to every lattice vertex, used to encode a magnetic field
or boundary conditions).

Conventions:
  * Vertex indexing is row-major over coordinates shifted to [0, 2n]^d, so the
    serialized form is reproducible across runs.
  * Edges are listed direction-major: for axis k = 0..d-1, all edges (v, v+e_k)
    in row-major order of v.  Ghost edges come after all lattice edges, in
    vertex order.  The ghost vertex, when present, is always the last index.
  * The boundary is the set {x in V : some Z^d-neighbor of x lies outside V}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SERIAL_VERSION = 1

#: default cap on the number of lattice vertices of a single graph
DEFAULT_VERTEX_BUDGET = 200_000_000


class CapacityError(Exception):
    """Requested graph exceeds the configured vertex budget."""


@dataclass
class LatticeGraph:
    """A finite graph embedded in Z^d, with optional ghost vertex.

    ``edges`` contains the lattice edges first (direction-major) and then, if
    ``ghost`` is set, one edge (x, ghost_index) per lattice vertex x.  The
    ghost index equals ``n_sites``.
    """

    d: int
    coords: np.ndarray  # (n_sites, d) integer coordinates (shifted, >= 0)
    edges: np.ndarray  # (n_edges, 2) int32, ghost edges last
    n_lattice_edges: int
    ghost: bool
    boundary: np.ndarray  # sorted indices of vertices with a Z^d-neighbor outside V
    exterior_degree: np.ndarray  # number of Z^d-neighbors outside V, per vertex
    meta: dict = field(default_factory=dict)

    _index: dict | None = None
    _adj: tuple | None = None

    @property
    def n_sites(self) -> int:
        return len(self.coords)

    @property
    def n_vertices(self) -> int:
        return self.n_sites + (1 if self.ghost else 0)

    @property
    def ghost_index(self) -> int:
        if not self.ghost:
            raise ValueError("graph has no ghost vertex")
        return self.n_sites

    @property
    def origin(self) -> int:
        return self.meta.get("origin", 0)

    def index_of(self, coord) -> int:
        """Vertex index of a (shifted) coordinate tuple."""
        if self._index is None:
            self._index = {tuple(c): i for i, c in enumerate(self.coords.tolist())}
        return self._index[tuple(coord)]

    def adjacency(self):
        """CSR-style adjacency over all edges (ghost included when present).

        Returns (indptr, neighbors, edge_ids): the incident edges of vertex v
        are edge_ids[indptr[v]:indptr[v+1]], listed in increasing edge index.
        """
        if self._adj is None:
            nv = self.n_vertices
            m = len(self.edges)
            ends = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
            other = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
            eid = np.tile(np.arange(m, dtype=np.int32), 2)
            order = np.lexsort((eid, ends))
            deg = np.bincount(ends, minlength=nv)
            indptr = np.zeros(nv + 1, dtype=np.int64)
            np.cumsum(deg, out=indptr[1:])
            self._adj = (indptr, other[order].astype(np.int32), eid[order])
        return self._adj

    def degrees(self) -> np.ndarray:
        indptr, _, _ = self.adjacency()
        return np.diff(indptr).astype(np.int64)

    def chebyshev_radius(self) -> np.ndarray:
        """|x|_inf of every vertex relative to the box center (boxes only)."""
        n = self.meta.get("n")
        if n is None:
            raise ValueError("chebyshev_radius is defined for centered boxes only")
        return np.max(np.abs(self.coords - n), axis=1)

    def shell(self, m: int) -> np.ndarray:
        """Vertex indices of the sphere {|x|_inf = m} (boxes only)."""
        return np.flatnonzero(self.chebyshev_radius() == m)

    def serialize(self) -> str:
        """Versioned textual dump; round-trips through :func:`deserialize`."""
        payload = {
            "version": SERIAL_VERSION,
            "d": self.d,
            "ghost": self.ghost,
            "meta": {k: v for k, v in self.meta.items()},
            "coords": self.coords.tolist(),
            "edges": self.edges.tolist(),
            "n_lattice_edges": self.n_lattice_edges,
        }
        return json.dumps(payload, sort_keys=True)


def deserialize(text: str) -> LatticeGraph:
    payload = json.loads(text)
    if payload["version"] != SERIAL_VERSION:
        raise ValueError(f"unsupported serialization version {payload['version']}")
    coords = np.asarray(payload["coords"], dtype=np.int64)
    edges = np.asarray(payload["edges"], dtype=np.int32).reshape(-1, 2)
    boundary, ext_deg = _exterior_structure(coords, payload["meta"].get("kind", "box"))
    return LatticeGraph(
        d=payload["d"],
        coords=coords,
        edges=edges,
        n_lattice_edges=payload["n_lattice_edges"],
        ghost=payload["ghost"],
        boundary=boundary,
        exterior_degree=ext_deg,
        meta=payload["meta"],
    )


def _exterior_structure(coords: np.ndarray, kind: str):
    """Boundary set and exterior degrees from the Z^d embedding.

    Cycles are periodic by construction and get an empty boundary.
    """
    n_sites, d = coords.shape
    if kind == "cycle":
        return np.empty(0, dtype=np.int64), np.zeros(n_sites, dtype=np.int64)
    if kind in ("box", "grid", "path") and n_sites > 0:
        # full rectangular region: exterior neighbors sit past the faces
        hi = coords.max(axis=0)
        ext = ((coords == 0).astype(np.int64) + (coords == hi)).sum(axis=1)
        return np.flatnonzero(ext > 0).astype(np.int64), ext
    members = {tuple(c) for c in coords.tolist()}
    ext = np.zeros(n_sites, dtype=np.int64)
    for i, c in enumerate(coords.tolist()):
        for k in range(d):
            for s in (-1, 1):
                nb = list(c)
                nb[k] += s
                if tuple(nb) not in members:
                    ext[i] += 1
    return np.flatnonzero(ext > 0).astype(np.int64), ext


def _grid_edges(shape) -> np.ndarray:
    """Direction-major nearest-neighbor edges of a row-major grid."""
    d = len(shape)
    n_sites = int(np.prod(shape))
    idx = np.arange(n_sites).reshape(shape)
    chunks = []
    for k in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[k] = slice(0, shape[k] - 1)
        hi[k] = slice(1, shape[k])
        u = idx[tuple(lo)].ravel()
        v = idx[tuple(hi)].ravel()
        chunks.append(np.stack([u, v], axis=1))
    if chunks:
        return np.concatenate(chunks).astype(np.int32)
    return np.empty((0, 2), dtype=np.int32)


def build_grid(shape, ghost: bool = False, kind: str = "grid",
               vertex_budget: int = DEFAULT_VERTEX_BUDGET) -> LatticeGraph:
    """Rectangular grid with side lengths ``shape`` (coordinates [0, s_k))."""
    shape = tuple(int(s) for s in shape)
    d = len(shape)
    n_sites = int(np.prod(shape))
    if n_sites > vertex_budget:
        raise CapacityError(f"{n_sites} vertices exceed budget {vertex_budget}")
    grids = np.meshgrid(*[np.arange(s, dtype=np.int32) for s in shape],
                        indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    edges = _grid_edges(shape)
    n_lat = len(edges)
    if ghost:
        g = np.full(n_sites, n_sites, dtype=np.int32)
        ghost_edges = np.stack([np.arange(n_sites, dtype=np.int32), g], axis=1)
        edges = np.concatenate([edges, ghost_edges])
    boundary, ext_deg = _exterior_structure(coords, kind)
    meta = {"kind": kind, "shape": list(shape), "origin": 0}
    return LatticeGraph(d=d, coords=coords, edges=edges, n_lattice_edges=n_lat,
                        ghost=ghost, boundary=boundary, exterior_degree=ext_deg,
                        meta=meta)


def build_box(d: int, n: int, ghost: bool = False,
              vertex_budget: int = DEFAULT_VERTEX_BUDGET) -> LatticeGraph:
    """The box Lambda_n = [-n, n]^d, coordinates shifted to [0, 2n]^d.

    The origin of the box (coordinate n in every axis) is recorded in
    ``meta["origin"]``.
    """
    if d < 1 or n < 0:
        raise ValueError("need d >= 1 and n >= 0")
    g = build_grid((2 * n + 1,) * d, ghost=ghost, kind="box",
                   vertex_budget=vertex_budget)
    g.meta["n"] = n
    g.meta["origin"] = int(np.ravel_multi_index((n,) * d, (2 * n + 1,) * d))
    return g


def build_path(k: int, ghost: bool = False) -> LatticeGraph:
    """A segment of Z^1 with k vertices."""
    if k < 1:
        raise ValueError("need k >= 1")
    g = build_grid((k,), ghost=ghost, kind="path")
    g.meta["origin"] = k // 2
    return g


def build_cycle(k: int, ghost: bool = False) -> LatticeGraph:
    """A k-cycle (periodic segment; no exterior boundary)."""
    if k < 3:
        raise ValueError("need k >= 3")
    g = build_grid((k,), ghost=False, kind="cycle")
    wrap = np.array([[0, k - 1]], dtype=np.int32)
    edges = np.concatenate([g.edges, wrap])
    n_lat = len(edges)
    if ghost:
        gh = np.stack([np.arange(k, dtype=np.int32),
                       np.full(k, k, dtype=np.int32)], axis=1)
        edges = np.concatenate([edges, gh])
    boundary, ext_deg = _exterior_structure(g.coords, "cycle")
    return LatticeGraph(d=1, coords=g.coords, edges=edges, n_lattice_edges=n_lat,
                        ghost=ghost, boundary=boundary, exterior_degree=ext_deg,
                        meta={"kind": "cycle", "shape": [k], "origin": 0})


@dataclass
class SubsetRegion:
    """A vertex subset S of a parent graph with a distinguished root (default:
    the parent's origin)."""

    parent: LatticeGraph
    members: frozenset
    root: int | None = None

    def __post_init__(self):
        self.members = frozenset(int(v) for v in self.members)
        if self.root is None:
            self.root = self.parent.origin
        if self.root not in self.members:
            raise ValueError("root must belong to the region")
        if not self.members <= set(range(self.parent.n_sites)):
            raise ValueError("region exceeds the parent vertex set")


@dataclass(frozen=True)
class BoundaryPair:
    """An ordered pair (u in S, v outside S) with u ~ v in Z^d.

    ``v_index`` is the parent index of v, or -1 when v lies outside the parent
    box (then ``exterior`` is True and only ``v_coord`` identifies it).
    """

    u: int
    v_index: int
    v_coord: tuple
    exterior: bool


def edge_boundary(region: SubsetRegion) -> list[BoundaryPair]:
    """All ordered pairs (u, v) with u in S, v outside S, u ~ v in Z^d.

    Pairs whose v lies outside the parent graph are retained and flagged
    (the quantity beta * sum of restricted two-point functions across this
    boundary sums over all Z^d-neighbors, not just those inside the parent).
    """
    if not region.members:
        raise ValueError("region is empty")
    parent = region.parent
    coords = parent.coords
    member_coords = {tuple(coords[v]): v for v in region.members}
    parent_coords = {tuple(c): i for i, c in enumerate(coords.tolist())}
    pairs = []
    for u in sorted(region.members):
        cu = coords[u]
        for k in range(parent.d):
            for s in (-1, 1):
                cv = list(cu)
                cv[k] += s
                cv = tuple(cv)
                if cv in member_coords:
                    continue
                v_index = parent_coords.get(cv, -1)
                pairs.append(BoundaryPair(u=u, v_index=v_index, v_coord=cv,
                                          exterior=v_index < 0))
    return pairs


def induced_subgraph(parent: LatticeGraph, members) -> tuple[LatticeGraph, np.ndarray]:
    """The subgraph induced by a vertex subset, re-indexed row-major.

    Returns (graph, index_map) where index_map[i] is the parent index of the
    i-th vertex of the subgraph.  The ghost is not inherited.
    """
    members = sorted(int(v) for v in members)
    index_map = np.asarray(members, dtype=np.int64)
    lookup = {v: i for i, v in enumerate(members)}
    coords = parent.coords[index_map]
    keep = []
    for e in range(parent.n_lattice_edges):
        a, b = int(parent.edges[e, 0]), int(parent.edges[e, 1])
        if a in lookup and b in lookup:
            keep.append((lookup[a], lookup[b]))
    edges = np.asarray(keep, dtype=np.int32).reshape(-1, 2)
    kind = parent.meta.get("kind", "grid")
    boundary, ext_deg = _exterior_structure(
        coords, "induced" if kind != "cycle" else "cycle")
    g = LatticeGraph(d=parent.d, coords=coords, edges=edges,
                     n_lattice_edges=len(edges), ghost=False,
                     boundary=boundary, exterior_degree=ext_deg,
                     meta={"kind": "induced", "origin": 0})
    return g, index_map
