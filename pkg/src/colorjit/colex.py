"""Dual-graph lattices for tetrahedral 3D color codes.

The colex is represented only through its dual: qubits are dual tetrahedra,
faces are dual edges, cells are dual vertices, and the four boundary facets
are outer vertices. The mesh is the body-centered-cubic tetrahedralization
(cube corners plus cube centers, four tetrahedra per shared cube face),
which is 4-colorable: corner vertices split by coordinate-sum parity, center
vertices likewise. A tetrahedral region is cut out by four {111}-family
planes, each placed so that the first excluded lattice layer carries a
single color: that layer collapses into the facet's outer vertex.

Coordinates are stored as integers in units of 1/8 lattice spacing, so all
plane and centroid comparisons are exact.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import gf2

COLOR_NAMES = ("r", "g", "b", "y")

# facet normals; a point P is inside when N_i . P <= c_i for all i
NORMALS = (
    (1, 1, 1),
    (1, -1, -1),
    (-1, 1, -1),
    (-1, -1, 1),
)

# along every normal the lattice layers cycle with period 16 (two lattice
# spacings): color 0 at offset 0, color 3 at 4, color 1 at 8, color 2 at 12
LAYER_OFFSET = {0: 0, 1: 8, 2: 12, 3: 4}


class GeometryError(Exception):
    """The requested region does not produce a consistent colex."""


class InfeasibleCharge(Exception):
    """A monopole configuration cannot be realized on the given strip."""


class NoClosure(Exception):
    """No replacement path exists inside the future subgraph."""


class NotSimple(Exception):
    """A cell-surface subgraph is disconnected."""


def vertex_color(p: tuple[int, int, int]) -> int:
    """Color of a mesh vertex (coordinates in 1/8 units)."""
    if p[0] % 8 == 0:  # corner vertex
        s = (p[0] + p[1] + p[2]) // 8
        return 0 if s % 2 == 0 else 1
    s = (p[0] + p[1] + p[2] - 12) // 8
    return 2 if s % 2 == 0 else 3


# --- flux group -------------------------------------------------------------

FLUX_ZERO = 0


def flux_pair(a: int, b: int) -> int:
    """Flux element written as the color pair {a, b} (a 4-bit mask)."""
    if a == b:
        raise ValueError("a flux pair needs two distinct colors")
    return (1 << a) | (1 << b)


def flux_of_edge_colors(ka: int, kb: int) -> int:
    """Flux label of a dual edge: the pair complementary to its endpoint
    colors (a face of colors {ka, kb} carries flux {kc, kd})."""
    return 0b1111 ^ flux_pair(ka, kb)


def m_kappa(kappa: int) -> frozenset[int]:
    """Subgroup M_kappa: flux elements generated by pairs avoiding kappa."""
    others = [c for c in range(4) if c != kappa]
    vals = {0}
    for a, b in combinations(others, 2):
        vals.add(flux_pair(a, b))
    return frozenset(vals)


M_KAPPA = tuple(m_kappa(k) for k in range(4))

ALL_FLUX = tuple(v for v in range(16) if bin(v).count("1") in (0, 2, 4))


def in_m_kappa(value: int, kappa: int) -> bool:
    return value == 0 or (bin(value).count("1") == 2 and not (value >> kappa) & 1)


# --- core graph type --------------------------------------------------------

@dataclass
class DualGraph:
    """Extended dual graph plus primal incidence data."""

    inner_color: np.ndarray          # (n_inner,) color per cell vertex
    inner_pos: np.ndarray            # (n_inner, 3) mesh coordinates, 1/8 units
    outer_color: np.ndarray          # (n_outer,) color per facet vertex
    edges: np.ndarray                # (m, 2) vertex ids per face edge
    flux: np.ndarray                 # (m,) flux label per face edge
    border_edges: np.ndarray         # (b, 2) outer vertex ids
    triangles: list                  # [(vertex id triple, edge id triple)]
    qubit_vertices: np.ndarray       # (q, 4) vertex ids per qubit tetrahedron
    face_qubits: list                # per face edge: qubit id list

    _adj: list | None = field(default=None, repr=False)
    _tri_at: list | None = field(default=None, repr=False)

    @property
    def n_inner(self) -> int:
        return self.inner_color.size

    @property
    def n_outer(self) -> int:
        return self.outer_color.size

    @property
    def n_vertices(self) -> int:
        return self.n_inner + self.n_outer

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.qubit_vertices.shape[0]

    def is_outer(self, v: int) -> bool:
        return v >= self.n_inner

    def color_of(self, v: int) -> int:
        if v < self.n_inner:
            return int(self.inner_color[v])
        return int(self.outer_color[v - self.n_inner])

    def edge_endpoints(self, e: int) -> tuple[int, int]:
        """Endpoints of a face edge or a border edge by global edge id."""
        m = self.n_edges
        if e < m:
            return int(self.edges[e, 0]), int(self.edges[e, 1])
        u, v = self.border_edges[e - m]
        return int(u), int(v)

    def edge_flux(self, e: int) -> int:
        if e < self.n_edges:
            return int(self.flux[e])
        u, v = self.border_edges[e - self.n_edges]
        return flux_of_edge_colors(self.color_of(int(u)), self.color_of(int(v)))

    def adjacency(self) -> list:
        """Per vertex: list of (global edge id, other endpoint)."""
        if self._adj is None:
            adj = [[] for _ in range(self.n_vertices)]
            for e in range(self.n_edges):
                u, v = self.edges[e]
                adj[u].append((e, int(v)))
                adj[v].append((e, int(u)))
            m = self.n_edges
            for i in range(self.border_edges.shape[0]):
                u, v = self.border_edges[i]
                adj[u].append((m + i, int(v)))
                adj[v].append((m + i, int(u)))
            self._adj = adj
        return self._adj

    def triangles_at(self) -> list:
        """Per vertex: list of triangle indices containing it."""
        if self._tri_at is None:
            tri_at = [[] for _ in range(self.n_vertices)]
            for t, (vids, _) in enumerate(self.triangles):
                for v in vids:
                    tri_at[v].append(t)
            self._tri_at = tri_at
        return self._tri_at

    # primal stabilizer data ------------------------------------------------

    def x_checks(self) -> np.ndarray:
        """One X-stabilizer row per cell (qubits of the cell)."""
        hx = np.zeros((self.n_inner, self.n_qubits), dtype=np.uint8)
        for q in range(self.n_qubits):
            for v in self.qubit_vertices[q]:
                if v < self.n_inner:
                    hx[v, q] = 1
        return hx

    def z_checks(self) -> np.ndarray:
        """One Z-stabilizer row per face (qubits of the face)."""
        hz = np.zeros((self.n_edges, self.n_qubits), dtype=np.uint8)
        for e, qubits in enumerate(self.face_qubits):
            hz[e, qubits] = 1
        return hz

    def facet_x_ops(self) -> np.ndarray:
        """One X operator per facet (qubits touching the facet)."""
        rx = np.zeros((self.n_outer, self.n_qubits), dtype=np.uint8)
        for q in range(self.n_qubits):
            for v in self.qubit_vertices[q]:
                if v >= self.n_inner:
                    rx[v - self.n_inner, q] = 1
        return rx

    def k_face(self) -> int:
        """Maximum number of faces of any cell."""
        deg = np.zeros(self.n_inner, dtype=int)
        for e in range(self.n_edges):
            for v in self.edges[e]:
                if v < self.n_inner:
                    deg[v] += 1
        return int(deg.max())


# --- flux configurations ----------------------------------------------------

def boundary(graph: DualGraph, phi: np.ndarray) -> np.ndarray:
    """Per-vertex monopole charges of a set of face edges."""
    phi = np.asarray(phi, dtype=bool)
    charge = np.zeros(graph.n_vertices, dtype=np.uint8)
    for e in np.nonzero(phi)[0]:
        u, v = graph.edges[e]
        charge[u] ^= graph.flux[e]
        charge[v] ^= graph.flux[e]
    return charge


def is_syndrome(graph: DualGraph, phi: np.ndarray) -> bool:
    """Gauss law: no residual charge at any inner vertex."""
    charge = boundary(graph, phi)
    return not charge[: graph.n_inner].any()


# --- layer structures -------------------------------------------------------

@dataclass
class LayerStructure:
    """Nested cell sets C_1 < ... < C_n with the derived face/qubit regions."""

    graph: DualGraph
    cell_layer: np.ndarray   # (n_inner,) 0-based layer index per cell

    def __post_init__(self):
        g = self.graph
        n = int(self.cell_layer.max()) + 1 if self.cell_layer.size else 0
        self.n_layers = n
        self._cells = []
        self._phi = []
        self._r = []
        for i in range(n + 1):
            cells = self.cell_layer < i
            in_phi = np.zeros(g.n_edges, dtype=bool)
            for e in range(g.n_edges):
                for v in g.edges[e]:
                    if v < g.n_inner and cells[v]:
                        in_phi[e] = True
            r = np.zeros(g.n_qubits, dtype=bool)
            for q in range(g.n_qubits):
                for v in g.qubit_vertices[q]:
                    if v < g.n_inner and cells[v]:
                        r[q] = True
            self._cells.append(cells)
            self._phi.append(in_phi)
            self._r.append(r)

    def cells(self, i: int) -> np.ndarray:
        return self._cells[i]

    def phi(self, i: int) -> np.ndarray:
        return self._phi[i]

    def lam(self, i: int) -> np.ndarray:
        if not hasattr(self, "_lam"):
            self._lam = [None] + [self._phi[j] & ~self._phi[j - 1]
                                  for j in range(1, len(self._phi))]
        return self._lam[i]

    def r_mask(self, i: int) -> np.ndarray:
        return self._r[i]


# --- lattice builder --------------------------------------------------------

def _dot(n, p) -> int:
    return n[0] * p[0] + n[1] * p[1] + n[2] * p[2]


def _enumerate_tets(bound: int):
    """All mesh tetrahedra with cube index within the bound (1-unit cubes,
    coordinates scaled by 8)."""
    axes = ((8, 0, 0), (0, 8, 0), (0, 0, 8))
    square_edges = (((0, 0), (0, 1)), ((0, 1), (1, 1)),
                    ((1, 1), (1, 0)), ((1, 0), (0, 0)))
    for i in range(-bound, bound + 1):
        for j in range(-bound, bound + 1):
            for k in range(-bound, bound + 1):
                ca = (8 * i + 4, 8 * j + 4, 8 * k + 4)
                for ax in range(3):
                    cb = tuple(ca[t] + axes[ax][t] for t in range(3))
                    # corners of the shared cube face
                    base = [8 * i, 8 * j, 8 * k]
                    base[ax] += 8
                    du, dv = [t for t in range(3) if t != ax]
                    for (a1, a2), (b1, b2) in square_edges:
                        p = list(base)
                        p[du] += 8 * a1
                        p[dv] += 8 * a2
                        q = list(base)
                        q[du] += 8 * b1
                        q[dv] += 8 * b2
                        yield (ca, cb, tuple(p), tuple(q))


def build_lattice(family: str = "slab", d: int = 2, layering: str = "z",
                  thickness: int = 1) -> tuple[DualGraph, LayerStructure]:
    """Build a tetrahedral colex dual graph and its layer structure.

    family: "slab" (regular tetrahedral region, flat layers) or "wedge"
    (region elongated along the first facet normal). layering: "z" (flat
    layers; all four facets stay time-like) or "diag" (layers normal to the
    first facet, which therefore vanishes at an instant, the forbidden
    fixture). thickness is in lattice spacings.
    """
    if family not in ("slab", "wedge"):
        raise ValueError(f"unsupported geometry family: {family!r}")
    if d < 2:
        raise ValueError("size must be at least 2")
    if thickness < 1:
        raise ValueError("layer thickness must be at least one cell")
    cuts = []
    for f in range(4):
        target = 8 * d * (2 if family == "wedge" and f == 0 else 1)
        layer = target + ((LAYER_OFFSET[f] - target) % 16)
        cuts.append(layer - 1)
    graph = _build_from_cuts(cuts)
    cell_layer = _assign_layers(graph, layering, thickness)
    return graph, LayerStructure(graph, cell_layer)


# inverse of LAYER_OFFSET: layer position mod 16 -> color
OFFSET_COLOR = {0: 0, 4: 3, 8: 1, 12: 2}


def _build_from_cuts(cuts: list[int]) -> DualGraph:
    """Quotient colex of the region bounded by the four cuts.

    Each cut sits one unit below a lattice layer, so the first excluded
    layer of facet f is monochrome; its color is the facet color. Inner
    vertices are mesh vertices inside every cut. Qubit tetrahedra have at
    least one inner vertex and all remaining vertices in first excluded
    layers; those collapse into the outer vertex of their color. Qubits,
    faces and triangles are the resulting simplex classes.
    """
    for c in cuts:
        if c % 4 != 3:
            raise GeometryError("cuts must sit one unit below a lattice layer")
    facet_color = [OFFSET_COLOR[(c + 1) % 16] for c in cuts]
    if sorted(facet_color) != [0, 1, 2, 3]:
        raise GeometryError("facet colors must be pairwise distinct")
    bound = (max(cuts) + 24) // 8 + 2

    def inside(p) -> bool:
        return all(_dot(NORMALS[f], p) <= cuts[f] for f in range(4))

    def allowed(p) -> bool:
        ok = True
        for f in range(4):
            v = _dot(NORMALS[f], p)
            if v > cuts[f]:
                if v > cuts[f] + 4:
                    return False
                if vertex_color(p) != facet_color[f]:
                    raise GeometryError(
                        f"first excluded layer of facet {f} is not monochrome at {p}")
                ok = True
        return ok

    # pass 1: qubit tets, inner vertex ids in scan order
    raw_tets = []
    inner_keys: dict[tuple, int] = {}
    for tet in _enumerate_tets(bound):
        flags = [inside(p) for p in tet]
        if any(flags) and all(f or allowed(p) for p, f in zip(tet, flags)):
            raw_tets.append(tet)
            for p, f in zip(tet, flags):
                if f and p not in inner_keys:
                    inner_keys[p] = len(inner_keys)
    if not raw_tets:
        raise GeometryError("empty region")
    n_inner = len(inner_keys)

    def class_of(p: tuple) -> int:
        if p in inner_keys:
            return inner_keys[p]
        return n_inner + vertex_color(p)

    inner_color = np.zeros(n_inner, dtype=np.uint8)
    inner_pos = np.zeros((n_inner, 3), dtype=np.int64)
    for p, idx in inner_keys.items():
        inner_color[idx] = vertex_color(p)
        inner_pos[idx] = p
    outer_color = np.arange(4, dtype=np.uint8)

    # pass 2: merge tets into qubit classes
    qubit_ids: dict[tuple, int] = {}
    qubit_rows = []
    for tet in raw_tets:
        key = tuple(sorted(class_of(p) for p in tet))
        if len(set(key)) != 4:
            raise GeometryError(f"degenerate qubit class {key}")
        if key not in qubit_ids:
            qubit_ids[key] = len(qubit_rows)
            qubit_rows.append(key)
    qubit_vertices = np.array(qubit_rows, dtype=np.int64)

    # faces and border edges from qubit vertex pairs
    edge_ids: dict[tuple, int] = {}
    edge_list = []
    face_qubits: list[list[int]] = []
    border_ids: dict[tuple, int] = {}
    border_list = []
    for q, key in enumerate(qubit_rows):
        for a, b in combinations(key, 2):
            if a < n_inner or b < n_inner:
                if (a, b) not in edge_ids:
                    edge_ids[(a, b)] = len(edge_list)
                    edge_list.append((a, b))
                    face_qubits.append([])
                face_qubits[edge_ids[(a, b)]].append(q)
            elif (a, b) not in border_ids:
                border_ids[(a, b)] = len(border_list)
                border_list.append((a, b))
    m = len(edge_list)

    def edge_id_of(a: int, b: int) -> int:
        a, b = min(a, b), max(a, b)
        if (a, b) in edge_ids:
            return edge_ids[(a, b)]
        return m + border_ids[(a, b)]

    tri_seen = set()
    tri_list = []
    for key in qubit_rows:
        for tri in combinations(key, 3):
            if all(v >= n_inner for v in tri) or tri in tri_seen:
                continue
            tri_seen.add(tri)
            eids = (edge_id_of(tri[0], tri[1]), edge_id_of(tri[0], tri[2]),
                    edge_id_of(tri[1], tri[2]))
            tri_list.append((tri, eids))

    edges = np.array(edge_list, dtype=np.int64).reshape(-1, 2)
    flux = np.zeros(m, dtype=np.uint8)
    for e in range(m):
        ka = vertex_color_by_id(inner_color, outer_color, n_inner, edges[e, 0])
        kb = vertex_color_by_id(inner_color, outer_color, n_inner, edges[e, 1])
        flux[e] = flux_of_edge_colors(ka, kb)
    border_edges = (np.array(border_list, dtype=np.int64).reshape(-1, 2)
                    if border_list else np.zeros((0, 2), dtype=np.int64))

    return DualGraph(inner_color=inner_color, inner_pos=inner_pos,
                     outer_color=outer_color, edges=edges, flux=flux,
                     border_edges=border_edges, triangles=tri_list,
                     qubit_vertices=qubit_vertices, face_qubits=face_qubits)


def vertex_color_by_id(inner_color, outer_color, n_inner, v) -> int:
    return int(inner_color[v]) if v < n_inner else int(outer_color[v - n_inner])


def _assign_layers(graph: DualGraph, layering: str, thickness: int) -> np.ndarray:
    if layering == "z":
        value = graph.inner_pos[:, 2]
    elif layering == "diag":
        # sweep against the first facet normal: that facet is entirely in
        # the first layer and then disappears
        value = -(graph.inner_pos @ np.array([1, 1, 1]))
    else:
        raise ValueError(f"unsupported layering: {layering!r}")
    lo = int(value.min())
    width = 8 * thickness
    return ((value - lo) // width).astype(np.int64)


# --- distances --------------------------------------------------------------

def _subgraph_adjacency(graph: DualGraph, edge_mask: np.ndarray):
    """Inner-to-inner adjacency and per-vertex dangling facet colors for the
    subgraph selected by the face-edge mask."""
    adj = [[] for _ in range(graph.n_inner)]
    dangle = [[] for _ in range(graph.n_inner)]
    for e in np.nonzero(edge_mask)[0]:
        u, v = graph.edges[e]
        if u < graph.n_inner and v < graph.n_inner:
            adj[u].append(int(v))
            adj[v].append(int(u))
        elif u < graph.n_inner:
            dangle[u].append(graph.color_of(int(v)))
        elif v < graph.n_inner:
            dangle[v].append(graph.color_of(int(u)))
    return adj, dangle


def _full_adjacency(graph: DualGraph, edge_mask: np.ndarray):
    """Adjacency over all vertices (outer included) for the subgraph.

    Paths may pass through outer vertices: a chain of flux meeting a facet
    deposits free charge there, so facet hops are legitimate shortcuts when
    measuring replacement-path lengths.
    """
    adj = [[] for _ in range(graph.n_vertices)]
    for e in np.nonzero(edge_mask)[0]:
        u, v = graph.edges[e]
        adj[u].append(int(v))
        adj[v].append(int(u))
    return adj


def _bfs(adj, source: int) -> list:
    dist = [math.inf] * len(adj)
    dist[source] = 0
    queue = [source]
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if dist[v] is math.inf or dist[v] > dist[u] + 1:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        queue = nxt
    return dist


def distances(graph: DualGraph, edge_mask: np.ndarray, v: int,
              v2: int | None = None, kappa: int | None = None):
    """Distance data in the subgraph selected by the face-edge mask.

    Returns (d(v, v2), d_kappa(v), d(v)); the pair distance is None when v2
    is omitted and the facet distance is None when kappa is omitted. d(v) is
    the sum of the two smallest facet distances. Unreachable means inf.
    """
    adj = _full_adjacency(graph, edge_mask)
    dist = _bfs(adj, v)
    d_pair = dist[v2] if v2 is not None else None
    per_color = [dist[graph.n_inner + k] for k in range(4)]
    d_kappa = per_color[kappa] if kappa is not None else None
    two = sorted(per_color)[:2]
    d_v = two[0] + two[1]
    return d_pair, d_kappa, d_v


# --- causality --------------------------------------------------------------

def check_causality(layers: LayerStructure, hz: np.ndarray | None = None) -> list[dict]:
    """Per-layer causality report.

    Combinatorial proxies: the C_i submanifold is connected with Euler
    characteristic 1 and each intersection with an outside cell is empty or
    a disc (connected, chi 1). Final authority: the Z stabilizers supported
    on R_i lie in the row space of the Phi_i face checks.
    """
    g = layers.graph
    if hz is None:
        hz = g.z_checks()
    s_z = gf2.GeneratorMatrix.z_type(hz)
    reports = []
    for i in range(1, layers.n_layers + 1):
        cells = layers.cells(i)
        phi = layers.phi(i)
        r = layers.r_mask(i)
        rep = {"layer": i}

        # connectivity of C_i through shared faces
        idx = np.nonzero(cells)[0]
        if idx.size:
            seen = {int(idx[0])}
            stack = [int(idx[0])]
            adjc = [[] for _ in range(g.n_inner)]
            for e in range(g.n_edges):
                u, v = g.edges[e]
                if u < g.n_inner and v < g.n_inner and cells[u] and cells[v]:
                    adjc[u].append(int(v))
                    adjc[v].append(int(u))
            while stack:
                u = stack.pop()
                for v in adjc[u]:
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            rep["connected"] = len(seen) == idx.size
        else:
            rep["connected"] = True

        # Euler characteristic of the C_i subcomplex
        n_tri = sum(1 for vids, _ in g.triangles
                    if any(v < g.n_inner and cells[v] for v in vids))
        chi = int(r.sum()) - n_tri + int(phi.sum()) - int(cells.sum())
        rep["euler"] = chi
        rep["ball_proxy"] = rep["connected"] and chi == 1

        # intersection discs with outside cells
        disc_ok = True
        out_cells = [u for u in range(g.n_inner) if not cells[u]]
        shared = {u: [] for u in out_cells}
        for e in range(g.n_edges):
            u, v = g.edges[e]
            if u < g.n_inner and v < g.n_inner and cells[u] != cells[v]:
                outside, _ = (u, v) if not cells[u] else (v, u)
                shared[int(outside)].append(e)
        for u, faces in shared.items():
            if not faces:
                continue
            n_e = sum(1 for vids, _ in g.triangles
                      if u in vids and any(w < g.n_inner and cells[w] for w in vids))
            n_v = sum(1 for q in range(g.n_qubits)
                      if u in g.qubit_vertices[q]
                      and any(w < g.n_inner and cells[w] for w in g.qubit_vertices[q]))
            chi_d = n_v - n_e + len(faces)
            face_adj = {f: set() for f in faces}
            fset = set(faces)
            for vids, eids in g.triangles:
                if u in vids:
                    inc = [e for e in eids if e in fset]
                    for a in inc:
                        for b in inc:
                            if a != b:
                                face_adj[a].add(b)
            seen = {faces[0]}
            stack = [faces[0]]
            while stack:
                a = stack.pop()
                for b in face_adj[a]:
                    if b not in seen:
                        seen.add(b)
                        stack.append(b)
            if chi_d != 1 or len(seen) != len(faces):
                disc_ok = False
        rep["discs"] = disc_ok

        # algebraic causality: S_Z supported in R_i within span of Phi_i rows
        sub = gf2.support_subgroup(s_z, r)
        rep["algebraic"] = bool(gf2.row_space_leq(sub.z, hz[phi]))
        rep["passed"] = rep["algebraic"]
        reports.append(rep)
    return reports


# --- closure geometry -------------------------------------------------------

def check_closure_geometry(layers: LayerStructure) -> dict:
    """Smallest k with dbar <= k*d on each layer interface (both inequality
    orientations are computed; the forward one gates the closure bound).

    The sweep runs over vertices present in both Gamma_i and Gammabar_i;
    interior vertices of either side have no counterpart distance.
    """
    g = layers.graph
    k_fwd = 0.0
    k_rev = 0.0
    per_layer = []
    for i in range(1, layers.n_layers):
        phi = layers.phi(i)
        bar = ~phi
        adj_p = _full_adjacency(g, phi)
        adj_b = _full_adjacency(g, bar)
        common = np.nonzero([bool(adj_p[u]) and bool(adj_b[u])
                             for u in range(g.n_inner)])[0]
        layer_fwd = 0.0
        layer_rev = 0.0
        dists_p = {int(v): _bfs(adj_p, int(v)) for v in common}
        dists_b = {int(v): _bfs(adj_b, int(v)) for v in common}

        for v in common:
            dp = dists_p[int(v)]
            db = dists_b[int(v)]
            fp = [dp[g.n_inner + kk] for kk in range(4)]
            fb = [db[g.n_inner + kk] for kk in range(4)]
            sp = sorted(fp)
            sb = sorted(fb)
            d_v_p = sp[0] + sp[1]
            d_v_b = sb[0] + sb[1]
            for v2 in common:
                if v2 == v:
                    continue
                if dp[int(v2)] != math.inf:
                    ratio = db[int(v2)] / dp[int(v2)]
                    layer_fwd = max(layer_fwd, ratio)
                if db[int(v2)] != math.inf:
                    layer_rev = max(layer_rev, dp[int(v2)] / db[int(v2)])
            for kappa in range(4):
                if fp[kappa] != math.inf:
                    layer_fwd = max(layer_fwd, min(fb[kappa], d_v_b) / fp[kappa])
                if fb[kappa] != math.inf:
                    layer_rev = max(layer_rev, min(fp[kappa], d_v_p) / fb[kappa])
        per_layer.append({"layer": i, "k_forward": layer_fwd, "k_reverse": layer_rev})
        k_fwd = max(k_fwd, layer_fwd)
        k_rev = max(k_rev, layer_rev)
    k_face = g.k_face()
    return {
        "satisfied": math.isfinite(k_fwd),
        "k": k_fwd,
        "k_reverse": k_rev,
        "k_face": k_face,
        "k_close": 4 * k_fwd * (k_face - 1) if math.isfinite(k_fwd) else math.inf,
        "per_layer": per_layer,
    }


# --- triangle strips --------------------------------------------------------

@dataclass
class TriangleStrip:
    """Walk in the strip graph: edge ids (global) alternating with the
    triangles joining consecutive edges."""

    walk: list[int]
    triangles: list[tuple]   # (vertex id triple, edge id triple) per step

    def __post_init__(self):
        if not self.walk:
            raise ValueError("a strip contains at least one edge")
        if len(self.triangles) != len(self.walk) - 1:
            raise ValueError("strip needs one triangle per consecutive pair")

    def edge_set(self) -> set[int]:
        out = set(self.walk)
        for _, eids in self.triangles:
            out.update(eids)
        return out

    def vertex_set(self, graph: DualGraph) -> set[int]:
        out = set()
        for e in self.walk:
            out.update(graph.edge_endpoints(e))
        for vids, _ in self.triangles:
            out.update(vids)
        return out


def strip_flux(graph: DualGraph, strip: TriangleStrip, m: dict[int, int]) -> set[int]:
    """Flux configuration phi within the strip's edges with boundary m.

    Triangle-by-triangle induction: walking backwards, the free vertex of
    each triangle has its charge cleared by one of the four subsets of the
    two triangle edges meeting there.
    """
    charge = {v: val for v, val in m.items() if val}
    strip_vertices = strip.vertex_set(graph)
    for v, val in charge.items():
        if v not in strip_vertices:
            raise InfeasibleCharge("monopole support outside the strip")
        if not in_m_kappa(val, graph.color_of(v)):
            raise InfeasibleCharge("charge outside M_kappa at a vertex")
    phi: set[int] = set()

    def toggle(e: int):
        u, w = graph.edge_endpoints(e)
        f = graph.edge_flux(e)
        phi.symmetric_difference_update({e})
        for vert in (u, w):
            charge[vert] = charge.get(vert, 0) ^ f
            if not charge[vert]:
                charge.pop(vert)

    for j in range(len(strip.walk) - 1, 0, -1):
        prev_e = strip.walk[j - 1]
        cur_e = strip.walk[j]
        vids, eids = strip.triangles[j - 1]
        prev_ends = set(graph.edge_endpoints(prev_e))
        free = [v for v in vids if v not in prev_ends]
        if len(free) != 1:
            raise ValueError("malformed strip: no free vertex on triangle")
        v = free[0]
        at_v = [e for e in eids if v in graph.edge_endpoints(e)]
        if len(at_v) != 2:
            raise ValueError("malformed strip triangle")
        a, b = at_v
        fa, fb = graph.edge_flux(a), graph.edge_flux(b)
        want = charge.get(v, 0)
        if want == 0:
            pick = ()
        elif want == fa:
            pick = (a,)
        elif want == fb:
            pick = (b,)
        elif want == fa ^ fb:
            pick = (a, b)
        else:
            raise InfeasibleCharge("unreachable charge at strip vertex")
        for e in pick:
            toggle(e)
    e0 = strip.walk[0]
    u, w = graph.edge_endpoints(e0)
    f0 = graph.edge_flux(e0)
    want = charge.get(u, 0)
    if want == f0 and charge.get(w, 0) == f0:
        toggle(e0)
    if charge:
        raise InfeasibleCharge("residual charge after strip sweep")
    return phi


def _surface_path(graph: DualGraph, pivot: int, e_from: int, e_to: int,
                  allowed_edge) -> tuple[list[int], list[tuple]]:
    """Shortest path in the surface graph of the cell at the pivot vertex:
    nodes are allowed edges at the pivot, links are triangles at the pivot
    with all their edges allowed. Returns (edge node path, triangles)."""
    if e_from == e_to:
        return [e_from], []
    links: dict[int, list[tuple[int, tuple]]] = {}
    for t in graph.triangles_at()[pivot]:
        vids, eids = graph.triangles[t]
        if not all(allowed_edge(e) for e in eids):
            continue
        at_p = [e for e in eids if pivot in graph.edge_endpoints(e)]
        if len(at_p) != 2:
            continue
        a, b = at_p
        links.setdefault(a, []).append((b, (vids, eids)))
        links.setdefault(b, []).append((a, (vids, eids)))
    prev: dict[int, tuple[int, tuple] | None] = {e_from: None}
    queue = [e_from]
    while queue and e_to not in prev:
        nxt = []
        for e in queue:
            for other, tri in sorted(links.get(e, []), key=lambda x: x[0]):
                if other not in prev:
                    prev[other] = (e, tri)
                    nxt.append(other)
        queue = nxt
    if e_to not in prev:
        raise NotSimple("cell surface subgraph is disconnected")
    path = [e_to]
    tris = []
    cur = e_to
    while prev[cur] is not None:
        back, tri = prev[cur]
        tris.append(tri)
        path.append(back)
        cur = back
    path.reverse()
    tris.reverse()
    return path, tris


def strip_for_path(graph: DualGraph, path_vertices: list[int],
                   path_edges: list[int], forbidden: np.ndarray) -> TriangleStrip:
    """Strip containing the given path's edges and avoiding the forbidden
    face edges; interior path vertices must be inner (cells)."""
    mask = np.asarray(forbidden, dtype=bool)

    def allowed(e: int) -> bool:
        return e >= graph.n_edges or not mask[e]

    for e in path_edges:
        if not allowed(e):
            raise ValueError("path edge inside the forbidden set")
    walk = [path_edges[0]]
    tris: list[tuple] = []
    for idx in range(1, len(path_edges)):
        pivot = path_vertices[idx]
        if graph.is_outer(pivot):
            raise ValueError("interior path vertex must be inner")
        seg, seg_tris = _surface_path(graph, pivot, path_edges[idx - 1],
                                      path_edges[idx], allowed)
        walk.extend(seg[1:])
        tris.extend(seg_tris)
    return TriangleStrip(walk, tris)


# --- closure constructor ----------------------------------------------------

def _components_of_edges(graph: DualGraph, edge_ids: list[int]) -> list[list[int]]:
    """Connected components of a face-edge set via shared vertices."""
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    touch: dict[int, int] = {}
    for e in edge_ids:
        parent[e] = e
        for v in graph.edge_endpoints(e):
            if v in touch:
                union(e, touch[v])
            else:
                touch[v] = e
    groups: dict[int, list[int]] = {}
    for e in edge_ids:
        groups.setdefault(find(e), []).append(e)
    return list(groups.values())


def _bfs_path(adj, start: int, goals: set[int]) -> list[int] | None:
    """Vertex path from start to the nearest goal over inner adjacency."""
    prev = {start: None}
    if start in goals:
        return [start]
    queue = [start]
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if v not in prev:
                    prev[v] = u
                    if v in goals:
                        path = [v]
                        while prev[path[-1]] is not None:
                            path.append(prev[path[-1]])
                        path.reverse()
                        return path
                    nxt.append(v)
        queue = nxt
    return None


def close_flux(graph: DualGraph, layers: LayerStructure, i: int,
               phi: np.ndarray) -> np.ndarray:
    """Replacement flux phi' inside the future region with the same inner
    boundary as phi (which must lie in Phi_i with charges on the interface).

    Per connected component: a spanning-tree tour pairs up the charged
    vertices, each pair is rejoined by a shortest future path, unbalanced
    total charge is routed to one or two facets, the paths are fused into a
    single triangle strip through cell surface graphs, and the strip is
    populated by the monopole sweep.
    """
    phi = np.asarray(phi, dtype=bool)
    phi_mask = layers.phi(i)
    if (phi & ~phi_mask).any():
        raise ValueError("input flux must lie inside Phi_i")
    bar_mask = ~phi_mask
    charge = boundary(graph, phi)
    adj_full = _full_adjacency(graph, bar_mask)
    for u in range(graph.n_inner):
        if charge[u] and not adj_full[u]:
            raise ValueError("charge support outside the future subgraph")

    result = np.zeros(graph.n_edges, dtype=bool)
    for comp in _components_of_edges(graph, list(np.nonzero(phi)[0])):
        comp_vertices = set()
        for e in comp:
            comp_vertices.update(graph.edge_endpoints(e))
        terminals = [v for v in sorted(comp_vertices)
                     if v < graph.n_inner and charge[v]]
        if not terminals:
            continue
        s = 0
        for v in terminals:
            s ^= int(charge[v])

        # order terminals along a tour of a spanning tree of the component
        order = _tour_order(graph, comp, terminals)

        paths = []  # vertex paths; outer vertices allowed as intermediates
        for a, b in zip(order, order[1:]):
            vp = _bfs_path(adj_full, a, {b})
            if vp is None:
                raise NoClosure("no future path between charged vertices")
            paths.append(vp)

        outer_charges: list[tuple[int, int]] = []
        if s:
            extra, outer_charges = _outer_routes(graph, adj_full, order[0], s)
            paths.extend(extra)
        try:
            strip = _fuse_paths(graph, paths, phi_mask)
            m = {v: int(charge[v]) for v in terminals}
            for extra_v, extra_c in outer_charges:
                m[extra_v] = m.get(extra_v, 0) ^ extra_c
            piece = strip_flux(graph, strip, m)
        except (NotSimple, InfeasibleCharge):
            # thin final layers can break the simpleness hypothesis of the
            # strip construction; monochrome strings still close the charge
            comp_charges = {v: int(charge[v]) for v in terminals}
            try:
                piece = _close_by_strings(graph, bar_mask, comp_charges)
            except NoClosure:
                # last resort at the very top of the region, where even the
                # single-type subgraphs disconnect: exact linear solve over
                # the future faces
                piece = _close_by_solve(graph, bar_mask, comp_charges)
        for e in piece:
            if e >= graph.n_edges:
                raise NoClosure("closure attempted to use a border edge")
            result[e] ^= True
    return result


def _close_by_strings(graph: DualGraph, bar_mask: np.ndarray,
                      charges: dict[int, int]) -> set[int]:
    """Close inner charges with strings of a single flux type.

    Every inner charge is a color pair p; edges carrying flux p form a
    subgraph in which a path transports p without residue, ending at a
    partner vertex with the same charge or at a facet (free charge).
    """
    by_flux: dict[int, list] = {}
    adj_cache: dict[int, list] = {}

    def adj_for(p: int):
        if p not in adj_cache:
            adj = [[] for _ in range(graph.n_vertices)]
            for e in np.nonzero(bar_mask)[0]:
                if graph.flux[e] == p:
                    u, v = graph.edges[e]
                    adj[u].append((int(e), int(v)))
                    adj[v].append((int(e), int(u)))
            adj_cache[p] = adj
        return adj_cache[p]

    live = {v: c for v, c in charges.items() if c}
    out: set[int] = set()
    while live:
        v = min(live)
        p = live[v]
        adj = adj_for(p)
        prev = {v: None}
        queue = [v]
        goal = None
        while queue and goal is None:
            nxt = []
            for u in queue:
                for e, w in adj[u]:
                    if w in prev:
                        continue
                    prev[w] = (u, e)
                    if w >= graph.n_inner or live.get(w) == p:
                        goal = w
                        break
                    nxt.append(w)
                if goal is not None:
                    break
            queue = nxt
        if goal is None:
            raise NoClosure("no monochrome string can absorb the charge")
        cur = goal
        while prev[cur] is not None:
            back, e = prev[cur]
            out.symmetric_difference_update({e})
            cur = back
        live.pop(v)
        if goal < graph.n_inner:
            live.pop(goal)
    return out


def _close_by_solve(graph: DualGraph, bar_mask: np.ndarray,
                    charges: dict[int, int]) -> set[int]:
    """Close inner charges by solving the boundary map over future faces.

    Four charge bits per inner vertex, one column per available face; any
    solution is a valid closure (facet charges are unconstrained).
    """
    cols = np.nonzero(bar_mask)[0]
    a = np.zeros((4 * graph.n_inner, cols.size), dtype=np.uint8)
    for j, e in enumerate(cols):
        f = int(graph.flux[e])
        for v in graph.edges[e]:
            if v < graph.n_inner:
                for b in range(4):
                    if f >> b & 1:
                        a[4 * int(v) + b, j] ^= 1
    b_vec = np.zeros(4 * graph.n_inner, dtype=np.uint8)
    for v, c in charges.items():
        for b in range(4):
            if c >> b & 1:
                b_vec[4 * v + b] = 1
    try:
        x = gf2.solve(a, b_vec)
    except gf2.NoSolution:
        raise NoClosure("charge has no closure in the future region") from None
    return {int(cols[j]) for j in np.nonzero(x)[0]}


def _tour_order(graph: DualGraph, comp: list[int], terminals: list[int]) -> list[int]:
    """Terminals ordered by first visit along a DFS tour of the component."""
    adj: dict[int, list[int]] = {}
    for e in comp:
        u, v = graph.edge_endpoints(e)
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    start = terminals[0]
    seen = {start}
    order = []
    stack = [start]
    while stack:
        u = stack.pop()
        if u in terminals and u not in order:
            order.append(u)
        for v in sorted(adj.get(u, []), reverse=True):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    for t in terminals:
        if t not in order:
            order.append(t)
    return order


def _outer_routes(graph: DualGraph, adj_full, v0: int, s: int):
    """Paths from v0 to one or two facets absorbing the unbalanced charge s.

    Single facet when s is in M_kappa for a reachable color kappa; otherwise
    two facets of different colors share the charge (M = M_k M_k').

    Returns (vertex paths, outer charge assignments)."""
    routes = {}
    for kappa in range(4):
        vp = _bfs_path(adj_full, v0, {graph.n_inner + kappa})
        if vp is not None:
            routes[kappa] = vp
    single = sorted((len(vp) - 1, kappa) for kappa, vp in routes.items()
                    if in_m_kappa(s, kappa))
    doubles = sorted((len(routes[ka]) + len(routes[kb]) - 2, ka, kb)
                     for ka in routes for kb in routes if ka < kb)
    if single and (not doubles or single[0][0] <= doubles[0][0]):
        _, kappa = single[0]
        return [routes[kappa]], [(graph.n_inner + kappa, s)]
    if doubles:
        _, ka, kb = doubles[0]
        ma = next(v for v in sorted(M_KAPPA[ka]) if v and in_m_kappa(v ^ s, kb))
        return ([routes[ka], routes[kb]],
                [(graph.n_inner + ka, ma), (graph.n_inner + kb, ma ^ s)])
    raise NoClosure("no facet reachable for unbalanced charge")


def _fuse_paths(graph: DualGraph, paths, phi_mask) -> TriangleStrip:
    """One covering strip whose triangles are the union over the per-path
    strips: nodes are edges, links are surface-path triangles; a DFS with
    doubled links yields the walk. Border edges are kept out so the flux
    sweep can only ever toggle face edges."""
    mask = np.asarray(phi_mask, dtype=bool)

    def allowed(e: int) -> bool:
        return e < graph.n_edges and not mask[e]

    adj_e = [[] for _ in range(graph.n_vertices)]
    for e in range(graph.n_edges):
        if allowed(e):
            u, v = graph.edges[e]
            adj_e[u].append((e, int(v)))
            adj_e[v].append((e, int(u)))

    def edge_between(a, b):
        return min(e for e, w in adj_e[a] if w == b)

    norm = []
    for vp in paths:
        ep = [edge_between(vp[t], vp[t + 1]) for t in range(len(vp) - 1)]
        norm.append((vp, ep))

    # meta graph over edge nodes
    links: dict[int, list[tuple[int, tuple]]] = {}

    def add_link(a, b, tri):
        links.setdefault(a, []).append((b, tri))
        links.setdefault(b, []).append((a, tri))

    def connect(pivot, e_from, e_to):
        seg, seg_tris = _surface_path(graph, pivot, e_from, e_to, allowed)
        for t in range(len(seg_tris)):
            add_link(seg[t], seg[t + 1], seg_tris[t])

    all_nodes = []
    for vp, ep in norm:
        for e in ep:
            links.setdefault(e, [])
            all_nodes.append(e)
        for t in range(1, len(ep)):
            connect(vp[t], ep[t - 1], ep[t])
    # join consecutive paths at shared vertices
    for a in range(1, len(norm)):
        vp_prev, ep_prev = norm[a - 1]
        vp_cur, ep_cur = norm[a]
        shared = None
        for v in vp_cur[:1] + vp_cur[-1:]:
            if v in (vp_prev[0], vp_prev[-1]) and not graph.is_outer(v):
                shared = v
                break
        if shared is None:
            # fall back: first path vertex also on an earlier path
            prev_vs = set()
            for vp_e, _ in norm[:a]:
                prev_vs.update(vp_e)
            shared = next(v for v in vp_cur if v in prev_vs
                          and not graph.is_outer(v))
        e_prev = _edge_at(norm[: a], shared)
        e_cur = _edge_at([norm[a]], shared)
        connect(shared, e_prev, e_cur)

    if not all_nodes:
        raise ValueError("cannot fuse empty path collection")
    # DFS walk doubling each tree link
    start = all_nodes[0]
    visited = {start}
    walk = [start]
    tris: list[tuple] = []

    def dfs(node):
        for other, tri in sorted(links.get(node, []), key=lambda x: x[0]):
            if other not in visited:
                visited.add(other)
                walk.append(other)
                tris.append(tri)
                dfs(other)
                walk.append(node)
                tris.append(tri)

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10000))
    try:
        dfs(start)
    finally:
        sys.setrecursionlimit(old)
    missing = [n for n in all_nodes if n not in visited]
    if missing:
        raise NoClosure("fused strip is disconnected")
    return TriangleStrip(walk, tris)


def _edge_at(norm_paths, v: int) -> int:
    for vp, ep in norm_paths:
        for t, e in enumerate(ep):
            if v in (vp[t], vp[t + 1]):
                return e
    raise KeyError(v)


# --- serialization ----------------------------------------------------------

SERIALIZATION_VERSION = 1


def to_json(graph: DualGraph, layers: LayerStructure | None = None) -> str:
    doc = {
        "version": SERIALIZATION_VERSION,
        "inner": [
            {"id": i, "color": COLOR_NAMES[graph.inner_color[i]],
             "pos": [int(x) for x in graph.inner_pos[i]]}
            for i in range(graph.n_inner)
        ],
        "outer": [
            {"id": graph.n_inner + f, "color": COLOR_NAMES[graph.outer_color[f]]}
            for f in range(graph.n_outer)
        ],
        "edges": [
            {"id": e, "ends": [int(graph.edges[e, 0]), int(graph.edges[e, 1])],
             "flux": int(graph.flux[e])}
            for e in range(graph.n_edges)
        ],
        "border_edges": [[int(u), int(v)] for u, v in graph.border_edges],
        "triangles": [
            {"vertices": [int(v) for v in vids], "edges": [int(e) for e in eids]}
            for vids, eids in graph.triangles
        ],
        "qubits": [[int(v) for v in row] for row in graph.qubit_vertices],
        "face_qubits": [[int(q) for q in qs] for qs in graph.face_qubits],
    }
    if layers is not None:
        doc["cell_layer"] = [int(x) for x in layers.cell_layer]
    return json.dumps(doc, indent=1, sort_keys=True)


def from_json(text: str) -> tuple[DualGraph, LayerStructure | None]:
    doc = json.loads(text)
    if doc.get("version") != SERIALIZATION_VERSION:
        raise ValueError("unsupported lattice format version")
    color_idx = {c: i for i, c in enumerate(COLOR_NAMES)}
    inner = doc["inner"]
    graph = DualGraph(
        inner_color=np.array([color_idx[r["color"]] for r in inner], dtype=np.uint8),
        inner_pos=np.array([r["pos"] for r in inner], dtype=np.int64).reshape(-1, 3),
        outer_color=np.array([color_idx[r["color"]] for r in doc["outer"]],
                             dtype=np.uint8),
        edges=np.array([r["ends"] for r in doc["edges"]], dtype=np.int64).reshape(-1, 2),
        flux=np.array([r["flux"] for r in doc["edges"]], dtype=np.uint8),
        border_edges=np.array(doc["border_edges"], dtype=np.int64).reshape(-1, 2),
        triangles=[(tuple(r["vertices"]), tuple(r["edges"]))
                   for r in doc["triangles"]],
        qubit_vertices=np.array(doc["qubits"], dtype=np.int64).reshape(-1, 4),
        face_qubits=[list(qs) for qs in doc["face_qubits"]],
    )
    layers = None
    if "cell_layer" in doc:
        layers = LayerStructure(graph, np.array(doc["cell_layer"], dtype=np.int64))
    return graph, layers
