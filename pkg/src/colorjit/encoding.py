"""Resource-graph assembly and Pauli-frame bookkeeping.

A logical graph (one lattice block per logical qubit, one entangling gate
per edge) is realized by gluing blocks along matched facets. The classical
pipeline tracks a Pauli frame per block, propagates its Z component across
the gluing gates, checks measurement-order constraints, and turns corrected
code-qubit outcomes into logical bits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import colex, gf2

BASES = ("X", "Y", "Z", "X+Y", "X-Y")
DIAGONAL_BASES = ("X+Y", "X-Y")


class FacetMismatch(Exception):
    """Linked facets differ in geometry."""


@dataclass
class LogicalGraph:
    """Logical qubits with entangling edges and a measurement basis each."""

    vertices: list
    edges: list
    basis: dict

    def __post_init__(self):
        names = set(self.vertices)
        if len(names) != len(self.vertices):
            raise ValueError("duplicate vertex names")
        for u, v in self.edges:
            if u not in names or v not in names or u == v:
                raise ValueError(f"bad edge ({u}, {v})")
        for v in self.vertices:
            b = self.basis.get(v)
            if b not in BASES:
                raise ValueError(f"vertex {v} has invalid basis {b!r}")

    def degree(self, v) -> int:
        return sum(v in e for e in self.edges)

    @classmethod
    def from_text(cls, text: str) -> "LogicalGraph":
        """Adjacency-list format: one `name basis: neighbor ...` per line;
        blank lines and # comments ignored; each edge may appear on either
        or both endpoint lines."""
        vertices, basis, edges = [], {}, set()
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, _, tail = line.partition(":")
            parts = head.split()
            if len(parts) != 2:
                raise ValueError(f"bad line: {raw!r}")
            name, b = parts
            vertices.append(name)
            basis[name] = b
            for other in tail.split():
                edges.add((min(name, other), max(name, other)))
        for u, v in edges:
            if u not in basis or v not in basis:
                raise ValueError(f"edge ({u}, {v}) references unknown vertex")
        return cls(vertices=vertices, edges=sorted(edges), basis=basis)

    def to_text(self) -> str:
        by_vertex: dict = {v: [] for v in self.vertices}
        for u, v in self.edges:
            by_vertex[u].append(v)
        lines = [f"{v} {self.basis[v]}: {' '.join(sorted(by_vertex[v]))}".rstrip()
                 for v in self.vertices]
        return "\n".join(lines) + "\n"


@dataclass
class PauliFrame:
    """Per-block X and Z frame masks over code qubits."""

    f_x: dict
    f_z: dict


@dataclass
class ResourceGraph:
    """One lattice block per logical vertex, glued along matched facets.

    outer_edges lists matched code qubit pairs ((block, qubit), (block,
    qubit)); matching maps the logical edge to its facet color and pair
    list. All blocks share one geometry.
    """

    logical: LogicalGraph
    graph: colex.DualGraph
    facet_color: dict
    outer_edges: list
    matching: dict = field(default_factory=dict)

    @property
    def n_blocks(self) -> int:
        return len(self.logical.vertices)

    def block_index(self, name) -> int:
        return self.logical.vertices.index(name)

    def neighbors(self, name) -> list:
        return sorted({v if u == name else u
                       for u, v in self.logical.edges if name in (u, v)})


def facet_qubits(graph: colex.DualGraph, kappa: int) -> list[int]:
    """Code qubits on the facet of one color, in canonical (id) order."""
    ov = graph.n_inner + kappa
    return [q for q in range(graph.n_qubits)
            if ov in graph.qubit_vertices[q]]


def _color_edges(lg: LogicalGraph) -> dict:
    """Proper 4-edge-coloring by backtracking; both endpoints of a logical
    edge use the facet of the same color, and no block reuses a facet."""
    for v in lg.vertices:
        if lg.degree(v) > 4:
            raise ValueError(f"vertex {v} exceeds the 4-facet budget")
    edges = sorted(lg.edges)
    used: dict = {v: set() for v in lg.vertices}
    colors: dict = {}

    def assign(idx: int) -> bool:
        if idx == len(edges):
            return True
        u, v = edges[idx]
        for k in range(4):
            if k in used[u] or k in used[v]:
                continue
            colors[edges[idx]] = k
            used[u].add(k)
            used[v].add(k)
            if assign(idx + 1):
                return True
            used[u].discard(k)
            used[v].discard(k)
            del colors[edges[idx]]
        return False

    if not assign(0):
        raise ValueError("no facet assignment exists for this logical graph")
    return colors


def build_resource_graph(lg: LogicalGraph, family: str = "slab", d: int = 2,
                         **kwargs) -> ResourceGraph:
    """Assemble the glued-block graph for a logical graph.

    Every block gets the same geometry, so matched facets carry identical
    qubit sets and the gluing bijection is the identity on canonical facet
    order. Bulk ancillas must be 4- or 6-valent.
    """
    graph, _ = colex.build_lattice(family, d=d, **kwargs)
    for e in range(graph.n_edges):
        u, v = graph.edges[e]
        if u < graph.n_inner and v < graph.n_inner:
            if len(graph.face_qubits[e]) not in (4, 6):
                raise ValueError("bulk ancilla valence outside {4, 6}")
    colors = _color_edges(lg)
    outer_edges = []
    matching: dict = {}
    for (u, v), k in sorted(colors.items()):
        qa = facet_qubits(graph, k)
        qb = facet_qubits(graph, k)
        if len(qa) != len(qb) or qa != qb:
            raise FacetMismatch(f"facet {k} differs between {u} and {v}")
        bu, bv = lg.vertices.index(u), lg.vertices.index(v)
        pairs = [((bu, a), (bv, b)) for a, b in zip(qa, qb)]
        outer_edges.extend(pairs)
        matching[(u, v)] = {"color": k, "pairs": pairs}
    return ResourceGraph(logical=lg, graph=graph, facet_color=colors,
                         outer_edges=outer_edges, matching=matching)


def check_facet_compatibility(graph_a: colex.DualGraph, kappa_a: int,
                              graph_b: colex.DualGraph, kappa_b: int) -> None:
    """Raise FacetMismatch unless two facets can be glued one-to-one."""
    qa = facet_qubits(graph_a, kappa_a)
    qb = facet_qubits(graph_b, kappa_b)
    if len(qa) != len(qb):
        raise FacetMismatch(
            f"facet sizes differ: {len(qa)} vs {len(qb)}")
    key_a = sorted(tuple(sorted(int(x) for x in graph_a.qubit_vertices[q]))
                   for q in qa)
    key_b = sorted(tuple(sorted(int(x) for x in graph_b.qubit_vertices[q]))
                   for q in qb)
    if key_a != key_b:
        raise FacetMismatch("facet incidence structures differ")


# --- Pauli frame ------------------------------------------------------------

def frame_from_ancillas(graph: colex.DualGraph,
                        phi_hat: np.ndarray) -> np.ndarray:
    """Any X mask whose face syndrome equals the corrected syndrome.

    The choice among valid masks is immaterial downstream; infeasible
    syndromes raise.
    """
    hz = graph.z_checks()
    try:
        x = gf2.solve(hz, np.asarray(phi_hat, dtype=np.uint8))
    except gf2.NoSolution:
        raise gf2.InfeasibleSyndrome(
            "corrected syndrome is not a code syndrome") from None
    return x.astype(bool)


def propagate_frame(rg: ResourceGraph, f_x: dict) -> dict:
    """Z component acquired by X frames through the gluing gates.

    A qubit picks up Z exactly when an odd number of its matched partners
    carry X.
    """
    nq = rg.graph.n_qubits
    f_z = {v: np.zeros(nq, dtype=bool) for v in rg.logical.vertices}
    names = rg.logical.vertices
    for (ba, qa), (bb, qb) in rg.outer_edges:
        if f_x[names[ba]][qa]:
            f_z[names[bb]][qb] ^= True
        if f_x[names[bb]][qb]:
            f_z[names[ba]][qa] ^= True
    return f_z


def cp_adjacency(rg: ResourceGraph) -> np.ndarray:
    """Symmetric gate adjacency over all code qubits, blocks flattened."""
    nq = rg.graph.n_qubits
    n = rg.n_blocks * nq
    adj = np.zeros((n, n), dtype=np.uint8)
    for (ba, qa), (bb, qb) in rg.outer_edges:
        i, j = ba * nq + qa, bb * nq + qb
        adj[i, j] ^= 1
        adj[j, i] ^= 1
    return adj


# --- scheduling -------------------------------------------------------------

def three_d_schedule(rg: ResourceGraph) -> dict:
    """All ancillas everywhere, then all code qubits."""
    order = {}
    for b in range(rg.n_blocks):
        for e in range(rg.graph.n_edges):
            order[("ancilla", b, e)] = 0
        for q in range(rg.graph.n_qubits):
            order[("code", b, q)] = 1
    return order


def jit_layered_schedule(rg: ResourceGraph,
                         layers: colex.LayerStructure) -> dict:
    """Ancillas by layer; each code qubit right after its last face."""
    edge_layer = np.zeros(rg.graph.n_edges, dtype=np.int64)
    for i in range(1, layers.n_layers + 1):
        edge_layer[layers.lam(i)] = i
    order = {}
    for b in range(rg.n_blocks):
        for e in range(rg.graph.n_edges):
            order[("ancilla", b, e)] = 2 * int(edge_layer[e])
        for q in range(rg.graph.n_qubits):
            faces = [e for e in range(rg.graph.n_edges)
                     if q in rg.graph.face_qubits[e]]
            t = max((int(edge_layer[e]) for e in faces), default=0)
            order[("code", b, q)] = 2 * t + 1
    return order


def schedule_check(rg: ResourceGraph, order: dict,
                   relaxed: bool = False) -> dict:
    """Measurement-order constraints and logical-outcome dependencies.

    Blocks measured in a diagonal basis need their ancilla outcomes before
    the code qubits (strictly all-before-all; with relaxed=True each code
    qubit only waits for the ancillas of its own faces, the layer-committed
    variant). The dependency report lists, per block, which measurements
    the logical outcome needs: its code qubits always, its own ancillas
    except for logical X, the neighbors' ancillas except for logical Z.
    """
    g = rg.graph
    names = rg.logical.vertices
    blocks = []
    passed = True
    for b, name in enumerate(names):
        basis = rg.logical.basis[name]
        entry = {"block": name, "basis": basis, "violations": [],
                 "missing": 0}
        anc = [order.get(("ancilla", b, e)) for e in range(g.n_edges)]
        code = [order.get(("code", b, q)) for q in range(g.n_qubits)]
        entry["missing"] = anc.count(None) + code.count(None)
        if basis in DIAGONAL_BASES and entry["missing"] == 0:
            if relaxed:
                for e in range(g.n_edges):
                    for q in g.face_qubits[e]:
                        if code[q] <= anc[e]:
                            entry["violations"].append(("code", q, "face", e))
            else:
                worst_anc = max(anc)
                for q in range(g.n_qubits):
                    if code[q] <= worst_anc:
                        entry["violations"].append(("code", q))
        needs = {"code": name, "own_ancillas": basis != "X",
                 "neighbor_ancillas": {n: rg.logical.basis[name] != "Z"
                                       for n in rg.neighbors(name)}}
        entry["dependencies"] = needs
        if entry["violations"] or entry["missing"]:
            passed = False
        blocks.append(entry)
    return {"blocks": blocks, "passed": passed}


# --- measurement bases and outcomes -----------------------------------------

def baseline_pattern(graph: colex.DualGraph, logical_basis: str) -> np.ndarray:
    """Shipped per-qubit diagonal-basis labeling (0 for X+Y, 1 for X-Y).

    The exact pattern is block data, not derived here; the two logical
    bases use complementary labelings.
    """
    if logical_basis not in DIAGONAL_BASES:
        raise ValueError("logical basis must be diagonal")
    base = (np.arange(graph.n_qubits) % 2).astype(np.uint8)
    return base if logical_basis == "X+Y" else base ^ 1


def basis_assignment(graph: colex.DualGraph, f_x: np.ndarray,
                     logical_basis: str) -> np.ndarray:
    """Per-code-qubit diagonal basis: the baseline pattern flipped on the
    committed X-frame support (X conjugation swaps the two bases)."""
    base = baseline_pattern(graph, logical_basis)
    return base ^ np.asarray(f_x, dtype=np.uint8)


def logical_representative(graph: colex.DualGraph, basis: str) -> np.ndarray:
    """Support of one logical operator of the requested type."""
    hx = graph.x_checks()
    hz = graph.z_checks()
    if basis == "X":
        commute, stab = hz, hx
    elif basis == "Z":
        commute, stab = hx, hz
    else:
        raise ValueError("basis must be X or Z")
    for vec in gf2.nullspace(commute):
        if not gf2.row_space_contains(stab, vec):
            return vec.astype(bool)
    raise ValueError("no logical operator found")


def logical_outcome_pauli(graph: colex.DualGraph, basis: str,
                          outcomes: np.ndarray, frame: PauliFrame,
                          block) -> int:
    """Logical bit from code-qubit outcomes plus the frame correction.

    X needs the Z frame component; Z needs the X component.
    """
    rep = logical_representative(graph, basis)
    out = np.asarray(outcomes, dtype=bool)
    comp = frame.f_z[block] if basis == "X" else frame.f_x[block]
    return int((out & rep).sum() + (np.asarray(comp, bool) & rep).sum()) % 2


# --- serialization ----------------------------------------------------------

RESOURCE_VERSION = 1


def resource_to_json(rg: ResourceGraph) -> str:
    doc = {
        "version": RESOURCE_VERSION,
        "block": json.loads(colex.to_json(rg.graph)),
        "logical": rg.logical.to_text(),
        "facet_colors": [[list(e), k] for e, k in sorted(rg.facet_color.items())],
        "outer_edges": [[list(a), list(b)] for a, b in rg.outer_edges],
    }
    return json.dumps(doc)


def resource_from_json(text: str) -> ResourceGraph:
    doc = json.loads(text)
    if doc.get("version") != RESOURCE_VERSION:
        raise ValueError("unsupported resource graph version")
    lg = LogicalGraph.from_text(doc["logical"])
    graph, _ = colex.from_json(json.dumps(doc["block"]))
    facet_color = {tuple(e): k for e, k in doc["facet_colors"]}
    outer = [(tuple(a), tuple(b)) for a, b in doc["outer_edges"]]
    rg = ResourceGraph(logical=lg, graph=graph, facet_color=facet_color,
                       outer_edges=outer, matching={})
    names = lg.vertices
    for (u, v), k in facet_color.items():
        bu, bv = names.index(u), names.index(v)
        rg.matching[(u, v)] = {
            "color": k,
            "pairs": [p for p in outer if p[0][0] == bu and p[1][0] == bv]}
    return rg
