"""Z2 charge decoders on syndrome graphs.

A chain is an edge subset; its defects are the inner vertices with odd
incidence. Outer vertices absorb charge for free. Decoding finds a
minimum-weight chain with prescribed defects, either by exact matching over
shortest-path tables (production) or by exhaustive search (oracle). Layered
variants decode the past region with a free interface (open), the future
region with the interface constrained (closed), and compose the two into the
closure decoder used by just-in-time decoding.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import colex


math_inf = float("inf")


class NoMatch(Exception):
    """The prescribed defects admit no chain in the given subgraph."""


@dataclass
class SyndromeGraph:
    """Weighted graph with inner (check) and outer (absorbing) vertices."""

    is_outer: np.ndarray       # (n,) bool
    edges: np.ndarray          # (m, 2) vertex ids
    weights: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.is_outer = np.asarray(self.is_outer, dtype=bool)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.weights is None:
            self.weights = np.ones(self.edges.shape[0], dtype=float)
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if (self.weights < 0).any():
                raise ValueError("edge weights must be nonnegative")

    @property
    def n_vertices(self) -> int:
        return self.is_outer.size

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @classmethod
    def from_dual(cls, graph: colex.DualGraph,
                  extra_outer: np.ndarray | None = None,
                  weights: np.ndarray | None = None) -> SyndromeGraph:
        """Z2 reduction of a dual lattice: cells are checks, facets absorb.

        extra_outer marks additional inner vertices as absorbing (used for
        the free interface of the open layered decoder).
        """
        is_outer = np.zeros(graph.n_vertices, dtype=bool)
        is_outer[graph.n_inner:] = True
        if extra_outer is not None:
            is_outer |= np.asarray(extra_outer, dtype=bool)
        return cls(is_outer=is_outer, edges=graph.edges, weights=weights)

    # shortest-path plumbing -------------------------------------------------

    def _compiled(self, edge_mask: np.ndarray | None):
        key = None if edge_mask is None else np.nonzero(edge_mask)[0].tobytes()
        if key not in self._cache:
            ids = (np.arange(self.n_edges) if edge_mask is None
                   else np.nonzero(edge_mask)[0])
            best: dict[tuple[int, int], int] = {}
            for e in ids:
                u, v = int(self.edges[e, 0]), int(self.edges[e, 1])
                k = (u, v) if u < v else (v, u)
                if k not in best or self.weights[e] < self.weights[best[k]]:
                    best[k] = int(e)
            rows, cols, data = [], [], []
            for (u, v), e in best.items():
                rows += [u, v]
                cols += [v, u]
                data += [self.weights[e]] * 2
            mat = csr_matrix((data, (rows, cols)),
                             shape=(self.n_vertices, self.n_vertices))
            self._cache[key] = (mat, best)
        return self._cache[key]

    def edge_between(self, u: int, v: int,
                     edge_mask: np.ndarray | None = None) -> int:
        _, best = self._compiled(edge_mask)
        k = (u, v) if u < v else (v, u)
        return best[k]


def syndrome_of(g: SyndromeGraph, chain: np.ndarray) -> np.ndarray:
    """Inner vertices incident to an odd number of chain edges."""
    chain = np.asarray(chain, dtype=bool)
    ends = g.edges[np.nonzero(chain)[0]].ravel()
    deg = np.bincount(ends, minlength=g.n_vertices)
    return (deg % 2 == 1) & ~g.is_outer


def _paths_from(g: SyndromeGraph, edge_mask, sources: list[int]):
    mat, _ = g._compiled(edge_mask)
    if not sources:
        n = g.n_vertices
        return np.zeros((0, n)), np.zeros((0, n), dtype=np.int32)
    dist, pred = dijkstra(mat, directed=False, indices=sources,
                          return_predecessors=True)
    return np.atleast_2d(dist), np.atleast_2d(pred)


def _walk(g: SyndromeGraph, edge_mask, pred_row, source: int,
          target: int) -> list[int]:
    out = []
    cur = target
    while cur != source:
        back = int(pred_row[cur])
        if back < 0:
            raise NoMatch("no path between matched defects")
        out.append(g.edge_between(back, cur, edge_mask))
        cur = back
    return out


def _chain_from_pairs(g, edge_mask, defects, dist, pred, outer_ids, pairs,
                      absorbed) -> np.ndarray:
    chain = np.zeros(g.n_edges, dtype=bool)
    for a, b in pairs:
        for e in _walk(g, edge_mask, pred[a], defects[a], defects[b]):
            chain[e] ^= True
    for a in absorbed:
        t = outer_ids[int(np.argmin(dist[a, outer_ids]))]
        for e in _walk(g, edge_mask, pred[a], defects[a], int(t)):
            chain[e] ^= True
    return chain


def mwpm_decode(g: SyndromeGraph, sigma: np.ndarray,
                edge_mask: np.ndarray | None = None) -> np.ndarray:
    """Minimum-weight chain with the given defects via perfect matching.

    Defects are matched pairwise or to a per-defect virtual boundary partner
    (nearest outer vertex); unmatched partners pair off at zero weight.
    """
    sigma = np.asarray(sigma, dtype=bool)
    if (sigma & g.is_outer).any():
        raise ValueError("defects must be inner vertices")
    defects = [int(v) for v in np.nonzero(sigma)[0]]
    if not defects:
        return np.zeros(g.n_edges, dtype=bool)
    dist, pred = _paths_from(g, edge_mask, defects)
    outer_ids = np.nonzero(g.is_outer)[0]

    graph = nx.Graph()
    t = len(defects)
    for a in range(t):
        graph.add_node(("d", a))
        graph.add_node(("b", a))
    for a, b in combinations(range(t), 2):
        if np.isfinite(dist[a, defects[b]]):
            graph.add_edge(("d", a), ("d", b), weight=float(dist[a, defects[b]]))
        graph.add_edge(("b", a), ("b", b), weight=0.0)
    bdist = {}
    for a in range(t):
        if outer_ids.size:
            j = int(np.argmin(dist[a, outer_ids]))
            if np.isfinite(dist[a, outer_ids[j]]):
                bdist[a] = float(dist[a, outer_ids[j]])
                graph.add_edge(("d", a), ("b", a), weight=bdist[a])
    match = nx.min_weight_matching(graph)
    mate = {}
    for x, y in match:
        mate[x] = y
        mate[y] = x
    pairs, absorbed = [], []
    for a in range(t):
        partner = mate.get(("d", a))
        if partner is None:
            raise NoMatch("defect cannot be matched")
        if partner[0] == "b":
            absorbed.append(a)
        elif partner[1] > a:
            pairs.append((a, partner[1]))
    return _chain_from_pairs(g, edge_mask, defects, dist, pred, outer_ids,
                             pairs, absorbed)


def _min_pairing(t: int, cost) -> tuple[float, list]:
    """Exhaustive minimum-cost structure over t defects: every defect is
    either absorbed (cost[a][a]) or paired (cost[a][b])."""
    best = [math_inf, None]

    def rec(remaining: tuple, acc: float, plan: list):
        if acc >= best[0]:
            return
        if not remaining:
            best[0] = acc
            best[1] = list(plan)
            return
        a = remaining[0]
        rest = remaining[1:]
        c = cost[a][a]
        if c < math_inf:
            plan.append((a,))
            rec(rest, acc + c, plan)
            plan.pop()
        for idx, b in enumerate(rest):
            c = cost[a][b]
            if c < math_inf:
                plan.append((a, b))
                rec(rest[:idx] + rest[idx + 1:], acc + c, plan)
                plan.pop()

    rec(tuple(range(t)), 0.0, [])
    return best[0], best[1]


def bruteforce_decode(g: SyndromeGraph, sigma: np.ndarray,
                      edge_mask: np.ndarray | None = None) -> np.ndarray:
    """Global minimum-weight chain, the test oracle.

    Small subgraphs are searched edge-subset by edge-subset; larger ones by
    exhaustive enumeration of defect pairings/absorptions over exact
    shortest-path tables.
    """
    sigma = np.asarray(sigma, dtype=bool)
    ids = (np.arange(g.n_edges) if edge_mask is None
           else np.nonzero(edge_mask)[0])
    if ids.size <= 16:
        return _bruteforce_subsets(g, sigma, ids)
    defects = [int(v) for v in np.nonzero(sigma)[0]]
    if not defects:
        return np.zeros(g.n_edges, dtype=bool)
    if len(defects) > 10:
        raise ValueError("oracle limited to 10 defects on large graphs")
    dist, pred = _paths_from(g, edge_mask, defects)
    outer_ids = np.nonzero(g.is_outer)[0]
    t = len(defects)
    cost = [[math_inf] * t for _ in range(t)]
    for a in range(t):
        if outer_ids.size:
            cost[a][a] = float(dist[a, outer_ids].min())
        for b in range(t):
            if b != a:
                cost[a][b] = float(dist[a, defects[b]])
    total, plan = _min_pairing(t, cost)
    if plan is None:
        raise NoMatch("defects cannot be absorbed")
    pairs = [p for p in plan if len(p) == 2]
    absorbed = [p[0] for p in plan if len(p) == 1]
    return _chain_from_pairs(g, edge_mask, defects, dist, pred, outer_ids,
                             pairs, absorbed)


def _bruteforce_subsets(g: SyndromeGraph, sigma: np.ndarray,
                        ids: np.ndarray) -> np.ndarray:
    m = ids.size
    inner = np.nonzero(~g.is_outer)[0]
    inc = np.zeros((inner.size, m), dtype=np.uint8)
    pos = {int(v): i for i, v in enumerate(inner)}
    for j, e in enumerate(ids):
        for v in g.edges[e]:
            if int(v) in pos:
                inc[pos[int(v)], j] ^= 1
    target = sigma[inner].astype(np.uint8)
    subsets = ((np.arange(1 << m)[:, None] >> np.arange(m)) & 1).astype(np.uint8)
    par = (subsets @ inc.T) % 2
    feasible = np.nonzero((par == target).all(axis=1))[0]
    if feasible.size == 0:
        raise NoMatch("defects cannot be absorbed")
    w = subsets[feasible] @ g.weights[ids]
    pick = subsets[feasible[int(np.argmin(w))]]
    chain = np.zeros(g.n_edges, dtype=bool)
    chain[ids[pick.astype(bool)]] = True
    return chain


# --- quality metrics --------------------------------------------------------

def component_ratios(g: SyndromeGraph, omega: np.ndarray,
                     estimate: np.ndarray) -> list[tuple[int, int]]:
    """Per connected component of omega ∪ estimate: (component size,
    overlap with omega). The decoder's minimization constant is the largest
    size/overlap ratio observed over a sweep."""
    union = np.asarray(omega, dtype=bool) | np.asarray(estimate, dtype=bool)
    out = []
    for comp in _edge_components(g, np.nonzero(union)[0]):
        size = len(comp)
        overlap = sum(1 for e in comp if omega[e])
        out.append((size, overlap))
    return out


def _edge_components(g: SyndromeGraph, edge_ids) -> list[list[int]]:
    parent: dict[int, int] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    touch: dict[int, int] = {}
    for e in edge_ids:
        e = int(e)
        parent[e] = e
        for v in g.edges[e]:
            v = int(v)
            if v in touch:
                ra, rb = find(e), find(touch[v])
                if ra != rb:
                    parent[ra] = rb
            else:
                touch[v] = e
    groups: dict[int, list[int]] = {}
    for e in edge_ids:
        e = int(e)
        groups.setdefault(find(e), []).append(e)
    return list(groups.values())


# --- layered decoders -------------------------------------------------------

class LayeredDecoder:
    """Open/closed/estimated/closure decoders over a layer structure."""

    def __init__(self, graph: colex.DualGraph, layers: colex.LayerStructure,
                 method: str = "mwpm", weights: np.ndarray | None = None):
        if method not in ("mwpm", "bruteforce"):
            raise ValueError(f"unknown decoding method: {method!r}")
        self.graph = graph
        self.layers = layers
        self.method = method
        self.weights = weights
        self._open: dict[int, SyndromeGraph] = {}
        self._closed: dict[int, SyndromeGraph] = {}
        self.full = SyndromeGraph.from_dual(graph, weights=weights)

    def _decode(self, g, sigma, edge_mask):
        if self.method == "bruteforce":
            return bruteforce_decode(g, sigma, edge_mask)
        return mwpm_decode(g, sigma, edge_mask)

    def open_graph(self, i: int) -> SyndromeGraph:
        if i not in self._open:
            inter = np.zeros(self.graph.n_vertices, dtype=bool)
            inter[: self.graph.n_inner] = ~self.layers.cells(i)
            self._open[i] = SyndromeGraph.from_dual(
                self.graph, extra_outer=inter, weights=self.weights)
        return self._open[i]

    def closed_graph(self, i: int) -> SyndromeGraph:
        if i not in self._closed:
            self._closed[i] = SyndromeGraph.from_dual(
                self.graph, weights=self.weights)
        return self._closed[i]

    def open_decode(self, i: int, omega: np.ndarray) -> np.ndarray:
        """Decode on the past region with free absorption at the interface."""
        omega = np.asarray(omega, dtype=bool)
        mask = self.layers.phi(i)
        if (omega & ~mask).any():
            raise ValueError("chain must lie in the past region")
        g = self.open_graph(i)
        return self._decode(g, syndrome_of(g, omega), mask)

    def closed_decode(self, i: int, omega: np.ndarray) -> np.ndarray:
        """Decode on the future region with the interface constrained."""
        omega = np.asarray(omega, dtype=bool)
        mask = ~self.layers.phi(i)
        if (omega & ~mask).any():
            raise ValueError("chain must lie in the future region")
        g = self.closed_graph(i)
        return self._decode(g, syndrome_of(g, omega), mask)

    def estimated_error(self, i: int, phi: np.ndarray) -> np.ndarray:
        """Future-region chain with the same defects as phi."""
        g = self.closed_graph(i)
        sigma = syndrome_of(g, np.asarray(phi, dtype=bool))
        return self._decode(g, sigma, ~self.layers.phi(i))

    def closure_decode(self, i: int, phi: np.ndarray) -> np.ndarray:
        """Project onto the code by a modification confined to the future."""
        phi = np.asarray(phi, dtype=bool)
        return phi ^ self.estimated_error(i, phi)


# --- instance serialization -------------------------------------------------

INSTANCE_VERSION = 1


def instance_to_json(label: str, sigma: np.ndarray, chain: np.ndarray) -> str:
    return json.dumps({
        "version": INSTANCE_VERSION,
        "graph": label,
        "defects": [int(v) for v in np.nonzero(np.asarray(sigma, bool))[0]],
        "chain": [int(e) for e in np.nonzero(np.asarray(chain, bool))[0]],
    }, indent=None, sort_keys=True)


def instance_from_json(text: str) -> tuple[str, list[int], list[int]]:
    doc = json.loads(text)
    if doc.get("version") != INSTANCE_VERSION:
        raise ValueError("unsupported instance format version")
    return doc["graph"], doc["defects"], doc["chain"]
