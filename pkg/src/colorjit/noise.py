"""Local noise models and ball machinery.

Independent edge noise, conversion of clustered errors into covering balls
(spherification), merging of overlapping balls (aggregation), growth-rate
measurement for connected edge subsets, and an empirical tail check of the
ball containment probability bound.
"""
from __future__ import annotations

import io
import csv
from dataclasses import dataclass

import numpy as np

from . import colex


@dataclass(frozen=True)
class Ball:
    """A vertex together with an integer radius; stands for the induced
    edge set within that graph distance of the vertex."""

    center: int
    radius: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be a positive integer")


@dataclass
class NoiseSample:
    omega: np.ndarray
    seed: int | None
    rate: float


def sample_iid(p: float, n_items: int, rng) -> NoiseSample:
    """Independent inclusion of each item with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    else:
        seed = None
    return NoiseSample(omega=rng.random(n_items) < p, seed=seed, rate=p)


def ball_edges(graph: colex.DualGraph, ball: Ball) -> np.ndarray:
    """Edges of the subgraph induced on vertices within the ball radius."""
    adj = _adjacency(graph)
    dist = _bfs_limited(adj, ball.center, ball.radius)
    mask = np.zeros(graph.n_edges, dtype=bool)
    for e in range(graph.n_edges):
        u, v = (int(x) for x in graph.edges[e])
        if u in dist and v in dist:
            mask[e] = True
    return mask


def edge_components(graph: colex.DualGraph, mask: np.ndarray) -> list[list[int]]:
    """Connected components of an edge set; edges touch through any shared
    vertex, outer vertices included."""
    parent: dict[int, int] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    touch: dict[int, int] = {}
    ids = [int(e) for e in np.nonzero(np.asarray(mask, dtype=bool))[0]]
    for e in ids:
        parent[e] = e
        for v in graph.edges[e]:
            v = int(v)
            if v in touch:
                ra, rb = find(e), find(touch[v])
                if ra != rb:
                    parent[ra] = rb
            else:
                touch[v] = e
    groups: dict[int, list[int]] = {}
    for e in ids:
        groups.setdefault(find(e), []).append(e)
    return list(groups.values())


def spherify(graph: colex.DualGraph, kappa_sets) -> list[Ball]:
    """Covering balls for a family of connected edge sets.

    Greedy largest-first: select a maximal set, drop every set touching it
    (those lie inside the selected ball of radius twice the set size),
    repeat. The selected sets are pairwise disjoint and the returned balls
    cover the union of the input family.
    """
    return [b for b, _ in spherify_detailed(graph, kappa_sets)]


def spherify_detailed(graph: colex.DualGraph, kappa_sets
                      ) -> list[tuple[Ball, list[int]]]:
    """spherify with the selected edge set attached to each ball."""
    remaining = []
    for k in kappa_sets:
        edges = sorted(int(e) for e in k)
        if not edges:
            continue
        if len(edge_components(graph, _mask(graph.n_edges, edges))) != 1:
            raise ValueError("input edge set is not connected")
        verts = set()
        for e in edges:
            verts.update(int(x) for x in graph.edges[e])
        remaining.append((edges, verts))
    remaining.sort(key=lambda kv: (-len(kv[0]), kv[0]))
    out: list[tuple[Ball, list[int]]] = []
    while remaining:
        edges, verts = remaining.pop(0)
        out.append((Ball(center=min(verts), radius=2 * len(edges)), edges))
        remaining = [(e2, v2) for e2, v2 in remaining if not (v2 & verts)]
    return out


def aggregate(graph: colex.DualGraph, balls: list[Ball]) -> list[Ball]:
    """One covering ball per connected component of the union of the input
    balls, centered at a diameter endpoint with the component diameter as
    radius. The radius never exceeds twice the total input radius."""
    union = np.zeros(graph.n_edges, dtype=bool)
    edge_sets = [ball_edges(graph, b) for b in balls]
    for es in edge_sets:
        union |= es
    out: list[Ball] = []
    for comp in edge_components(graph, union):
        cmask = _mask(graph.n_edges, comp)
        adj = colex._full_adjacency(graph, cmask)
        verts = sorted({int(x) for e in comp for x in graph.edges[e]})
        d0 = colex._bfs(adj, verts[0])
        far = max(verts, key=lambda v: (d0[v], -v))
        d1 = colex._bfs(adj, far)
        diameter = max(int(d1[v]) for v in verts)
        r_total = sum(b.radius for b, es in zip(balls, edge_sets)
                      if (es & cmask).any())
        assert diameter <= 2 * r_total
        ball = Ball(center=far, radius=max(diameter, 1))
        assert not (cmask & ~ball_edges(graph, ball)).any()
        out.append(ball)
    return out


def enumerate_alpha(graph: colex.DualGraph, v: int, n_max: int,
                    budget: int = 2_000_000) -> dict:
    """Exact counts of connected edge subsets through a vertex, by size.

    Each subset of up to n_max edges whose subgraph is connected and touches
    v is counted once (rooted enumeration with permanent exclusion). The
    reported alpha is the largest count(n)**(1/n). A blown budget yields a
    partial report with the flag set.
    """
    if n_max > 6:
        raise ValueError("n_max above 6 is not supported")
    adj_edges = [[] for _ in range(graph.n_vertices)]
    for e in range(graph.n_edges):
        u, w = (int(x) for x in graph.edges[e])
        adj_edges[u].append(e)
        adj_edges[w].append(e)
    counts = {n: 0 for n in range(n_max + 1)}
    counts[0] = 1
    visited = 0
    partial = False

    def other(e, u):
        a, b = (int(x) for x in graph.edges[e])
        return b if a == u else a

    def extend(subset_verts, candidates, banned, size):
        nonlocal visited, partial
        if size == n_max or partial:
            return
        for idx, e in enumerate(candidates):
            visited += 1
            if visited > budget:
                partial = True
                return
            counts[size + 1] += 1
            new_banned = banned | set(candidates[:idx + 1])
            u, w = (int(x) for x in graph.edges[e])
            new_verts = subset_verts | {u, w}
            nxt = candidates[idx + 1:] + [f for x in (u, w)
                                          if x not in subset_verts
                                          for f in adj_edges[x]
                                          if f not in new_banned]
            # dedup while keeping order
            seen = set()
            nxt = [f for f in nxt if not (f in seen or seen.add(f))]
            extend(new_verts, nxt, new_banned, size + 1)
            if partial:
                return

    extend({int(v)}, list(adj_edges[int(v)]), set(), 0)
    alpha = max((counts[n] ** (1.0 / n) for n in range(1, n_max + 1)
                 if counts[n] > 0), default=1.0)
    return {"counts": counts, "alpha": alpha, "partial": partial,
            "visited": visited}


def tail_estimate(graph: colex.DualGraph, p: float, c: float, alpha: float,
                  n_runs: int, rng, probe_radii=(2, 4, 6),
                  extractor=None) -> dict:
    """Empirical ball occurrence frequency against the analytic bound.

    Per run, an independent edge error is converted to a ball set; a probe
    ball counts when it occurs in that set. The bound per probe is
    (p/p0)**(r/(2c)) with p0 = (2*alpha)**(-c). Frequencies are averaged
    over bulk probe centers; a row is a violation when the empirical value
    exceeds the bound by more than four standard errors. The default probe
    radii are even because spherification emits radii of twice a cluster
    size.
    """
    if extractor is None:
        def extractor(omega):
            return spherify(graph, edge_components(graph, omega))
    p0 = (2.0 * alpha) ** (-c)
    centers = _bulk_centers(graph, 5)
    probes = [Ball(center=v, radius=r) for r in probe_radii for v in centers]
    hits = np.zeros(len(probes), dtype=np.int64)
    for _ in range(n_runs):
        omega = sample_iid(p, graph.n_edges, rng).omega
        got = set(extractor(omega))
        for j, b in enumerate(probes):
            if b in got:
                hits[j] += 1
    rows = []
    for r in probe_radii:
        sel = [j for j, b in enumerate(probes) if b.radius == r]
        freq = float(hits[sel].sum()) / (len(sel) * n_runs)
        bound = (p / p0) ** (r / (2.0 * c))
        stderr = np.sqrt(max(freq * (1 - freq), 1.0 / (len(sel) * n_runs))
                         / (len(sel) * n_runs))
        rows.append({"radius": r, "empirical": freq, "bound": bound,
                     "violation": freq > bound + 4 * stderr})
    return {"p": p, "p0": p0, "c": c, "alpha": alpha, "runs": n_runs,
            "rows": rows,
            "violations": sum(row["violation"] for row in rows)}


def tail_report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["radius", "empirical", "bound"])
    for row in report["rows"]:
        w.writerow([row["radius"], f"{row['empirical']:.8g}",
                    f"{row['bound']:.8g}"])
    return buf.getvalue()


# --- helpers ----------------------------------------------------------------

def _mask(n: int, ids) -> np.ndarray:
    m = np.zeros(n, dtype=bool)
    m[list(ids)] = True
    return m


def _adjacency(graph: colex.DualGraph):
    return colex._full_adjacency(graph,
                                 np.ones(graph.n_edges, dtype=bool))


def _bfs_limited(adj, source: int, radius: int) -> dict[int, int]:
    dist = {int(source): 0}
    queue = [int(source)]
    d = 0
    while queue and d < radius:
        d += 1
        nxt = []
        for u in queue:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = d
                    nxt.append(v)
        queue = nxt
    return dist


def _bulk_centers(graph: colex.DualGraph, count: int) -> list[int]:
    """Inner vertices of maximal degree, ties by id: probe centers far from
    degenerate boundary corners."""
    deg = np.zeros(graph.n_vertices, dtype=np.int64)
    for u, v in graph.edges:
        deg[int(u)] += 1
        deg[int(v)] += 1
    inner = list(range(graph.n_inner))
    inner.sort(key=lambda v: (-deg[v], v))
    return inner[:count]
