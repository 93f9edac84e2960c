"""Unit tests for the noise models and ball machinery."""
from __future__ import annotations

import numpy as np
import pytest

from colorjit import colex, noise
from colorjit.noise import (
    Ball,
    aggregate,
    ball_edges,
    edge_components,
    enumerate_alpha,
    sample_iid,
    spherify,
    spherify_detailed,
    tail_estimate,
    tail_report_csv,
)


@pytest.fixture(scope="module")
def slab2():
    g, layers = colex.build_lattice("slab", d=2)
    return g


class _Path:
    """Bare 4-vertex path graph (edges 0-1, 1-2, 2-3)."""

    n_vertices = 4
    n_inner = 4
    n_edges = 3
    edges = np.array([[0, 1], [1, 2], [2, 3]])


def test_sample_iid_extremes():
    rng = np.random.default_rng(0)
    assert not sample_iid(0.0, 50, rng).omega.any()
    assert sample_iid(1.0, 50, rng).omega.all()
    with pytest.raises(ValueError):
        sample_iid(1.5, 10, rng)


def test_sample_iid_records_seed():
    s = sample_iid(0.3, 20, 1234)
    t = sample_iid(0.3, 20, 1234)
    assert s.seed == 1234 and s.rate == 0.3
    assert np.array_equal(s.omega, t.omega)


def test_sample_iid_pair_inclusion_frequency():
    p, n_runs = 0.3, 40000
    rng = np.random.default_rng(1)
    hits = 0
    for _ in range(n_runs):
        w = sample_iid(p, 6, rng).omega
        hits += bool(w[0] and w[3])
    freq = hits / n_runs
    target = p * p
    stderr = np.sqrt(target * (1 - target) / n_runs)
    assert abs(freq - target) < 4 * stderr


def test_ball_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        Ball(center=0, radius=0)
    with pytest.raises(ValueError):
        Ball(center=0, radius=-2)


def test_ball_edges_monotone_and_incident(slab2):
    g = slab2
    v = noise._bulk_centers(g, 1)[0]
    b1 = ball_edges(g, Ball(v, 1))
    b2 = ball_edges(g, Ball(v, 2))
    incident = np.array([v in (int(a), int(b)) for a, b in g.edges])
    assert not (incident & ~b1).any()
    assert not (b1 & ~b2).any()
    assert b2.sum() > b1.sum()


def test_edge_components_cases(slab2):
    g = _Path()
    assert edge_components(g, np.array([False] * 3)) == []
    assert len(edge_components(g, np.array([True, False, False]))) == 1
    assert len(edge_components(g, np.array([True, True, False]))) == 1
    assert len(edge_components(g, np.array([True, False, True]))) == 2
    assert len(edge_components(g, np.array([True, True, True]))) == 1


def test_spherify_empty_and_singleton(slab2):
    g = slab2
    assert spherify(g, []) == []
    # connected 3-edge set around a vertex
    v = noise._bulk_centers(g, 1)[0]
    kappa = [int(e) for e in np.nonzero(
        np.array([v in (int(a), int(b)) for a, b in g.edges]))[0][:3]]
    (ball, chosen), = spherify_detailed(g, [kappa])
    assert ball.radius == 6
    assert chosen == sorted(kappa)
    verts = {int(x) for e in kappa for x in g.edges[e]}
    assert ball.center in verts


def test_spherify_rejects_disconnected(slab2):
    g = _Path()
    with pytest.raises(ValueError):
        spherify(g, [[0, 2]])


def _random_kappa_family(g, rng, n_sets=6):
    """Random family of connected edge sets grown by edge-adjacency walks."""
    fam = []
    for _ in range(n_sets):
        e0 = int(rng.integers(g.n_edges))
        chosen = {e0}
        verts = {int(x) for x in g.edges[e0]}
        for _ in range(int(rng.integers(0, 4))):
            frontier = [e for e in range(g.n_edges) if e not in chosen
                        and (int(g.edges[e][0]) in verts
                             or int(g.edges[e][1]) in verts)]
            e = int(rng.choice(frontier))
            chosen.add(e)
            verts.update(int(x) for x in g.edges[e])
        fam.append(sorted(chosen))
    return fam


def test_spherify_covering_and_disjointness(slab2):
    g = slab2
    rng = np.random.default_rng(2)
    for _ in range(25):
        fam = _random_kappa_family(g, rng)
        detailed = spherify_detailed(g, fam)
        # selected sets pairwise vertex-disjoint
        seen: set[int] = set()
        for _, chosen in detailed:
            verts = {int(x) for e in chosen for x in g.edges[e]}
            assert not (verts & seen)
            seen |= verts
        # covering by explicit membership
        cover = np.zeros(g.n_edges, dtype=bool)
        for ball, _ in detailed:
            cover |= ball_edges(g, ball)
        want = np.zeros(g.n_edges, dtype=bool)
        for k in fam:
            want[k] = True
        assert not (want & ~cover).any()


def test_aggregate_empty_and_far_balls(slab2):
    assert aggregate(slab2, []) == []
    # two balls far apart stay separate; needs a size with real separation
    g, _ = colex.build_lattice("slab", d=3)
    d0 = colex._bfs(colex._full_adjacency(g, np.ones(g.n_edges, bool)), 0)
    far = max(range(g.n_inner), key=lambda v: d0[v])
    assert d0[far] >= 4
    out = aggregate(g, [Ball(0, 1), Ball(far, 1)])
    assert len(out) == 2


def test_aggregate_merges_overlap(slab2):
    g = slab2
    v = noise._bulk_centers(g, 1)[0]
    adj = colex._full_adjacency(g, np.ones(g.n_edges, bool))
    w = adj[v][0]
    out = aggregate(g, [Ball(v, 2), Ball(w, 2)])
    assert len(out) == 1
    union = ball_edges(g, Ball(v, 2)) | ball_edges(g, Ball(w, 2))
    assert not (union & ~ball_edges(g, out[0])).any()


def test_enumerate_alpha_path_oracle():
    g = _Path()
    rep = enumerate_alpha(g, 1, 3)
    # subsets through vertex 1: {0},{1},{01},{12},{012}
    assert rep["counts"] == {0: 1, 1: 2, 2: 2, 3: 1}
    assert not rep["partial"]


def test_enumerate_alpha_degree_and_bound(slab2):
    g = slab2
    v = noise._bulk_centers(g, 1)[0]
    deg = sum(v in (int(a), int(b)) for a, b in g.edges)
    rep = enumerate_alpha(g, v, 4)
    assert rep["counts"][0] == 1
    assert rep["counts"][1] == deg
    a = rep["alpha"]
    for n in range(1, 5):
        assert rep["counts"][n] <= a ** n + 1e-9
    # counts grow with size on a bulk lattice vertex
    assert all(rep["counts"][n + 1] > rep["counts"][n] for n in range(4))


def test_enumerate_alpha_guards():
    g = _Path()
    with pytest.raises(ValueError):
        enumerate_alpha(g, 1, 7)
    rep = enumerate_alpha(g, 1, 3, budget=1)
    assert rep["partial"]


def test_tail_estimate_p_zero_and_formula(slab2):
    g = slab2
    rep = tail_estimate(g, 0.0, 1.0, 2.0, 50, np.random.default_rng(3))
    assert rep["p0"] == 0.25  # (2*alpha)**-c with alpha=2, c=1
    assert all(row["empirical"] == 0.0 for row in rep["rows"])
    assert rep["violations"] == 0


def test_tail_estimate_decay_and_csv(slab2):
    g = slab2
    v = noise._bulk_centers(g, 1)[0]
    alpha = enumerate_alpha(g, v, 4)["alpha"]
    rep = tail_estimate(g, 0.01, 1.0, alpha, 1500, np.random.default_rng(4))
    assert rep["violations"] == 0
    freqs = [row["empirical"] for row in rep["rows"]]
    assert freqs[0] > freqs[1] > freqs[2] >= 0
    text = tail_report_csv(rep)
    lines = text.strip().splitlines()
    assert lines[0] == "radius,empirical,bound"
    assert len(lines) == 1 + len(rep["rows"])
