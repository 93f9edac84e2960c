"""Unit tests for the Z2 charge decoders."""
from __future__ import annotations

import numpy as np
import pytest

from colorjit import colex, decoders
from colorjit.decoders import (
    LayeredDecoder,
    NoMatch,
    SyndromeGraph,
    bruteforce_decode,
    component_ratios,
    mwpm_decode,
    syndrome_of,
)


def _path_graph(n_inner: int, weights=None) -> SyndromeGraph:
    """outer - v0 - ... - v_{n-1} - outer."""
    n = n_inner + 2
    is_outer = np.zeros(n, dtype=bool)
    is_outer[[n_inner, n_inner + 1]] = True
    ends = [(n_inner, 0)]
    ends += [(i, i + 1) for i in range(n_inner - 1)]
    ends += [(n_inner - 1, n_inner + 1)]
    return SyndromeGraph(is_outer, np.array(ends), weights)


@pytest.fixture(scope="module")
def slab2():
    g, layers = colex.build_lattice("slab", d=2)
    return g, layers, SyndromeGraph.from_dual(g)


def test_syndrome_of_cases():
    g = _path_graph(4)
    zero = np.zeros(g.n_edges, dtype=bool)
    assert not syndrome_of(g, zero).any()
    # bulk edge: both endpoints defects
    chain = zero.copy()
    chain[2] = True
    assert list(np.nonzero(syndrome_of(g, chain))[0]) == [1, 2]
    # edge into an outer vertex: one defect
    chain = zero.copy()
    chain[0] = True
    assert list(np.nonzero(syndrome_of(g, chain))[0]) == [0]


def test_syndrome_of_cycle_is_empty(slab2):
    g, _, sg = slab2
    vids, eids = next((v, e) for v, e in g.triangles
                      if all(x < g.n_inner for x in v))
    chain = np.zeros(sg.n_edges, dtype=bool)
    chain[list(eids)] = True
    assert not syndrome_of(sg, chain).any()


def test_bruteforce_middle_edge_beats_detour():
    # 5-edge path; defects around the middle edge
    g = _path_graph(4)
    sigma = np.zeros(g.n_vertices, dtype=bool)
    sigma[[1, 2]] = True
    out = bruteforce_decode(g, sigma)
    assert list(np.nonzero(out)[0]) == [2]
    assert list(np.nonzero(mwpm_decode(g, sigma))[0]) == [2]


def test_decode_prefers_boundary_when_closer():
    g = _path_graph(5)
    sigma = np.zeros(g.n_vertices, dtype=bool)
    sigma[[0, 4]] = True
    for fn in (bruteforce_decode, mwpm_decode):
        out = fn(g, sigma)
        assert out.sum() == 2  # one edge to each outer end
        assert not (syndrome_of(g, out) ^ sigma).any()


def test_decode_empty_sigma(slab2):
    _, _, sg = slab2
    sigma = np.zeros(sg.n_vertices, dtype=bool)
    assert not mwpm_decode(sg, sigma).any()
    assert not bruteforce_decode(sg, sigma).any()


def test_no_match_without_outer():
    is_outer = np.zeros(2, dtype=bool)
    g = SyndromeGraph(is_outer, np.array([[0, 1]]))
    sigma = np.array([True, False])
    with pytest.raises(NoMatch):
        bruteforce_decode(g, sigma)
    with pytest.raises(NoMatch):
        mwpm_decode(g, sigma)


def test_weight_hook_avoids_heavy_edge():
    g = _path_graph(2, weights=np.array([1.0, 5.0, 1.0]))
    sigma = np.zeros(g.n_vertices, dtype=bool)
    sigma[[0, 1]] = True
    for fn in (bruteforce_decode, mwpm_decode):
        out = fn(g, sigma)
        # two weight-1 boundary edges beat the weight-5 middle edge
        assert sorted(np.nonzero(out)[0]) == [0, 2]


def test_oracle_equivalence_sweep(slab2):
    _, _, sg = slab2
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(120):
        omega = rng.random(sg.n_edges) < 0.012
        sigma = syndrome_of(sg, omega)
        if not 0 < sigma.sum() <= 8:
            continue
        e1 = mwpm_decode(sg, sigma)
        e2 = bruteforce_decode(sg, sigma)
        assert e1.sum() == e2.sum()
        assert not (syndrome_of(sg, e1) ^ sigma).any()
        checked += 1
    assert checked >= 40


def test_minimization_constant_is_two(slab2):
    _, _, sg = slab2
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(150):
        omega = rng.random(sg.n_edges) < 0.012
        sigma = syndrome_of(sg, omega)
        if not sigma.any():
            continue
        est = mwpm_decode(sg, sigma)
        for size, overlap in component_ratios(sg, omega, est):
            assert overlap > 0  # estimate components always touch the error
            worst = max(worst, size / overlap)
    assert worst == 2.0


def _random_cycle(g, rng, k=4):
    """XOR of k triangle boundaries: a chain with no defects."""
    cycle = np.zeros(g.n_edges, dtype=bool)
    tris = [eids for vids, eids in g.triangles
            if all(v < g.n_inner for v in vids)]
    for t in rng.choice(len(tris), size=k, replace=False):
        for e in tris[int(t)]:
            cycle[e] ^= True
    return cycle


def test_decoder_is_function_of_syndrome(slab2):
    g, _, sg = slab2
    rng = np.random.default_rng(9)
    for _ in range(5):
        omega = rng.random(sg.n_edges) < 0.01
        # add a cycle: the syndrome, hence the output, must not move
        code = _random_cycle(g, rng)
        s1 = syndrome_of(sg, omega)
        s2 = syndrome_of(sg, omega ^ code)
        assert np.array_equal(s1, s2)
        assert np.array_equal(mwpm_decode(sg, s1), mwpm_decode(sg, s2))


# --- layered variants -------------------------------------------------------

def test_open_decoder_absorbs_at_interface(slab2):
    g, layers, _ = slab2
    ld = LayeredDecoder(g, layers)
    rng = np.random.default_rng(10)
    for i in (1, 2, 3):
        omega = (rng.random(g.n_edges) < 0.02) & layers.phi(i)
        est = ld.open_decode(i, omega)
        assert not (est & ~layers.phi(i)).any()
        # no residual charge on cells of the past region
        resid = syndrome_of(ld.open_graph(i), omega ^ est)
        assert not resid.any()


def test_open_decoder_rejects_future_chain(slab2):
    g, layers, _ = slab2
    ld = LayeredDecoder(g, layers)
    with pytest.raises(ValueError):
        ld.open_decode(1, np.ones(g.n_edges, dtype=bool))


def test_closed_decoder_stays_in_future(slab2):
    g, layers, _ = slab2
    ld = LayeredDecoder(g, layers)
    rng = np.random.default_rng(11)
    for i in (1, 2, 3):
        omega = (rng.random(g.n_edges) < 0.02) & ~layers.phi(i)
        est = ld.closed_decode(i, omega)
        assert not (est & layers.phi(i)).any()
        assert not syndrome_of(ld.closed_graph(i), omega ^ est).any()


def test_closed_decoder_degenerate_layer_zero(slab2):
    g, layers, sg = slab2
    ld = LayeredDecoder(g, layers)
    rng = np.random.default_rng(12)
    omega = rng.random(g.n_edges) < 0.01
    est = ld.closed_decode(0, omega)
    full = mwpm_decode(sg, syndrome_of(sg, omega))
    assert np.array_equal(est, full)


def _open_codeword(ld, layers, i, rng):
    """Element of the open problem's codeword set: a past-region chain whose
    defects all sit on the interface."""
    omega = (rng.random(ld.graph.n_edges) < 0.02) & layers.phi(i)
    return omega ^ ld.open_decode(i, omega)


def test_estimated_error_matches_boundary(slab2):
    g, layers, _ = slab2
    ld = LayeredDecoder(g, layers)
    rng = np.random.default_rng(13)
    for i in (1, 2):
        part = _open_codeword(ld, layers, i, rng)
        est = ld.estimated_error(i, part)
        assert not (est & layers.phi(i)).any()
        sg = ld.closed_graph(i)
        assert np.array_equal(syndrome_of(sg, est), syndrome_of(sg, part))
        # depends on the syndrome only
        cyc = _random_cycle(g, rng)
        est2 = ld.estimated_error(i, part ^ cyc)
        assert np.array_equal(syndrome_of(sg, part ^ cyc), syndrome_of(sg, part))
        assert np.array_equal(est, est2)


def test_closure_decode_lands_in_code(slab2):
    g, layers, _ = slab2
    ld = LayeredDecoder(g, layers)
    rng = np.random.default_rng(14)
    for i in (1, 2, 3):
        part = _open_codeword(ld, layers, i, rng)
        out = ld.closure_decode(i, part)
        assert not syndrome_of(ld.full, out).any()
        assert not ((out ^ part) & layers.phi(i)).any()
        # a defect-free input is a fixed point
        cyc = _random_cycle(g, rng)
        assert np.array_equal(ld.closure_decode(i, cyc), cyc)


def test_layered_decoder_rejects_unknown_method(slab2):
    g, layers, _ = slab2
    with pytest.raises(ValueError):
        LayeredDecoder(g, layers, method="unionfind")


def test_instance_json_round_trip():
    sigma = np.array([False, True, True, False])
    chain = np.array([True, False, True])
    text = decoders.instance_to_json("slab-d2", sigma, chain)
    label, defects, edges = decoders.instance_from_json(text)
    assert label == "slab-d2" and defects == [1, 2] and edges == [0, 2]
    with pytest.raises(ValueError):
        decoders.instance_from_json('{"version": 99}')
