"""Unit tests for the experiment driver and CLI."""
from __future__ import annotations

import json

import numpy as np
import pytest

from colorjit import cli, colex, decoders, harness
from colorjit.harness import (
    ExperimentConfig,
    ResultRecord,
    is_logical_failure,
    parse_config,
    records_equal,
    records_from_json,
    records_to_csv,
    records_to_json,
    residual_separation,
    run_jit_comparison,
    run_threshold_experiment,
    wilson_interval,
)


@pytest.fixture(scope="module")
def slab2():
    g, layers = colex.build_lattice("slab", d=2)
    return g, harness._inner_adjacency(g)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(pipeline="magic")
    with pytest.raises(ValueError):
        ExperimentConfig(rates=(1.5,))
    with pytest.raises(ValueError):
        ExperimentConfig(sizes=(1,))
    with pytest.raises(ValueError):
        ExperimentConfig(fmt="xml")
    cfg = ExperimentConfig(sizes=("2", "3"), rates=("0.01",))
    assert cfg.sizes == (2, 3) and cfg.rates == (0.01,)


def test_result_record_validation():
    with pytest.raises(ValueError):
        ResultRecord("jit", 2, 0.1, 5, 6, 0, 0, 0, 0, 0.0)


def test_residual_separation_cases(slab2):
    g, adj = slab2
    empty = np.zeros(g.n_edges, dtype=bool)
    assert residual_separation(g, adj, empty) == -1
    assert not is_logical_failure(g, adj, empty, 1)
    # a single boundary edge has one attachment: no separation
    e = next(e for e in range(g.n_edges)
             if (g.edges[e] >= g.n_inner).sum() == 1)
    one = empty.copy()
    one[e] = True
    assert residual_separation(g, adj, one) <= 0


def test_failure_detects_planted_crossing(slab2):
    g, adj = slab2
    # plant a boundary-to-boundary chain through far-apart attachments
    best = None
    for a in range(g.n_inner):
        for b in range(a + 1, g.n_inner):
            ea = [e for e in range(g.n_edges)
                  if a in g.edges[e] and (g.edges[e] >= g.n_inner).any()]
            eb = [e for e in range(g.n_edges)
                  if b in g.edges[e] and (g.edges[e] >= g.n_inner).any()]
            if not ea or not eb:
                continue
            dist = _inner_dist(adj, a, b)
            if dist is not None and (best is None or dist > best[0]):
                best = (dist, a, b, ea[0], eb[0])
    dist, a, b, ea, eb = best
    assert dist >= 2
    chain = np.zeros(g.n_edges, dtype=bool)
    chain[[ea, eb]] = True
    for e in _inner_path_edges(g, adj, a, b):
        chain[e] ^= True
    assert residual_separation(g, adj, chain) == dist
    assert is_logical_failure(g, adj, chain, dist)
    assert not is_logical_failure(g, adj, chain, dist + 1)


def _inner_dist(adj, a, b):
    dist = {a: 0}
    queue = [a]
    while queue:
        nxt = []
        for u in queue:
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    nxt.append(w)
        queue = nxt
    return dist.get(b)


def _inner_path_edges(g, adj, a, b):
    prev = {a: None}
    queue = [a]
    while queue and b not in prev:
        nxt = []
        for u in queue:
            for w in adj[u]:
                if w not in prev:
                    prev[w] = u
                    nxt.append(w)
        queue = nxt
    verts = [b]
    while prev[verts[-1]] is not None:
        verts.append(prev[verts[-1]])
    out = []
    for u, v in zip(verts, verts[1:]):
        out.append(next(e for e in range(g.n_edges)
                        if {u, v} == set(int(x) for x in g.edges[e])))
    return out


def test_zero_rate_has_zero_failures():
    cfg = ExperimentConfig(sizes=(2,), rates=(0.0,), trials=20, seed=5)
    for pipeline in ("conventional", "jit"):
        rec, = run_threshold_experiment(
            ExperimentConfig(**{**cfg.__dict__, "pipeline": pipeline}))
        assert rec.failures == 0
        assert rec.mean_omega_hat == 0.0
        assert rec.mean_delta == 0.0


def test_determinism_bit_for_bit():
    cfg = ExperimentConfig(sizes=(2,), rates=(0.02,), trials=40, seed=9,
                           pipeline="jit")
    a = run_threshold_experiment(cfg)
    b = run_threshold_experiment(cfg)
    assert records_equal(a, b)
    c = run_threshold_experiment(
        ExperimentConfig(**{**cfg.__dict__, "seed": 10}))
    assert not records_equal(a, c)


def test_jit_records_ledger_checks():
    cfg = ExperimentConfig(sizes=(2,), rates=(0.02,), trials=30, seed=11,
                           pipeline="jit", confinement=True)
    rec, = run_threshold_experiment(cfg)
    assert rec.ledger_violations == 0
    assert rec.confinement_violations == 0
    assert rec.mean_omega_hat > 0


def test_comparison_produces_both_pipelines(tmp_path):
    out = tmp_path / "records.json"
    cfg = ExperimentConfig(sizes=(2,), rates=(0.01,), trials=25, seed=12,
                           out=str(out), fmt="json")
    records = run_jit_comparison(cfg)
    assert [r.pipeline for r in records] == ["conventional", "jit"]
    # identical noise stream per trial: jit sees the same samples
    assert records_equal(records_from_json(out.read_text()), records)


def test_wilson_interval_properties():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)
    # more trials tighten the interval
    w1 = wilson_interval(10, 100)
    w2 = wilson_interval(100, 1000)
    assert (w2[1] - w2[0]) < (w1[1] - w1[0])


def test_records_csv_and_json_round_trip():
    rec = ResultRecord("jit", 3, 0.005, 10, 2, 1.5, 2.5, 0, 0, 1.25)
    text = records_to_csv([rec])
    lines = text.strip().splitlines()
    assert lines[0].startswith("v1,")
    assert "jit,3,0.005,10,2" in lines[1]
    back = records_from_json(records_to_json([rec]))
    assert back == [rec]
    with pytest.raises(ValueError):
        records_from_json('{"version": 99}')


def test_parse_config():
    text = """
    # comment
    sizes = 2, 3
    rates = 0.002,0.005
    trials = 7
    seed = 42
    pipeline = jit
    confinement = true
    """
    cfg = parse_config(text)
    assert cfg.sizes == (2, 3)
    assert cfg.rates == (0.002, 0.005)
    assert cfg.trials == 7 and cfg.seed == 42
    assert cfg.pipeline == "jit" and cfg.confinement
    with pytest.raises(ValueError):
        parse_config("bogus_key = 1")
    with pytest.raises(ValueError):
        parse_config("no equals sign")


# --- CLI --------------------------------------------------------------------

def test_cli_build_and_decode(tmp_path, capsys):
    out = tmp_path / "lattice.json"
    assert cli.main(["build", "--size", "2", "--out", str(out)]) == 0
    g, _ = colex.from_json(out.read_text())
    assert g.n_edges == 448

    # golden decode: output reproduces byte for byte
    g2, _ = colex.build_lattice("slab", d=2)
    sg = decoders.SyndromeGraph.from_dual(g2)
    rng = np.random.default_rng(21)
    omega = rng.random(sg.n_edges) < 0.01
    sigma = decoders.syndrome_of(sg, omega)
    inst = tmp_path / "instance.json"
    inst.write_text(decoders.instance_to_json(
        "slab-d2", sigma, np.zeros(sg.n_edges, dtype=bool)))
    o1 = tmp_path / "o1.json"
    o2 = tmp_path / "o2.json"
    assert cli.main(["decode", "--in", str(inst), "--out", str(o1)]) == 0
    assert cli.main(["decode", "--in", str(inst), "--out", str(o2)]) == 0
    assert o1.read_bytes() == o2.read_bytes()
    _, defects, chain = decoders.instance_from_json(o1.read_text())
    est = np.zeros(sg.n_edges, dtype=bool)
    est[chain] = True
    assert not (decoders.syndrome_of(sg, est) ^ sigma).any()


def test_cli_check_reports_constants(capsys):
    assert cli.main(["check", "--size", "2", "--trials", "30"]) == 0
    text = capsys.readouterr().out
    assert "k=1.5" in text
    assert "k_close=78.0" in text
    assert "k_min=2.0" in text
    assert "alpha=" in text


def test_cli_experiment_zero_rate(tmp_path):
    out = tmp_path / "res.csv"
    code = cli.main(["experiment", "--size", "2", "--rate", "0",
                     "--trials", "5", "--seed", "1", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 2
    assert ",0,0.0," in lines[1] or ",conventional,2,0.0,5,0," in lines[1]


def test_cli_experiment_config_file(tmp_path, capsys):
    cfgfile = tmp_path / "exp.cfg"
    cfgfile.write_text("sizes = 2\nrates = 0.0\ntrials = 4\nseed = 2\n")
    assert cli.main(["experiment", "--config", str(cfgfile),
                     "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["records"][0]["failures"] == 0


def test_cli_rejects_bad_config(capsys):
    assert cli.main(["experiment", "--size", "2", "--rate", "2.0",
                     "--trials", "1"]) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_cli_verify_passes(capsys):
    assert cli.main(["verify", "--size", "2", "--trials", "12"]) == 0
    text = capsys.readouterr().out
    for suite in ("ball_identities", "ledger_identities",
                  "oracle_equivalence"):
        assert f"{suite}: pass" in text
