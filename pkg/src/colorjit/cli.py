"""Command line front end.

Subcommands: build (emit a lattice), check (geometry and constant report),
decode (one stored instance), experiment (Monte Carlo runs), verify
(property suites). Invalid configuration exits nonzero with a message.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import colex, decoders, gf2, harness, jit, noise


def _add_lattice_args(sub):
    sub.add_argument("--size", type=int, default=2)
    sub.add_argument("--family", default="slab")
    sub.add_argument("--layers", default="z",
                     help="layering direction (z or diag)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colorjit")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("build", help="emit a lattice file")
    _add_lattice_args(p)
    p.add_argument("--out", default=None)

    p = subs.add_parser("check", help="geometry and constant report")
    _add_lattice_args(p)
    p.add_argument("--trials", type=int, default=150,
                   help="sweep size for the minimization constant")
    p.add_argument("--seed", type=int, default=0)

    p = subs.add_parser("decode", help="decode a stored instance")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)

    p = subs.add_parser("experiment", help="run a Monte Carlo experiment")
    p.add_argument("--config", default=None)
    p.add_argument("--size", default=None, help="comma separated sizes")
    p.add_argument("--rate", default=None, help="comma separated rates")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--layers", default=None)
    p.add_argument("--lookahead", type=int, default=None)
    p.add_argument("--pipeline", default=None,
                   help="conventional, jit, or both")
    p.add_argument("--out", default=None)
    p.add_argument("--format", dest="fmt", choices=("csv", "json"),
                   default=None)

    p = subs.add_parser("verify", help="run property suites")
    _add_lattice_args(p)
    p.add_argument("--trials", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _build_lattice(args):
    return colex.build_lattice(args.family, d=args.size, layering=args.layers)


def cmd_build(args) -> int:
    graph, layers = _build_lattice(args)
    text = colex.to_json(graph, layers)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return 0


def measure_k_min(graph, sg, trials: int, seed: int) -> float:
    """Worst cluster-size to error-overlap ratio over a decode sweep."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        omega = rng.random(sg.n_edges) < 0.012
        sigma = decoders.syndrome_of(sg, omega)
        if not sigma.any():
            continue
        est = decoders.mwpm_decode(sg, sigma)
        for size, overlap in decoders.component_ratios(sg, omega, est):
            if overlap:
                worst = max(worst, size / overlap)
    return worst


def cmd_check(args) -> int:
    graph, layers = _build_lattice(args)
    geo = colex.check_closure_geometry(layers)
    sg = decoders.SyndromeGraph.from_dual(graph)
    k_min = measure_k_min(graph, sg, args.trials, args.seed)
    center = noise._bulk_centers(graph, 1)[0]
    alpha = noise.enumerate_alpha(graph, center, 4)["alpha"]
    causality = colex.check_causality(layers)
    print(f"family={args.family} size={args.size} layering={args.layers}")
    print(f"k={geo['k']} k_reverse={geo['k_reverse']}")
    print(f"k_face={geo['k_face']} k_close={geo['k_close']}")
    print(f"closure_satisfied={geo['satisfied']}")
    print(f"causality_passed={all(r['passed'] for r in causality)}")
    print(f"k_min={k_min}")
    print(f"alpha={alpha:.6f}")
    return 0


def cmd_decode(args) -> int:
    with open(args.infile) as fh:
        label, defect_ids, _ = decoders.instance_from_json(fh.read())
    try:
        family, dtag = label.rsplit("-", 1)
        d = int(dtag.lstrip("d"))
    except ValueError:
        print(f"unrecognized instance label {label!r}", file=sys.stderr)
        return 2
    graph, _ = colex.build_lattice(family, d=d)
    sg = decoders.SyndromeGraph.from_dual(graph)
    sigma = np.zeros(sg.n_vertices, dtype=bool)
    sigma[defect_ids] = True
    chain = decoders.mwpm_decode(sg, sigma)
    text = decoders.instance_to_json(label, sigma, chain)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return 0


def cmd_experiment(args) -> int:
    values = {}
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        base = harness.parse_config(text)
        values = {f: getattr(base, f)
                  for f in harness.ExperimentConfig.__dataclass_fields__}
    if args.size is not None:
        values["sizes"] = tuple(int(s) for s in args.size.split(","))
    if args.rate is not None:
        values["rates"] = tuple(float(r) for r in args.rate.split(","))
    for key, val in (("trials", args.trials), ("seed", args.seed),
                     ("layering", args.layers),
                     ("lookahead", args.lookahead), ("out", args.out),
                     ("fmt", args.fmt)):
        if val is not None:
            values[key] = val
    compare = False
    if args.pipeline is not None:
        if args.pipeline == "both":
            compare = True
        else:
            values["pipeline"] = args.pipeline
    try:
        config = harness.ExperimentConfig(**values)
    except (ValueError, TypeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    runner = (harness.run_jit_comparison if compare
              else harness.run_threshold_experiment)
    records = runner(config)
    if not config.out:
        text = (harness.records_to_csv(records) if config.fmt == "csv"
                else harness.records_to_json(records))
        print(text, end="")
    return 0


def cmd_verify(args) -> int:
    graph, layers = _build_lattice(args)
    rng = np.random.default_rng(args.seed)
    results = {}

    hx, hz = graph.x_checks(), graph.z_checks()
    rep = gf2.verify_ball_identities(hx, hz, graph.facet_x_ops())
    results["ball_identities"] = all(v for v in rep.values()
                                     if isinstance(v, (bool, np.bool_)))

    jd = jit.JitDecoder(graph, layers)
    ok = True
    for _ in range(max(1, args.trials // 10)):
        tilde = rng.random(graph.n_edges) < 0.01
        _, ledger = jd.run(tilde)
        ok = ok and jd.verify_ledger(ledger)["ok"]
    results["ledger_identities"] = ok

    sg = decoders.SyndromeGraph.from_dual(graph)
    ok = True
    checked = 0
    while checked < args.trials:
        omega = rng.random(sg.n_edges) < 0.01
        sigma = decoders.syndrome_of(sg, omega)
        if not 0 < sigma.sum() <= 8:
            continue
        checked += 1
        a = decoders.mwpm_decode(sg, sigma)
        b = decoders.bruteforce_decode(sg, sigma)
        ok = ok and int(a.sum()) == int(b.sum())
    results["oracle_equivalence"] = ok

    status = 0
    for name, passed in results.items():
        print(f"{name}: {'pass' if passed else 'FAIL'}")
        if not passed:
            status = 1
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"build": cmd_build, "check": cmd_check, "decode": cmd_decode,
                "experiment": cmd_experiment, "verify": cmd_verify}
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
