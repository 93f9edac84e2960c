"""Monte Carlo experiment driver.

Threshold experiments for the charge decoder (conventional and layered
commitment pipelines), side-by-side comparison with differential-syndrome
statistics, and versioned CSV/JSON result records. All randomness derives
from one master seed per experiment, per-trial streams keyed by
(size index, rate index, trial index), so records are reproducible
bit-for-bit regardless of execution order.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import colex, decoders, jit

RESULTS_VERSION = 1
CSV_COLUMNS = ["pipeline", "d", "p", "trials", "failures", "mean_delta",
               "mean_omega_hat", "ledger_violations",
               "confinement_violations", "wall_clock"]


@dataclass
class ExperimentConfig:
    family: str = "slab"
    layering: str = "z"
    sizes: tuple = (2, 3, 4)
    rates: tuple = (0.005,)
    trials: int = 1000
    seed: int = 0
    decoder: str = "mwpm"
    pipeline: str = "conventional"
    lookahead: int = 0
    confinement: bool = False
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        self.sizes = tuple(int(d) for d in self.sizes)
        self.rates = tuple(float(p) for p in self.rates)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.pipeline not in ("conventional", "jit"):
            raise ValueError(f"unknown pipeline {self.pipeline!r}")
        if self.fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {self.fmt!r}")
        for p in self.rates:
            if not 0.0 <= p <= 1.0:
                raise ValueError("rates must lie in [0, 1]")
        for d in self.sizes:
            if d < 2:
                raise ValueError("sizes must be at least 2")


@dataclass
class ResultRecord:
    pipeline: str
    d: int
    p: float
    trials: int
    failures: int
    mean_delta: float
    mean_omega_hat: float
    ledger_violations: int
    confinement_violations: int
    wall_clock: float

    def __post_init__(self):
        if self.failures > self.trials:
            raise ValueError("failures exceed trials")


class _Instance:
    """Per-size decoding context shared across rates and trials."""

    def __init__(self, config: ExperimentConfig, d: int):
        self.d = d
        self.graph, self.layers = colex.build_lattice(
            config.family, d=d, layering=config.layering)
        g = self.graph
        self.sg = decoders.SyndromeGraph.from_dual(g)
        # noise lives on faces; edges joining two outer vertices are not
        # measured objects
        self.face = ~((g.edges[:, 0] >= g.n_inner)
                      & (g.edges[:, 1] >= g.n_inner))
        self.jd = jit.JitDecoder(g, self.layers, method=config.decoder,
                                 lookahead=config.lookahead)
        self.inner_adj = _inner_adjacency(g)
        # failure needs the chain endpoints separated by the inter-facet
        # scale; anything shorter is a near-ridge event where the two
        # boundary points are close
        self.separation = max(d, 2 * (d - 1))
        self.k_close = None
        if config.confinement:
            self.k_close = colex.check_closure_geometry(self.layers)["k_close"]

    def conventional(self, omega: np.ndarray) -> np.ndarray:
        sigma = decoders.syndrome_of(self.sg, omega)
        if self.jd.ld.method == "bruteforce":
            return decoders.bruteforce_decode(self.sg, sigma)
        return decoders.mwpm_decode(self.sg, sigma)


def _trial_rng(seed: int, di: int, pi: int, t: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(di, pi, t)))


def _inner_adjacency(graph: colex.DualGraph) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(graph.n_inner)]
    for u, v in graph.edges:
        u, v = int(u), int(v)
        if u < graph.n_inner and v < graph.n_inner:
            adj[u].append(v)
            adj[v].append(u)
    return adj


def residual_separation(graph: colex.DualGraph, inner_adj: list[list[int]],
                        residual: np.ndarray) -> int:
    """Largest boundary-point separation the residual chain achieves.

    Each connected piece of the residual (edges touch through inner
    vertices; outer vertices absorb) collects its boundary attachment
    vertices, the inner endpoints of its boundary edges. The separation of
    a piece is the largest inner-lattice distance between two of its
    attachments; -1 when no piece reaches the boundary twice.
    """
    ids = [int(e) for e in np.nonzero(residual)[0]]
    worst = -1
    for comp in jit._inner_components(graph, ids):
        attach: set[int] = set()
        for e in comp:
            u, v = (int(x) for x in graph.edges[e])
            if u >= graph.n_inner and v < graph.n_inner:
                attach.add(v)
            if v >= graph.n_inner and u < graph.n_inner:
                attach.add(u)
        points = sorted(attach)
        for i, a in enumerate(points[:-1]):
            dist = {a: 0}
            queue = [a]
            remaining = set(points[i + 1:])
            while queue and remaining:
                nxt = []
                for u in queue:
                    if u in remaining:
                        worst = max(worst, dist[u])
                        remaining.discard(u)
                    for w in inner_adj[u]:
                        if w not in dist:
                            dist[w] = dist[u] + 1
                            nxt.append(w)
                queue = nxt
    return worst


def is_logical_failure(graph: colex.DualGraph, inner_adj: list[list[int]],
                       residual: np.ndarray, separation: int) -> bool:
    """True when the residual chain connects two outer vertices whose
    boundary points sit at least `separation` apart in the lattice metric.

    Explicit search on the chain: a connected piece must touch the
    boundary at two attachment points that far apart. Near-ridge
    connections between adjacent facets have close attachment points and
    do not count.
    """
    if not residual.any():
        return False
    return residual_separation(graph, inner_adj, residual) >= separation


def run_threshold_experiment(config: ExperimentConfig) -> list[ResultRecord]:
    """Failure statistics over the (size, rate) grid for one pipeline."""
    records = []
    for di, d in enumerate(config.sizes):
        inst = _Instance(config, d)
        for pi, p in enumerate(config.rates):
            records.append(_run_point(config, inst, di, d, pi, p))
    if config.out:
        write_records(records, config.out, config.fmt)
    return records


def _run_point(config: ExperimentConfig, inst: _Instance, di: int, d: int,
               pi: int, p: float) -> ResultRecord:
    g = inst.graph
    failures = 0
    ledger_bad = 0
    confinement_bad = 0
    sum_delta = 0
    sum_hat = 0
    t0 = time.time()
    for t in range(config.trials):
        rng = _trial_rng(config.seed, di, pi, t)
        omega = (rng.random(g.n_edges) < p) & inst.face
        if config.pipeline == "jit":
            phi_hat, ledger = inst.jd.run(omega)
            # the committed chain is the corrected syndrome; against the
            # noiseless true syndrome it is itself the residual error
            residual = phi_hat
            if not inst.jd.verify_ledger(ledger)["ok"]:
                ledger_bad += 1
            if config.confinement:
                rep = inst.jd.confinement_check(ledger, 2.0, inst.k_close)
                if not rep["ok"]:
                    confinement_bad += 1
            conv = inst.conventional(omega)
            sum_delta += int(jit.differential_syndrome(
                phi_hat, omega ^ conv).sum())
            sum_hat += int(ledger.omega_hat.sum())
        else:
            estimate = inst.conventional(omega)
            residual = omega ^ estimate
            sum_hat += int(residual.sum())
        if is_logical_failure(g, inst.inner_adj, residual, inst.separation):
            failures += 1
    return ResultRecord(
        pipeline=config.pipeline, d=d, p=p, trials=config.trials,
        failures=failures,
        mean_delta=sum_delta / config.trials,
        mean_omega_hat=sum_hat / config.trials,
        ledger_violations=ledger_bad,
        confinement_violations=confinement_bad,
        wall_clock=time.time() - t0)


def run_jit_comparison(config: ExperimentConfig) -> list[ResultRecord]:
    """Both pipelines on identical noise, with differential statistics."""
    records = []
    for pipeline in ("conventional", "jit"):
        sub = ExperimentConfig(**{**asdict(config), "pipeline": pipeline,
                                  "out": None})
        records.extend(run_threshold_experiment(sub))
    if config.out:
        write_records(records, config.out, config.fmt)
    return records


def records_equal(a: list[ResultRecord], b: list[ResultRecord]) -> bool:
    """Bit-for-bit equality of every statistical field; wall-clock is the
    one field that cannot reproduce and is excluded."""
    if len(a) != len(b):
        return False
    skip = {"wall_clock"}
    for ra, rb in zip(a, b):
        da, db = asdict(ra), asdict(rb)
        if any(da[k] != db[k] for k in da if k not in skip):
            return False
    return True


def wilson_interval(failures: int, trials: int,
                    z: float = 1.96) -> tuple[float, float]:
    """95% score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    phat = failures / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * np.sqrt(phat * (1 - phat) / trials
                                 + z * z / (4 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


# --- persistence ------------------------------------------------------------

def records_to_csv(records: list[ResultRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow([f"v{RESULTS_VERSION}"] + CSV_COLUMNS)
    for r in records:
        d = asdict(r)
        w.writerow([""] + [d[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def records_to_json(records: list[ResultRecord]) -> str:
    return json.dumps({"version": RESULTS_VERSION,
                       "records": [asdict(r) for r in records]})


def records_from_json(text: str) -> list[ResultRecord]:
    doc = json.loads(text)
    if doc.get("version") != RESULTS_VERSION:
        raise ValueError("unsupported results version")
    return [ResultRecord(**r) for r in doc["records"]]


def write_records(records: list[ResultRecord], path: str, fmt: str) -> None:
    text = records_to_csv(records) if fmt == "csv" else records_to_json(records)
    with open(path, "w") as fh:
        fh.write(text)


# --- configuration files ----------------------------------------------------

_LIST_KEYS = {"sizes", "rates"}
_INT_KEYS = {"trials", "seed", "lookahead"}
_BOOL_KEYS = {"confinement"}


def parse_config(text: str) -> ExperimentConfig:
    """Flat key = value format; lists comma-separated; # comments."""
    values: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"bad config line: {raw!r}")
        key, val = key.strip(), val.strip()
        if key in _LIST_KEYS:
            values[key] = tuple(v.strip() for v in val.split(",") if v.strip())
        elif key in _INT_KEYS:
            values[key] = int(val)
        elif key in _BOOL_KEYS:
            values[key] = val.lower() in ("1", "true", "yes")
        else:
            values[key] = val
    unknown = set(values) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**values)
