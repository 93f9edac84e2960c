"""Just-in-time decoding: layer-by-layer syndrome commitment.

Each step estimates an error from the outcomes observed so far (open
decoder), compensates the mismatch with the previous commitment (closure
decoder on the past interface), and commits the current layer. The error
ledger records the exact per-step decomposition of the residual error, and
the confinement check verifies that residual errors stay inside connected
clusters whose size is proportional to the original error.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import colex, decoders, gf2


@dataclass
class JitState:
    """Progress of a run: last completed layer, its working chain, and the
    committed prefix (never rewritten)."""

    i: int
    gamma: np.ndarray
    committed: np.ndarray


@dataclass
class ErrorLedger:
    """Per-step error decomposition of one run.

    Lists are indexed by step (entry 0 is step 1). omega is the measurement
    error, omega_prime the per-step estimated errors, omega_eff the
    effective estimated errors, eps the compensating chains. omega_hat is
    the final effective estimated error (committed chain against the
    observed outcomes); the residual against the true syndrome is
    omega_hat + omega.
    """

    tilde_phi: np.ndarray
    phi_true: np.ndarray
    omega: np.ndarray
    omega_prime: list = field(default_factory=list)
    omega_eff: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    omega_hat: np.ndarray | None = None
    residual: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return len(self.omega_prime)


class JitDecoder:
    """Naive just-in-time pipeline over a layer structure."""

    def __init__(self, graph: colex.DualGraph, layers: colex.LayerStructure,
                 method: str = "mwpm", lookahead: int = 0,
                 alt_compensation: bool = False,
                 weights: np.ndarray | None = None):
        if lookahead < 0:
            raise ValueError("lookahead must be nonnegative")
        self.graph = graph
        self.layers = layers
        self.lookahead = lookahead
        self.alt_compensation = alt_compensation
        self.ld = decoders.LayeredDecoder(graph, layers, method=method,
                                          weights=weights)

    def step(self, state: JitState, tilde_slice: np.ndarray
             ) -> tuple[np.ndarray, JitState, dict]:
        """One commitment step.

        tilde_slice must contain no data beyond the window the step may
        read (the current layer plus lookahead); the committed chain covers
        exactly the new layer.
        """
        layers = self.layers
        i = state.i + 1
        j = min(i + self.lookahead, layers.n_layers)
        window = layers.phi(j)
        tilde_slice = np.asarray(tilde_slice, dtype=bool)
        if (tilde_slice & ~window).any():
            raise ValueError("step received outcomes beyond its window")
        part = tilde_slice & window
        # estimation: decode what has been seen, free at the interface
        gamma_p = part ^ self.ld.open_decode(j, part)
        # compensation: reconcile with the previous working chain
        if self.alt_compensation:
            chi = (state.gamma ^ gamma_p) & layers.phi(i - 1)
        else:
            chi = state.gamma ^ (gamma_p & layers.phi(i - 1))
        if i > 1 and chi.any():
            eps = self.ld.estimated_error(i - 1, chi)
        else:
            eps = np.zeros(self.graph.n_edges, dtype=bool)
        gamma = gamma_p ^ chi ^ eps
        commit = gamma & layers.lam(i)
        committed = state.committed | commit
        entry = {"gamma_prime": gamma_p, "gamma": gamma, "eps": eps}
        return commit, JitState(i, gamma, committed), entry

    def run(self, tilde_phi: np.ndarray,
            phi_true: np.ndarray | None = None
            ) -> tuple[np.ndarray, ErrorLedger]:
        """Fold steps over all layers; the result is defect-free."""
        tilde_phi = np.asarray(tilde_phi, dtype=bool)
        m = self.graph.n_edges
        if phi_true is None:
            phi_true = np.zeros(m, dtype=bool)
        else:
            phi_true = np.asarray(phi_true, dtype=bool)
        ledger = ErrorLedger(tilde_phi=tilde_phi, phi_true=phi_true,
                             omega=phi_true ^ tilde_phi)
        state = JitState(0, np.zeros(m, dtype=bool), np.zeros(m, dtype=bool))
        for i in range(1, self.layers.n_layers + 1):
            j = min(i + self.lookahead, self.layers.n_layers)
            _, state, entry = self.step(state, tilde_phi & self.layers.phi(j))
            obs = tilde_phi & self.layers.phi(i)
            ledger.omega_prime.append(entry["gamma_prime"] ^ obs)
            ledger.omega_eff.append(entry["gamma"] ^ obs)
            ledger.eps.append(entry["eps"])
        phi_hat = state.committed
        ledger.omega_hat = tilde_phi ^ phi_hat
        ledger.residual = phi_true ^ phi_hat
        if decoders.syndrome_of(self.ld.full, phi_hat).any():
            raise RuntimeError("committed chain has residual defects")
        return phi_hat, ledger

    # ledger verification ----------------------------------------------------

    def verify_ledger(self, ledger: ErrorLedger) -> dict:
        """Exact per-run identities of the error decomposition."""
        layers = self.layers
        n = ledger.n_steps
        m = self.graph.n_edges
        report = {"residual_sum": True, "recursion": True,
                  "eps_from_estimates": True}
        acc = np.zeros(m, dtype=bool)
        prev_eff = np.zeros(m, dtype=bool)
        prev_est = np.zeros(m, dtype=bool)
        for idx in range(n):
            i = idx + 1
            w_p = ledger.omega_prime[idx]
            w_e = ledger.omega_eff[idx]
            eps = ledger.eps[idx]
            acc ^= (w_p & layers.lam(i)) ^ eps
            if not np.array_equal(w_e, prev_eff ^ (w_p & layers.lam(i)) ^ eps):
                report["recursion"] = False
            # compensation depends only on consecutive estimated errors
            arg = prev_est ^ (w_p & layers.phi(i - 1))
            if i > 1 and arg.any():
                want = self.ld.estimated_error(i - 1, arg)
            else:
                want = np.zeros(m, dtype=bool)
            if not np.array_equal(eps, want):
                report["eps_from_estimates"] = False
            prev_eff = w_e
            prev_est = w_p
        if not (np.array_equal(acc, ledger.omega_hat)
                and np.array_equal(prev_eff, ledger.omega_hat)):
            report["residual_sum"] = False
        report["ok"] = all(report.values())
        return report

    # confinement ------------------------------------------------------------

    def confinement_check(self, ledger: ErrorLedger, k_min: float,
                          k_close: float) -> dict:
        """Residual-error confinement: connected clusters built from the
        per-step errors, their closures and compensations must contain the
        residual error and have size at most c times their overlap with the
        original error, c = 2 k_min (k_min k_close + 1) + 1.
        """
        layers = self.layers
        m = self.graph.n_edges
        c = 2 * k_min * (k_min * k_close + 1) + 1
        cover = np.zeros(m, dtype=bool)
        prev_est = np.zeros(m, dtype=bool)
        for idx in range(ledger.n_steps):
            i = idx + 1
            w_p = ledger.omega_prime[idx]
            delta = prev_est ^ (w_p & layers.phi(i - 1))
            big = ledger.eps[idx] | prev_est | w_p | ledger.omega
            mu = np.zeros(m, dtype=bool)
            if i > 1 and delta.any():
                for comp in _inner_components(self.graph, np.nonzero(big)[0]):
                    piece = np.zeros(m, dtype=bool)
                    piece[comp] = True
                    piece &= delta
                    if piece.any():
                        mu ^= self.ld.estimated_error(i - 1, piece)
            cover |= big | mu
            prev_est = w_p
        violations = []
        covered = (not (ledger.omega_hat & ~cover).any()
                   and not (ledger.residual & ~cover).any())
        for comp in _inner_components(self.graph, np.nonzero(cover)[0]):
            overlap = int(ledger.omega[comp].sum())
            if len(comp) > c * overlap:
                violations.append({"size": len(comp), "overlap": overlap})
        return {"c": c, "covered": covered, "violations": violations,
                "ok": covered and not violations}


def _inner_components(graph: colex.DualGraph, edge_ids) -> list[list[int]]:
    """Connected components of a face-edge set; edges touch only through
    shared cells (boundary edges have a single effective endpoint)."""
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
        for v in graph.edges[e]:
            v = int(v)
            if v >= graph.n_inner:
                continue
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


# --- outputs ----------------------------------------------------------------

def differential_syndrome(phi_hat: np.ndarray,
                          phi_bar: np.ndarray) -> np.ndarray:
    """Disagreement between the committed and the conventionally decoded
    syndromes; its support behaves like erasure noise downstream."""
    return np.asarray(phi_hat, dtype=bool) ^ np.asarray(phi_bar, dtype=bool)


def residual_frame_error(graph: colex.DualGraph, phi_true: np.ndarray,
                         phi_corrected: np.ndarray
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Effective frame error between the true and corrected syndromes.

    Returns the flux difference and one X mask whose syndrome equals it;
    raises InfeasibleSyndrome when either input is not a code syndrome.
    """
    hz = graph.z_checks()
    diff = (np.asarray(phi_true, dtype=bool)
            ^ np.asarray(phi_corrected, dtype=bool))
    try:
        x = gf2.solve(hz, diff.astype(np.uint8))
    except gf2.NoSolution:
        raise gf2.InfeasibleSyndrome(
            "difference is not the syndrome of any error") from None
    return diff, x
