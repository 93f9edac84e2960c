"""Dense GF(2) linear algebra and binary-symplectic Pauli bookkeeping.

Vectors are 1-D numpy uint8 arrays with entries in {0,1}; matrices are 2-D.
Pauli operators are tracked mod phase as (x, z) bit-mask pairs; a generator
matrix is a pair of row-aligned X and Z matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np


class NoSolution(Exception):
    """Raised when a linear system has no solution over GF(2)."""


class InfeasibleSyndrome(Exception):
    """Raised when no Pauli frame matches the requested partial syndrome."""


def as_gf2(a) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(a))
    return (arr & 1).astype(np.uint8)


def zeros(n: int) -> np.ndarray:
    return np.zeros(n, dtype=np.uint8)


def _rref(mat: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form; returns (rref matrix, pivot column list)."""
    m = as_gf2(mat).copy()
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        hit = np.nonzero(m[r:, c])[0]
        if hit.size == 0:
            continue
        p = r + hit[0]
        if p != r:
            m[[r, p]] = m[[p, r]]
        other = np.nonzero(m[:, c])[0]
        other = other[other != r]
        if other.size:
            m[other] ^= m[r]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(mat: np.ndarray) -> int:
    if mat.size == 0:
        return 0
    _, pivots = _rref(mat)
    return len(pivots)


def solve(a: np.ndarray, b: np.ndarray, free_values: np.ndarray | None = None) -> np.ndarray:
    """Return one x with a @ x = b over GF(2); raise NoSolution otherwise.

    Free (non-pivot) variables take the corresponding entries of
    ``free_values`` when given, else zero.
    """
    a = as_gf2(a)
    if a.ndim != 2:
        a = a.reshape(1, -1)
    b = as_gf2(b)
    rows, cols = a.shape
    if b.shape != (rows,):
        raise ValueError("dimension mismatch between matrix and rhs")
    aug = np.concatenate([a, b.reshape(-1, 1)], axis=1)
    red, pivots = _rref(aug)
    if cols in pivots:
        raise NoSolution("rhs outside the column space")
    x = zeros(cols)
    if free_values is not None:
        free_values = as_gf2(free_values)
        pivot_set = set(pivots)
        for c in range(cols):
            if c not in pivot_set:
                x[c] = free_values[c]
    for i in range(len(pivots) - 1, -1, -1):
        c = pivots[i]
        val = red[i, cols]
        row = red[i, :cols].copy()
        row[c] = 0
        val ^= int(row @ x) & 1
        x[c] = val
    return x


def nullspace(mat: np.ndarray) -> np.ndarray:
    """Basis (as rows) of {x : mat @ x = 0} over GF(2)."""
    a = as_gf2(mat)
    if a.ndim != 2:
        a = a.reshape(1, -1)
    rows, cols = a.shape
    red, pivots = _rref(a)
    pivot_set = set(pivots)
    free_cols = [c for c in range(cols) if c not in pivot_set]
    basis = np.zeros((len(free_cols), cols), dtype=np.uint8)
    for k, fc in enumerate(free_cols):
        basis[k, fc] = 1
        for i, pc in enumerate(pivots):
            basis[k, pc] = red[i, fc]
    return basis


def row_space_contains(mat: np.ndarray, vec: np.ndarray) -> bool:
    mat = as_gf2(mat)
    vec = as_gf2(vec)
    if mat.size == 0:
        return not vec.any()
    return rank(np.vstack([mat, vec])) == rank(mat)


def row_space_leq(a: np.ndarray, b: np.ndarray) -> bool:
    """True iff row space of a is contained in row space of b."""
    a = np.atleast_2d(as_gf2(a))
    b = np.atleast_2d(as_gf2(b))
    if a.size == 0:
        return True
    if b.size == 0:
        return not a.any()
    return rank(np.vstack([b, a])) == rank(b)


def row_space_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return row_space_leq(a, b) and row_space_leq(b, a)


def enumerate_span(gens: np.ndarray):
    """Yield every GF(2) combination of the given generator rows."""
    gens = np.atleast_2d(as_gf2(gens))
    k, n = gens.shape
    for bits in product((0, 1), repeat=k):
        v = zeros(n)
        for i, bit in enumerate(bits):
            if bit:
                v ^= gens[i]
        yield v


def dump_matrix(mat: np.ndarray) -> str:
    """Plain-text 0/1 grid, for debugging."""
    mat = np.atleast_2d(as_gf2(mat))
    return "\n".join("".join(str(int(v)) for v in row) for row in mat)


# --- Pauli layer ------------------------------------------------------------

@dataclass(frozen=True)
class PauliXZ:
    """A Pauli operator mod phase: X and Z support masks over the qubits."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_gf2(self.x))
        object.__setattr__(self, "z", as_gf2(self.z))
        if self.x.shape != self.z.shape:
            raise ValueError("x and z masks must have equal length")

    @property
    def n(self) -> int:
        return self.x.size

    def __mul__(self, other: "PauliXZ") -> "PauliXZ":
        return PauliXZ(self.x ^ other.x, self.z ^ other.z)

    def commutes(self, other: "PauliXZ") -> bool:
        return (int(self.x @ other.z) + int(self.z @ other.x)) % 2 == 0

    def support(self) -> np.ndarray:
        return (self.x | self.z).astype(bool)


@dataclass(frozen=True)
class GeneratorMatrix:
    """Generators of a Pauli subgroup: row-aligned X and Z matrices."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(as_gf2(self.x))
        z = np.atleast_2d(as_gf2(self.z))
        if x.shape != z.shape:
            raise ValueError("x and z blocks must have equal shape")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def k(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @classmethod
    def x_type(cls, x: np.ndarray) -> "GeneratorMatrix":
        x = np.atleast_2d(as_gf2(x))
        return cls(x, np.zeros_like(x))

    @classmethod
    def z_type(cls, z: np.ndarray) -> "GeneratorMatrix":
        z = np.atleast_2d(as_gf2(z))
        return cls(np.zeros_like(z), z)

    @classmethod
    def empty(cls, n: int) -> "GeneratorMatrix":
        return cls(np.zeros((0, n), dtype=np.uint8), np.zeros((0, n), dtype=np.uint8))

    def symplectic(self) -> np.ndarray:
        """Rows as [x | z] blocks."""
        return np.concatenate([self.x, self.z], axis=1)

    def row(self, i: int) -> PauliXZ:
        return PauliXZ(self.x[i], self.z[i])

    def rank(self) -> int:
        if self.k == 0:
            return 0
        return rank(self.symplectic())

    def elements(self):
        """Every element of the generated group (use only for small k)."""
        for v in enumerate_span(self.symplectic()):
            yield PauliXZ(v[: self.n], v[self.n:])

    def contains(self, p: PauliXZ) -> bool:
        vec = np.concatenate([p.x, p.z])
        if self.k == 0:
            return not vec.any()
        return row_space_contains(self.symplectic(), vec)

    def same_group(self, other: "GeneratorMatrix") -> bool:
        return row_space_equal(self.symplectic(), other.symplectic())


def support_subgroup(a: GeneratorMatrix, r: np.ndarray) -> GeneratorMatrix:
    """Generators of the subgroup of a with support inside the mask r.

    Computed as the kernel of the restriction-to-complement map on the
    generator coefficients.
    """
    r = np.asarray(r, dtype=bool)
    if r.size != a.n:
        raise ValueError("region mask length mismatch")
    outside = ~r
    if a.k == 0:
        return GeneratorMatrix.empty(a.n)
    comp = np.concatenate([a.x[:, outside], a.z[:, outside]], axis=1)
    if comp.shape[1] == 0:
        lam = np.eye(a.k, dtype=np.uint8)
    else:
        lam = nullspace(comp.T)
    if lam.shape[0] == 0:
        return GeneratorMatrix.empty(a.n)
    return GeneratorMatrix((lam @ a.x) % 2, (lam @ a.z) % 2)


def restriction(a: GeneratorMatrix, r: np.ndarray) -> GeneratorMatrix:
    """Truncate each generator to the masked qubits (column selection)."""
    r = np.asarray(r, dtype=bool)
    return GeneratorMatrix(a.x[:, r], a.z[:, r])


def centralizer(a: GeneratorMatrix) -> GeneratorMatrix:
    """Generators of the full-group centralizer Z(a): kernel of the
    symplectic form against the rows of a."""
    n = a.n
    if a.k == 0:
        eye = np.eye(n, dtype=np.uint8)
        zero = np.zeros((n, n), dtype=np.uint8)
        return GeneratorMatrix(np.vstack([eye, zero]), np.vstack([zero, eye]))
    form = np.concatenate([a.z, a.x], axis=1)  # pairs (x|z) against (z|x)
    basis = nullspace(form)
    return GeneratorMatrix(basis[:, :n], basis[:, n:])


def centralizer_on_region(a: GeneratorMatrix, r: np.ndarray) -> GeneratorMatrix:
    """Centralizer of a within the Pauli group supported on the mask r."""
    r = np.asarray(r, dtype=bool)
    n = a.n
    idx = np.nonzero(r)[0]
    m = idx.size
    if a.k == 0:
        form = np.zeros((0, 2 * m), dtype=np.uint8)
    else:
        form = np.concatenate([a.z[:, idx], a.x[:, idx]], axis=1)
    basis = nullspace(form) if form.shape[1] else np.zeros((0, 0), dtype=np.uint8)
    x = np.zeros((basis.shape[0], n), dtype=np.uint8)
    z = np.zeros((basis.shape[0], n), dtype=np.uint8)
    x[:, idx] = basis[:, :m]
    z[:, idx] = basis[:, m:]
    return GeneratorMatrix(x, z)


def x_centralizer_of_z(hz: np.ndarray) -> np.ndarray:
    """X masks commuting with every Z-type row of hz (as a basis matrix)."""
    hz = np.atleast_2d(as_gf2(hz))
    return nullspace(hz)


def syndrome_map(hz: np.ndarray, x_mask: np.ndarray) -> np.ndarray:
    """Z-check syndrome bits of an X operator: hz @ x mod 2."""
    hz = np.atleast_2d(as_gf2(hz))
    return (hz @ as_gf2(x_mask)) % 2


def conjugate_x_through_cp(x_mask: np.ndarray, cp_adj: np.ndarray) -> np.ndarray:
    """Z mask acquired by an X mask conjugated through a CP-gate circuit.

    cp_adj is the symmetric adjacency matrix of the gate pairs; each gate on
    (a, b) maps X_a to X_a Z_b and X_b to X_b Z_a.
    """
    cp_adj = np.atleast_2d(as_gf2(cp_adj))
    return (cp_adj @ as_gf2(x_mask)) % 2


# --- Piecewise frame solving ------------------------------------------------

class PiecewiseFrameSolver:
    """Solves for an X frame layer by layer against partial Z-syndrome data.

    Step i receives generators of the Z-stabilizer subgroup supported in the
    region R_i together with their target syndrome bits, and extends the
    frame on the new qubits only; the part fixed at earlier steps is never
    rewritten, so earlier eliminations are reused as plain consistency
    checks.
    """

    def __init__(self, n: int):
        self.n = n
        self.region = np.zeros(n, dtype=bool)
        self.x = zeros(n)

    def step(self, gens_z: np.ndarray, phi: np.ndarray, region: np.ndarray,
             free_values: np.ndarray | None = None) -> np.ndarray:
        gens_z = np.atleast_2d(as_gf2(gens_z))
        phi = as_gf2(phi) if np.asarray(phi).size else zeros(0)
        region = np.asarray(region, dtype=bool)
        if region.size != self.n:
            raise ValueError("region mask length mismatch")
        if (self.region & ~region).any():
            raise ValueError("regions must be nested")
        if gens_z.shape[0] != phi.size:
            raise ValueError("one syndrome bit per generator required")
        if gens_z.shape[0] and (gens_z[:, ~region] != 0).any():
            raise ValueError("generator support outside the region")
        new = region & ~self.region
        new_idx = np.nonzero(new)[0]
        if gens_z.shape[0]:
            rhs = (phi ^ (gens_z[:, self.region] @ self.x[self.region])) % 2
            a = gens_z[:, new_idx]
            fv = None
            if free_values is not None:
                fv = as_gf2(free_values)[new_idx]
            try:
                sol = solve(a, rhs, free_values=fv)
            except NoSolution as exc:
                raise InfeasibleSyndrome(
                    "no frame extension matches the requested syndrome"
                ) from exc
            self.x[new_idx] = sol
        elif free_values is not None:
            self.x[new_idx] = as_gf2(free_values)[new_idx]
        self.region = region.copy()
        return self.x.copy()


def piecewise_frame_step(s_z: GeneratorMatrix, r_i: np.ndarray, phi_i: np.ndarray,
                         q_prev: PauliXZ | None = None,
                         r_prev: np.ndarray | None = None,
                         free_values: np.ndarray | None = None) -> PauliXZ:
    """Single stateless step: extend q_prev (fixed on the previous region
    r_prev) to the region r_i so that the syndrome over the generators of
    s_z supported in r_i equals phi_i."""
    r_i = np.asarray(r_i, dtype=bool)
    n = s_z.n
    solver = PiecewiseFrameSolver(n)
    if q_prev is not None:
        prev_mask = q_prev.support() if r_prev is None else np.asarray(r_prev, bool)
        if (prev_mask & ~r_i).any():
            raise ValueError("previous frame must live inside the new region")
        if (q_prev.support() & ~prev_mask).any():
            raise ValueError("previous frame must live inside its region")
        solver.region = prev_mask.copy()
        solver.x = q_prev.x.copy()
    gens = support_subgroup(s_z, r_i)
    if gens.x.any():
        raise ValueError("expected a Z-type stabilizer group")
    x = solver.step(gens.z, phi_i, r_i, free_values=free_values)
    return PauliXZ(x, zeros(n))


# --- Row-space identity reports --------------------------------------------

def verify_restriction_identity(a: GeneratorMatrix, r: np.ndarray) -> bool:
    """Check Z(A)|_r = Z_r(A||_r) as an equality of symplectic row spaces."""
    r = np.asarray(r, dtype=bool)
    lhs = restriction(centralizer(a), r)
    rhs = restriction(centralizer_on_region(support_subgroup(a, r), r), r)
    return lhs.same_group(rhs)


def verify_ball_identities(hx: np.ndarray, hz: np.ndarray, facet_x: np.ndarray,
                           sub_qubits: np.ndarray | None = None,
                           hz_sub: np.ndarray | None = None) -> dict:
    """Row-space identity report for a code given as X/Z check matrices.

    First identity: the X-type centralizer of the Z stabilizers equals the
    group generated by the X stabilizers together with the facet operators.
    Second identity (when a sub-region is given): the Z stabilizers supported
    inside the region coincide with the Z stabilizers of the sub-code.
    """
    hx = np.atleast_2d(as_gf2(hx))
    hz = np.atleast_2d(as_gf2(hz))
    facet_x = np.atleast_2d(as_gf2(facet_x))
    cz = x_centralizer_of_z(hz)
    first = row_space_equal(cz, np.vstack([hx, facet_x]))
    report = {"x_centralizer_matches": bool(first)}
    if sub_qubits is not None and hz_sub is not None:
        sub_qubits = np.asarray(sub_qubits, dtype=bool)
        grp = support_subgroup(GeneratorMatrix.z_type(hz), sub_qubits)
        kept = grp.z[:, sub_qubits]
        hz_sub = np.atleast_2d(as_gf2(hz_sub))
        report["support_subgroup_matches"] = bool(row_space_equal(kept, hz_sub))
    return report
