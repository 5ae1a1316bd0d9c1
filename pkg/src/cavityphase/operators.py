"""Sparse operator and Hamiltonian matrices on symmetry-reduced bases.

Matrix elements follow the standard ladder conventions a|nu> = sqrt(nu)|nu-1>
and J+-|j,m> = sqrt(j(j+1) - m(m+-1))|j,m+-1>.  Three-level collective
operators are realised on the totally symmetric irrep through the occupation
numbers (n1, n2, n3) = (r, q-r, N-q): A_ij moves one atom from level j to
level i with amplitude sqrt((n_i + 1) n_j), and A_ii counts n_i.

Composite Hamiltonian terms are applied label-to-label, so a sector-block
matrix equals the restriction of the full-basis matrix to the block's rows
and columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import (
    Basis,
    ModelError,
    ModelKind,
    ModelSpec,
    RWA3_KINDS,
    label_excitation,
)


@dataclass(frozen=True)
class OperatorMatrix:
    """Sparse complex matrix tied to a Basis."""

    entries: sp.csr_matrix
    basis: Basis

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()

    def hermiticity_defect(self) -> float:
        d = self.entries - self.entries.getH()
        return 0.0 if d.nnz == 0 else float(np.abs(d.data).max())


# --- elementary label maps -------------------------------------------------
# Each returns a list of (target_label, amplitude) pairs.


def _apply_a(spec, lab):
    nu = lab[0]
    return [((nu - 1,) + lab[1:], math.sqrt(nu))] if nu > 0 else []


def _apply_adag(spec, lab):
    nu = lab[0]
    return [((nu + 1,) + lab[1:], math.sqrt(nu + 1.0))]


def _apply_nph(spec, lab):
    return [(lab, float(lab[0]))]


def _apply_jz(spec, lab):
    return [(lab, lab[1] / 2.0)]


def _apply_jpm(spec, lab, sign):
    j = spec.n_atoms / 2.0
    m = lab[1] / 2.0
    m2 = m + sign
    if abs(m2) > j:
        return []
    amp = math.sqrt(j * (j + 1.0) - m * (m + sign))
    return [((lab[0], lab[1] + 2 * sign), amp)]


def _occupations(spec, lab):
    _, q, r = lab
    return (r, q - r, spec.n_atoms - q)


def _label_from_occ(nu, occ):
    n1, n2, _ = occ
    return (nu, n1 + n2, n1)


def _apply_aij(spec, lab, i, j):
    """A_ij = b_i^dag b_j on the symmetric irrep (one atom from level j to i)."""
    occ = list(_occupations(spec, lab))
    if i == j:
        return [(lab, float(occ[i - 1]))]
    if occ[j - 1] == 0:
        return []
    amp = math.sqrt((occ[i - 1] + 1.0) * occ[j - 1])
    occ[i - 1] += 1
    occ[j - 1] -= 1
    return [(_label_from_occ(lab[0], occ), amp)]


def _apply_product(spec, ops, lab):
    """Apply a product of elementary maps, rightmost factor first."""
    current = [(lab, 1.0)]
    for op in reversed(ops):
        nxt = []
        for l, amp in current:
            for l2, a2 in op(spec, l):
                nxt.append((l2, amp * a2))
        current = nxt
    return current


def _matrix_from_terms(basis: Basis, terms) -> sp.csr_matrix:
    """terms: iterable of (coefficient, [elementary ops]) applied to each column."""
    index = basis.index()
    rows, cols, vals = [], [], []
    spec = basis.model
    for col, lab in enumerate(basis.labels):
        for coeff, ops in terms:
            for target, amp in _apply_product(spec, ops, lab):
                row = index.get(target)
                if row is not None:
                    rows.append(row)
                    cols.append(col)
                    vals.append(coeff * amp)
    dim = basis.dimension
    mat = sp.coo_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(dim, dim)
    )
    return mat.tocsr()


def _parse_aij(op_id: str):
    if len(op_id) == 4 and op_id.startswith("A_"):
        i, j = int(op_id[2]), int(op_id[3])
        if 1 <= i <= 3 and 1 <= j <= 3:
            return i, j
    return None


def operator_matrix(op_id: str, basis: Basis) -> OperatorMatrix:
    """Matrix of a named operator on the given basis.

    Supported ids: a, a_dag, n_ph, q, p, J_z, J_x, J_y, J_plus, J_minus,
    A_ij (e.g. "A_12"), Lambda_hat, M_hat, parity.
    """
    spec = basis.model
    two = spec.is_two_level
    sq2 = math.sqrt(2.0)

    if op_id == "a":
        terms = [(1.0, [_apply_a])]
    elif op_id == "a_dag":
        terms = [(1.0, [_apply_adag])]
    elif op_id == "n_ph":
        terms = [(1.0, [_apply_nph])]
    elif op_id == "q":
        terms = [(1.0 / sq2, [_apply_a]), (1.0 / sq2, [_apply_adag])]
    elif op_id == "p":
        terms = [(1j / sq2, [_apply_adag]), (-1j / sq2, [_apply_a])]
    elif op_id in ("J_z", "J_plus", "J_minus", "J_x", "J_y", "Lambda_hat"):
        if not two:
            raise ModelError(f"{op_id} is not defined for three-level models")
        jp = lambda s, l: _apply_jpm(s, l, +1)
        jm = lambda s, l: _apply_jpm(s, l, -1)
        if op_id == "J_z":
            terms = [(1.0, [_apply_jz])]
        elif op_id == "J_plus":
            terms = [(1.0, [jp])]
        elif op_id == "J_minus":
            terms = [(1.0, [jm])]
        elif op_id == "J_x":
            terms = [(0.5, [jp]), (0.5, [jm])]
        elif op_id == "J_y":
            terms = [(-0.5j, [jp]), (0.5j, [jm])]
        else:  # Lambda_hat = j + J_z + n_ph on the symmetric irrep
            j = spec.n_atoms / 2.0
            lam = lambda s, l: [(l, l[0] + l[1] / 2.0 + j)]
            terms = [(1.0, [lam])]
    elif op_id == "M_hat":
        if two:
            raise ModelError("M_hat is defined for three-level models only")
        mh = lambda s, l: [(l, float(label_excitation(s, l)))]
        terms = [(1.0, [mh])]
    elif op_id == "parity":
        par = lambda s, l: [(l, float((-1) ** label_excitation(s, l)))]
        terms = [(1.0, [par])]
    elif (ij := _parse_aij(op_id)) is not None:
        if two:
            raise ModelError(f"{op_id} is not defined for two-level models")
        i, j = ij
        terms = [(1.0, [lambda s, l, i=i, j=j: _apply_aij(s, l, i, j)])]
    else:
        raise ModelError(f"unknown operator id {op_id!r}")

    return OperatorMatrix(_matrix_from_terms(basis, terms), basis)


def _hamiltonian_terms(spec: ModelSpec):
    n = spec.n_atoms
    sqn = math.sqrt(n)
    jp = lambda s, l: _apply_jpm(s, l, +1)
    jm = lambda s, l: _apply_jpm(s, l, -1)

    if spec.kind is ModelKind.TCM:
        # intrinsic (per-particle) normalisation, as printed
        g = spec.gamma / (sqn * n)
        return [
            (spec.field_freq / n, [_apply_nph]),
            (spec.omega_a / n, [_apply_jz]),
            (g, [_apply_adag, jm]),
            (g, [_apply_a, jp]),
        ]
    if spec.kind is ModelKind.DICKE:
        g = spec.gamma / sqn
        return [
            (spec.field_freq, [_apply_nph]),
            (spec.omega_a, [_apply_jz]),
            (g, [_apply_adag, jm]),
            (g, [_apply_a, jp]),
            (g, [_apply_adag, jp]),
            (g, [_apply_a, jm]),
        ]

    terms = [(spec.field_freq, [_apply_nph])]
    for lvl in (1, 2, 3):
        w = spec.level_freqs[lvl - 1]
        if w != 0.0:
            terms.append(
                (w, [lambda s, l, i=lvl: _apply_aij(s, l, i, i)])
            )
    pairs = [(1, 2), (1, 3), (2, 3)]
    for i, j in pairs:
        mu = spec.mu(i, j)
        if mu == 0.0:
            continue
        c = -mu / sqn
        up = lambda s, l, i=i, j=j: _apply_aij(s, l, j, i)   # A_ji, level i -> j
        down = lambda s, l, i=i, j=j: _apply_aij(s, l, i, j)  # A_ij, level j -> i
        if spec.kind in RWA3_KINDS:
            terms.append((c, [_apply_a, up]))
            terms.append((c, [_apply_adag, down]))
        else:
            terms.append((c, [_apply_a, up]))
            terms.append((c, [_apply_adag, down]))
            terms.append((c, [_apply_adag, up]))
            terms.append((c, [_apply_a, down]))
    return terms


def assemble_hamiltonian(spec: ModelSpec, basis: Basis) -> OperatorMatrix:
    """Hamiltonian matrix on the basis, in each model's printed convention.

    TCM energies are per particle; Dicke and three-level energies are
    extensive (use ModelSpec.per_particle to convert).
    """
    if basis.model != spec:
        raise ModelError("basis was built for a different model spec")
    mat = _matrix_from_terms(basis, _hamiltonian_terms(spec))
    return OperatorMatrix(mat, basis)
