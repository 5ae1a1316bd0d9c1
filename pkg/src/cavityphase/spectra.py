"""Exact eigensolutions: ground states, low spectra and parameter scans.

Dense diagonalisation below DENSE_THRESHOLD, Lanczos (ARPACK) above; both
paths return identical results within the requested residual tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from .model import (
    Basis,
    ModelError,
    ModelKind,
    ModelSpec,
    SectorSpec,
    SectorType,
    FULL3_KINDS,
)
from .operators import OperatorMatrix, assemble_hamiltonian
from .model import enumerate_basis

DENSE_THRESHOLD = 2000
DEGENERACY_TOL = 1e-9


class SolverError(RuntimeError):
    """Eigensolver failed to converge; partial results attached when available."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class CutoffCapError(RuntimeError):
    """Fock cutoff doubling exceeded the hard cap; best estimate attached."""

    def __init__(self, message, best_result, n_max):
        super().__init__(message)
        self.best_result = best_result
        self.n_max = n_max


@dataclass(frozen=True)
class StateVector:
    """Normalised amplitudes on a Basis, with a fixed global phase."""

    amplitudes: np.ndarray
    basis: Basis

    @classmethod
    def from_amplitudes(cls, amplitudes, basis: Basis) -> "StateVector":
        amp = np.asarray(amplitudes, dtype=complex)
        if amp.shape != (basis.dimension,):
            raise ModelError("amplitude vector does not match the basis dimension")
        nrm = np.linalg.norm(amp)
        if nrm == 0:
            raise ModelError("cannot normalise a zero state")
        amp = amp / nrm
        return cls(_fix_phase(amp), basis)

    def overlap(self, other: "StateVector") -> complex:
        if self.basis.labels != other.basis.labels:
            raise ModelError("states live on different bases")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        return float(abs(self.overlap(other)) ** 2)


def _fix_phase(amp: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(amp)))
    ph = amp[k] / abs(amp[k])
    out = amp * np.conj(ph)
    out[k] = abs(out[k])  # exactly real positive
    return out


@dataclass(frozen=True)
class EigenResult:
    """Ascending eigenvalues with eigenstates and ground-multiplet size."""

    energies: np.ndarray
    states: tuple
    basis: Basis
    ground_multiplicity: int = 1

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    @property
    def ground_state(self) -> StateVector:
        return self.states[0]

    def ground_multiplet(self) -> tuple:
        return self.states[: self.ground_multiplicity]


def _norm_estimate(mat) -> float:
    return float(np.max(np.abs(mat).sum(axis=1)))


def lowest_eigenpairs(H: OperatorMatrix, k: int, tol: float = 1e-9,
                      method: str = "auto", v0=None) -> EigenResult:
    """k lowest eigenpairs of a Hermitian OperatorMatrix.

    Residuals are verified against tol * max(1, |H|_inf); failures raise
    SolverError rather than passing silently.
    """
    dim = H.dimension
    if not (1 <= k <= dim):
        raise ModelError(f"k = {k} out of range for dimension {dim}")
    if method == "auto":
        method = "dense" if dim <= DENSE_THRESHOLD else "iterative"
    if method == "iterative" and k >= dim - 1:
        method = "dense"  # ARPACK needs k < dim - 1

    if method == "dense":
        vals, vecs = la.eigh(H.toarray())
        vals, vecs = vals[:k], vecs[:, :k]
    elif method == "iterative":
        try:
            vals, vecs = spla.eigsh(H.entries, k=k, which="SA", tol=0, v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"ARPACK did not converge: {exc}", partial=exc) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    else:
        raise ModelError(f"unknown solver method {method!r}")

    scale = max(1.0, _norm_estimate(H.entries))
    for i in range(k):
        res = np.linalg.norm(H.entries @ vecs[:, i] - vals[i] * vecs[:, i])
        if res > tol * scale:
            raise SolverError(
                f"residual {res:.3e} exceeds tolerance for eigenpair {i}"
            )
    states = tuple(StateVector.from_amplitudes(vecs[:, i], H.basis) for i in range(k))
    mult = int(np.sum(vals - vals[0] < DEGENERACY_TOL))
    return EigenResult(np.asarray(vals, dtype=float), states, H.basis, mult)


def _effective_gamma(spec: ModelSpec) -> float:
    if spec.kind is ModelKind.TCM:
        return spec.gamma / 2.0
    if spec.kind is ModelKind.DICKE:
        return spec.gamma
    mu = max(spec.couplings)
    return 2.0 * mu if spec.kind in FULL3_KINDS else mu


def initial_cutoff(spec: ModelSpec) -> int:
    g = _effective_gamma(spec)
    return int(math.ceil(4.0 * spec.n_atoms * g * g + 10.0))


def converged_ground(spec: ModelSpec, sector: SectorSpec, tol: float,
                     k: int = 1, hard_cap: int = 4096):
    """Ground eigenpairs with the Fock cutoff doubled until E0 is stable.

    Returns (EigenResult, n_max_used).  Finite sectors (lambda- or M-blocks)
    are solved once and returned immediately.
    """
    if tol <= 0:
        raise ModelError("tol must be positive")
    if sector.sector in (SectorType.LAMBDA_BLOCK, SectorType.M_BLOCK):
        basis = enumerate_basis(spec, sector)
        H = assemble_hamiltonian(spec, basis)
        res = lowest_eigenpairs(H, min(k, basis.dimension))
        nu_max = max(lab[0] for lab in basis.labels)
        return res, nu_max

    def solve(n_max):
        b = enumerate_basis(spec, sector.with_cutoff(n_max))
        return lowest_eigenpairs(assemble_hamiltonian(spec, b), k)

    n_max = max(initial_cutoff(spec), sector.fock_cutoff or 0)
    res = solve(n_max)
    while True:
        if 2 * n_max > hard_cap:
            raise CutoffCapError(
                f"cutoff {2 * n_max} exceeds hard cap {hard_cap}; "
                f"best E0 = {res.ground_energy:.12g} at n_max = {n_max}",
                best_result=res, n_max=n_max,
            )
        res2 = solve(2 * n_max)
        if abs(res2.ground_energy - res.ground_energy) < tol:
            return res2, 2 * n_max
        n_max, res = 2 * n_max, res2


@dataclass
class ScanResult:
    """Per-sample, per-sector tracked eigenvalue curves."""

    taus: np.ndarray
    sector_keys: list
    energies: dict            # sector key -> array (n_samples, k)
    states: dict = field(default_factory=dict)  # sector key -> list of state tuples


def _sector_key(sector: SectorSpec):
    return (sector.sector.value, sector.value)


def _track_order(prev_states, states):
    """Permutation matching states to prev_states by maximal overlap."""
    n = len(states)
    ov = np.zeros((n, n))
    for i, p in enumerate(prev_states):
        for j, s in enumerate(states):
            ov[i, j] = abs(np.vdot(p.amplitudes, s.amplitudes))
    rows, cols = linear_sum_assignment(-ov)
    perm = np.empty(n, dtype=int)
    perm[rows] = cols
    return perm


def spectrum_scan(specs, sectors, k: int, keep_states: bool = False) -> ScanResult:
    """k lowest energies per sector along a parameter path.

    specs is a sequence of (tau, ModelSpec); curve identity across samples
    is maintained by maximal eigenvector overlap with the previous sample.
    """
    taus = np.asarray([t for t, _ in specs], dtype=float)
    keys = [_sector_key(s) for s in sectors]
    energies = {key: [] for key in keys}
    all_states = {key: [] for key in keys}
    prev = {key: None for key in keys}
    for _, spec in specs:
        for sector, key in zip(sectors, keys):
            basis = enumerate_basis(spec, sector)
            kk = min(k, basis.dimension)
            res = lowest_eigenpairs(assemble_hamiltonian(spec, basis), kk)
            vals = list(res.energies)
            states = list(res.states)
            if len(vals) < k:  # pad small blocks so curves stay rectangular
                vals += [np.nan] * (k - len(vals))
            if prev[key] is not None and len(states) == len(prev[key]):
                perm = _track_order(prev[key], states)
                states = [states[p] for p in perm]
                vals = [vals[p] for p in perm[: len(res.energies)]] + vals[len(res.energies):]
            prev[key] = states
            energies[key].append(vals)
            if keep_states:
                all_states[key].append(tuple(states))
    energies = {key: np.asarray(v) for key, v in energies.items()}
    return ScanResult(taus, keys, energies, all_states if keep_states else {})
