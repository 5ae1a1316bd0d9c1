"""Model definitions and symmetry-reduced basis enumeration.

Two-level models (TCM, DICKE) use collective spin labels (nu, m) with
j = n_atoms/2.  Three-level models use (nu, q, r) where the level
populations are (n1, n2, n3) = (r, q - r, n_atoms - q).  All frequencies
are measured in units of the field frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum


class ModelKind(Enum):
    TCM = "TCM"
    DICKE = "DICKE"
    XI_RWA = "XI_RWA"
    XI_FULL = "XI_FULL"
    LAMBDA_RWA = "LAMBDA_RWA"
    LAMBDA_FULL = "LAMBDA_FULL"
    V_RWA = "V_RWA"
    V_FULL = "V_FULL"


TWO_LEVEL_KINDS = frozenset({ModelKind.TCM, ModelKind.DICKE})
RWA3_KINDS = frozenset({ModelKind.XI_RWA, ModelKind.LAMBDA_RWA, ModelKind.V_RWA})
FULL3_KINDS = frozenset({ModelKind.XI_FULL, ModelKind.LAMBDA_FULL, ModelKind.V_FULL})

# (lambda_2, lambda_3) weights of the excitation counter
# M = a^dag a + lambda_2 A_22 + lambda_3 A_33 for each configuration.
_EXCITATION_WEIGHTS = {
    "XI": (1, 2),
    "LAMBDA": (0, 1),
    "V": (1, 1),
}

# Couplings that must vanish for each configuration: (mu_12, mu_13, mu_23).
_FORBIDDEN_COUPLING = {"XI": 1, "LAMBDA": 0, "V": 2}
_COUPLING_NAMES = ("mu_12", "mu_13", "mu_23")


class ModelError(ValueError):
    """Invalid model parameters or incompatible model/sector/basis combination."""


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of one atom-field model.

    level_freqs is a single float (omega_A) for two-level kinds and a
    triple (omega_1, omega_2, omega_3) for three-level kinds; couplings
    is gamma for two-level kinds and (mu_12, mu_13, mu_23) otherwise.
    """

    kind: ModelKind
    n_atoms: int
    level_freqs: tuple | float
    couplings: tuple | float
    field_freq: float = 1.0

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ModelError("n_atoms must be a positive integer")
        if self.field_freq <= 0:
            raise ModelError("field_freq must be positive")
        if self.is_two_level:
            if not isinstance(self.level_freqs, (int, float)):
                raise ModelError("two-level kinds take a scalar level frequency")
            if not isinstance(self.couplings, (int, float)):
                raise ModelError("two-level kinds take a scalar coupling")
            if self.couplings < 0:
                raise ModelError("coupling must be non-negative")
        else:
            freqs = tuple(float(w) for w in self.level_freqs)
            mus = tuple(float(m) for m in self.couplings)
            if len(freqs) != 3 or len(mus) != 3:
                raise ModelError("three-level kinds take 3 level frequencies and 3 couplings")
            if not (freqs[0] <= freqs[1] <= freqs[2]):
                raise ModelError("level frequencies must satisfy omega_1 <= omega_2 <= omega_3")
            if min(mus) < 0:
                raise ModelError("couplings must be non-negative")
            forbidden = _FORBIDDEN_COUPLING[self.configuration]
            if mus[forbidden] != 0.0:
                raise ModelError(
                    f"{self.configuration} configuration requires "
                    f"{_COUPLING_NAMES[forbidden]} = 0"
                )
            object.__setattr__(self, "level_freqs", freqs)
            object.__setattr__(self, "couplings", mus)

    @property
    def is_two_level(self) -> bool:
        return self.kind in TWO_LEVEL_KINDS

    @property
    def is_rwa(self) -> bool:
        return self.kind in (ModelKind.TCM,) or self.kind in RWA3_KINDS

    @property
    def configuration(self) -> str:
        """Atomic configuration name: XI, LAMBDA or V (three-level kinds only)."""
        if self.is_two_level:
            raise ModelError("two-level kinds have no 3-level configuration")
        return self.kind.value.rsplit("_", 1)[0]

    @property
    def j(self) -> float:
        return self.n_atoms / 2.0

    @property
    def omega_a(self) -> float:
        if not self.is_two_level:
            raise ModelError("omega_a is defined for two-level kinds only")
        return float(self.level_freqs)

    @property
    def gamma(self) -> float:
        if not self.is_two_level:
            raise ModelError("gamma is defined for two-level kinds only")
        return float(self.couplings)

    @property
    def detuning(self) -> float:
        """Delta = omega_F - omega_A (derived, never stored)."""
        return self.field_freq - self.omega_a

    def detuning_ij(self, i: int, j: int) -> float:
        """Delta_ij = omega_i - omega_j - Omega for three-level kinds."""
        if self.is_two_level:
            raise ModelError("detuning_ij is defined for three-level kinds only")
        return self.level_freqs[i - 1] - self.level_freqs[j - 1] - self.field_freq

    @property
    def excitation_weights(self) -> tuple:
        """(lambda_2, lambda_3) defining M = n_ph + lambda_2 A_22 + lambda_3 A_33."""
        if self.is_two_level:
            raise ModelError("excitation weights apply to three-level kinds only")
        return _EXCITATION_WEIGHTS[self.configuration]

    def mu(self, i: int, j: int) -> float:
        """Coupling mu_ij with (i, j) in {(1,2), (1,3), (2,3)}."""
        return self.couplings[{(1, 2): 0, (1, 3): 1, (2, 3): 2}[(i, j)]]

    def replace_couplings(self, couplings) -> "ModelSpec":
        return ModelSpec(self.kind, self.n_atoms, self.level_freqs, couplings,
                         self.field_freq)

    @property
    def energy_is_extensive(self) -> bool:
        """Whether the printed Hamiltonian convention scales with n_atoms.

        The TCM Hamiltonian is written per particle (intrinsic); the Dicke
        and three-level Hamiltonians are extensive.
        """
        return self.kind is not ModelKind.TCM

    def per_particle(self, energy: float) -> float:
        """Convert an energy in the printed convention to energy per atom."""
        return energy / self.n_atoms if self.energy_is_extensive else energy


class SectorType(Enum):
    LAMBDA_BLOCK = "LAMBDA_BLOCK"
    M_BLOCK = "M_BLOCK"
    PARITY = "PARITY"
    FULL = "FULL"


@dataclass(frozen=True)
class SectorSpec:
    """Symmetry sector selection plus the Fock cutoff where one is needed.

    value is the block label: lambda for LAMBDA_BLOCK, M for M_BLOCK and
    +1/-1 for PARITY.  fock_cutoff is ignored for the finite blocks.
    """

    sector: SectorType
    value: int | None = None
    fock_cutoff: int | None = None

    def __post_init__(self):
        if self.sector in (SectorType.LAMBDA_BLOCK, SectorType.M_BLOCK):
            if self.value is None or self.value < 0:
                raise ModelError(f"{self.sector.value} requires a non-negative block label")
        elif self.sector is SectorType.PARITY:
            if self.value not in (+1, -1):
                raise ModelError("PARITY sector requires value +1 or -1")
        if self.sector in (SectorType.PARITY, SectorType.FULL):
            if self.fock_cutoff is None or self.fock_cutoff < 0:
                raise ModelError(f"{self.sector.value} sector requires a Fock cutoff")

    def with_cutoff(self, n_max: int) -> "SectorSpec":
        return SectorSpec(self.sector, self.value, n_max)


def _check_compatible(spec: ModelSpec, sector: SectorSpec):
    st = sector.sector
    if st is SectorType.LAMBDA_BLOCK and spec.kind is not ModelKind.TCM:
        raise ModelError("LAMBDA_BLOCK sectors exist only for the TCM")
    if st is SectorType.M_BLOCK and spec.kind not in RWA3_KINDS:
        raise ModelError("M_BLOCK sectors exist only for three-level RWA kinds")
    if st is SectorType.PARITY and spec.kind not in (
        {ModelKind.DICKE} | FULL3_KINDS
    ):
        raise ModelError("PARITY sectors exist only for DICKE and three-level full kinds")


@dataclass(frozen=True)
class Basis:
    """Ordered, symmetry-reduced basis.

    Two-level labels are (nu, twice_m) with twice_m = 2m an integer so the
    ordering is exact; three-level labels are (nu, q, r).
    """

    model: ModelSpec
    sector: SectorSpec
    labels: tuple = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.labels)

    def index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    def label_m(self, lab) -> float:
        """m quantum number of a two-level label."""
        return lab[1] / 2.0

    def lambda_of(self, lab) -> int:
        """Excitation number of one label: nu + m + j (2-level) or M (3-level)."""
        return label_excitation(self.model, lab)


def label_excitation(spec: ModelSpec, lab) -> int:
    """Total excitation number of a basis label (lambda or M, by model kind)."""
    if spec.is_two_level:
        return lab[0] + (lab[1] + spec.n_atoms) // 2
    lam2, lam3 = spec.excitation_weights
    nu, q, r = lab
    return nu + lam2 * (q - r) + lam3 * (spec.n_atoms - q)


def _two_level_labels(n_atoms: int, nu_max: int):
    for nu in range(nu_max + 1):
        for twice_m in range(-n_atoms, n_atoms + 1, 2):
            yield (nu, twice_m)


def _three_level_labels(n_atoms: int, nu_max: int):
    for nu in range(nu_max + 1):
        for q in range(n_atoms + 1):
            for r in range(q + 1):
                yield (nu, q, r)


def enumerate_basis(spec: ModelSpec, sector: SectorSpec) -> Basis:
    """Enumerate the basis of one symmetry sector, deterministically ordered.

    Labels are lexicographically sorted.  LAMBDA_BLOCK dimension is
    min(lambda, 2j) + 1; M_BLOCK dimension is finite without any cutoff.
    """
    _check_compatible(spec, sector)
    n = spec.n_atoms
    st = sector.sector
    if st is SectorType.LAMBDA_BLOCK:
        lam = sector.value
        labels = []
        for nu in range(max(0, lam - n), lam + 1):
            twice_m = 2 * (lam - nu) - n  # m = lambda - j - nu
            labels.append((nu, twice_m))
        return Basis(spec, sector, tuple(labels))
    if st is SectorType.M_BLOCK:
        m_total = sector.value
        lam2, lam3 = spec.excitation_weights
        labels = []
        # nu = M - lam2*n2 - lam3*n3 >= 0 bounds the atomic excitations.
        for nu in range(m_total + 1):
            rest = m_total - nu
            for q in range(n + 1):
                for r in range(q + 1):
                    if lam2 * (q - r) + lam3 * (n - q) == rest:
                        labels.append((nu, q, r))
        labels.sort()
        return Basis(spec, sector, tuple(labels))

    nu_max = sector.fock_cutoff
    if spec.is_two_level:
        gen = _two_level_labels(n, nu_max)
    else:
        gen = _three_level_labels(n, nu_max)
    if st is SectorType.FULL:
        labels = tuple(gen)
    else:  # PARITY
        parity = sector.value
        labels = tuple(
            lab for lab in gen if (-1) ** label_excitation(spec, lab) == parity
        )
    return Basis(spec, sector, labels)


def lambda_c_classical(spec: ModelSpec) -> float:
    """Classical expectation of the TCM constant of motion at the energy minimum."""
    if spec.kind is not ModelKind.TCM:
        raise ModelError("lambda_c is defined for the TCM")
    wa, g, n = spec.omega_a, spec.gamma, spec.n_atoms
    if wa > g * g or g == 0:
        return 0.0
    if wa < -g * g:
        return float(n)
    return n * (-wa * (wa + 2.0) + g**4 + 2.0 * g * g) / (4.0 * g * g)


def binom_exact(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0
