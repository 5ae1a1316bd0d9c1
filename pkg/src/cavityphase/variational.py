"""Coherent, projected and symmetry-adapted variational energy surfaces.

All surface values are energies per atom.  Two-level trial states are
|alpha> x |zeta> with alpha = (q + ip)/sqrt(2) and zeta = tan(theta/2)
exp(-i phi); three-level trial states are |alpha> x |gamma2, gamma3> on the
totally symmetric U(3) irrep with the level-1 amplitude fixed to 1.

Parity-adapted (SAS) surfaces are evaluated from the coherent-state pair
calculus: E_pm = (<H> +- <H P>) / (1 +- <P>), with P the excitation-number
parity.  Cross terms use ratio bases of modulus <= 1 so nothing overflows
at large atom number.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln, gammaincc
from scipy.stats.qmc import Halton

from .model import (
    Basis,
    ModelError,
    ModelKind,
    ModelSpec,
    SectorType,
    FULL3_KINDS,
    RWA3_KINDS,
    lambda_c_classical,
)
from .spectra import StateVector


class Family(Enum):
    TCM_COH = "TCM_COH"
    TCM_PROJ = "TCM_PROJ"
    DICKE_COH = "DICKE_COH"
    DICKE_SAS_PLUS = "DICKE_SAS_PLUS"
    DICKE_SAS_MINUS = "DICKE_SAS_MINUS"
    RWA3_COH = "RWA3_COH"
    RWA3_PROJ = "RWA3_PROJ"
    FULL3_COH = "FULL3_COH"
    FULL3_SAS_PLUS = "FULL3_SAS_PLUS"
    FULL3_SAS_MINUS = "FULL3_SAS_MINUS"
    V_SAS_PLUS = "V_SAS_PLUS"


SAS_SIGN = {Family.DICKE_SAS_PLUS: +1, Family.DICKE_SAS_MINUS: -1,
            Family.FULL3_SAS_PLUS: +1, Family.FULL3_SAS_MINUS: -1}

TWO_LEVEL_FAMILIES = {Family.TCM_COH, Family.TCM_PROJ, Family.DICKE_COH,
                      Family.DICKE_SAS_PLUS, Family.DICKE_SAS_MINUS}


@dataclass(frozen=True)
class VariationalPoint:
    """Variational family tag, parameter record and energy per atom."""

    family: Family
    params: dict
    energy: float

    def param(self, name, default=None):
        return self.params.get(name, default)


def parity_overlap_factor(x: float, gamma_c: float, n_atoms: int) -> float:
    """Overlap decay factor between coherent and parity-adapted states.

    Evaluated in log space; equals 1 throughout the normal region (x <= 1)
    and decays rapidly with n_atoms beyond it.
    """
    if x <= 1.0:
        return 1.0
    ln_f = -2.0 * n_atoms * math.log(x) \
        - 2.0 * n_atoms * gamma_c**2 * x * x * (1.0 - x**-4)
    return math.exp(ln_f)


# --- coherent-state pair calculus -------------------------------------------


def _pair2(alpha1, zeta1, alpha2, zeta2, n_atoms):
    """Normalised cross expectations between two HW x SU(2) coherent states.

    Returns (s, f, atoms) where s = <1|2>/norms, f is the field overlap and
    atoms maps J operators to their cross expectations (field factor not
    included).  The atomic ratio base has modulus <= 1, so integer powers
    are safe at any atom number.
    """
    f = cmath.exp(complex(np.conj(alpha1) * alpha2)
                  - 0.5 * (abs(alpha1) ** 2 + abs(alpha2) ** 2))
    j = n_atoms / 2.0
    z12 = complex(np.conj(zeta1) * zeta2)
    dnorm = math.sqrt((1.0 + abs(zeta1) ** 2) * (1.0 + abs(zeta2) ** 2))
    u = (1.0 + z12) / dnorm
    u_nm1 = u ** (n_atoms - 1)
    atoms = {
        "one": u_nm1 * u,
        "J_z": u_nm1 * (-j) * (1.0 - z12) / dnorm,
        "J_plus": u_nm1 * 2.0 * j * complex(np.conj(zeta1)) / dnorm,
        "J_minus": u_nm1 * 2.0 * j * zeta2 / dnorm,
    }
    return f * atoms["one"], f, atoms


def _coherent2_params(q, p, theta, phi):
    alpha = (q + 1j * p) / math.sqrt(2.0)
    zeta = math.tan(theta / 2.0) * cmath.exp(-1j * phi)
    return alpha, zeta


def _h2_expectation(spec: ModelSpec, alpha1, zeta1, alpha2, zeta2):
    """(<1|H|2>/norms, <1|2>/norms) for a two-level model, printed convention.

    Product operators factorise on product states, e.g. <a^dag J_-> =
    conj(alpha1) f <J_->_atomic.
    """
    n = spec.n_atoms
    s, f, at = _pair2(alpha1, zeta1, alpha2, zeta2, n)
    a1c = complex(np.conj(alpha1))
    nph = a1c * alpha2 * f * at["one"]
    jz = f * at["J_z"]
    if spec.kind is ModelKind.TCM:
        g = spec.gamma / (math.sqrt(n) * n)
        h = (spec.field_freq * nph + spec.omega_a * jz) / n \
            + g * f * (a1c * at["J_minus"] + alpha2 * at["J_plus"])
    elif spec.kind is ModelKind.DICKE:
        g = spec.gamma / math.sqrt(n)
        h = spec.field_freq * nph + spec.omega_a * jz \
            + g * f * (a1c + alpha2) * (at["J_plus"] + at["J_minus"])
    else:
        raise ModelError("two-level expectation requires a TCM or DICKE spec")
    return h, s


def energy_surface_2level(spec: ModelSpec, family: Family, params: dict) -> float:
    """Per-atom variational energy of a two-level family at given parameters.

    Coherent families take (q, p, theta, phi); the Dicke SAS families take
    either the same quadruple (general surface) or a single "x" = gamma /
    gamma_c (critical-manifold closed form).
    """
    if family not in (Family.TCM_COH, Family.DICKE_COH,
                      Family.DICKE_SAS_PLUS, Family.DICKE_SAS_MINUS):
        raise ModelError(f"{family} is not a two-level surface family")
    if family is Family.TCM_COH and spec.kind is not ModelKind.TCM:
        raise ModelError("TCM_COH requires a TCM spec")
    if family is not Family.TCM_COH and spec.kind is not ModelKind.DICKE:
        raise ModelError(f"{family} requires a DICKE spec")

    n = spec.n_atoms
    if family in SAS_SIGN and "x" in params:
        return dicke_sas_critical_energy(spec, params["x"], SAS_SIGN[family])

    q = params.get("q", 0.0)
    p = params.get("p", 0.0)
    theta = params.get("theta", 0.0)
    phi = params.get("phi", 0.0)

    if family is Family.TCM_COH:
        return (q * q + p * p) * spec.field_freq / (2.0 * n) \
            - 0.5 * spec.omega_a * math.cos(theta) \
            + spec.gamma / math.sqrt(2.0 * n) * math.sin(theta) \
            * (q * math.cos(phi) - p * math.sin(phi))
    if family is Family.DICKE_COH:
        return (q * q + p * p) * spec.field_freq / (2.0 * n) \
            - 0.5 * spec.omega_a * math.cos(theta) \
            + math.sqrt(2.0 / n) * spec.gamma * q * math.sin(theta) * math.cos(phi)

    sign = SAS_SIGN[family]
    alpha, zeta = _coherent2_params(q, p, theta, phi)
    h_dir, _ = _h2_expectation(spec, alpha, zeta, alpha, zeta)
    h_cross, s = _h2_expectation(spec, alpha, zeta, -alpha, -zeta)
    num = h_dir + sign * h_cross
    den = 1.0 + sign * s.real
    if abs(den) < 1e-300:
        raise ModelError("parity projection annihilates this coherent state")
    e = num.real / den
    return e / n


def dicke_sas_critical_energy(spec: ModelSpec, x: float, sign: int) -> float:
    """Printed SAS energy per atom on the critical manifold, as a function
    of x = gamma/gamma_c; x <= 1 returns the normal-region value."""
    if spec.kind is not ModelKind.DICKE:
        raise ModelError("the critical-manifold SAS energy is a Dicke form")
    if x <= 0:
        raise ModelError("x = gamma/gamma_c must be positive")
    gc2 = spec.omega_a / 4.0
    n = spec.n_atoms
    if x <= 1.0:
        if sign > 0:
            return -2.0 * gc2
        # x -> 1 limit of the odd branch
        return -2.0 * gc2 + 4.0 * gc2 / (n * (1.0 + 4.0 * gc2))
    f = parity_overlap_factor(x, math.sqrt(gc2), n)
    ratio = (1.0 - sign * f) / (1.0 + sign * f)
    return -gc2 * x * x * (2.0 - (1.0 - x**-4) * ratio)


@dataclass(frozen=True)
class TcmCriticalData:
    """Closed-form minimum of the TCM coherent surface."""

    region: str          # "NorthPole" | "SouthPole" | "Parallels"
    theta_c: float
    e0_per_atom: float
    lambda_c: float
    q_c: float
    p_c: float = 0.0
    phi_c: float = 0.0


def tcm_critical_data(spec: ModelSpec) -> TcmCriticalData:
    """Region, critical angles and minimum energy of the TCM energy surface.

    Boundaries |omega_A| = gamma^2 are assigned to the pole regions.
    """
    if spec.kind is not ModelKind.TCM:
        raise ModelError("critical data of this form applies to the TCM")
    wa, g, n = spec.omega_a, spec.gamma, spec.n_atoms
    if wa >= g * g:
        return TcmCriticalData("NorthPole", 0.0, -wa / 2.0, 0.0, 0.0)
    if wa <= -g * g:
        return TcmCriticalData("SouthPole", math.pi, wa / 2.0, float(n), 0.0)
    theta = math.acos(wa / (g * g))
    e0 = -(wa * wa + g**4) / (4.0 * g * g)
    lam = lambda_c_classical(spec)
    q_c = -math.sqrt(n / 2.0) * g * math.sin(theta)
    return TcmCriticalData("Parallels", theta, e0, lam, q_c)


# --- TCM projected states ----------------------------------------------------


def tcm_projection_eta(spec: ModelSpec) -> float:
    """eta = -(sqrt(N) gamma / 2)(1 + omega_A / gamma^2)."""
    g = spec.gamma
    if g == 0:
        raise ModelError("the projected-state parameter requires gamma > 0")
    return -0.5 * math.sqrt(spec.n_atoms) * g * (1.0 + spec.omega_a / (g * g))


def _laguerre_ratio(n: int, k: int, z: float) -> float:
    """L_{n-1}^k(z) / L_n^k(z) for z <= 0 via a ratio recurrence.

    All recurrence terms are positive for z <= 0, so the upward ratio
    iteration is stable and never overflows.
    """
    if n < 1:
        raise ModelError("ratio defined for n >= 1")
    r = 1.0 + k - z  # L_1 / L_0
    for i in range(1, n):
        r = ((2 * i + k + 1 - z) - (i + k) / r) / (i + 1)
    return 1.0 / r


def tcm_projected_energy(spec: ModelSpec, lam: int) -> float:
    """Per-atom energy of the coherent state projected onto one lambda block."""
    if spec.kind is not ModelKind.TCM:
        raise ModelError("projected energies of this form apply to the TCM")
    if lam < 0:
        raise ModelError("lambda must be a non-negative integer")
    delta = spec.detuning
    if lam == 0:
        return -0.5 * (1.0 - delta)
    twoj = spec.n_atoms
    eta = tcm_projection_eta(spec)
    z = -eta * eta
    base = (lam - 0.5 * twoj + 0.5 * twoj * delta) / twoj
    bracket = delta - 2.0 * spec.gamma * eta / math.sqrt(twoj)
    if lam <= twoj:
        ratio = _laguerre_ratio(lam, twoj - lam, z)
    else:
        ratio = lam / twoj * _laguerre_ratio(twoj, lam - twoj, z)
    return base - bracket * ratio


def tcm_projected_coefficients(spec: ModelSpec, lam: int) -> np.ndarray:
    """Normalised Fock coefficients of the lambda-projected coherent state,
    ordered by photon number as in the lambda-block basis."""
    twoj = spec.n_atoms
    nus = np.arange(max(0, lam - twoj), lam + 1)
    if lam == 0:
        return np.ones(1)
    eta = tcm_projection_eta(spec)
    ln_mag = 0.5 * (gammaln(twoj + 1) - gammaln(lam - nus + 1.0)
                    - gammaln(twoj - lam + nus + 1.0)) \
        + nus * math.log(abs(eta)) - 0.5 * gammaln(nus + 1.0)
    ln_mag -= ln_mag.max()
    coeff = np.exp(ln_mag) * np.sign(eta) ** nus
    return coeff / np.linalg.norm(coeff)


def tcm_projected_ground(spec: ModelSpec):
    """Minimise the projected energy over integer lambda near the classical
    prediction; returns (lambda*, VariationalPoint, coefficient vector)."""
    if spec.kind is not ModelKind.TCM:
        raise ModelError("projected ground applies to the TCM")
    if spec.omega_a > spec.gamma**2 or spec.gamma == 0:
        point = VariationalPoint(Family.TCM_PROJ, {"lam": 0},
                                 -0.5 * (1.0 - spec.detuning))
        return 0, point, np.ones(1)
    lam_c = lambda_c_classical(spec)
    lo = max(0, math.floor(lam_c) - 5)
    hi = math.ceil(lam_c) + 5
    best_lam, best_e = None, math.inf
    for lam in range(lo, hi + 1):
        e = tcm_projected_energy(spec, lam)
        if e < best_e:
            best_lam, best_e = lam, e
    eta = tcm_projection_eta(spec)
    point = VariationalPoint(Family.TCM_PROJ,
                             {"lam": best_lam, "eta": eta}, best_e)
    return best_lam, point, tcm_projected_coefficients(spec, best_lam)


# --- three-level surfaces ----------------------------------------------------


def _check3(spec: ModelSpec):
    if spec.is_two_level:
        raise ModelError("three-level surface requires a three-level spec")


def rwa3_coherent_energy(spec: ModelSpec, rho, rho2, rho3,
                         coupling_scale: float = 2.0) -> float:
    """Per-atom coherent energy surface of the three-level RWA Hamiltonian.

    Valid for all three configurations; interaction phases are fixed at the
    minimising real-positive choice.  coupling_scale = 4 gives the full
    (counter-rotating) surface.
    """
    _check3(spec)
    n = spec.n_atoms
    w1, w2, w3 = spec.level_freqs
    mu12, mu13, mu23 = spec.couplings
    den = 1.0 + rho2 * rho2 + rho3 * rho3
    atomic = (w1 + w2 * rho2 * rho2 + w3 * rho3 * rho3) / den
    inter = coupling_scale / math.sqrt(n) * rho * (
        mu12 * rho2 + mu13 * rho3 + mu23 * rho2 * rho3) / den
    return spec.field_freq * rho * rho / n + atomic - inter


def full3_coherent_energy(spec: ModelSpec, rho, rho2, rho3) -> float:
    return rwa3_coherent_energy(spec, rho, rho2, rho3, coupling_scale=4.0)


def rwa3_reduced_minimum(spec: ModelSpec, seeds=None):
    """Exact minimisation over the field amplitude of the coherent surface.

    The surface is quadratic in rho, so min_rho H = A - s^2 B^2 / Omega with
    A, B the atomic and coupling parts (s = 1 for RWA kinds, 2 for full
    kinds).  Returns (energy, (rho2*, rho3*), rho*), minimised over the
    atomic parameters by a deterministic multi-start simplex.
    """
    _check3(spec)
    w1, w2, w3 = spec.level_freqs
    mu12, mu13, mu23 = spec.couplings
    s = 2.0 if spec.kind in FULL3_KINDS else 1.0
    omega = spec.field_freq
    n = spec.n_atoms

    def g(x):
        r2, r3 = abs(x[0]), abs(x[1])
        den = 1.0 + r2 * r2 + r3 * r3
        a = (w1 + w2 * r2 * r2 + w3 * r3 * r3) / den
        b = (mu12 * r2 + mu13 * r3 + mu23 * r2 * r3) / den
        return a - s * s * b * b / omega

    if seeds is None:
        seeds = [(0.0, 0.0), (0.05, 0.02), (0.3, 0.1), (0.1, 0.3), (0.7, 0.3),
                 (0.3, 0.7), (1.2, 0.5), (0.5, 1.2), (2.0, 1.0), (1.0, 2.0)]
    best = (math.inf, (0.0, 0.0))
    for seed in seeds:
        r = minimize(g, seed, method="Nelder-Mead",
                     options=dict(xatol=1e-11, fatol=1e-14, maxiter=4000))
        if r.fun < best[0]:
            best = (float(r.fun), (abs(float(r.x[0])), abs(float(r.x[1]))))
    e, (r2, r3) = best
    den = 1.0 + r2 * r2 + r3 * r3
    b = (mu12 * r2 + mu13 * r3 + mu23 * r2 * r3) / den
    rho = s * math.sqrt(n) * b / omega
    return e, (r2, r3), rho


def rwa3_continuum_excitation(spec: ModelSpec) -> float:
    """<M> per the excitation counter at the unconstrained surface minimum."""
    e, (r2, r3), rho = rwa3_reduced_minimum(spec)
    lam2, lam3 = spec.excitation_weights
    den = 1.0 + r2 * r2 + r3 * r3
    n = spec.n_atoms
    return rho * rho + (lam2 * n * r2 * r2 + lam3 * n * r3 * r3) / den


def rwa3_projected_energy(spec: ModelSpec, m_total: float, rho2, rho3) -> float:
    """RWA surface with the photon number eliminated by the excitation
    constraint nu = M - lambda_2 <A_22> - lambda_3 <A_33>; returns +inf when
    the constraint would need a negative photon number."""
    _check3(spec)
    lam2, lam3 = spec.excitation_weights
    n = spec.n_atoms
    den = 1.0 + rho2 * rho2 + rho3 * rho3
    nu = m_total - (lam2 * n * rho2 * rho2 + lam3 * n * rho3 * rho3) / den
    if nu < 0.0:
        return math.inf
    return rwa3_coherent_energy(spec, math.sqrt(nu), rho2, rho3)


def _pair3(alpha1, g1, alpha2, g2, n_atoms):
    """Normalised cross expectations between three-level coherent states.

    g1, g2 are length-3 level amplitude vectors (first entries fixed to 1
    by convention but arbitrary values are accepted).
    """
    f = cmath.exp(np.conj(alpha1) * alpha2
                  - 0.5 * (abs(alpha1) ** 2 + abs(alpha2) ** 2))
    g1 = np.asarray(g1, dtype=complex)
    g2 = np.asarray(g2, dtype=complex)
    dot12 = complex(np.vdot(g1, g2))
    dnorm = math.sqrt(float(np.vdot(g1, g1).real * np.vdot(g2, g2).real))
    u = dot12 / dnorm
    u_nm1 = u ** (n_atoms - 1)
    s = f * u_nm1 * u
    cross_a = {}
    for i in range(3):
        for j in range(3):
            cross_a[(i + 1, j + 1)] = (
                f * u_nm1 * n_atoms * np.conj(g1[i]) * g2[j] / dnorm
            )
    return s, f, u_nm1, cross_a


def _h3_expectation(spec: ModelSpec, alpha1, g1, alpha2, g2):
    """(<1|H|2>/norms, <1|2>/norms) for a three-level model (printed,
    extensive convention)."""
    n = spec.n_atoms
    s, f, u_nm1, A = _pair3(alpha1, g1, alpha2, g2, n)
    h = spec.field_freq * s * np.conj(alpha1) * alpha2
    for lvl, w in enumerate(spec.level_freqs, start=1):
        h += w * A[(lvl, lvl)]
    c = -1.0 / math.sqrt(n)
    pairs = ((1, 2), (1, 3), (2, 3))
    rwa = spec.kind in RWA3_KINDS
    for i, j in pairs:
        mu = spec.mu(i, j)
        if mu == 0.0:
            continue
        if rwa:
            # a A_ji + a^dag A_ij  (photon absorbed while i -> j)
            h += c * mu * (alpha2 * A[(j, i)] + np.conj(alpha1) * A[(i, j)])
        else:
            h += c * mu * (np.conj(alpha1) + alpha2) * (A[(i, j)] + A[(j, i)])
    return h, s


def full3_sas_energy(spec: ModelSpec, alpha, g2, g3, sign: int) -> float:
    """Per-atom parity-adapted energy for the full three-level model at real
    or complex parameters (alpha, gamma_2, gamma_3), gamma_1 = 1."""
    _check3(spec)
    if spec.kind not in FULL3_KINDS:
        raise ModelError("parity-adapted surfaces require a full (non-RWA) kind")
    lam2, lam3 = spec.excitation_weights
    g = np.array([1.0, g2, g3], dtype=complex)
    gt = np.array([1.0, (-1.0) ** lam2 * g2, (-1.0) ** lam3 * g3], dtype=complex)
    h_dir, _ = _h3_expectation(spec, alpha, g, alpha, g)
    h_cross, s = _h3_expectation(spec, alpha, g, -alpha, gt)
    den = 1.0 + sign * s.real
    if abs(den) < 1e-300:
        raise ModelError("parity projection annihilates this coherent state")
    return (h_dir + sign * h_cross).real / den / spec.n_atoms


def v_sas_plus_energy(spec: ModelSpec, rho, xi, chi) -> float:
    """Printed closed-form SAS(+) surface of the V configuration at double
    resonance (omega_1 = 0, omega_21 = omega_31 = Omega), per atom.

    rho is the field amplitude scaled by sqrt(N); chi is the angle between
    the atomic mixing direction and the coupling direction (distinct from
    the fidelity susceptibility).  Requires xi < 1.
    """
    _check3(spec)
    if spec.kind is not ModelKind.V_FULL:
        raise ModelError("the printed closed form applies to the full V model")
    w1, w2, w3 = spec.level_freqs
    if not (w1 == 0.0 and w2 == spec.field_freq and w3 == spec.field_freq):
        raise ModelError("closed form valid only at double resonance with omega_1 = 0")
    if not 0.0 <= xi < 1.0:
        raise ModelError("V SAS closed form requires 0 <= xi < 1")
    n = spec.n_atoms
    mu = math.hypot(spec.mu(1, 2), spec.mu(1, 3))
    xi2 = xi * xi
    # ratio r1 = exp(-2 N rho^2) ((1 - xi^2)/(1 + xi^2))^(N-1), always in [0, 1]
    ln_r1 = -2.0 * n * rho * rho + (n - 1) * (math.log1p(-xi2) - math.log1p(xi2))
    r1 = math.exp(ln_r1)
    den0 = 1.0 + xi2
    direct = (xi2 + rho * rho * den0 - 4.0 * rho * xi * mu * math.cos(chi)) / den0
    cross = (rho * rho * (1.0 - xi2) + xi2) / den0
    return (direct - r1 * cross) / (1.0 + r1 * (1.0 - xi2) / den0)


def energy_surface_3level(spec: ModelSpec, family: Family, params: dict) -> float:
    """Per-atom variational energy of a three-level family."""
    if family is Family.RWA3_COH:
        if spec.kind not in RWA3_KINDS:
            raise ModelError("RWA3_COH requires an RWA kind")
        return rwa3_coherent_energy(spec, params["rho"], params["rho2"],
                                    params["rho3"])
    if family is Family.RWA3_PROJ:
        if spec.kind not in RWA3_KINDS:
            raise ModelError("RWA3_PROJ requires an RWA kind")
        return rwa3_projected_energy(spec, params["m"], params["rho2"],
                                     params["rho3"])
    if family is Family.FULL3_COH:
        if spec.kind not in FULL3_KINDS:
            raise ModelError("FULL3_COH requires a full (non-RWA) kind")
        return full3_coherent_energy(spec, params["rho"], params["rho2"],
                                     params["rho3"])
    if family in (Family.FULL3_SAS_PLUS, Family.FULL3_SAS_MINUS):
        return full3_sas_energy(spec, params["alpha"], params["rho2"],
                                params["rho3"], SAS_SIGN[family])
    if family is Family.V_SAS_PLUS:
        return v_sas_plus_energy(spec, params["rho"], params["xi"], params["chi"])
    raise ModelError(f"{family} is not a three-level surface family")


# --- minimisation ------------------------------------------------------------


_FREE_PARAMS = {
    Family.TCM_COH: ("q", "theta"),
    Family.DICKE_COH: ("q", "theta"),
    Family.DICKE_SAS_PLUS: ("q", "theta"),
    Family.DICKE_SAS_MINUS: ("q", "theta"),
    Family.RWA3_COH: ("rho", "rho2", "rho3"),
    Family.FULL3_COH: ("rho", "rho2", "rho3"),
    Family.FULL3_SAS_PLUS: ("alpha", "rho2", "rho3"),
    Family.FULL3_SAS_MINUS: ("alpha", "rho2", "rho3"),
    Family.V_SAS_PLUS: ("rho", "xi"),
}


def _default_box(spec: ModelSpec, family: Family):
    n = spec.n_atoms
    if family in TWO_LEVEL_FAMILIES:
        qmax = math.sqrt(2.0 * n) * (spec.gamma + 0.5) + 1.0
        return [(-qmax, 0.0), (0.0, math.pi)]
    mu = max(spec.couplings)
    scale = 2.0 if spec.kind in FULL3_KINDS else 1.0
    rmax = math.sqrt(n) * (scale * mu + 0.5) + 1.0
    if family is Family.V_SAS_PLUS:
        return [(0.0, rmax / math.sqrt(n)), (0.0, 0.999)]
    if family in (Family.FULL3_SAS_PLUS, Family.FULL3_SAS_MINUS):
        return [(0.0, rmax), (0.0, 4.0), (0.0, 4.0)]
    return [(0.0, rmax), (0.0, 4.0), (0.0, 4.0)]


def _surface_function(spec: ModelSpec, family: Family, fixed: dict):
    names = _FREE_PARAMS[family]
    two = family in TWO_LEVEL_FAMILIES

    def f(x):
        params = dict(fixed)
        params.update(zip(names, x))
        try:
            if two:
                return energy_surface_2level(spec, family, params)
            return energy_surface_3level(spec, family, params)
        except (ModelError, OverflowError):
            return math.inf

    return f, names


def default_seeds(box, n_seeds: int = 20) -> np.ndarray:
    """Deterministic low-discrepancy seed points inside the parameter box."""
    dim = len(box)
    h = Halton(d=dim, scramble=False)
    pts = h.random(n_seeds)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + pts * (hi - lo)


def minimize_energy(spec: ModelSpec, family: Family, seeds=None,
                    fixed: dict | None = None, box=None,
                    degeneracy_tol: float = 1e-8) -> VariationalPoint:
    """Multi-start simplex minimisation of a variational surface.

    Deterministic given seeds; distinct local minima within degeneracy_tol
    of the best one are recorded in params["degenerate_minima"].
    """
    fixed = dict(fixed or {})
    if family is Family.TCM_PROJ:
        lam, point, _ = tcm_projected_ground(spec)
        return point
    if box is None:
        box = _default_box(spec, family)
    if seeds is None:
        seeds = default_seeds(box)
    f, names = _surface_function(spec, family, fixed)
    results = []
    for seed in np.atleast_2d(np.asarray(seeds, dtype=float)):
        res = minimize(f, seed, method="Nelder-Mead", bounds=box,
                       options=dict(xatol=1e-10, fatol=1e-12, maxiter=5000))
        if math.isfinite(res.fun):
            results.append((float(res.fun), tuple(float(v) for v in res.x)))
    if not results:
        raise ModelError("all seeds diverged; the surface may be unbounded below")
    results.sort()
    best_e, best_x = results[0]
    distinct = []
    for e, x in results:
        if e - best_e > degeneracy_tol:
            break
        if all(max(abs(a - b) for a, b in zip(x, d)) > 1e-5 for d in distinct):
            distinct.append(x)
    params = dict(fixed)
    params.update(zip(names, best_x))
    if len(distinct) > 1:
        params["degenerate_minima"] = tuple(distinct)
    return VariationalPoint(family, params, best_e)


# --- embedding ---------------------------------------------------------------


def _field_log_amplitudes(alpha: complex, nus: np.ndarray):
    """ln magnitude and phase of exp(-|a|^2/2) a^nu / sqrt(nu!)."""
    a = abs(alpha)
    if a == 0.0:
        ln_mag = np.where(nus == 0, 0.0, -np.inf)
        return ln_mag, np.ones_like(nus, dtype=complex)
    ln_mag = -0.5 * a * a + nus * math.log(a) - 0.5 * gammaln(nus + 1.0)
    phase = np.exp(1j * np.angle(alpha) * nus)
    return ln_mag, phase


def _embed_coherent2(spec: ModelSpec, basis: Basis, q, p, theta, phi):
    alpha, zeta = _coherent2_params(q, p, theta, phi)
    j = spec.n_atoms / 2.0
    labels = np.asarray(basis.labels)
    nus = labels[:, 0].astype(float)
    ks = ((labels[:, 1] + spec.n_atoms) // 2).astype(int)  # j + m
    ln_f, ph_f = _field_log_amplitudes(alpha, nus)
    t = abs(zeta)
    twoj = spec.n_atoms
    ln_binom = 0.5 * (gammaln(twoj + 1.0) - gammaln(ks + 1.0)
                      - gammaln(twoj - ks + 1.0))
    if t == 0.0:
        ln_at = np.where(ks == 0, 0.0, -np.inf)
        ph_at = np.ones_like(ks, dtype=complex)
    else:
        ln_at = ln_binom + ks * math.log(t) - j * math.log1p(t * t)
        ph_at = np.exp(1j * np.angle(zeta) * ks)
    amp = np.exp(ln_f + ln_at) * ph_f * ph_at
    return amp


def _embed_coherent3(spec: ModelSpec, basis: Basis, alpha, g2, g3):
    g = np.array([1.0, g2, g3], dtype=complex)
    gnorm2 = float(np.vdot(g, g).real)
    n = spec.n_atoms
    labels = np.asarray(basis.labels)
    nus = labels[:, 0].astype(float)
    occ = np.stack([labels[:, 2],
                    labels[:, 1] - labels[:, 2],
                    n - labels[:, 1]], axis=1).astype(int)
    ln_f, ph_f = _field_log_amplitudes(alpha, nus)
    ln_multi = 0.5 * (gammaln(n + 1.0) - gammaln(occ + 1.0).sum(axis=1))
    amp = np.zeros(len(labels), dtype=complex)
    mags = np.abs(g)
    with np.errstate(divide="ignore"):
        ln_g = np.where(mags > 0, np.log(mags, where=mags > 0), -np.inf)
    ln_at = ln_multi + occ @ ln_g - 0.5 * n * math.log(gnorm2)
    valid = ~np.isneginf(ln_at)
    phases = np.ones(len(labels), dtype=complex)
    for lvl in range(3):
        ang = np.angle(g[lvl])
        if ang != 0.0:
            phases *= np.exp(1j * ang * occ[:, lvl])
    amp[valid] = np.exp(ln_f[valid] + ln_at[valid]) * ph_f[valid] * phases[valid]
    return amp


def _field_tail_ok(alpha: complex, nu_max: int, tol: float = 1e-10) -> bool:
    lam = abs(alpha) ** 2
    if lam == 0:
        return True
    return float(gammaincc(nu_max + 1.0, lam)) >= 1.0 - tol


def embed_variational_state(point: VariationalPoint, basis: Basis) -> StateVector:
    """Amplitudes of a variational state in a truncated basis.

    Raises if the Fock truncation loses more than 1e-10 of the norm, or if a
    parity projection annihilates the state.
    """
    spec = basis.model
    fam = point.family
    pr = point.params
    nu_max = max(lab[0] for lab in basis.labels)

    if fam in (Family.TCM_COH, Family.DICKE_COH,
               Family.DICKE_SAS_PLUS, Family.DICKE_SAS_MINUS):
        q, p = pr.get("q", 0.0), pr.get("p", 0.0)
        theta, phi = pr.get("theta", 0.0), pr.get("phi", 0.0)
        alpha, _ = _coherent2_params(q, p, theta, phi)
        if not _field_tail_ok(alpha, nu_max):
            raise ModelError("Fock truncation loses more than 1e-10 of the norm")
        amp = _embed_coherent2(spec, basis, q, p, theta, phi)
        if fam in SAS_SIGN:
            amp = _project_parity(amp, basis, SAS_SIGN[fam])
    elif fam is Family.TCM_PROJ:
        lam = pr["lam"]
        if basis.sector.sector is SectorType.LAMBDA_BLOCK:
            if basis.sector.value != lam:
                raise ModelError("basis block does not match the projected lambda")
            amp = tcm_projected_coefficients(spec, lam).astype(complex)
        else:
            coeff = tcm_projected_coefficients(spec, lam)
            nus = range(max(0, lam - spec.n_atoms), lam + 1)
            index = basis.index()
            amp = np.zeros(basis.dimension, dtype=complex)
            for c, nu in zip(coeff, nus):
                target = (nu, 2 * (lam - nu) - spec.n_atoms)
                if target not in index:
                    raise ModelError("Fock truncation drops part of the projected state")
                amp[index[target]] = c
    elif fam in (Family.RWA3_COH, Family.FULL3_COH,
                 Family.FULL3_SAS_PLUS, Family.FULL3_SAS_MINUS,
                 Family.V_SAS_PLUS, Family.RWA3_PROJ):
        alpha, g2, g3 = _three_level_amplitudes(spec, fam, pr)
        if basis.sector.sector is not SectorType.M_BLOCK \
                and not _field_tail_ok(alpha, nu_max):
            raise ModelError("Fock truncation loses more than 1e-10 of the norm")
        amp = _embed_coherent3(spec, basis, alpha, g2, g3)
        if fam in SAS_SIGN:
            amp = _project_parity(amp, basis, SAS_SIGN[fam])
        if fam is Family.RWA3_PROJ:
            if basis.sector.sector is not SectorType.M_BLOCK \
                    or basis.sector.value != pr["m"]:
                raise ModelError("RWA3_PROJ embedding requires the matching M block")
    else:
        raise ModelError(f"cannot embed family {fam}")
    nrm = np.linalg.norm(amp)
    if nrm < 1e-12:
        raise ModelError("projection annihilates this state")
    return StateVector.from_amplitudes(amp, basis)


def _three_level_amplitudes(spec: ModelSpec, fam: Family, pr: dict):
    if fam is Family.V_SAS_PLUS:
        mu12, mu13 = spec.mu(1, 2), spec.mu(1, 3)
        theta_mu = math.atan2(mu13, mu12)
        eta = theta_mu + pr["chi"]
        alpha = math.sqrt(spec.n_atoms) * pr["rho"]
        return alpha, pr["xi"] * math.cos(eta), pr["xi"] * math.sin(eta)
    if fam in (Family.FULL3_SAS_PLUS, Family.FULL3_SAS_MINUS):
        return pr["alpha"], pr["rho2"], pr["rho3"]
    if fam is Family.RWA3_PROJ:
        den = 1.0 + pr["rho2"] ** 2 + pr["rho3"] ** 2
        lam2, lam3 = spec.excitation_weights
        n = spec.n_atoms
        nu = pr["m"] - (lam2 * n * pr["rho2"] ** 2 + lam3 * n * pr["rho3"] ** 2) / den
        rho = math.sqrt(max(nu, 0.0))
        return rho, pr["rho2"], pr["rho3"]
    phases = (pr.get("phi", 0.0), pr.get("phi2", 0.0), pr.get("phi3", 0.0))
    alpha = pr["rho"] * cmath.exp(1j * phases[0])
    g2 = pr["rho2"] * cmath.exp(1j * phases[1])
    g3 = pr["rho3"] * cmath.exp(1j * phases[2])
    return alpha, g2, g3


def _project_parity(amp: np.ndarray, basis: Basis, sign: int) -> np.ndarray:
    pars = np.array([(-1) ** basis.lambda_of(lab) for lab in basis.labels])
    out = amp.copy()
    out[pars != sign] = 0.0
    return out
