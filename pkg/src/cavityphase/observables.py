"""Expectation values and fluctuations, numeric and closed form.

The closed forms are the critical-point expectation values of the Dicke
coherent and parity-adapted (SAS) states in the superradiant regime as
functions of x = gamma/gamma_c; the normal region (x <= 1) is their x -> 1
limit.  Tavis-Cummings values follow from the substitution
gamma_c -> gamma_c / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelError, ModelSpec
from .operators import OperatorMatrix, operator_matrix
from .spectra import StateVector
from .variational import parity_overlap_factor

OBSERVABLE_IDS = (
    "q", "p", "J_x", "J_y", "J_z", "n_ph", "Lambda",
    "var_q", "var_p", "var_Jx", "var_Jy", "var_Jz", "var_nph", "var_Lambda",
    "Jz_nph_corr", "Jx_q_corr",
)

FAMILIES = ("QUANTUM", "COHERENT", "SAS_PLUS", "SAS_MINUS")


@dataclass(frozen=True)
class ObservableReport:
    observable_id: str
    value: float
    family: str


def expectation_and_fluctuation(state: StateVector, op: OperatorMatrix):
    """(mean, variance) of a Hermitian operator in a state."""
    if state.basis.labels != op.basis.labels:
        raise ModelError("state and operator live on different bases")
    w = op.entries @ state.amplitudes
    mean = complex(np.vdot(state.amplitudes, w))
    if abs(mean.imag) > 1e-9 * max(1.0, abs(mean)):
        raise ModelError("operator is not Hermitian on this state")
    var = float(np.vdot(w, w).real) - mean.real**2
    return mean.real, max(var, 0.0)


def product_expectation(state: StateVector, op_a: OperatorMatrix,
                        op_b: OperatorMatrix) -> float:
    """<A B> for commuting Hermitian A, B (e.g. J_z with n_ph)."""
    if state.basis.labels != op_a.basis.labels \
            or state.basis.labels != op_b.basis.labels:
        raise ModelError("state and operators live on different bases")
    w = op_a.entries @ (op_b.entries @ state.amplitudes)
    return float(np.vdot(state.amplitudes, w).real)


def numeric_observable(state: StateVector, observable_id: str) -> float:
    """Evaluate one table observable numerically on a state."""
    b = state.basis
    if observable_id in ("q", "p", "J_x", "J_y", "J_z", "n_ph"):
        return expectation_and_fluctuation(state, operator_matrix(observable_id, b))[0]
    if observable_id == "Lambda":
        return expectation_and_fluctuation(state, operator_matrix("Lambda_hat", b))[0]
    if observable_id.startswith("var_"):
        name = {"var_q": "q", "var_p": "p", "var_Jx": "J_x", "var_Jy": "J_y",
                "var_Jz": "J_z", "var_nph": "n_ph", "var_Lambda": "Lambda_hat"}
        return expectation_and_fluctuation(state, operator_matrix(name[observable_id], b))[1]
    if observable_id == "Jz_nph_corr":
        return product_expectation(state, operator_matrix("J_z", b),
                                   operator_matrix("n_ph", b))
    if observable_id == "Jx_q_corr":
        return product_expectation(state, operator_matrix("J_x", b),
                                   operator_matrix("q", b))
    raise ModelError(f"unknown observable id {observable_id!r}")


def closed_form_observable(family: str, observable_id: str, x: float,
                           gamma_c: float, n_atoms: int,
                           model: str = "DICKE") -> float:
    """Critical-point closed form of one observable.

    family is COHERENT, SAS_PLUS or SAS_MINUS; model = "TCM" applies the
    gamma_c -> gamma_c/2 substitution first.  For x <= 1 the normal-region
    (x -> 1) value is returned; the odd SAS family does not exist there.
    """
    if x <= 0:
        raise ModelError("x must be positive")
    if model == "TCM":
        gamma_c = gamma_c / 2.0
    elif model != "DICKE":
        raise ModelError("model must be DICKE or TCM")
    if x <= 1.0:
        if family == "SAS_MINUS":
            raise ModelError("the odd SAS state vanishes in the normal region")
        x = 1.0
    n = n_atoms
    g2 = gamma_c * gamma_c
    xm2 = x**-2
    xm4 = x**-4
    w = 1.0 - xm4            # sin^2(theta_c)
    if family == "COHERENT":
        table = {
            "q": -math.sqrt(2.0 * n) * gamma_c * x * math.sqrt(w),
            "p": 0.0,
            "J_x": 0.5 * n * math.sqrt(w),
            "J_y": 0.0,
            "J_z": -0.5 * n * xm2,
            "n_ph": n * g2 * x * x * w,
            "Lambda": 0.5 * n * (1.0 - xm2 + 2.0 * g2 * x * x * w),
            "var_q": 0.5,
            "var_p": 0.5,
            "var_Jx": 0.25 * n * xm4,
            "var_Jy": 0.25 * n,
            "var_Jz": 0.25 * n * w,
            "var_nph": n * g2 * x * x * w,
            "Jz_nph_corr": -0.5 * n * n * g2 * w,
            "Jx_q_corr": -math.sqrt(n**3 / 2.0) * gamma_c * x * w,
            "var_Lambda": 0.25 * n * w * (1.0 + 4.0 * g2 * x * x),
        }
    elif family in ("SAS_PLUS", "SAS_MINUS"):
        s = 1.0 if family == "SAS_PLUS" else -1.0
        f = parity_overlap_factor(x, gamma_c, n)
        d = 1.0 + s * f
        x2, x4 = x * x, x**4
        table = {
            "q": 0.0,
            "p": 0.0,
            "J_x": 0.0,
            "J_y": 0.0,
            "J_z": -0.5 * n * x2 * (1.0 - w / d),
            "n_ph": n * g2 * x2 * w * (1.0 - s * f) / d,
            "Lambda": 0.5 * n * ((1.0 - xm2) / d)
            * (1.0 + 2.0 * g2 * (1.0 + x2) - s * (x2 + 2.0 * g2 * (1.0 + x2)) * f),
            "var_q": 0.5 + 2.0 * n * g2 * x2 * w / d,
            "var_p": 0.5 - s * 2.0 * n * g2 * x2 * (w / d) * f,
            "var_Jx": 0.25 * n * (1.0 + (n - 1.0) * w / d),
            "var_Jy": 0.25 * n * (1.0 + s * (n - 1.0) * (1.0 - x4) * f / d),
            "var_Jz": 0.25 * n * (w / d**2)
            * (1.0 - s * (n - 1.0) * (1.0 - x4) * f - x4 * f * f),
            "var_nph": (n * g2 * x2 * w / d)
            * (1.0 - s * f + s * 4.0 * n * g2 * x2 * w * f / d),
            "Jz_nph_corr": -0.5 * n * n * g2 * x4 * w * (xm4 - s * f) / d,
            "Jx_q_corr": -math.sqrt(n**3 / 2.0) * gamma_c * x * w / d,
            "var_Lambda": 0.25 * n * w / d**2
            * (1.0 + 4.0 * x2 * g2
               + s * f * (1.0 - x4) * (1.0 - n * (1.0 + 4.0 * g2) ** 2)
               - x2 * f * f * (x2 + 4.0 * g2)),
        }
    else:
        raise ModelError(f"unknown family {family!r}")
    if observable_id not in table:
        raise ModelError(f"no closed-form row for {observable_id!r}")
    return table[observable_id]


def coherent_sas_overlap(x: float, gamma_c: float, n_atoms: int):
    """(|<coh|+>|^2, |<coh|->|^2) = ((1+F)/2, (1-F)/2) at the critical point."""
    if x <= 0:
        raise ModelError("x must be positive")
    f = parity_overlap_factor(x, gamma_c, n_atoms)
    return (1.0 + f) / 2.0, (1.0 - f) / 2.0


@dataclass(frozen=True)
class NormalRegionReport:
    atomic_ratio: float
    field_ratio: float
    is_normal: bool


def normal_criterion(state: StateVector, spec: ModelSpec,
                     rel_tol: float = 0.02) -> NormalRegionReport:
    """Atomic vs field excitation ratios; equal ratios define the normal region.

    The atomic excitation counter is lambda_2 A_22 + lambda_3 A_33 for the
    state's configuration (A_22 + A_33 in the V configuration).
    """
    if spec.is_two_level:
        raise ModelError("the normal-region criterion applies to 3-level states")
    b = state.basis
    lam2, lam3 = spec.excitation_weights
    a11 = expectation_and_fluctuation(state, operator_matrix("A_11", b))[0]
    a22 = expectation_and_fluctuation(state, operator_matrix("A_22", b))[0]
    a33 = expectation_and_fluctuation(state, operator_matrix("A_33", b))[0]
    nph = expectation_and_fluctuation(state, operator_matrix("n_ph", b))[0]
    if a11 <= 1e-12:
        raise ModelError("no population in the lowest level; ratio undefined")
    atomic = (lam2 * a22 + lam3 * a33) / a11
    fieldr = nph / spec.n_atoms
    scale = max(abs(atomic), abs(fieldr), 1e-12)
    return NormalRegionReport(atomic, fieldr,
                              abs(atomic - fieldr) <= rel_tol * scale)
