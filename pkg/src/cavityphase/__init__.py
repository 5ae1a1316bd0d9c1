"""Exact and variational phase diagrams of 2- and 3-level atoms dipolarly
coupled to a single quantised cavity mode."""

from .model import (
    Basis,
    ModelError,
    ModelKind,
    ModelSpec,
    SectorSpec,
    SectorType,
    enumerate_basis,
    lambda_c_classical,
)
from .operators import OperatorMatrix, assemble_hamiltonian, operator_matrix
from .spectra import (
    CutoffCapError,
    EigenResult,
    ScanResult,
    SolverError,
    StateVector,
    converged_ground,
    lowest_eigenpairs,
    spectrum_scan,
)
from .variational import (
    Family,
    TcmCriticalData,
    VariationalPoint,
    dicke_sas_critical_energy,
    embed_variational_state,
    energy_surface_2level,
    energy_surface_3level,
    full3_coherent_energy,
    full3_sas_energy,
    minimize_energy,
    parity_overlap_factor,
    rwa3_coherent_energy,
    rwa3_continuum_excitation,
    rwa3_projected_energy,
    rwa3_reduced_minimum,
    tcm_critical_data,
    tcm_projected_energy,
    tcm_projected_ground,
    v_sas_plus_energy,
)
from .observables import (
    NormalRegionReport,
    ObservableReport,
    OBSERVABLE_IDS,
    closed_form_observable,
    coherent_sas_overlap,
    expectation_and_fluctuation,
    normal_criterion,
    numeric_observable,
    product_expectation,
)
from .phase import (
    FitResult,
    ParameterPath,
    Transition,
    TransitionReport,
    dicke_quantum_critical_coupling,
    dicke_sas_critical_coupling,
    fidelity_and_susceptibility,
    fit_critical_exponent,
    locate_transitions,
    rwa3_block_crossing,
    rwa3_first_crossing,
    rwa3_global_ground,
    rwa3_projected_block_minimum,
    separatrix_ordinate,
    spec_with,
    tcm_global_ground,
    triple_point_ground_state,
    triple_point_spec,
    v_sas_critical_coupling,
)
from .jobs import ComputeError, ConfigError, JobConfig, run_job

__version__ = "0.1.0"
