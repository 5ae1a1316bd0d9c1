import math

import numpy as np
import pytest

from cavityphase import (
    Family,
    ModelError,
    ModelKind,
    ModelSpec,
    SectorSpec,
    SectorType,
    VariationalPoint,
    assemble_hamiltonian,
    closed_form_observable,
    coherent_sas_overlap,
    embed_variational_state,
    enumerate_basis,
    expectation_and_fluctuation,
    lowest_eigenpairs,
    minimize_energy,
    normal_criterion,
    numeric_observable,
    operator_matrix,
    OBSERVABLE_IDS,
)


def dicke(n, g, wa=1.0):
    return ModelSpec(ModelKind.DICKE, n, wa, g)


def embed_critical(n, x, fam, cutoff=90):
    spec = dicke(n, 1.0)
    basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=cutoff))
    if x > 1.0:
        theta = math.acos(x**-2)
        q = -math.sqrt(2.0 * n) * 0.5 * x * math.sin(theta)
    else:
        theta, q = 0.0, 0.0
    return embed_variational_state(
        VariationalPoint(fam, dict(q=q, theta=theta), 0.0), basis)


class TestNumericExpectations:
    def test_spin_down_eigenstate(self):
        spec = dicke(20, 0.4)
        basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=4))
        amp = np.zeros(basis.dimension)
        amp[basis.index()[(0, -20)]] = 1.0
        from cavityphase.spectra import StateVector
        st = StateVector.from_amplitudes(amp, basis)
        mean, var = expectation_and_fluctuation(st, operator_matrix("J_z", basis))
        assert mean == pytest.approx(-10.0, abs=1e-12)
        assert var == pytest.approx(0.0, abs=1e-12)
        mean, var = expectation_and_fluctuation(st, operator_matrix("n_ph", basis))
        assert (mean, var) == (0.0, 0.0)

    def test_basis_mismatch(self):
        spec = dicke(2, 0.4)
        b1 = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=3))
        b2 = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=4))
        st = lowest_eigenpairs(assemble_hamiltonian(spec, b1), 1).ground_state
        with pytest.raises(ModelError):
            expectation_and_fluctuation(st, operator_matrix("J_z", b2))


class TestClosedForms:
    def test_spot_values(self):
        assert closed_form_observable("COHERENT", "J_z", 1.0, 0.5, 10) == -5.0
        assert closed_form_observable("SAS_PLUS", "q", 1.7, 0.5, 10) == 0.0
        assert closed_form_observable("COHERENT", "var_q", 1.7, 0.5, 10) == 0.5

    def test_closed_forms_match_embedded_states(self):
        # light version of the full acceptance sweep
        for x in (1.0, 2.0):
            fams = [("COHERENT", Family.DICKE_COH), ("SAS_PLUS", Family.DICKE_SAS_PLUS)]
            if x > 1.0:
                fams.append(("SAS_MINUS", Family.DICKE_SAS_MINUS))
            for fam_name, fam in fams:
                st = embed_critical(6, x, fam)
                for obs in ("J_z", "n_ph", "var_nph", "var_Lambda", "Jz_nph_corr"):
                    cf = closed_form_observable(fam_name, obs, x, 0.5, 6)
                    assert abs(cf - numeric_observable(st, obs)) <= 1e-8

    def test_tcm_substitution_rule(self):
        # TCM closed forms arise only from gamma_c -> gamma_c/2
        n, wa, x = 8, 1.0, 1.8
        spec = ModelSpec(ModelKind.TCM, n, wa, x * math.sqrt(wa))
        from cavityphase import tcm_critical_data
        data = tcm_critical_data(spec)
        basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=70))
        st = embed_variational_state(
            VariationalPoint(Family.TCM_COH, dict(q=data.q_c, theta=data.theta_c), 0.0),
            basis)
        for obs in OBSERVABLE_IDS:
            cf = closed_form_observable("COHERENT", obs, x, math.sqrt(wa), n, model="TCM")
            assert abs(cf - numeric_observable(st, obs)) <= 1e-8

    def test_normal_region_is_x_to_one_limit(self):
        for obs in OBSERVABLE_IDS:
            a = closed_form_observable("COHERENT", obs, 0.4, 0.5, 6)
            b = closed_form_observable("COHERENT", obs, 1.0, 0.5, 6)
            assert a == b

    def test_odd_family_undefined_in_normal_region(self):
        with pytest.raises(ModelError):
            closed_form_observable("SAS_MINUS", "J_z", 0.9, 0.5, 6)

    def test_unknown_row(self):
        with pytest.raises(ModelError):
            closed_form_observable("COHERENT", "var_qp", 1.5, 0.5, 6)

    def test_sas_inherits_coherent_values_at_large_n(self):
        # rows whose adapted-state forms reduce to the coherent ones as the
        # overlap factor vanishes; field means and transverse atomic
        # fluctuations are the exceptions
        inheriting = ("J_z", "n_ph", "Lambda", "var_p", "var_Jy", "var_Jz",
                      "var_nph", "Jz_nph_corr", "Jx_q_corr", "var_Lambda")
        x = 1.15  # overlap factor still resolvable in double precision here
        gaps = []
        for n in (10, 20, 40):
            gap = max(abs(closed_form_observable("SAS_PLUS", obs, x, 0.5, n)
                          - closed_form_observable("COHERENT", obs, x, 0.5, n)) / n
                      for obs in inheriting)
            gaps.append(gap)
        assert gaps[2] < gaps[1] < gaps[0]
        assert gaps[2] < 1e-6
        # exceptions stay apart
        for obs in ("q", "var_q", "var_Jx"):
            d = abs(closed_form_observable("SAS_PLUS", obs, x, 0.5, 40)
                    - closed_form_observable("COHERENT", obs, x, 0.5, 40))
            assert d > 0.1


class TestOverlap:
    def test_no_interaction_perfect_overlap(self):
        plus, minus = coherent_sas_overlap(0.2, 0.5, 10)
        assert plus == 1.0 and minus == 0.0

    def test_strong_coupling_limit(self):
        plus, minus = coherent_sas_overlap(50.0, 0.5, 10)
        assert plus == pytest.approx(0.5, abs=1e-12)
        assert minus == pytest.approx(0.5, abs=1e-12)

    def test_large_n_limit(self):
        plus, minus = coherent_sas_overlap(2.0, 0.5, 5000)
        assert plus == pytest.approx(0.5, abs=1e-12)
        assert minus == pytest.approx(0.5, abs=1e-12)


class TestQuantumFiniteness:
    def test_no_divergence_across_transition(self):
        # finite-size quantum observables stay finite through the critical
        # region
        sector = SectorSpec(SectorType.PARITY, +1, fock_cutoff=40)
        for g in np.linspace(0.3, 0.8, 11):
            spec = dicke(8, g)
            basis = enumerate_basis(spec, sector)
            nph = operator_matrix("n_ph", basis)
            H = assemble_hamiltonian(spec, basis)
            st = lowest_eigenpairs(H, 1).ground_state
            mean, var = expectation_and_fluctuation(st, nph)
            assert np.isfinite(mean) and np.isfinite(var)
            assert mean < 10 * 8 and var < (10 * 8) ** 2


class TestNormalCriterion:
    def test_zero_coupling_ratios(self):
        spec = ModelSpec(ModelKind.V_FULL, 6, (0.0, 1.0, 1.0), (0.0, 0.0, 0.0))
        basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=6))
        st = lowest_eigenpairs(assemble_hamiltonian(spec, basis), 1).ground_state
        rep = normal_criterion(st, spec)
        assert rep.atomic_ratio == pytest.approx(0.0, abs=1e-12)
        assert rep.field_ratio == pytest.approx(0.0, abs=1e-12)
        assert rep.is_normal

    def test_v_sas_normal_region_balance(self):
        n = 10
        m = 0.3 / math.sqrt(2.0)
        spec = ModelSpec(ModelKind.V_FULL, n, (0.0, 1.0, 1.0), (m, m, 0.0))
        point = minimize_energy(spec, Family.FULL3_SAS_PLUS)
        basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=30))
        st = embed_variational_state(point, basis)
        rep = normal_criterion(st, spec, rel_tol=0.02)
        assert rep.is_normal

    def test_collective_region_field_dominates(self):
        n = 10
        m = 0.9 / math.sqrt(2.0)
        spec = ModelSpec(ModelKind.V_FULL, n, (0.0, 1.0, 1.0), (m, m, 0.0))
        point = minimize_energy(spec, Family.FULL3_SAS_PLUS)
        basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=80))
        st = embed_variational_state(point, basis)
        rep = normal_criterion(st, spec)
        assert rep.field_ratio > rep.atomic_ratio
        assert not rep.is_normal
