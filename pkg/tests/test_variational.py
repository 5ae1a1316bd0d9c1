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
    dicke_sas_critical_energy,
    embed_variational_state,
    energy_surface_2level,
    energy_surface_3level,
    enumerate_basis,
    full3_coherent_energy,
    full3_sas_energy,
    lowest_eigenpairs,
    minimize_energy,
    parity_overlap_factor,
    rwa3_coherent_energy,
    tcm_critical_data,
    tcm_projected_energy,
    tcm_projected_ground,
    v_sas_plus_energy,
)
from cavityphase.variational import _coherent2_params, _h2_expectation


def tcm(n, wa, g):
    return ModelSpec(ModelKind.TCM, n, wa, g)


def dicke(n, g, wa=1.0):
    return ModelSpec(ModelKind.DICKE, n, wa, g)


def expect_h(spec, basis, state):
    H = assemble_hamiltonian(spec, basis)
    return float(np.vdot(state.amplitudes, H.entries @ state.amplitudes).real)


class TestSurfaceOracle:
    """Every surface value must equal <psi|H|psi> of the embedded state."""

    def test_two_level_families(self):
        rng = np.random.default_rng(7)
        spec_t = tcm(6, 0.8, 0.7)
        spec_d = dicke(6, 0.6)
        bt = enumerate_basis(spec_t, SectorSpec(SectorType.FULL, fock_cutoff=60))
        bd = enumerate_basis(spec_d, SectorSpec(SectorType.FULL, fock_cutoff=60))
        for _ in range(6):
            pars = dict(q=rng.uniform(-2.5, 2.5), p=rng.uniform(-2.5, 2.5),
                        theta=rng.uniform(0.05, math.pi - 0.05),
                        phi=rng.uniform(0.0, 2.0 * math.pi))
            e = energy_surface_2level(spec_t, Family.TCM_COH, pars)
            st = embed_variational_state(VariationalPoint(Family.TCM_COH, pars, e), bt)
            assert abs(e - expect_h(spec_t, bt, st)) <= 1e-8
            for fam in (Family.DICKE_COH, Family.DICKE_SAS_PLUS, Family.DICKE_SAS_MINUS):
                e = energy_surface_2level(spec_d, fam, pars)
                st = embed_variational_state(VariationalPoint(fam, pars, e), bd)
                assert abs(e - expect_h(spec_d, bd, st) / 6) <= 1e-8

    def test_three_level_families(self):
        rng = np.random.default_rng(9)
        xi = ModelSpec(ModelKind.XI_RWA, 4, (0.0, 1.0, 2.0), (0.8, 0.0, 1.1))
        vf = ModelSpec(ModelKind.V_FULL, 5, (0.0, 1.0, 1.0), (0.4, 0.3, 0.0))
        bx = enumerate_basis(xi, SectorSpec(SectorType.FULL, fock_cutoff=50))
        bv = enumerate_basis(vf, SectorSpec(SectorType.FULL, fock_cutoff=50))
        for _ in range(5):
            rho, r2, r3 = rng.uniform(0.1, 1.6, 3)
            e = rwa3_coherent_energy(xi, rho, r2, r3)
            pt = VariationalPoint(Family.RWA3_COH, dict(rho=rho, rho2=r2, rho3=r3), e)
            st = embed_variational_state(pt, bx)
            assert abs(e - expect_h(xi, bx, st) / 4) <= 1e-8
            al = rng.uniform(0.05, 1.5)
            for fam, sgn in ((Family.FULL3_SAS_PLUS, +1), (Family.FULL3_SAS_MINUS, -1)):
                e = full3_sas_energy(vf, al, r2, r3, sgn)
                pt = VariationalPoint(fam, dict(alpha=al, rho2=r2, rho3=r3), e)
                st = embed_variational_state(pt, bv)
                assert abs(e - expect_h(vf, bv, st) / 5) <= 1e-8

    def test_projected_energy_matches_embedded(self):
        spec = tcm(20, 0.8, 1.3)
        lam, point, coeff = tcm_projected_ground(spec)
        basis = enumerate_basis(spec, SectorSpec(SectorType.LAMBDA_BLOCK, lam))
        st = embed_variational_state(point, basis)
        assert abs(point.energy - expect_h(spec, basis, st)) <= 1e-10

    def test_projected_energy_large_lambda_branch(self):
        # lambda > 2j exercises the second ratio branch
        spec = tcm(4, 0.2, 1.6)
        for lam in (5, 7, 9):
            basis = enumerate_basis(spec, SectorSpec(SectorType.LAMBDA_BLOCK, lam))
            pt = VariationalPoint(Family.TCM_PROJ, {"lam": lam}, 0.0)
            st = embed_variational_state(pt, basis)
            assert abs(tcm_projected_energy(spec, lam)
                       - expect_h(spec, basis, st)) <= 1e-10


class TestTwoLevelSurfaces:
    def test_dicke_decoupled_ground(self):
        spec = dicke(8, 0.7)
        e = energy_surface_2level(spec, Family.DICKE_COH, dict(q=0.0, theta=0.0))
        assert e == pytest.approx(-0.5, abs=1e-14)  # -omega_a/2 per atom

    def test_sas_plus_normal_value(self):
        for n in (4, 12):
            spec = dicke(n, 0.5)
            e = dicke_sas_critical_energy(spec, 1.0, +1)
            assert e == pytest.approx(-2.0 * 0.25, abs=1e-14)  # -2 gamma_c^2

    def test_sas_continuous_across_x_one(self):
        spec = dicke(10, 0.6)
        for sign in (+1, -1):
            left = dicke_sas_critical_energy(spec, 1.0 - 1e-12, sign)
            right = dicke_sas_critical_energy(spec, 1.0 + 1e-12, sign)
            assert abs(left - right) <= 1e-10

    def test_parity_split_bounds_coherent(self):
        spec = dicke(10, 1.0)
        x = 2.0
        theta = math.acos(x**-2)
        q = -math.sqrt(2.0 * 10) * 1.0 * math.sin(theta)
        pars = dict(q=q, theta=theta)
        ec = energy_surface_2level(spec, Family.DICKE_COH, pars)
        ep = energy_surface_2level(spec, Family.DICKE_SAS_PLUS, pars)
        em = energy_surface_2level(spec, Family.DICKE_SAS_MINUS, pars)
        assert min(ep, em) <= ec + 1e-14

    def test_parity_decomposition_identity(self):
        spec = dicke(10, 0.8)
        rng = np.random.default_rng(13)
        for _ in range(100):
            pars = dict(q=rng.uniform(-3, 3), p=rng.uniform(-3, 3),
                        theta=rng.uniform(0.05, math.pi - 0.05),
                        phi=rng.uniform(0, 2 * math.pi))
            al, ze = _coherent2_params(**pars)
            _, s = _h2_expectation(spec, al, ze, -al, -ze)
            f = s.real
            ec = energy_surface_2level(spec, Family.DICKE_COH, pars)
            ep = energy_surface_2level(spec, Family.DICKE_SAS_PLUS, pars)
            em = energy_surface_2level(spec, Family.DICKE_SAS_MINUS, pars)
            assert abs(ec - 0.5 * ((1 + f) * ep + (1 - f) * em)) <= 1e-10

    def test_tcm_phase_is_cyclic(self):
        # rotating (q, p) by the atomic phase leaves the TCM surface invariant
        spec = tcm(7, 0.9, 0.8)
        rng = np.random.default_rng(17)
        for _ in range(20):
            q, p = rng.uniform(-2, 2, 2)
            theta = rng.uniform(0.1, 3.0)
            phi = rng.uniform(0, 2 * math.pi)
            e1 = energy_surface_2level(spec, Family.TCM_COH,
                                       dict(q=q, p=p, theta=theta, phi=phi))
            qr = q * math.cos(phi) - p * math.sin(phi)
            pr = q * math.sin(phi) + p * math.cos(phi)
            e2 = energy_surface_2level(spec, Family.TCM_COH,
                                       dict(q=qr, p=pr, theta=theta, phi=0.0))
            assert abs(e1 - e2) <= 1e-12


class TestTcmCritical:
    def test_north_pole(self):
        data = tcm_critical_data(tcm(10, 0.8, 0.5))
        assert data.region == "NorthPole"
        assert data.e0_per_atom == pytest.approx(-0.4, abs=1e-14)
        assert data.lambda_c == 0.0

    def test_parallels(self):
        data = tcm_critical_data(tcm(10, 0.8, 1.0))
        assert data.region == "Parallels"
        assert data.theta_c == pytest.approx(math.acos(0.8), abs=1e-14)
        assert data.e0_per_atom == pytest.approx(-0.41, abs=1e-14)
        assert data.lambda_c == pytest.approx(10 * 0.19, abs=1e-12)

    def test_south_pole(self):
        data = tcm_critical_data(tcm(10, -0.5, 0.5))
        assert data.region == "SouthPole"
        assert data.lambda_c == 10.0

    def test_boundary_assigned_to_pole(self):
        assert tcm_critical_data(tcm(4, 0.25, 0.5)).region == "NorthPole"

    def test_minimizer_agrees_with_closed_form(self):
        for wa, g in ((0.8, 0.5), (0.8, 1.0), (-0.5, 0.5), (0.3, 0.9)):
            spec = tcm(12, wa, g)
            data = tcm_critical_data(spec)
            point = minimize_energy(spec, Family.TCM_COH)
            assert abs(point.energy - data.e0_per_atom) <= 1e-8


class TestTcmProjected:
    def test_north_pole_state(self):
        spec = tcm(6, 0.9, 0.5)  # omega_a > gamma^2
        lam, point, coeff = tcm_projected_ground(spec)
        assert lam == 0
        assert point.energy == pytest.approx(-0.5 * (1.0 - spec.detuning), abs=1e-14)
        np.testing.assert_allclose(coeff, [1.0])
        basis = enumerate_basis(spec, SectorSpec(SectorType.LAMBDA_BLOCK, 0))
        st = embed_variational_state(point, basis)
        np.testing.assert_allclose(np.abs(st.amplitudes), [1.0], atol=1e-14)

    def test_projected_bounds_block_ground(self):
        spec = tcm(20, 0.8, 1.3)
        lam, point, _ = tcm_projected_ground(spec)
        basis = enumerate_basis(spec, SectorSpec(SectorType.LAMBDA_BLOCK, lam))
        e0 = lowest_eigenpairs(assemble_hamiltonian(spec, basis), 1).ground_energy
        assert point.energy >= e0 - 1e-12


class TestThreeLevelSurfaces:
    def test_empty_cavity_energy(self):
        spec = ModelSpec(ModelKind.XI_RWA, 5, (0.3, 1.3, 2.3), (0.5, 0.0, 0.5))
        e = rwa3_coherent_energy(spec, 0.0, 0.0, 0.0)
        assert e == pytest.approx(0.3, abs=1e-14)  # omega_1 per atom

    def test_full_equals_rwa_at_doubled_couplings(self):
        rng = np.random.default_rng(23)
        freqs = (0.0, 1.0, 2.0)
        for mu12 in rng.uniform(0.05, 1.0, 10):
            for mu23 in rng.uniform(0.05, 1.0, 10):
                rwa = ModelSpec(ModelKind.XI_RWA, 5, freqs,
                                (2 * mu12, 0.0, 2 * mu23))
                full = ModelSpec(ModelKind.XI_FULL, 5, freqs, (mu12, 0.0, mu23))
                rho, r2, r3 = rng.uniform(0.05, 1.8, 3)
                e1 = rwa3_coherent_energy(rwa, rho, r2, r3)
                e2 = full3_coherent_energy(full, rho, r2, r3)
                assert abs(e1 - e2) <= 1e-12

    def test_v_sas_closed_form_matches_general(self):
        spec = ModelSpec(ModelKind.V_FULL, 6, (0.0, 1.0, 1.0), (0.4, 0.3, 0.0))
        theta_mu = math.atan2(0.3, 0.4)
        rng = np.random.default_rng(29)
        for _ in range(10):
            al = rng.uniform(0.05, 2.0)
            g2, g3 = rng.uniform(0.05, 0.65, 2)
            xi = math.hypot(g2, g3)
            chi = math.atan2(g3, g2) - theta_mu
            e1 = v_sas_plus_energy(spec, al / math.sqrt(6), xi, chi)
            e2 = full3_sas_energy(spec, al, g2, g3, +1)
            assert abs(e1 - e2) <= 1e-12

    def test_v_sas_zero_coupling_limit(self):
        spec = ModelSpec(ModelKind.V_FULL, 40, (0.0, 1.0, 1.0), (0.0, 0.0, 0.0))
        point = minimize_energy(spec, Family.V_SAS_PLUS, fixed={"chi": 0.0})
        assert abs(point.energy) <= 1e-9

    def test_v_sas_domain(self):
        spec = ModelSpec(ModelKind.V_FULL, 4, (0.0, 1.0, 1.0), (0.3, 0.3, 0.0))
        with pytest.raises(ModelError):
            v_sas_plus_energy(spec, 0.2, 1.2, 0.0)

    def test_family_kind_mismatch(self):
        xi = ModelSpec(ModelKind.XI_RWA, 3, (0.0, 1.0, 2.0), (0.5, 0.0, 0.5))
        with pytest.raises(ModelError):
            energy_surface_3level(xi, Family.FULL3_COH,
                                  dict(rho=0.1, rho2=0.1, rho3=0.1))
        with pytest.raises(ModelError):
            energy_surface_3level(xi, Family.V_SAS_PLUS,
                                  dict(rho=0.1, xi=0.1, chi=0.0))


class TestMinimize:
    def test_dicke_resonant_superradiant_minimum(self):
        spec = dicke(10, 1.0)
        point = minimize_energy(spec, Family.DICKE_COH)
        assert point.energy == pytest.approx(-1.0625, abs=1e-8)
        # photon number at the minimum: q_c^2 / (2 N) per atom
        nph = point.param("q") ** 2 / 2.0 / 10
        assert nph == pytest.approx(0.9375, abs=1e-6)

    def test_deterministic_given_seeds(self):
        spec = dicke(6, 0.9)
        p1 = minimize_energy(spec, Family.DICKE_COH)
        p2 = minimize_energy(spec, Family.DICKE_COH)
        assert p1.energy == p2.energy
        assert p1.params == p2.params

    def test_v_sas_minimizer_jump_near_half(self):
        from cavityphase import v_sas_critical_coupling
        mu_c = v_sas_critical_coupling(500)
        assert mu_c == pytest.approx(0.5087, abs=0.005)


class TestEmbedding:
    def test_embedded_norm(self):
        spec = dicke(6, 0.8)
        basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=60))
        pt = VariationalPoint(Family.DICKE_COH, dict(q=-2.0, theta=1.0), 0.0)
        st = embed_variational_state(pt, basis)
        assert np.linalg.norm(st.amplitudes) == pytest.approx(1.0, abs=1e-10)

    def test_truncation_loss_raises(self):
        spec = dicke(6, 0.8)
        basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=3))
        pt = VariationalPoint(Family.DICKE_COH, dict(q=-6.0, theta=1.0), 0.0)
        with pytest.raises(ModelError):
            embed_variational_state(pt, basis)

    def test_vanishing_projection_raises(self):
        spec = dicke(6, 0.8)
        basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=30))
        pt = VariationalPoint(Family.DICKE_SAS_MINUS, dict(q=0.0, theta=0.0), 0.0)
        with pytest.raises(ModelError):
            embed_variational_state(pt, basis)

    def test_overlap_matches_closed_form(self):
        spec = dicke(8, 1.0)
        x = 2.0
        theta = math.acos(x**-2)
        q = -math.sqrt(16.0) * 1.0 * math.sin(theta)
        basis = enumerate_basis(spec, SectorSpec(SectorType.FULL, fock_cutoff=80))
        pars = dict(q=q, theta=theta)
        coh = embed_variational_state(VariationalPoint(Family.DICKE_COH, pars, 0.0), basis)
        f = parity_overlap_factor(x, 0.5, 8)
        for fam, sign in ((Family.DICKE_SAS_PLUS, +1), (Family.DICKE_SAS_MINUS, -1)):
            sas = embed_variational_state(VariationalPoint(fam, pars, 0.0), basis)
            ov = abs(np.vdot(coh.amplitudes, sas.amplitudes)) ** 2
            assert abs(ov - 0.5 * (1.0 + sign * f)) <= 1e-8
