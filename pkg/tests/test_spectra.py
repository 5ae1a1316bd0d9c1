import numpy as np
import pytest

from cavityphase import (
    ModelKind,
    ModelSpec,
    SectorSpec,
    SectorType,
    assemble_hamiltonian,
    converged_ground,
    enumerate_basis,
    lowest_eigenpairs,
    spectrum_scan,
)
from cavityphase.spectra import StateVector


def dicke(n, g, wa=1.0):
    return ModelSpec(ModelKind.DICKE, n, wa, g)


def tcm(n, wa, g):
    return ModelSpec(ModelKind.TCM, n, wa, g)


def xi_rwa(n, mu12, mu23):
    return ModelSpec(ModelKind.XI_RWA, n, (0.0, 1.0, 2.0), (mu12, 0.0, mu23))


def hamil(spec, sector):
    return assemble_hamiltonian(spec, enumerate_basis(spec, sector))


class TestLowestEigenpairs:
    def test_scalar_block(self):
        H = hamil(tcm(20, 0.8, 0.5), SectorSpec(SectorType.LAMBDA_BLOCK, 0))
        res = lowest_eigenpairs(H, 1)
        assert res.ground_energy == pytest.approx(-0.4, abs=1e-14)

    def test_analytic_two_by_two(self):
        H = hamil(tcm(2, 1.0, 1.0), SectorSpec(SectorType.LAMBDA_BLOCK, 1))
        res = lowest_eigenpairs(H, 2)
        np.testing.assert_allclose(res.energies, [-0.5, 0.5], atol=1e-14)

    def test_dense_and_iterative_agree(self):
        H = hamil(dicke(4, 0.9), SectorSpec(SectorType.FULL, fock_cutoff=20))
        d = lowest_eigenpairs(H, 3, method="dense")
        s = lowest_eigenpairs(H, 3, method="iterative")
        np.testing.assert_allclose(d.energies, s.energies, atol=1e-9)
        for a, b in zip(d.states, s.states):
            assert abs(abs(a.overlap(b)) - 1.0) <= 1e-8

    def test_orthonormality_and_residuals(self):
        H = hamil(dicke(3, 0.7), SectorSpec(SectorType.FULL, fock_cutoff=14))
        res = lowest_eigenpairs(H, 4)
        V = np.stack([s.amplitudes for s in res.states], axis=1)
        gram = V.conj().T @ V
        assert np.abs(gram - np.eye(4)).max() <= 1e-10
        for e, s in zip(res.energies, res.states):
            assert np.linalg.norm(H.entries @ s.amplitudes - e * s.amplitudes) <= 1e-9

    def test_phase_fixing(self):
        H = hamil(dicke(3, 0.7), SectorSpec(SectorType.FULL, fock_cutoff=10))
        st = lowest_eigenpairs(H, 1).ground_state
        k = int(np.argmax(np.abs(st.amplitudes)))
        assert st.amplitudes[k].imag == 0.0
        assert st.amplitudes[k].real > 0.0

    def test_k_out_of_range(self):
        H = hamil(tcm(2, 1.0, 1.0), SectorSpec(SectorType.LAMBDA_BLOCK, 1))
        with pytest.raises(Exception):
            lowest_eigenpairs(H, 5)


class TestConvergedGround:
    def test_normal_region_energy(self):
        res, n_max = converged_ground(dicke(20, 0.1),
                                      SectorSpec(SectorType.PARITY, +1, fock_cutoff=0),
                                      tol=1e-8)
        assert res.ground_energy / 20 == pytest.approx(-0.5, abs=0.01)

    def test_monotone_in_cutoff(self):
        spec = dicke(20, 1.0)
        energies = []
        for n_max in (30, 60, 120):
            H = hamil(spec, SectorSpec(SectorType.PARITY, +1, fock_cutoff=n_max))
            energies.append(lowest_eigenpairs(H, 1).ground_energy)
        assert energies[1] <= energies[0] + 1e-12
        assert energies[2] <= energies[1] + 1e-12

    def test_finite_block_returns_immediately(self):
        res, nu_max = converged_ground(xi_rwa(4, 1.5, 1.5),
                                       SectorSpec(SectorType.M_BLOCK, 3), tol=1e-10)
        assert nu_max == 3  # largest photon number inside the block

    def test_rayleigh_ritz_bound(self):
        # any normalized vector in the truncated basis bounds E0 from above
        spec = dicke(6, 0.9)
        H = hamil(spec, SectorSpec(SectorType.FULL, fock_cutoff=30))
        e0 = lowest_eigenpairs(H, 1).ground_energy
        rng = np.random.default_rng(11)
        for _ in range(5):
            v = rng.normal(size=H.dimension) + 1j * rng.normal(size=H.dimension)
            v /= np.linalg.norm(v)
            assert np.vdot(v, H.entries @ v).real >= e0 - 1e-10

    def test_full_ground_equals_min_over_parity_blocks(self):
        spec = dicke(4, 0.8)
        e_full = lowest_eigenpairs(
            hamil(spec, SectorSpec(SectorType.FULL, fock_cutoff=24)), 1).ground_energy
        e_blocks = min(
            lowest_eigenpairs(
                hamil(spec, SectorSpec(SectorType.PARITY, p, fock_cutoff=24)), 1
            ).ground_energy
            for p in (+1, -1))
        assert abs(e_full - e_blocks) <= 1e-10


class TestSpectrumScan:
    def test_tcm_curves_touch_at_zero_coupling(self):
        # at resonance all levels of one lambda block meet at gamma = 0
        taus = np.linspace(0.0, 0.5, 6)
        specs = [(t, tcm(6, 1.0, t)) for t in taus]
        scan = spectrum_scan(specs, [SectorSpec(SectorType.LAMBDA_BLOCK, 3)], k=3)
        first = scan.energies[("LAMBDA_BLOCK", 3)][0]
        assert np.ptp(first) <= 1e-12
        last = scan.energies[("LAMBDA_BLOCK", 3)][-1]
        assert np.ptp(last) > 0.1

    def test_degeneracy_breaking_by_second_coupling(self):
        # with mu_12 = 0 the second excited level is degenerate only when
        # mu_23 = 0; a finite mu_23 splits it
        def levels(mu23):
            spec = xi_rwa(4, 0.0, mu23)
            es = []
            for m in range(4):
                H = hamil(spec, SectorSpec(SectorType.M_BLOCK, m))
                k = min(4, H.dimension)
                es.extend(lowest_eigenpairs(H, k).energies)
            es = np.sort(np.asarray(es))
            return es
        e_zero = levels(0.0)
        group0 = e_zero[np.abs(e_zero - 2.0) < 1e-9]
        assert len(group0) >= 3  # degenerate multiplet at E = 2
        e_split = levels(1.5)
        group1 = np.sort(e_split[np.abs(e_split - 2.0) < 1.0])
        assert np.ptp(group1) > 0.5

    def test_curve_tracking_is_continuous(self):
        taus = np.linspace(0.2, 1.2, 11)
        specs = [(t, dicke(2, t)) for t in taus]
        scan = spectrum_scan(specs, [SectorSpec(SectorType.PARITY, +1, fock_cutoff=16)],
                             k=3, keep_states=True)
        key = ("PARITY", 1)
        for i in range(len(taus) - 1):
            for a, b in zip(scan.states[key][i], scan.states[key][i + 1]):
                assert abs(a.overlap(b)) > 0.8


class TestStateVector:
    def test_normalization_enforced(self):
        basis = enumerate_basis(dicke(2, 0.3), SectorSpec(SectorType.FULL, fock_cutoff=2))
        amp = np.zeros(basis.dimension)
        amp[0] = 3.0
        st = StateVector.from_amplitudes(amp, basis)
        assert np.linalg.norm(st.amplitudes) == pytest.approx(1.0, abs=1e-12)

    def test_fidelity_symmetric_and_phase_invariant(self):
        basis = enumerate_basis(dicke(2, 0.3), SectorSpec(SectorType.FULL, fock_cutoff=4))
        rng = np.random.default_rng(5)
        a = StateVector.from_amplitudes(
            rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension), basis)
        b = StateVector.from_amplitudes(
            rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension), basis)
        assert a.fidelity(b) == pytest.approx(b.fidelity(a), abs=1e-14)
        c = StateVector.from_amplitudes(np.exp(1j * 0.7) * b.amplitudes, basis)
        assert a.fidelity(c) == pytest.approx(a.fidelity(b), abs=1e-14)
