import numpy as np
import pytest

from detforge.afqmc import (
    AFQMCConfig,
    Walker,
    WalkerEnsemble,
    _ensemble_local_energies,
    _ensemble_minors,
    _one_body_string_matrix,
    initialize_ensemble,
    local_energy,
    overlap,
    population_control,
    prepare_trial,
    propagate_step,
    reblock,
    reorthonormalize,
    run_afqmc,
)
from detforge.determinant import (
    Determinant,
    enumerate_space,
    enumerate_strings,
    hartree_fock_determinant,
    occupied_orbitals,
)
from detforge.errors import DivergenceGuard, InsufficientData, RunAbort
from detforge.fcidump import IntegralsBuilder
from detforge.hamiltonian import cholesky_decompose, slater_condon
from detforge.sci import diagonalize, normalized_wavefunction, truncate_by_weight

from oracles import dense_hamiltonian, fci_ground, one_body_operator


def expand_walker(walker, dets):
    """Determinant-basis expansion of a non-orthogonal walker via minors."""
    vec = np.empty(len(dets), dtype=complex)
    for i, d in enumerate(dets):
        ma = np.linalg.det(walker.phi_alpha[list(occupied_orbitals(d.alpha)), :])
        mb = np.linalg.det(walker.phi_beta[list(occupied_orbitals(d.beta)), :])
        vec[i] = ma * mb
    return vec


def random_walker(norb, na, nb, seed):
    rng = np.random.default_rng(seed)
    return Walker(
        phi_alpha=rng.normal(size=(norb, na)) + 1j * rng.normal(size=(norb, na)),
        phi_beta=rng.normal(size=(norb, nb)) + 1j * rng.normal(size=(norb, nb)),
    )


def fci_trial(I, tol=1e-11):
    dets = enumerate_space(I.norb, I.nelec_alpha, I.nelec_beta)
    _, (psi,) = diagonalize(dets, I, tol=tol)
    return prepare_trial(psi, I, cholesky_decompose(I))


def one_body_integrals(norb, na, nb, seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(norb, norb))
    b = IntegralsBuilder(norb, na, nb)
    for p in range(norb):
        for q in range(p + 1):
            b.set_h(p, q, (h[p, q] + h[q, p]) / 2)
    return b.build()


class TestStringOperators:
    def test_matches_dense_oracle_alpha_sector(self):
        # with the beta sector saturated the alpha strings map one-to-one
        # onto full determinants, so the sector matrix must match the oracle
        norb = 4
        rng = np.random.default_rng(0)
        M = rng.normal(size=(norb, norb))
        dets = enumerate_space(norb, 2, 4)
        O_full = one_body_operator(M, dets, norb, "alpha")
        O_sector = _one_body_string_matrix(M, enumerate_strings(norb, 2), norb)
        np.testing.assert_allclose(O_full.real, O_sector, atol=1e-12)


class TestPrepareTrial:
    def test_rhf_trial_energy(self, h2o):
        hf = hartree_fock_determinant(5, 5)
        psi = normalized_wavefunction([hf], [1.0])
        trial = prepare_trial(psi, h2o, cholesky_decompose(h2o))
        assert trial.energy == pytest.approx(slater_condon(hf, hf, h2o), abs=1e-8)

    def test_fci_trial_energy_matches_oracle(self, h2):
        e_fci, _, _ = fci_ground(h2)
        trial = fci_trial(h2)
        assert trial.energy == pytest.approx(e_fci, abs=1e-8)

    def test_truncated_trial_accepted(self, n2_21):
        dets = enumerate_space(8, 5, 5)
        _, (psi,) = diagonalize(dets, n2_21)
        kept = truncate_by_weight(psi, 0.995)
        trial = prepare_trial(kept, n2_21, cholesky_decompose(n2_21))
        assert trial.psi is kept
        assert np.count_nonzero(trial.C) == len(kept)


class TestOverlap:
    def test_rhf_walker_rhf_trial(self, h4):
        hf = hartree_fock_determinant(2, 2)
        psi = normalized_wavefunction([hf], [1.0])
        trial = prepare_trial(psi, h4, cholesky_decompose(h4))
        walker = initialize_ensemble(trial, 1).walker(0)
        assert overlap(trial, walker) == pytest.approx(1.0)

    def test_disjoint_occupations_zero(self, h4):
        d = Determinant(0b0011, 0b0011)
        psi = normalized_wavefunction([d], [1.0])
        trial = prepare_trial(psi, h4, cholesky_decompose(h4))
        eye = np.eye(4, dtype=complex)
        walker = Walker(phi_alpha=eye[:, [2, 3]], phi_beta=eye[:, [2, 3]])
        assert overlap(trial, walker) == pytest.approx(0.0, abs=1e-15)

    def test_random_walker_matches_expansion(self, h4):
        trial = fci_trial(h4)
        dets = enumerate_space(4, 2, 2)
        c = np.zeros(len(dets))
        for d, coef in zip(trial.psi.dets, trial.psi.coeffs):
            c[dets.index(d)] = coef
        for seed in range(4):
            walker = random_walker(4, 2, 2, seed)
            expected = c @ expand_walker(walker, dets)
            assert overlap(trial, walker) == pytest.approx(expected, abs=1e-10)


class TestLocalEnergy:
    def test_rhf_on_rhf(self, h2o):
        hf = hartree_fock_determinant(5, 5)
        psi = normalized_wavefunction([hf], [1.0])
        trial = prepare_trial(psi, h2o, cholesky_decompose(h2o))
        walker = initialize_ensemble(trial, 1).walker(0)
        e = local_energy(trial, walker, h2o)
        assert e.real == pytest.approx(slater_condon(hf, hf, h2o), abs=1e-10)
        assert e.imag == pytest.approx(0.0, abs=1e-12)

    def test_exact_trial_zero_variance(self, h2):
        e_fci, _, _ = fci_ground(h2)
        trial = fci_trial(h2)
        for seed in range(5):
            walker = random_walker(2, 1, 1, seed)
            assert local_energy(trial, walker, h2) == pytest.approx(
                e_fci, abs=1e-8
            )

    def test_two_det_trial_matches_dense_oracle(self, h4):
        dets = enumerate_space(4, 2, 2)
        H = dense_hamiltonian(h4, dets)
        hf = hartree_fock_determinant(2, 2)
        other = Determinant(0b0110, 0b0101)
        psi = normalized_wavefunction([hf, other], [0.9, np.sqrt(1 - 0.81)])
        trial = prepare_trial(psi, h4, cholesky_decompose(h4))
        c = np.zeros(len(dets))
        for d, coef in zip(psi.dets, psi.coeffs):
            c[dets.index(d)] = coef
        for seed in range(4):
            walker = random_walker(4, 2, 2, seed)
            phi = expand_walker(walker, dets)
            expected = (c @ H @ phi) / (c @ phi)
            assert local_energy(trial, walker, h4) == pytest.approx(
                expected, abs=1e-9
            )

    def test_divergence_guard(self, h4):
        d = Determinant(0b0011, 0b0011)
        psi = normalized_wavefunction([d], [1.0])
        trial = prepare_trial(psi, h4, cholesky_decompose(h4))
        eye = np.eye(4, dtype=complex)
        walker = Walker(phi_alpha=eye[:, [2, 3]], phi_beta=eye[:, [2, 3]])
        with pytest.raises(DivergenceGuard):
            local_energy(trial, walker, h4)


class TestPropagation:
    def test_one_body_power_iteration(self):
        # no two-body tensor: repeated stepping projects onto the lowest
        # orbital eigenvectors and the mixed energy hits the exact ground state
        I = one_body_integrals(5, 2, 2, seed=3)
        w = np.linalg.eigvalsh(I.h)
        e_exact = 2 * (w[0] + w[1])
        hf = hartree_fock_determinant(2, 2)
        psi = normalized_wavefunction([hf], [1.0])
        chol = cholesky_decompose(I)
        assert chol.n_factors == 0
        trial = prepare_trial(psi, I, chol)
        config = AFQMCConfig(dtau=0.2, n_walkers=1, n_blocks=1)
        ensemble = initialize_ensemble(trial, 1)
        rng = np.random.default_rng(0)
        for _ in range(800):
            ensemble = propagate_step(ensemble, trial, chol, config, rng)
            ensemble = reorthonormalize(ensemble)
            ensemble.weights[:] = 1.0
        m_a, m_b, S = _ensemble_minors(ensemble, trial)
        e = _ensemble_local_energies(m_a, m_b, S, trial)[0]
        assert e.real == pytest.approx(e_exact, abs=1e-8)

    def test_exact_trial_blocks_at_fci(self, h2):
        e_fci, _, _ = fci_ground(h2)
        trial = fci_trial(h2)
        chol = cholesky_decompose(h2)
        config = AFQMCConfig(n_walkers=64, n_blocks=25, seed=4)
        series = run_afqmc(trial, h2, chol, config)
        np.testing.assert_allclose(series.energies.real, e_fci, atol=1e-8)
        np.testing.assert_allclose(series.energies.imag, 0.0, atol=1e-8)
        assert series.n_killed == 0
        assert np.all(series.total_weights > 0)

    def test_weights_never_negative(self, h4):
        trial = fci_trial(h4)
        chol = cholesky_decompose(h4)
        config = AFQMCConfig(n_walkers=32, n_blocks=5, seed=9)
        ensemble = initialize_ensemble(trial, 32)
        for step in range(1, 101):
            rng = np.random.default_rng((9, step))
            ensemble = propagate_step(ensemble, trial, chol, config, rng)
            assert np.all(ensemble.weights >= 0)

    def test_hf_trial_h4_converges_near_fci(self, h4):
        e_fci, _, _ = fci_ground(h4)
        hf = hartree_fock_determinant(2, 2)
        psi = normalized_wavefunction([hf], [1.0])
        trial = prepare_trial(psi, h4, cholesky_decompose(h4))
        config = AFQMCConfig(n_walkers=128, n_blocks=120, seed=1)
        series = run_afqmc(trial, h4, cholesky_decompose(h4), config)
        tail = series.post_equilibration()
        mean, stderr, _, _ = reblock(tail.energies.real, tail.total_weights)
        # phaseless bias with an RHF trial on this chain is a few mHa; the
        # bound covers bias plus statistical noise at this walker count
        assert abs(mean - e_fci) < 1e-2

    def test_determinism(self, h2):
        trial = fci_trial(h2)
        chol = cholesky_decompose(h2)
        config = AFQMCConfig(n_walkers=16, n_blocks=6, seed=11)
        s1 = run_afqmc(trial, h2, chol, config)
        s2 = run_afqmc(trial, h2, chol, config)
        np.testing.assert_array_equal(s1.energies, s2.energies)
        np.testing.assert_array_equal(s1.total_weights, s2.total_weights)


class TestReortho:
    def test_columns_orthonormal_and_estimator_invariant(self, h4):
        trial = fci_trial(h4)
        rng = np.random.default_rng(5)
        nw = 8
        phi_a = rng.normal(size=(nw, 4, 2)) + 1j * rng.normal(size=(nw, 4, 2))
        phi_b = rng.normal(size=(nw, 4, 2)) + 1j * rng.normal(size=(nw, 4, 2))
        ens = WalkerEnsemble(phi_a=phi_a, phi_b=phi_b, weights=np.ones(nw))
        m_a, m_b, S = _ensemble_minors(ens, trial)
        before = _ensemble_local_energies(m_a, m_b, S, trial)
        out = reorthonormalize(ens)
        for w in range(nw):
            g = out.phi_a[w].conj().T @ out.phi_a[w]
            np.testing.assert_allclose(g, np.eye(2), atol=1e-10)
        m_a, m_b, S = _ensemble_minors(out, trial)
        after = _ensemble_local_energies(m_a, m_b, S, trial)
        np.testing.assert_allclose(after, before, atol=1e-10)


class TestPopulationControl:
    def _ensemble(self, weights):
        n = len(weights)
        rng = np.random.default_rng(0)
        return WalkerEnsemble(
            phi_a=rng.normal(size=(n, 4, 2)) + 0j,
            phi_b=rng.normal(size=(n, 4, 2)) + 0j,
            weights=np.asarray(weights, dtype=float),
        )

    def test_equal_weights_identity(self):
        ens = self._ensemble([1.0] * 6)
        out = population_control(ens, 6, np.random.default_rng(1))
        np.testing.assert_allclose(np.sort(out.weights), np.sort(ens.weights))
        np.testing.assert_allclose(out.phi_a, ens.phi_a)

    def test_single_heavy_walker_cloned(self):
        ens = self._ensemble([2.0, 0.0, 0.0, 0.0])
        out = population_control(ens, 4, np.random.default_rng(2))
        for w in range(4):
            np.testing.assert_allclose(out.phi_a[w], ens.phi_a[0])
        assert np.allclose(out.weights, 0.5)

    def test_total_weight_preserved(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            weights = rng.uniform(0, 2, size=10)
            ens = self._ensemble(weights)
            out = population_control(ens, 10, rng)
            assert np.sum(out.weights) == pytest.approx(np.sum(weights))

    def test_expected_counts_unbiased(self):
        # a walker of weight w should be replicated w/(W/n) times on average
        weights = [3.0, 1.0, 0.5, 0.5]
        counts = np.zeros(4)
        rng = np.random.default_rng(7)
        ens = self._ensemble(weights)
        trials = 2000
        for _ in range(trials):
            out = population_control(ens, 4, rng)
            for w in range(4):
                counts[w] += np.sum(
                    np.all(out.phi_a == ens.phi_a[w], axis=(1, 2))
                )
        expected = np.array(weights) / (sum(weights) / 4)
        np.testing.assert_allclose(counts / trials, expected, rtol=0.02)

    def test_underflow_aborts(self):
        ens = self._ensemble([0.0, 0.0])
        with pytest.raises(RunAbort):
            population_control(ens, 2, np.random.default_rng(0))


class TestReblock:
    def test_constant_series(self):
        mean, stderr, _, report = reblock(np.full(64, 1.25))
        assert mean == pytest.approx(1.25)
        assert stderr == 0.0
        assert all(lvl.stderr == 0.0 for lvl in report.levels)

    def test_iid_gaussian(self):
        rng = np.random.default_rng(8)
        sigma = 0.3
        n = 10_000
        x = rng.normal(0.0, sigma, size=n)
        _, stderr, _, _ = reblock(x)
        assert stderr == pytest.approx(sigma / np.sqrt(n), rel=0.2)

    def test_ar1_inflation(self):
        rho = 0.8
        rng = np.random.default_rng(13)
        n = 10_000
        x = np.empty(n)
        x[0] = rng.normal()
        eps = rng.normal(size=n)
        for i in range(1, n):
            x[i] = rho * x[i - 1] + np.sqrt(1 - rho**2) * eps[i]
        _, stderr, _, _ = reblock(x)
        naive = np.std(x, ddof=1) / np.sqrt(n)
        inflation = np.sqrt((1 + rho) / (1 - rho))
        assert stderr / naive == pytest.approx(inflation, rel=0.25)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            reblock(np.ones(8))

    def test_weighted_mean(self):
        x = np.array([1.0] * 16 + [3.0] * 16)
        w = np.array([1.0] * 16 + [3.0] * 16)
        mean, _, _, _ = reblock(x, w)
        assert mean == pytest.approx((16 * 1 + 16 * 9) / (16 + 48))
