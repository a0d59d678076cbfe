"""Acceptance suite: one test per headline criterion, each printing a
single PASS/FAIL line with its measured numbers."""

import json
import time

import numpy as np

from detforge.afqmc import AFQMCConfig, prepare_trial, reblock, run_afqmc
from detforge.cli import main
from detforge.determinant import enumerate_space, hartree_fock_determinant
from detforge.extrapolate import ExtrapolationInput, fit_linear
from detforge.hamiltonian import build_subspace_hamiltonian, cholesky_decompose
from detforge.lucj import random_params, sqd_pipeline
from detforge.sci import (
    CIWavefunction,
    diagonalize,
    energy_variance,
    hci_select,
    normalized_wavefunction,
    truncate_by_weight,
)

from conftest import DATA_DIR, load_fixture


def report(criterion, ok, detail):
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {criterion}: {detail}"
    print(f"\n{line}", flush=True)
    assert ok, line


def dense_fci(I):
    """Machine-precision ground state via dense diagonalization."""
    dets = enumerate_space(I.norb, I.nelec_alpha, I.nelec_beta)
    H = build_subspace_hamiltonian(dets, I).matrix.toarray()
    w, V = np.linalg.eigh(H)
    v = V[:, 0]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return float(w[0]), CIWavefunction(dets=tuple(dets), coeffs=v)


FIXTURES = ["h2_sto3g", "h4_sto3g", "h2o_sto3g", "n2_sto3g_fc_2.1"]


class TestCriterion1:
    def test_fci_oracle_equivalence(self):
        from oracles import fci_ground

        details = []
        ok = True
        for name in FIXTURES:
            I = load_fixture(name)
            t0 = time.monotonic()
            dets = enumerate_space(I.norb, I.nelec_alpha, I.nelec_beta)
            energies, _ = diagonalize(dets, I, tol=1e-10)
            elapsed = time.monotonic() - t0
            e_oracle, _, _ = fci_ground(I)
            err = abs(float(energies[0]) - e_oracle)
            ok = ok and err < 1e-8 and elapsed < 60
            details.append(f"{name}: |dE|={err:.2e} t={elapsed:.1f}s")
        report(1, ok, "fci vs dense oracle; " + "; ".join(details))


class TestCriterion2:
    def test_exact_trial_afqmc(self):
        details = []
        ok = True
        for name in FIXTURES:
            I = load_fixture(name)
            e_fci, psi = dense_fci(I)
            chol = cholesky_decompose(I)
            trial = prepare_trial(psi, I, chol)
            config = AFQMCConfig(n_walkers=2048, n_blocks=200, seed=1)
            t0 = time.monotonic()
            series = run_afqmc(trial, I, chol, config)
            elapsed = time.monotonic() - t0
            dev = np.max(np.abs(series.energies.real - e_fci))
            dev_im = np.max(np.abs(series.energies.imag))
            bias = abs(float(np.mean(series.energies.real)) - e_fci)
            this_ok = (
                dev < 1e-8 and dev_im < 1e-8 and bias < 1e-4 and elapsed < 600
            )
            ok = ok and this_ok
            details.append(
                f"{name}: max|dE_block|={dev:.1e} bias={bias:.1e} "
                f"t={elapsed:.0f}s"
            )
        report(2, ok, "exact-trial zero variance; " + "; ".join(details))


class TestCriterion3:
    def test_n2_dissociation_sqd_afqmc(self):
        geometries = ["1.0", "1.4", "1.8", "2.1", "2.5"]
        seeds = [0, 1, 2, 3, 4]
        config = AFQMCConfig(n_walkers=256, n_blocks=300, seed=11)
        t0 = time.monotonic()
        details = []
        ok = True
        for geom in geometries:
            I = load_fixture(f"n2_sto3g_fc_{geom}")
            e_fci, _ = dense_fci(I)
            chol = cholesky_decompose(I)
            errors = []
            for seed in seeds:
                params = random_params(I.norb, seed)
                psi, _ = sqd_pipeline(params, I, n_samples=10_000, seed=seed)
                kept = truncate_by_weight(psi, 0.995)
                trial = prepare_trial(kept, I, chol)
                series = run_afqmc(trial, I, chol, config)
                tail = series.post_equilibration()
                mean, _, _, _ = reblock(tail.energies.real, tail.total_weights)
                errors.append(abs(mean - e_fci))
            med = float(np.median(errors))
            ok = ok and med <= 10e-3
            details.append(f"r={geom}: median|dE|={1e3 * med:.2f} mHa")
        elapsed = time.monotonic() - t0
        ok = ok and elapsed < 7200
        report(
            3, ok,
            f"N2 curve SQD(RAND)+AFQMC (t={elapsed:.0f}s); "
            + "; ".join(details),
        )


class TestCriterion4:
    def test_starved_trial_recovery(self):
        I = load_fixture("n2_sto3g_fc_2.5")
        e_fci, _ = dense_fci(I)
        dim_fci = len(enumerate_space(I.norb, I.nelec_alpha, I.nelec_beta))
        params = random_params(I.norb, 3)
        psi_sqd, _ = sqd_pipeline(params, I, n_samples=600, seed=5)
        # starve the SQD state down to a small fraction of the FCI space
        psi = truncate_by_weight(psi_sqd, 0.995)
        assert len(psi) <= 0.05 * dim_fci
        rep = energy_variance(psi, I)
        e_sqd = rep.energy
        gap = e_sqd - e_fci
        chol = cholesky_decompose(I)
        trial = prepare_trial(psi, I, chol)
        config = AFQMCConfig(n_walkers=512, n_blocks=400, seed=21)
        series = run_afqmc(trial, I, chol, config)
        tail = series.post_equilibration()
        mean, stderr, _, _ = reblock(tail.energies.real, tail.total_weights)
        recovered = (e_sqd - mean) / gap
        ok = recovered >= 0.70 and stderr < 1e-3
        report(
            4, ok,
            f"starved trial ({len(psi)}/{dim_fci} dets): SQD gap "
            f"{1e3 * gap:.1f} mHa, AFQMC recovers {100 * recovered:.1f}% "
            f"(stderr {1e3 * stderr:.2f} mHa)",
        )


class TestCriterion5:
    def test_variance_extrapolation(self):
        I = load_fixture("n2_sto3g_fc_1.8")
        e_fci, psi = dense_fci(I)
        chol = cholesky_decompose(I)
        points = []
        energies = []
        for w in (0.70, 0.75, 0.80):
            kept = truncate_by_weight(psi, w)
            var = energy_variance(kept, I).variance
            trial = prepare_trial(kept, I, chol)
            config = AFQMCConfig(n_walkers=384, n_blocks=400, seed=13)
            series = run_afqmc(trial, I, chol, config)
            tail = series.post_equilibration()
            mean, stderr, _, _ = reblock(tail.energies.real, tail.total_weights)
            points.append((var, mean, stderr))
            energies.append(mean)
        fit = fit_linear(ExtrapolationInput(points=tuple(points)))
        gap_fit = abs(fit.intercept - e_fci)
        gaps = [abs(e - e_fci) for e in energies]
        ok = fit.r_squared >= 0.95 and all(gap_fit < g for g in gaps)
        report(
            5, ok,
            f"3-point extrapolation: R^2={fit.r_squared:.4f}, "
            f"|intercept-E_FCI|={1e3 * gap_fit:.2f} mHa vs inputs "
            f"{[f'{1e3 * g:.2f}' for g in gaps]} mHa",
        )


class TestCriterion6:
    def test_variationality_sweep(self):
        I = load_fixture("h4_sto3g")
        e_fci, _ = dense_fci(I)
        rng = np.random.default_rng(99)
        violations = 0
        n_runs = 0
        for k in range(100):
            seed = int(rng.integers(0, 2**31))
            flip = 0.0 if k % 2 == 0 else 0.02
            n_samples = int(rng.integers(50, 2000))
            params = random_params(I.norb, seed)
            psi, rep = sqd_pipeline(
                params, I, n_samples=n_samples, flip_prob=flip, seed=seed
            )
            n_runs += 1
            if rep.energy < e_fci - 1e-9 or len(psi) > (2 * n_samples) ** 2:
                violations += 1
        ok = violations == 0 and n_runs >= 100
        report(
            6, ok,
            f"{n_runs} randomized SQD runs, {violations} variationality or "
            f"dimension-bound violations",
        )


class TestCriterion7:
    def test_hci_convergence(self):
        I = load_fixture("n2_sto3g_fc_2.1")
        e_fci, _ = dense_fci(I)
        hf = hartree_fock_determinant(I.nelec_alpha, I.nelec_beta)
        seed = normalized_wavefunction([hf], [1.0])
        energies = []
        for eps in (1e-3, 1e-4, 1e-5, 1e-12):
            dets = hci_select(seed, I, epsilon1=eps)
            e, _ = diagonalize(dets, I, tol=1e-10)
            energies.append(float(e[0]))
        monotone = all(
            energies[i + 1] <= energies[i] + 1e-12
            for i in range(len(energies) - 1)
        )
        final_err = abs(energies[-1] - e_fci)
        ok = monotone and final_err < 1e-6
        report(
            7, ok,
            f"HCI sequence energies {[f'{e:.6f}' for e in energies]}, "
            f"final |dE|={final_err:.1e}",
        )


class TestCriterion8:
    def test_reblocking_calibration(self):
        rng = np.random.default_rng(42)
        n = 10_000
        sigma = 0.5
        x = rng.normal(0.0, sigma, size=n)
        _, se_iid, _, _ = reblock(x)
        iid_ratio = se_iid / (sigma / np.sqrt(n))

        rho = 0.8
        y = np.empty(n)
        y[0] = rng.normal()
        eps = rng.normal(size=n)
        for i in range(1, n):
            y[i] = rho * y[i - 1] + np.sqrt(1 - rho**2) * eps[i]
        _, se_ar, _, _ = reblock(y)
        naive = np.std(y, ddof=1) / np.sqrt(n)
        inflation = se_ar / naive
        target = np.sqrt((1 + rho) / (1 - rho))
        ok = abs(iid_ratio - 1.0) <= 0.20 and abs(inflation / target - 1.0) <= 0.25
        report(
            8, ok,
            f"iid stderr ratio {iid_ratio:.3f} (target 1+-0.2); AR(1) "
            f"inflation {inflation:.2f} vs analytic {target:.2f} (+-25%)",
        )


class TestCriterion9:
    def test_pipeline_determinism(self, tmp_path):
        cfg = tmp_path / "pipe.json"
        cfg.write_text(json.dumps({
            "seed": 4, "params_seed": 2, "shots": 1500,
            "truncation_weights": [0.7, 0.8, 0.9],
            "afqmc": {"n_walkers": 32, "n_blocks": 30, "seed": 4},
        }))
        fcidump = str(DATA_DIR / "h4_sto3g.fcidump")
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"report_{tag}.json"
            rc = main(["pipeline", "--fcidump", fcidump,
                       "--config", str(cfg), "--out", str(out)])
            assert rc == 0
            outs.append(out.read_bytes())
        ok = outs[0] == outs[1]
        report(9, ok, f"pipeline reruns byte-identical ({len(outs[0])} bytes)")
