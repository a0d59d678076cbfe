"""Zero-variance extrapolation of AFQMC energies.

AFQMC energies computed with progressively truncated trials fall on a line
in the trial's normalized energy variance; the intercept estimates the
zero-variance (exact-trial) limit.
"""

from pathlib import Path

from detforge import (
    AFQMCConfig,
    ExtrapolationInput,
    cholesky_decompose,
    diagonalize,
    energy_variance,
    enumerate_space,
    fit_linear,
    parse_fcidump_file,
    prepare_trial,
    reblock,
    run_afqmc,
    truncate_by_weight,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "detforge" / "data"
I = parse_fcidump_file(DATA / "n2_sto3g_fc_1.8.fcidump")

dets = enumerate_space(I.norb, I.nelec_alpha, I.nelec_beta)
energies, (psi,) = diagonalize(dets, I, tol=1e-11)
e_fci = float(energies[0])
chol = cholesky_decompose(I)

points = []
config = AFQMCConfig(n_walkers=256, n_blocks=250, seed=3)
for w in (0.70, 0.75, 0.80):
    kept = truncate_by_weight(psi, w)
    variance = energy_variance(kept, I).variance
    trial = prepare_trial(kept, I, chol)
    series = run_afqmc(trial, I, chol, config)
    tail = series.post_equilibration()
    mean, stderr, _, _ = reblock(tail.energies.real, tail.total_weights)
    points.append((variance, mean, stderr))
    print(f"w={w}: variance={variance:.3e} "
          f"E={mean:.6f}({1e3 * stderr:.2f} mHa)")

fit = fit_linear(ExtrapolationInput(points=tuple(points), label="n2_1.8"))
print(f"\nintercept  {fit.intercept:.6f} +- {fit.intercept_stderr:.6f} Ha")
print(f"E_FCI      {e_fci:.6f} Ha")
print(f"R^2        {fit.r_squared:.4f}")
print(f"intercept error {1e3 * (fit.intercept - e_fci):+.2f} mHa")
