"""Parse a bundled FCIDUMP and compute the exact ground state.

The determinant space for N2/STO-3G with a frozen core is (8 orbitals,
5 alpha, 5 beta) = 3136 determinants, small enough to diagonalize exactly.
"""

from pathlib import Path

from detforge import enumerate_space, diagonalize, parse_fcidump_file

DATA = Path(__file__).resolve().parents[1] / "src" / "detforge" / "data"

I = parse_fcidump_file(DATA / "n2_sto3g_fc_2.1.fcidump")
print(f"norb={I.norb} nelec=({I.nelec_alpha},{I.nelec_beta}) "
      f"e_core={I.e_core:.6f}")

dets = enumerate_space(I.norb, I.nelec_alpha, I.nelec_beta)
print(f"FCI dimension: {len(dets)}")

energies, (psi,) = diagonalize(dets, I, tol=1e-10)
print(f"FCI ground energy: {energies[0]:.8f} Ha (converged={psi.converged})")

top = psi.by_weight()
print("dominant configurations:")
for d, c in list(zip(top.dets, top.coeffs))[:5]:
    print(f"  weight {c**2:.4f}  alpha={d.alpha:08b} beta={d.beta:08b}")
