"""Heat-bath selected CI: sweep the selection threshold and watch the energy
and normalized variance converge toward FCI.

A determinant j in the current space pulls in every connected determinant i
with |c_j H_ij| above epsilon1; the subspace is re-diagonalized each pass.
"""

from pathlib import Path

from detforge import (
    diagonalize,
    energy_variance,
    enumerate_space,
    hartree_fock_determinant,
    hci_select,
    normalized_wavefunction,
    parse_fcidump_file,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "detforge" / "data"
I = parse_fcidump_file(DATA / "n2_sto3g_fc_2.1.fcidump")

e_fci, _ = diagonalize(enumerate_space(I.norb, I.nelec_alpha, I.nelec_beta), I)
hf = hartree_fock_determinant(I.nelec_alpha, I.nelec_beta)
seed = normalized_wavefunction([hf], [1.0])

print(f"{'epsilon1':>10} {'ndet':>6} {'E - E_FCI (mHa)':>16} {'variance':>12}")
for eps in (1e-2, 1e-3, 1e-4, 1e-5):
    dets = hci_select(seed, I, epsilon1=eps)
    energies, (psi,) = diagonalize(dets, I)
    var = energy_variance(psi, I).variance
    print(f"{eps:>10.0e} {len(dets):>6} "
          f"{1e3 * (energies[0] - e_fci[0]):>16.4f} {var:>12.3e}")
