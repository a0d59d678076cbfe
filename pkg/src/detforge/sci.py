"""Selected-CI machinery: subspace diagonalization, HCI selection, CI-weight
truncation, and the normalized energy-variance functional."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .determinant import Determinant, occupied_orbitals
from .errors import CapacityError
from .fcidump import Integrals
from .hamiltonian import build_subspace_hamiltonian, slater_condon

DEFAULT_CONNECTED_CAP = 2_000_000


@dataclass(frozen=True)
class CIWavefunction:
    """Normalized CI expansion over an ordered determinant list."""

    dets: tuple[Determinant, ...]
    coeffs: np.ndarray
    sorted_by_weight: bool = False
    converged: bool = True
    #: optional per-determinant phases (radians) for complex states; the
    #: coefficients are then magnitudes and sampling uses coeffs**2.
    phases: np.ndarray | None = None

    def __post_init__(self):
        if len(self.dets) != len(self.coeffs):
            raise ValueError("determinant/coefficient length mismatch")
        norm = float(np.sum(self.coeffs**2))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"coefficients are not normalized (sum sq = {norm})")
        if self.sorted_by_weight:
            w = self.coeffs**2
            if np.any(np.diff(w) > 1e-14):
                raise ValueError("sorted_by_weight set but weights are not non-increasing")
        if self.phases is not None:
            if len(self.phases) != len(self.coeffs):
                raise ValueError("phase/coefficient length mismatch")
            self.phases.setflags(write=False)
        self.coeffs.setflags(write=False)

    @property
    def amplitudes(self) -> np.ndarray:
        """Complex amplitudes; equals coeffs when no phases are stored."""
        if self.phases is None:
            return self.coeffs.astype(complex)
        return self.coeffs * np.exp(1j * self.phases)

    def __len__(self) -> int:
        return len(self.dets)

    @property
    def weights(self) -> np.ndarray:
        return self.coeffs**2

    def by_weight(self) -> "CIWavefunction":
        """Reordered copy with non-increasing weights (ties: canonical det order)."""
        order = sorted(range(len(self)), key=lambda i: (-self.coeffs[i] ** 2, self.dets[i]))
        return CIWavefunction(
            dets=tuple(self.dets[i] for i in order),
            coeffs=self.coeffs[list(order)].copy(),
            sorted_by_weight=True,
            converged=self.converged,
        )

    def coefficient_map(self) -> dict[Determinant, float]:
        return {d: float(c) for d, c in zip(self.dets, self.coeffs)}


def normalized_wavefunction(dets, coeffs, **kw) -> CIWavefunction:
    coeffs = np.asarray(coeffs, dtype=float)
    norm = np.linalg.norm(coeffs)
    if norm == 0.0:
        raise ValueError("zero wavefunction")
    return CIWavefunction(dets=tuple(dets), coeffs=coeffs / norm, **kw)


def davidson(matrix, n_roots: int = 1, tol: float = 1e-8, max_iter: int = 200):
    """Lowest eigenpairs of a sparse symmetric matrix by Davidson iteration.

    Diagonal (Jacobi) preconditioner; initial guesses are unit vectors on the
    lowest diagonal entries.  Returns (values, vectors, converged).
    """
    dim = matrix.shape[0]
    diag = np.asarray(matrix.diagonal()).ravel()
    if dim <= max(16, 4 * n_roots):
        w, V = np.linalg.eigh(np.asarray(matrix.todense()) if hasattr(matrix, "todense") else matrix)
        return w[:n_roots], V[:, :n_roots], True

    max_space = min(dim, max(48, 8 * n_roots))
    V = np.zeros((dim, n_roots))
    for k, idx in enumerate(np.argsort(diag)[:n_roots]):
        V[idx, k] = 1.0
    AV = matrix @ V

    theta = np.zeros(n_roots)
    ritz = V.copy()
    for _ in range(max_iter):
        # Rayleigh-Ritz in the current subspace.
        Q, _ = np.linalg.qr(V)
        AQ = matrix @ Q
        S = Q.T @ AQ
        w, U = np.linalg.eigh(S)
        theta = w[:n_roots]
        ritz = Q @ U[:, :n_roots]
        Aritz = AQ @ U[:, :n_roots]
        residuals = Aritz - ritz * theta
        norms = np.linalg.norm(residuals, axis=0)
        if np.all(norms <= tol):
            return theta, ritz, True
        # Preconditioned correction vectors.
        new_dirs = []
        for k in range(n_roots):
            if norms[k] <= tol:
                continue
            denom = theta[k] - diag
            denom = np.where(np.abs(denom) < 1e-8, 1e-8 * np.sign(denom + 1e-300), denom)
            new_dirs.append(residuals[:, k] / denom)
        V = np.column_stack([Q, *new_dirs]) if Q.shape[1] + len(new_dirs) <= max_space \
            else np.column_stack([ritz, *new_dirs])
    return theta, ritz, False


def diagonalize(dets, I: Integrals, n_roots: int = 1, tol: float = 1e-8,
                max_iter: int = 200):
    """Diagonalize the subspace Hamiltonian; returns (energies, wavefunctions).

    Ground-state coefficient signs are fixed so the largest-magnitude
    coefficient is positive.  Non-convergence is flagged, not raised.
    """
    sub = build_subspace_hamiltonian(list(dets), I)
    theta, vecs, converged = davidson(sub.matrix, n_roots=n_roots, tol=tol, max_iter=max_iter)
    states = []
    for k in range(n_roots):
        v = vecs[:, k].copy()
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        v /= np.linalg.norm(v)
        states.append(CIWavefunction(dets=sub.dets, coeffs=v, converged=converged))
    return np.asarray(theta[:n_roots]), states


def single_and_double_excitations(det: Determinant, norb: int):
    """All determinants connected to det by one or two excitations."""
    occ_a = occupied_orbitals(det.alpha)
    occ_b = occupied_orbitals(det.beta)
    vir_a = [p for p in range(norb) if not (det.alpha >> p) & 1]
    vir_b = [p for p in range(norb) if not (det.beta >> p) & 1]

    singles_a = [det.alpha ^ (1 << i) | (1 << a) for i in occ_a for a in vir_a]
    singles_b = [det.beta ^ (1 << i) | (1 << a) for i in occ_b for a in vir_b]

    out = []
    for a in singles_a:
        out.append(Determinant(a, det.beta))
    for b in singles_b:
        out.append(Determinant(det.alpha, b))
    for a in singles_a:
        for b in singles_b:
            out.append(Determinant(a, b))
    for (i, j) in itertools.combinations(occ_a, 2):
        for (a, b) in itertools.combinations(vir_a, 2):
            out.append(Determinant(det.alpha ^ (1 << i) ^ (1 << j) | (1 << a) | (1 << b), det.beta))
    for (i, j) in itertools.combinations(occ_b, 2):
        for (a, b) in itertools.combinations(vir_b, 2):
            out.append(Determinant(det.alpha, det.beta ^ (1 << i) ^ (1 << j) | (1 << a) | (1 << b)))
    return out


def connected_space(dets, norb: int, cap: int = DEFAULT_CONNECTED_CAP):
    """Union of dets with everything within double excitations of them, sorted."""
    space = set(dets)
    for det in dets:
        space.update(single_and_double_excitations(det, norb))
        if len(space) > cap:
            raise CapacityError(f"connected space exceeds cap {cap}")
    return sorted(space)


def hci_select(seed: CIWavefunction, I: Integrals, epsilon1: float,
               max_iters: int = 20, cap: int = DEFAULT_CONNECTED_CAP):
    """Heat-bath style selection: grow the space with all |c_j H_ji| > epsilon1.

    Re-diagonalizes fully at each iteration; stops when the set is stable.
    Returns the final sorted determinant list.
    """
    if epsilon1 <= 0:
        raise ValueError("epsilon1 must be positive")
    current = sorted(set(seed.dets))
    psi = seed
    for _ in range(max_iters):
        in_space = set(current)
        cmap = psi.coefficient_map()
        additions = set()
        for det_j in current:
            cj = abs(cmap.get(det_j, 0.0))
            if cj == 0.0:
                continue
            for det_i in single_and_double_excitations(det_j, I.norb):
                if det_i in in_space or det_i in additions:
                    continue
                if cj * abs(slater_condon(det_j, det_i, I)) > epsilon1:
                    additions.add(det_i)
        if not additions:
            break
        current = sorted(in_space | additions)
        if len(current) > cap:
            raise CapacityError(f"selected space exceeds cap {cap}")
        _, (psi,) = diagonalize(current, I)
    return current


def truncate_by_weight(psi: CIWavefunction, w: float) -> CIWavefunction:
    """Shortest weight-ordered prefix with cumulative weight >= w, renormalized."""
    if not 0.0 < w <= 1.0:
        raise ValueError(f"weight fraction must be in (0, 1], got {w}")
    ordered = psi.by_weight()
    if w == 1.0:
        n_w = len(ordered)
    else:
        cum = np.cumsum(ordered.weights)
        n_w = min(int(np.searchsorted(cum, w - 1e-12)) + 1, len(ordered))
    coeffs = ordered.coeffs[:n_w].copy()
    coeffs /= np.linalg.norm(coeffs)
    return CIWavefunction(
        dets=ordered.dets[:n_w], coeffs=coeffs, sorted_by_weight=True,
        converged=psi.converged,
    )


@dataclass(frozen=True)
class VarianceReport:
    """<H>, <H^2>, and the normalized energy variance of a CI state."""

    energy: float
    variance: float
    raw_h2: float


def apply_hamiltonian(psi: CIWavefunction, I: Integrals,
                      cap: int = DEFAULT_CONNECTED_CAP):
    """H|psi> evaluated over the connected space (support + doubles).

    Returns (space, sigma) with sigma_i = <i|H|psi>.
    """
    space = connected_space(psi.dets, I.norb, cap=cap)
    index = {d: i for i, d in enumerate(space)}
    sigma = np.zeros(len(space))
    for det_j, cj in zip(psi.dets, psi.coeffs):
        sigma[index[det_j]] += cj * slater_condon(det_j, det_j, I)
        for det_i in single_and_double_excitations(det_j, I.norb):
            pos = index.get(det_i)
            if pos is not None:
                hij = slater_condon(det_i, det_j, I)
                if hij != 0.0:
                    sigma[pos] += cj * hij
    return space, sigma


def energy_variance(psi: CIWavefunction, I: Integrals,
                    cap: int = DEFAULT_CONNECTED_CAP) -> VarianceReport:
    """Normalized variance (<H^2> - <H>^2) / <H>^2 with <H^2> = |H psi|^2."""
    space, sigma = apply_hamiltonian(psi, I, cap=cap)
    index = {d: i for i, d in enumerate(space)}
    energy = float(sum(c * sigma[index[d]] for d, c in zip(psi.dets, psi.coeffs)))
    raw_h2 = float(sigma @ sigma)
    variance = (raw_h2 - energy**2) / energy**2
    return VarianceReport(energy=energy, variance=variance, raw_h2=raw_h2)
