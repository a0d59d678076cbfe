"""Hamiltonian matrix elements, Cholesky-factorized ERIs, subspace assembly."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .determinant import Determinant, excitation_info, occupied_orbitals
from .errors import CapacityError, NotPSDError, SymmetryError
from .fcidump import Integrals, pair_index

DEFAULT_NNZ_CAP = 50_000_000


def _eri(I: Integrals) -> np.ndarray:
    """Dense (pq|rs) tensor, cached on the Integrals instance."""
    cached = getattr(I, "_eri_dense_cache", None)
    if cached is None:
        cached = I.eri_dense()
        cached.setflags(write=False)
        object.__setattr__(I, "_eri_dense_cache", cached)
    return cached


def slater_condon(d1: Determinant, d2: Determinant, I: Integrals) -> float:
    """<d1|H|d2> including e_core on the diagonal; 0 beyond double excitations."""
    info = excitation_info(d1, d2)
    if info.degree > 2:
        return 0.0
    v = _eri(I)
    h = I.h
    occ_a = occupied_orbitals(d1.alpha & d2.alpha)
    occ_b = occupied_orbitals(d1.beta & d2.beta)

    if info.degree == 0:
        e = I.e_core
        for p in occ_a:
            e += h[p, p]
        for p in occ_b:
            e += h[p, p]
        for p, q in itertools.combinations(occ_a, 2):
            e += v[p, p, q, q] - v[p, q, q, p]
        for p, q in itertools.combinations(occ_b, 2):
            e += v[p, p, q, q] - v[p, q, q, p]
        for p in occ_a:
            for q in occ_b:
                e += v[p, p, q, q]
        return float(e)

    if info.degree == 1:
        if info.degree_alpha == 1:
            (i,), (a,) = info.holes_alpha, info.particles_alpha
            same = occ_a
        else:
            (i,), (a,) = info.holes_beta, info.particles_beta
            same = occ_b
        e = h[i, a]
        for q in occ_a:
            e += v[i, a, q, q]
        for q in occ_b:
            e += v[i, a, q, q]
        for q in same:
            e -= v[i, q, q, a]
        return float(info.sign * e)

    # Degree 2.
    if info.degree_alpha == 2:
        (i, j), (a, b) = info.holes_alpha, info.particles_alpha
        return float(info.sign * (v[i, a, j, b] - v[i, b, j, a]))
    if info.degree_beta == 2:
        (i, j), (a, b) = info.holes_beta, info.particles_beta
        return float(info.sign * (v[i, a, j, b] - v[i, b, j, a]))
    (i,), (a,) = info.holes_alpha, info.particles_alpha
    (j,), (b,) = info.holes_beta, info.particles_beta
    return float(info.sign * v[i, a, j, b])


@dataclass(frozen=True)
class CholeskyFactors:
    """Symmetric one-body factors L^g with sum_g L^g[p,q] L^g[r,s] ~ (pq|rs)."""

    factors: np.ndarray  # (n_factors, norb, norb)
    cutoff: float

    @property
    def n_factors(self) -> int:
        return self.factors.shape[0]

    def reconstruction_error(self, I: Integrals) -> float:
        """Max |(pq|rs) - reconstruction| over all canonical quadruples."""
        norb = I.norb
        flat = self.factors.reshape(self.n_factors, norb * norb)
        recon = flat.T @ flat
        diff = np.abs(recon.reshape(norb, norb, norb, norb) - _eri(I))
        return float(diff.max())


def cholesky_decompose(I: Integrals, cutoff: float = 1e-12) -> CholeskyFactors:
    """Pivoted incomplete Cholesky of the (pq),(rs) pair matrix."""
    norb = I.norb
    M = I.pair_matrix()
    n = M.shape[0]
    diag = np.diag(M).copy()
    vecs = []
    while True:
        if diag.min() < -10.0 * cutoff:
            raise NotPSDError(
                f"negative residual diagonal {diag.min():.3e} (cutoff {cutoff:.1e}); "
                "two-body integrals are not positive semidefinite"
            )
        piv = int(np.argmax(diag))
        if diag[piv] <= cutoff:
            break
        col = M[:, piv].astype(float).copy()
        for vec in vecs:
            col -= vec * vec[piv]
        col /= np.sqrt(diag[piv])
        vecs.append(col)
        diag -= col * col
        if len(vecs) >= n:
            break
    factors = np.zeros((len(vecs), norb, norb))
    for g, vec in enumerate(vecs):
        for p in range(norb):
            for q in range(p + 1):
                factors[g, p, q] = factors[g, q, p] = vec[pair_index(p, q)]
    factors.setflags(write=False)
    return CholeskyFactors(factors=factors, cutoff=cutoff)


@dataclass(frozen=True)
class SubspaceHamiltonian:
    """Sparse symmetric Hamiltonian over an ordered determinant list."""

    dets: tuple[Determinant, ...]
    matrix: scipy.sparse.csr_matrix  # e_core folded into the diagonal

    @property
    def dim(self) -> int:
        return len(self.dets)


def _reduced_keys(det: Determinant, level: int):
    """Keys obtained by removing `level` electrons (all alpha/beta splits)."""
    occ_a = occupied_orbitals(det.alpha)
    occ_b = occupied_orbitals(det.beta)
    for ka in range(level + 1):
        kb = level - ka
        if ka > len(occ_a) or kb > len(occ_b):
            continue
        for rem_a in itertools.combinations(occ_a, ka):
            a = det.alpha
            for o in rem_a:
                a ^= 1 << o
            for rem_b in itertools.combinations(occ_b, kb):
                b = det.beta
                for o in rem_b:
                    b ^= 1 << o
                yield (a, b)


def connected_pairs(dets: list[Determinant]):
    """Index pairs (i < j) with excitation degree 1 or 2, via reduced-string hashing."""
    pairs = set()
    for level in (1, 2):
        buckets: dict[tuple[int, int], list[int]] = {}
        for idx, det in enumerate(dets):
            for key in _reduced_keys(det, level):
                buckets.setdefault(key, []).append(idx)
        for members in buckets.values():
            if len(members) < 2:
                continue
            for i, j in itertools.combinations(members, 2):
                pairs.add((i, j) if i < j else (j, i))
    return pairs


def build_subspace_hamiltonian(
    dets: list[Determinant], I: Integrals, nnz_cap: int = DEFAULT_NNZ_CAP
) -> SubspaceHamiltonian:
    """Assemble the sparse symmetric Hamiltonian over sorted, deduplicated dets."""
    if not dets:
        raise ValueError("empty determinant list")
    counts = {(d.alpha.bit_count(), d.beta.bit_count()) for d in dets}
    if len(counts) > 1:
        raise SymmetryError(f"determinant list mixes electron counts: {sorted(counts)}")
    n = len(dets)
    rows, cols, vals = [], [], []
    for i, d in enumerate(dets):
        rows.append(i)
        cols.append(i)
        vals.append(slater_condon(d, d, I))
    for i, j in connected_pairs(dets):
        hij = slater_condon(dets[i], dets[j], I)
        if hij != 0.0:
            rows.extend((i, j))
            cols.extend((j, i))
            vals.extend((hij, hij))
        if len(vals) > nnz_cap:
            raise CapacityError(f"nonzero count exceeded cap {nnz_cap}")
    matrix = scipy.sparse.csr_matrix(
        (np.array(vals), (np.array(rows), np.array(cols))), shape=(n, n)
    )
    return SubspaceHamiltonian(dets=tuple(dets), matrix=matrix)
