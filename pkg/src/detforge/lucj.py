"""LUCJ-style correlated states in determinant space, configuration sampling
with simulated readout noise, symmetry-based configuration recovery, and the
SQD outer loop (including derivative-free parameter optimization).

The coupling matrix ``j`` is indexed over spin-orbitals with alpha orbitals
first: index p is orbital p alpha, index norb + p is orbital p beta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .determinant import (
    Determinant,
    enumerate_strings,
    hartree_fock_determinant,
    occupied_orbitals,
)
from .errors import CapacityError
from .fcidump import Integrals
from .sci import CIWavefunction, VarianceReport, diagonalize, energy_variance

DEFAULT_STATE_CAP = 200_000
PROBABILITY_FLOOR = 1e-30


def default_connectivity_mask(norb: int) -> np.ndarray:
    """All-to-all within each spin; diagonal (p = r) across opposite spins."""
    mask = np.zeros((2 * norb, 2 * norb), dtype=bool)
    mask[:norb, :norb] = True
    mask[norb:, norb:] = True
    idx = np.arange(norb)
    mask[idx, idx + norb] = True
    mask[idx + norb, idx] = True
    return mask


@dataclass(frozen=True)
class LUCJParams:
    """Generators of the one-layer ansatz: two one-body rotations and a
    density-density coupling restricted to a connectivity mask."""

    k1: np.ndarray  # (norb, norb) real antisymmetric, spin-restricted
    k2: np.ndarray  # (norb, norb) real antisymmetric
    j: np.ndarray  # (2*norb, 2*norb) real symmetric, zero outside the mask
    connectivity_mask: np.ndarray

    def __post_init__(self):
        norb = self.k1.shape[0]
        if self.k1.shape != (norb, norb) or self.k2.shape != (norb, norb):
            raise ValueError("k1/k2 must be square and equally sized")
        if self.j.shape != (2 * norb, 2 * norb):
            raise ValueError("j must be 2*norb x 2*norb")
        if np.max(np.abs(self.k1 + self.k1.T), initial=0.0) > 1e-12:
            raise ValueError("k1 is not antisymmetric")
        if np.max(np.abs(self.k2 + self.k2.T), initial=0.0) > 1e-12:
            raise ValueError("k2 is not antisymmetric")
        if np.max(np.abs(self.j - self.j.T), initial=0.0) > 1e-12:
            raise ValueError("j is not symmetric")
        if np.any(self.j[~self.connectivity_mask] != 0.0):
            raise ValueError("j has entries outside the connectivity mask")
        for arr in (self.k1, self.k2, self.j, self.connectivity_mask):
            arr.setflags(write=False)

    @property
    def norb(self) -> int:
        return self.k1.shape[0]


def zero_params(norb: int, mask: np.ndarray | None = None) -> LUCJParams:
    if mask is None:
        mask = default_connectivity_mask(norb)
    return LUCJParams(
        k1=np.zeros((norb, norb)),
        k2=np.zeros((norb, norb)),
        j=np.zeros((2 * norb, 2 * norb)),
        connectivity_mask=mask,
    )


def random_params(norb: int, seed: int, mask: np.ndarray | None = None) -> LUCJParams:
    """Uniform(-10, 10) entries, antisymmetrized (K) / symmetrized (J), masked."""
    if mask is None:
        mask = default_connectivity_mask(norb)
    rng = np.random.default_rng(seed)
    k1 = rng.uniform(-10, 10, (norb, norb))
    k2 = rng.uniform(-10, 10, (norb, norb))
    j = rng.uniform(-10, 10, (2 * norb, 2 * norb))
    j = (j + j.T) / 2
    j[~mask] = 0.0
    return LUCJParams(
        k1=(k1 - k1.T) / 2, k2=(k2 - k2.T) / 2, j=j, connectivity_mask=mask
    )


def params_to_json(params: LUCJParams) -> str:
    return json.dumps(
        {
            "k1": params.k1.tolist(),
            "k2": params.k2.tolist(),
            "j": params.j.tolist(),
            "mask": params.connectivity_mask.astype(int).tolist(),
        },
        sort_keys=True,
    )


def params_from_json(text: str) -> LUCJParams:
    data = json.loads(text)
    k1 = np.asarray(data["k1"], dtype=float)
    norb = k1.shape[0]
    mask = (
        np.asarray(data["mask"], dtype=bool)
        if "mask" in data
        else default_connectivity_mask(norb)
    )
    return LUCJParams(
        k1=k1,
        k2=np.asarray(data["k2"], dtype=float),
        j=np.asarray(data["j"], dtype=float),
        connectivity_mask=mask,
    )


def _string_rows(norb: int, ne: int) -> tuple[list[int], np.ndarray]:
    strings = enumerate_strings(norb, ne)
    rows = np.array([occupied_orbitals(s) for s in strings], dtype=int)
    return strings, rows


def _minors(U: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """det(U[rows_i, cols_j]) for every string pair (batched)."""
    sub = U[np.ix_(rows.ravel(), cols.ravel())]
    ne = rows.shape[1]
    sub = sub.reshape(rows.shape[0], ne, cols.shape[0], ne).transpose(0, 2, 1, 3)
    return np.linalg.det(sub)


def _rotation_in_string_basis(K: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Matrix of the many-body rotation Gamma(exp(K)) in one spin sector."""
    U = scipy.linalg.expm(K)
    return _minors(U, rows, rows)


def build_lucj_state(
    params: LUCJParams,
    ref: Determinant,
    norb: int,
    cap: int = DEFAULT_STATE_CAP,
) -> CIWavefunction:
    """Exact determinant-space amplitudes of the one-layer ansatz.

    The state is exp(-K2) exp(K1) exp(iJ) exp(-K1) applied to the reference,
    with every one-body exponential realized through minor-overlap matrices
    per spin sector.  Amplitudes are stored as magnitude and phase.
    """
    na = ref.alpha.bit_count()
    nb = ref.beta.bit_count()
    from math import comb

    dim = comb(norb, na) * comb(norb, nb)
    if dim > cap:
        raise CapacityError(f"FCI dimension {dim} exceeds cap {cap}")
    alphas, rows_a = _string_rows(norb, na)
    betas, rows_b = _string_rows(norb, nb)

    occ_a = np.array(occupied_orbitals(ref.alpha), dtype=int)
    occ_b = np.array(occupied_orbitals(ref.beta), dtype=int)

    # (a) initial rotation applied to the reference occupied columns
    U1 = scipy.linalg.expm(-params.k1)
    amp_a = _minors(U1, rows_a, occ_a.reshape(1, -1))[:, 0]
    amp_b = _minors(U1, rows_b, occ_b.reshape(1, -1))[:, 0]
    A = np.outer(amp_a, amp_b).astype(complex)

    # (c) diagonal density-density phase
    occ_mat_a = np.zeros((len(alphas), norb))
    for i, s in enumerate(alphas):
        occ_mat_a[i, occupied_orbitals(s)] = 1.0
    occ_mat_b = np.zeros((len(betas), norb))
    for i, s in enumerate(betas):
        occ_mat_b[i, occupied_orbitals(s)] = 1.0
    jaa = params.j[:norb, :norb]
    jbb = params.j[norb:, norb:]
    jab = params.j[:norb, norb:]
    phase_a = np.einsum("ap,pq,aq->a", occ_mat_a, jaa, occ_mat_a)
    phase_b = np.einsum("bp,pq,bq->b", occ_mat_b, jbb, occ_mat_b)
    cross = 2.0 * occ_mat_a @ jab @ occ_mat_b.T
    A *= np.exp(1j * (phase_a[:, None] + phase_b[None, :] + cross))

    # (d) undo the first rotation, then the final orbital rotation
    for K in (params.k1, -params.k2):
        Ta = _rotation_in_string_basis(K, rows_a)
        Tb = _rotation_in_string_basis(K, rows_b)
        A = Ta @ A @ Tb.T

    A = A.ravel()
    A /= np.linalg.norm(A)
    dets = tuple(Determinant(a, b) for a in alphas for b in betas)
    return CIWavefunction(
        dets=dets, coeffs=np.abs(A), phases=np.angle(A), converged=True
    )


@dataclass(frozen=True)
class SampleBatch:
    """Raw, symmetry-valid, and recovered configuration samples.

    Bitstrings are integers over 2*norb bits: alpha orbitals in the low bits,
    beta orbitals shifted up by norb.
    """

    raw: tuple[int, ...]
    valid: tuple[int, ...]
    recovered: tuple[int, ...]
    norb: int
    n_alpha: int
    n_beta: int

    @property
    def n_samples(self) -> int:
        return len(self.raw)


def _split(x: int, norb: int) -> tuple[int, int]:
    return x & ((1 << norb) - 1), x >> norb


def _is_valid(x: int, norb: int, na: int, nb: int) -> bool:
    a, b = _split(x, norb)
    return a.bit_count() == na and b.bit_count() == nb


def sample_configurations(
    psi: CIWavefunction, n_samples: int, flip_prob: float, seed: int, norb: int
) -> SampleBatch:
    """Draw i.i.d. configurations from |c|^2, then flip bits independently."""
    if not 0.0 <= flip_prob < 0.5:
        raise ValueError(f"flip_prob must be in [0, 0.5), got {flip_prob}")
    rng = np.random.default_rng(seed)
    probs = psi.weights
    probs = probs / probs.sum()
    idx = rng.choice(len(psi.dets), size=n_samples, p=probs)
    na = psi.dets[0].alpha.bit_count()
    nb = psi.dets[0].beta.bit_count()
    raw = []
    for i in idx:
        d = psi.dets[i]
        x = d.alpha | (d.beta << norb)
        if flip_prob > 0.0:
            flips = rng.random(2 * norb) < flip_prob
            for bit in np.flatnonzero(flips):
                x ^= 1 << int(bit)
        raw.append(x)
    valid = tuple(x for x in raw if _is_valid(x, norb, na, nb))
    return SampleBatch(
        raw=tuple(raw), valid=valid, recovered=valid,
        norb=norb, n_alpha=na, n_beta=nb,
    )


def _mean_occupations(samples, norb: int, na: int, nb: int) -> np.ndarray:
    """Average occupation per spin-orbital; falls back to the RHF pattern."""
    if not samples:
        ref = hartree_fock_determinant(na, nb)
        x = ref.alpha | (ref.beta << norb)
        samples = [x]
    occ = np.zeros(2 * norb)
    for x in samples:
        for m in range(2 * norb):
            occ[m] += (x >> m) & 1
    return occ / len(samples)


def _repair_sector(mask: int, norb: int, target: int, nbar: np.ndarray, rng) -> int:
    """Flip excess/deficit bits with probability proportional to |x_p - nbar_p|."""
    count = mask.bit_count()
    while count != target:
        if count > target:
            candidates = occupied_orbitals(mask)
            scores = np.array([abs(1.0 - nbar[p]) for p in candidates])
        else:
            candidates = [p for p in range(norb) if not (mask >> p) & 1]
            scores = np.array([abs(nbar[p]) for p in candidates])
        total = scores.sum()
        probs = scores / total if total > 0 else np.full(len(candidates), 1.0 / len(candidates))
        pick = int(candidates[int(rng.choice(len(candidates), p=probs))])
        mask ^= 1 << pick
        count = mask.bit_count()
    return mask


def recover_configurations(
    batch: SampleBatch, n_alpha: int, n_beta: int, max_rounds: int = 3,
    seed: int = 0,
) -> SampleBatch:
    """Occupancy-guided iterative repair of symmetry-violating samples."""
    if not batch.raw:
        raise ValueError("empty sample batch")
    norb = batch.norb
    invalid = [x for x in batch.raw if not _is_valid(x, norb, n_alpha, n_beta)]
    valid = tuple(x for x in batch.raw if _is_valid(x, norb, n_alpha, n_beta))
    if not invalid:
        return replace(batch, valid=valid, recovered=batch.raw,
                       n_alpha=n_alpha, n_beta=n_beta)

    nbar = _mean_occupations(valid, norb, n_alpha, n_beta)
    repaired = list(invalid)
    for round_idx in range(max(1, max_rounds)):
        rng = np.random.default_rng((seed, round_idx))
        repaired = []
        for x in invalid:
            a, b = _split(x, norb)
            a = _repair_sector(a, norb, n_alpha, nbar[:norb], rng)
            b = _repair_sector(b, norb, n_beta, nbar[norb:], rng)
            repaired.append(a | (b << norb))
        nbar = _mean_occupations(list(valid) + repaired, norb, n_alpha, n_beta)

    recovered = []
    it = iter(repaired)
    for x in batch.raw:
        recovered.append(x if _is_valid(x, norb, n_alpha, n_beta) else next(it))
    return replace(
        batch, valid=valid, recovered=tuple(recovered),
        n_alpha=n_alpha, n_beta=n_beta,
    )


def subspace_from_samples(samples, norb: int) -> list[Determinant]:
    """Cartesian product of the observed alpha and beta strings, sorted."""
    alphas = sorted({x & ((1 << norb) - 1) for x in samples})
    betas = sorted({x >> norb for x in samples})
    return [Determinant(a, b) for a in alphas for b in betas]


def sqd_pipeline(
    params: LUCJParams,
    I: Integrals,
    n_samples: int,
    flip_prob: float = 0.0,
    n_batches: int = 1,
    seed: int = 0,
    recovery_rounds: int = 3,
    cap: int = DEFAULT_STATE_CAP,
) -> tuple[CIWavefunction, VarianceReport]:
    """Build, sample, recover, diagonalize; returns the best batch's ground state.

    The subspace of each batch is the Cartesian product of its distinct alpha
    and beta strings, so its dimension obeys d <= (2 * n_samples)^2.
    """
    ref = hartree_fock_determinant(I.nelec_alpha, I.nelec_beta)
    psi_qc = build_lucj_state(params, ref, I.norb, cap=cap)
    batch = sample_configurations(psi_qc, n_samples, flip_prob, seed, I.norb)
    batch = recover_configurations(
        batch, I.nelec_alpha, I.nelec_beta, max_rounds=recovery_rounds, seed=seed
    )

    samples = list(batch.recovered)
    chunk = max(1, len(samples) // max(1, n_batches))
    best = None
    for start in range(0, len(samples), chunk):
        part = samples[start : start + chunk]
        if not part:
            continue
        dets = subspace_from_samples(part, I.norb)
        assert len(dets) <= (2 * n_samples) ** 2
        energies, (psi,) = diagonalize(dets, I)
        if best is None or energies[0] < best[0]:
            best = (energies[0], psi)
    _, psi = best
    return psi, energy_variance(psi, I)


def _free_parameter_vector(params: LUCJParams):
    """Flatten the independent degrees of freedom (strict lower K, masked upper J)."""
    norb = params.norb
    il = np.tril_indices(norb, k=-1)
    mask_u = np.triu(params.connectivity_mask)
    ju = np.where(mask_u)
    vec = np.concatenate([params.k1[il], params.k2[il], params.j[ju]])
    meta = (norb, il, ju, params.connectivity_mask)
    return vec, meta


def _params_from_vector(vec: np.ndarray, meta) -> LUCJParams:
    norb, il, ju, mask = meta
    nk = len(il[0])
    k1 = np.zeros((norb, norb))
    k2 = np.zeros((norb, norb))
    k1[il] = vec[:nk]
    k2[il] = vec[nk : 2 * nk]
    k1 -= k1.T
    k2 -= k2.T
    j = np.zeros((2 * norb, 2 * norb))
    j[ju] = vec[2 * nk :]
    j = np.where(np.eye(2 * norb, dtype=bool), j, j + j.T)
    return LUCJParams(k1=k1, k2=k2, j=j, connectivity_mask=mask)


def optimize_params(
    initial: LUCJParams,
    objective,
    budget: int,
    seed: int = 0,
    initial_radius: float = 1.0,
    min_radius: float = 1e-6,
) -> LUCJParams:
    """Derivative-free coordinate search with a shrinking trust radius.

    ``objective`` maps LUCJParams to a scalar to minimize.  Never returns
    parameters with objective worse than the initial point; stops when the
    evaluation budget is exhausted (non-convergence at budget exhaustion is
    expected, not an error).
    """
    if budget <= 0:
        return initial
    rng = np.random.default_rng(seed)
    vec, meta = _free_parameter_vector(initial)
    best_vec = vec.copy()
    best_val = objective(initial)
    radius = initial_radius
    evals = 0
    while evals < budget and radius >= min_radius:
        improved = False
        order = rng.permutation(len(vec))
        for coord in order:
            for step in (radius, -radius):
                if evals >= budget:
                    break
                trial = best_vec.copy()
                trial[coord] += step
                val = objective(_params_from_vector(trial, meta))
                evals += 1
                if val < best_val:
                    best_val = val
                    best_vec = trial
                    improved = True
                    break
            if evals >= budget:
                break
        if not improved:
            radius /= 2.0
    return _params_from_vector(best_vec, meta)


def sqd_energy_objective(I: Integrals, n_samples: int, flip_prob: float = 0.0,
                         seed: int = 0, cap: int = DEFAULT_STATE_CAP):
    """Objective factory: SQD ground energy for a fixed sampling protocol."""

    def objective(params: LUCJParams) -> float:
        psi, _ = sqd_pipeline(
            params, I, n_samples=n_samples, flip_prob=flip_prob, seed=seed, cap=cap
        )
        report = energy_variance(psi, I)
        return report.energy

    return objective


def kl_divergence_objective(reference: CIWavefunction, ref_det: Determinant,
                            norb: int, cap: int = DEFAULT_STATE_CAP):
    """Objective factory: KL(reference || lucj) between exact |amplitude|^2
    distributions, with a floor of 1e-30 on the model probabilities."""
    ref_probs = {d: w for d, w in zip(reference.dets, reference.weights) if w > 0}

    def objective(params: LUCJParams) -> float:
        psi = build_lucj_state(params, ref_det, norb, cap=cap)
        q = {d: w for d, w in zip(psi.dets, psi.weights)}
        kl = 0.0
        for d, p in ref_probs.items():
            kl += p * np.log(p / max(q.get(d, 0.0), PROBABILITY_FLOOR))
        return float(kl)

    return objective
