"""Phaseless auxiliary-field quantum Monte Carlo with multi-determinant CI
trials: Hubbard-Stratonovich propagation, force bias, hybrid phaseless weights,
stochastic-comb population control, and Flyvbjerg-Petersen reblocking.

Desk-scale evaluation strategy: the trial is stored as a coefficient matrix
C[a, b] over all alpha/beta occupation strings of the sector, together with
sigma = H C and L_psi[g] = L_g C.  A walker's overlap with the trial is then
m_a^T C m_b where m_a[a] = det(phi_alpha[rows(a), :]) are the walker minors,
and local energies / force biases are the matching ratios with sigma / L_psi.
This is algebraically identical to per-determinant Green's function summation
but lets every quantity be a small dense contraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .determinant import Determinant, hartree_fock_determinant, occupied_orbitals
from .errors import DivergenceGuard, InsufficientData, InternalError, RunAbort
from .fcidump import Integrals
from .hamiltonian import CholeskyFactors, build_subspace_hamiltonian
from .lucj import _string_rows
from .sci import CIWavefunction

OVERLAP_FLOOR = 1e-14
VHS_TAYLOR_ORDER = 8


@dataclass(frozen=True)
class AFQMCConfig:
    """Run parameters; the defaults follow the reference protocol."""

    dtau: float = 0.005
    n_walkers: int = 2048
    n_blocks: int = 1000
    steps_per_block: int = 20
    reortho_interval: int = 2
    measure_interval: int = 20
    chol_cutoff: float = 1e-12
    equilibration_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.dtau <= 0:
            raise ValueError("dtau must be positive")
        for name in ("n_walkers", "n_blocks", "steps_per_block",
                     "reortho_interval", "measure_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.equilibration_fraction < 1.0:
            raise ValueError("equilibration_fraction must be in [0, 1)")


def _one_body_string_matrix(M: np.ndarray, strings, norb: int) -> np.ndarray:
    """Matrix of sum_pq M[p,q] a+_p a_q over one spin sector's strings."""
    index = {s: i for i, s in enumerate(strings)}
    out = np.zeros((len(strings), len(strings)))
    for col, x in enumerate(strings):
        for p in occupied_orbitals(x):
            x0 = x ^ (1 << p)
            sign_p = -1.0 if (x0 & ((1 << p) - 1)).bit_count() & 1 else 1.0
            for q in range(norb):
                if (x0 >> q) & 1:
                    continue
                x1 = x0 | (1 << q)
                sign_q = -1.0 if (x0 & ((1 << q) - 1)).bit_count() & 1 else 1.0
                out[index[x1], col] += sign_p * sign_q * M[q, p]
    return out


@dataclass(frozen=True)
class Trial:
    """Immutable trial wavefunction with precomputed contraction intermediates."""

    psi: CIWavefunction
    norb: int
    n_alpha: int
    n_beta: int
    rows_a: np.ndarray  # (n_str_a, n_alpha) occupied-orbital rows per string
    rows_b: np.ndarray
    C: np.ndarray  # (n_str_a, n_str_b) trial coefficients on the string grid
    sigma: np.ndarray  # H C, same shape (includes the core energy)
    l_psi: np.ndarray  # (n_chol, n_str_a, n_str_b): L_g C
    l_flat: np.ndarray  # (n_str_a, n_chol * n_str_b) gemm-ready view of l_psi
    ell: np.ndarray  # (n_chol,) trial expectations <L_g>
    h1_eff: np.ndarray  # mean-field-shifted one-body matrix
    h0: float  # scalar part: e_core - 0.5 * ell.ell
    energy: float  # variational trial energy

    @property
    def n_chol(self) -> int:
        return self.l_psi.shape[0]


def prepare_trial(psi: CIWavefunction, I: Integrals, chol: CholeskyFactors) -> Trial:
    """Build the contraction intermediates and self-check the trial energy.

    The energy is evaluated twice: once through sigma = H C (direct matrix
    elements) and once through the one-body + Cholesky route.  Disagreement
    beyond 1e-6 Ha signals a contraction bug and raises InternalError.
    """
    if len(psi) == 0:
        raise ValueError("empty trial wavefunction")
    norb = I.norb
    na = psi.dets[0].alpha.bit_count()
    nb = psi.dets[0].beta.bit_count()
    alphas, rows_a = _string_rows(norb, na)
    betas, rows_b = _string_rows(norb, nb)
    ia = {s: i for i, s in enumerate(alphas)}
    ib = {s: i for i, s in enumerate(betas)}

    C = np.zeros((len(alphas), len(betas)))
    for d, c in zip(psi.dets, psi.coeffs):
        C[ia[d.alpha], ib[d.beta]] = c

    full = [Determinant(a, b) for a in alphas for b in betas]
    H = build_subspace_hamiltonian(full, I).matrix
    sigma = (H @ C.ravel()).reshape(C.shape)
    energy = float(C.ravel() @ sigma.ravel())

    n_chol = chol.n_factors
    l_psi = np.zeros((n_chol, *C.shape))
    ell = np.zeros(n_chol)
    for g in range(n_chol):
        Oa = _one_body_string_matrix(chol.factors[g], alphas, norb)
        Ob = _one_body_string_matrix(chol.factors[g], betas, norb)
        l_psi[g] = Oa @ C + C @ Ob.T
        ell[g] = float(C.ravel() @ l_psi[g].ravel())

    eri = I.eri_dense()
    h_tilde = I.h - 0.5 * np.einsum("prrq->pq", eri)
    Oa = _one_body_string_matrix(h_tilde, alphas, norb)
    Ob = _one_body_string_matrix(h_tilde, betas, norb)
    h_psi = Oa @ C + C @ Ob.T
    e_chol = I.e_core + float(C.ravel() @ h_psi.ravel())
    e_chol += 0.5 * float(np.einsum("gab,gab->", l_psi, l_psi))
    if abs(e_chol - energy) > 1e-6:
        raise InternalError(
            f"trial energy self-check failed: {energy} (direct) vs "
            f"{e_chol} (Cholesky route)"
        )

    h1_eff = h_tilde + np.einsum("g,gpq->pq", ell, chol.factors)
    h0 = I.e_core - 0.5 * float(ell @ ell)
    l_flat = np.ascontiguousarray(
        l_psi.transpose(1, 0, 2).reshape(C.shape[0], -1)
    )
    return Trial(
        psi=psi, norb=norb, n_alpha=na, n_beta=nb,
        rows_a=rows_a, rows_b=rows_b, C=C, sigma=sigma,
        l_psi=l_psi, l_flat=l_flat, ell=ell, h1_eff=h1_eff, h0=h0,
        energy=energy,
    )


@dataclass
class Walker:
    """Single non-orthogonal Slater determinant walker."""

    phi_alpha: np.ndarray  # (norb, n_alpha) complex
    phi_beta: np.ndarray
    weight: float = 1.0


@dataclass
class WalkerEnsemble:
    """Batched walker storage: orbital stacks plus a weight vector."""

    phi_a: np.ndarray  # (n_walkers, norb, n_alpha) complex
    phi_b: np.ndarray
    weights: np.ndarray
    n_killed: int = 0
    # cached trial minors and overlaps, kept in sync by the propagation loop
    m_a: np.ndarray | None = None
    m_b: np.ndarray | None = None
    S: np.ndarray | None = None

    @property
    def n_walkers(self) -> int:
        return len(self.weights)

    def walker(self, i: int) -> Walker:
        return Walker(self.phi_a[i].copy(), self.phi_b[i].copy(),
                      float(self.weights[i]))


def initialize_ensemble(trial: Trial, n_walkers: int) -> WalkerEnsemble:
    """All walkers start at the restricted Hartree-Fock determinant.

    When the trial has no amplitude on the RHF configuration (common for
    weight-truncated trials of stretched molecules) the start point falls
    back to the trial's dominant determinant so the initial overlap is
    nonzero.
    """
    ref = hartree_fock_determinant(trial.n_alpha, trial.n_beta)
    ia = {tuple(r): i for i, r in enumerate(trial.rows_a)}
    ib = {tuple(r): i for i, r in enumerate(trial.rows_b)}
    i_hf = ia[tuple(occupied_orbitals(ref.alpha))]
    j_hf = ib[tuple(occupied_orbitals(ref.beta))]
    if abs(trial.C[i_hf, j_hf]) < OVERLAP_FLOOR:
        i_dom, j_dom = np.unravel_index(
            int(np.argmax(np.abs(trial.C))), trial.C.shape
        )
        occ_a = list(trial.rows_a[i_dom])
        occ_b = list(trial.rows_b[j_dom])
    else:
        occ_a = occupied_orbitals(ref.alpha)
        occ_b = occupied_orbitals(ref.beta)
    eye = np.eye(trial.norb, dtype=complex)
    phi_a = eye[:, occ_a]
    phi_b = eye[:, occ_b]
    return WalkerEnsemble(
        phi_a=np.repeat(phi_a[None], n_walkers, axis=0),
        phi_b=np.repeat(phi_b[None], n_walkers, axis=0),
        weights=np.ones(n_walkers),
    )


def _small_det(a: np.ndarray) -> np.ndarray:
    """Closed-form determinants of stacked matrices of size <= 3."""
    m = a.shape[-1]
    if m == 0:
        return np.ones(a.shape[:-2], dtype=a.dtype)
    if m == 1:
        return a[..., 0, 0]
    if m == 2:
        return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    return (
        a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
        - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
        + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
    )


_COMPLEMENT_CACHE: dict = {}


def _complement_data(norb: int, rows: np.ndarray):
    """Complementary row sets, calibrated signs, and a padding block for the
    Jacobi complementary-minor evaluation of all string minors."""
    key = (norb, rows.shape[1], rows.tobytes())
    hit = _COMPLEMENT_CACHE.get(key)
    if hit is not None:
        return hit
    k = rows.shape[1]
    full = set(range(norb))
    comp = np.array(
        [sorted(full - set(map(int, r))) for r in rows], dtype=int
    ).reshape(len(rows), norb - k)
    rng = np.random.default_rng(12345)
    pad = rng.normal(size=(norb, norb - k)) + 1j * rng.normal(size=(norb, norb - k))
    # calibrate the per-subset signs once against direct determinants
    probe = rng.normal(size=(norb, k)) + 1j * rng.normal(size=(norb, k))
    direct = np.linalg.det(probe[rows, :])
    M = np.concatenate([probe, pad], axis=1)
    det_m = np.linalg.det(M)
    tail = np.linalg.inv(M)[k:, :]
    comp_minors = _small_det(np.swapaxes(tail[:, comp], 0, 1))
    ratio = direct / (det_m * comp_minors)
    signs = np.round(ratio.real)
    if not np.allclose(ratio, signs, atol=1e-8) or not np.all(np.abs(signs) == 1):
        raise InternalError("minor sign calibration failed")
    data = (comp, signs, pad)
    _COMPLEMENT_CACHE[key] = data
    return data


def _minor_vectors(phi: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """det(phi[rows_i, :]) for every occupation string, batched over walkers.

    For complements of size <= 3 the minors come from one matrix inverse per
    walker via Jacobi's complementary-minor identity, which is much cheaper
    than factorizing every k x k submatrix.
    """
    nw, norb, k = phi.shape
    if k == norb:
        return np.linalg.det(phi)[:, None]
    if k == 1:
        return phi[:, rows[:, 0], 0]
    if norb - k > 3 or len(rows) < 8:
        return np.linalg.det(phi[:, rows, :])
    comp, signs, pad = _complement_data(norb, rows)
    M = np.concatenate(
        [phi, np.broadcast_to(pad, (nw, norb, norb - k))], axis=2
    )
    det_m = np.linalg.det(M)
    ok = np.isfinite(det_m) & (np.abs(det_m) > 1e-280)
    if not np.all(ok):
        return np.linalg.det(phi[:, rows, :])
    tail = np.linalg.inv(M)[:, k:, :]
    sub = np.swapaxes(tail[:, :, comp], 1, 2)
    return signs[None, :] * det_m[:, None] * _small_det(sub)


def _ensemble_minors(ensemble: WalkerEnsemble, trial: Trial):
    if ensemble.S is not None:
        return ensemble.m_a, ensemble.m_b, ensemble.S
    m_a = _minor_vectors(ensemble.phi_a, trial.rows_a)
    m_b = _minor_vectors(ensemble.phi_b, trial.rows_b)
    S = np.einsum("wa,ab,wb->w", m_a, trial.C, m_b, optimize=True)
    return m_a, m_b, S


def overlap(trial: Trial, walker: Walker) -> complex:
    """<Psi_T|phi> = sum_i c_i det(x_i | phi_alpha) det(x_i | phi_beta)."""
    m_a = np.linalg.det(walker.phi_alpha[trial.rows_a, :])
    m_b = np.linalg.det(walker.phi_beta[trial.rows_b, :])
    return complex(m_a @ trial.C @ m_b)


def local_energy(trial: Trial, walker: Walker, I: Integrals) -> complex:
    """Mixed estimator <Psi_T|H|phi> / <Psi_T|phi>."""
    m_a = np.linalg.det(walker.phi_alpha[trial.rows_a, :])
    m_b = np.linalg.det(walker.phi_beta[trial.rows_b, :])
    S = complex(m_a @ trial.C @ m_b)
    if abs(S) < OVERLAP_FLOOR:
        raise DivergenceGuard(f"trial-walker overlap {abs(S)} below floor")
    return complex(m_a @ trial.sigma @ m_b) / S


def _ensemble_local_energies(m_a, m_b, S, trial: Trial) -> np.ndarray:
    num = np.einsum("wa,ab,wb->w", m_a, trial.sigma, m_b, optimize=True)
    return num / S


def _apply_vhs(A: np.ndarray, phi: np.ndarray, order: int = VHS_TAYLOR_ORDER):
    """exp(A) phi by truncated Taylor series, batched over walkers."""
    out = phi.astype(complex).copy()
    term = out.copy()
    for k in range(1, order + 1):
        term = np.matmul(A, term) / k
        out += term
    return out


def propagate_step(
    ensemble: WalkerEnsemble,
    trial: Trial,
    chol: CholeskyFactors,
    config: AFQMCConfig,
    rng: np.random.Generator,
    e_shift: float | None = None,
    exp_h1: np.ndarray | None = None,
) -> WalkerEnsemble:
    """One symmetric-Trotter step with force bias and hybrid phaseless weights.

    w <- w |I| max(0, cos dtheta) with
    I = (S'/S) e^{-i sqrt(dtau) xt.ell} e^{-dtau h0} e^{x.xbar - xbar.xbar/2}
        e^{dtau e_shift}
    where xt = x - xbar and dtheta is the phase of the full overlap ratio.
    """
    if e_shift is None:
        e_shift = trial.energy
    dtau = config.dtau
    sq = math.sqrt(dtau)
    nw = ensemble.n_walkers

    m_a, m_b, S = _ensemble_minors(ensemble, trial)
    alive = (ensemble.weights > 0) & (np.abs(S) > OVERLAP_FLOOR)
    S_safe = np.where(alive, S, 1.0)

    # force bias from the mixed estimator of each L_g, mean-field subtracted
    if trial.n_chol == 0:
        gl = np.zeros((nw, 0))
    else:
        # contiguous copies keep the real-times-real products on the fast
        # BLAS path (strided .real views fall back to a slow loop)
        mr = np.ascontiguousarray(m_a.real)
        mi = np.ascontiguousarray(m_a.imag)
        T = (mr @ trial.l_flat) + 1j * (mi @ trial.l_flat)
        gl = (T.reshape(nw, trial.n_chol, -1) @ m_b[:, :, None])[:, :, 0]
    xbar = -1j * sq * (gl / S_safe[:, None] - trial.ell[None, :])
    xbar[~alive] = 0.0
    cap = 1.0 / sq
    mag = np.abs(xbar)
    xbar = np.where(mag > cap, xbar * (cap / np.where(mag > 0, mag, 1.0)), xbar)

    x = rng.standard_normal((nw, trial.n_chol))
    xt = x - xbar

    if exp_h1 is None:
        exp_h1 = scipy.linalg.expm(-0.5 * dtau * trial.h1_eff)
    A = 1j * sq * np.tensordot(xt, chol.factors, axes=([1], [0]))
    phi_a = exp_h1 @ ensemble.phi_a
    phi_b = exp_h1 @ ensemble.phi_b
    phi_a = exp_h1 @ _apply_vhs(A, phi_a)
    phi_b = exp_h1 @ _apply_vhs(A, phi_b)

    m_a2 = _minor_vectors(phi_a, trial.rows_a)
    m_b2 = _minor_vectors(phi_b, trial.rows_b)
    S2 = np.einsum("wa,ab,wb->w", m_a2, trial.C, m_b2, optimize=True)

    ratio = (S2 / S_safe) * np.exp(-1j * sq * (xt @ trial.ell))
    dtheta = np.angle(ratio)
    gauss = np.exp(np.sum(x * xbar - 0.5 * xbar * xbar, axis=1))
    importance = ratio * gauss * math.exp(-dtau * trial.h0 + dtau * e_shift)
    new_w = ensemble.weights * np.abs(importance) * np.maximum(0.0, np.cos(dtheta))
    new_w = np.where(alive & np.isfinite(new_w), new_w, 0.0)
    killed = int(np.sum((ensemble.weights > 0) & (new_w == 0)))

    return WalkerEnsemble(
        phi_a=phi_a, phi_b=phi_b, weights=new_w,
        n_killed=ensemble.n_killed + killed,
        m_a=m_a2, m_b=m_b2, S=S2,
    )


def reorthonormalize(ensemble: WalkerEnsemble) -> WalkerEnsemble:
    """QR-factor each walker, keeping phase-fixed orthonormal columns.

    Column mixing changes a Slater determinant only by a scalar, which cancels
    in every mixed-estimator ratio, so weights are left untouched.
    """
    out_a, ra = np.linalg.qr(ensemble.phi_a)
    out_b, rb = np.linalg.qr(ensemble.phi_b)
    scales = []
    for Q, R in ((out_a, ra), (out_b, rb)):
        d = np.einsum("wii->wi", R)
        phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
        Q *= phase[:, None, :]
        scales.append(np.prod(np.abs(d), axis=1))
    m_a, m_b, S = ensemble.m_a, ensemble.m_b, ensemble.S
    if S is not None:
        # every minor of a walker changes by the same scalar under column
        # mixing; with phase-fixed columns that scalar is prod |R_ii|
        fa = np.where(scales[0] > 0, scales[0], 1.0)
        fb = np.where(scales[1] > 0, scales[1], 1.0)
        m_a = m_a / fa[:, None]
        m_b = m_b / fb[:, None]
        S = S / (fa * fb)
    return replace(ensemble, phi_a=out_a, phi_b=out_b, m_a=m_a, m_b=m_b, S=S)


def population_control(
    ensemble: WalkerEnsemble, target_n: int, rng: np.random.Generator
) -> WalkerEnsemble:
    """Stochastic comb reconfiguration to target_n equal-weight walkers.

    Total weight is preserved exactly; each survivor carries W_total/target_n.
    """
    total = float(np.sum(ensemble.weights))
    if total < 1e-300:
        raise RunAbort(
            f"total walker weight underflow ({total}); "
            f"{ensemble.n_killed} walkers killed so far"
        )
    edges = np.cumsum(ensemble.weights)
    teeth = (rng.random() + np.arange(target_n)) * (total / target_n)
    picks = np.searchsorted(edges, teeth, side="right")
    picks = np.minimum(picks, ensemble.n_walkers - 1)
    cached = ensemble.S is not None
    return WalkerEnsemble(
        phi_a=ensemble.phi_a[picks].copy(),
        phi_b=ensemble.phi_b[picks].copy(),
        weights=np.full(target_n, total / target_n),
        n_killed=ensemble.n_killed,
        m_a=ensemble.m_a[picks].copy() if cached else None,
        m_b=ensemble.m_b[picks].copy() if cached else None,
        S=ensemble.S[picks].copy() if cached else None,
    )


@dataclass(frozen=True)
class EstimatorSeries:
    """Per-block weighted mixed-estimator energies from one AFQMC run."""

    energies: np.ndarray  # complex, one entry per measured block
    total_weights: np.ndarray
    config: AFQMCConfig
    trial_energy: float
    n_killed: int = 0
    aborted: bool = False

    def __len__(self) -> int:
        return len(self.energies)

    def post_equilibration(self) -> "EstimatorSeries":
        skip = int(len(self) * self.config.equilibration_fraction)
        return replace(
            self,
            energies=self.energies[skip:],
            total_weights=self.total_weights[skip:],
        )


def run_afqmc(
    trial: Trial,
    I: Integrals,
    chol: CholeskyFactors,
    config: AFQMCConfig,
    flush_path: str | None = None,
) -> EstimatorSeries:
    """Full phaseless run: RHF-initialized walkers, blocked measurements.

    Energy measurement and population control happen every measure_interval
    steps, re-orthonormalization every reortho_interval steps.  The energy
    shift starts at the trial energy and tracks the latest mixed estimate.
    On RunAbort the partial series is flushed to flush_path (when given)
    before the error propagates.
    """
    ensemble = initialize_ensemble(trial, config.n_walkers)
    exp_h1 = scipy.linalg.expm(-0.5 * config.dtau * trial.h1_eff)
    e_shift = trial.energy
    energies: list[complex] = []
    weights: list[float] = []
    step = 0
    try:
        for _ in range(config.n_blocks):
            for _ in range(config.steps_per_block):
                step += 1
                rng = np.random.default_rng((config.seed, step, 0))
                ensemble = propagate_step(
                    ensemble, trial, chol, config, rng,
                    e_shift=e_shift, exp_h1=exp_h1,
                )
                if step % config.reortho_interval == 0:
                    ensemble = reorthonormalize(ensemble)
                if step % config.measure_interval == 0:
                    m_a, m_b, S = _ensemble_minors(ensemble, trial)
                    alive = (ensemble.weights > 0) & (np.abs(S) > OVERLAP_FLOOR)
                    total = float(np.sum(ensemble.weights[alive]))
                    if total < 1e-300:
                        raise RunAbort(
                            f"total walker weight underflow at step {step}"
                        )
                    el = _ensemble_local_energies(
                        m_a[alive], m_b[alive], S[alive], trial
                    )
                    e_mix = complex(np.sum(ensemble.weights[alive] * el) / total)
                    energies.append(e_mix)
                    weights.append(total)
                    e_shift = float(e_mix.real)
                    rng_pc = np.random.default_rng((config.seed, step, 1))
                    ensemble = population_control(
                        ensemble, config.n_walkers, rng_pc
                    )
    except RunAbort:
        partial = EstimatorSeries(
            energies=np.asarray(energies, dtype=complex),
            total_weights=np.asarray(weights),
            config=config, trial_energy=trial.energy,
            n_killed=ensemble.n_killed, aborted=True,
        )
        if flush_path is not None:
            _flush_series(partial, flush_path)
        raise
    return EstimatorSeries(
        energies=np.asarray(energies, dtype=complex),
        total_weights=np.asarray(weights),
        config=config, trial_energy=trial.energy,
        n_killed=ensemble.n_killed,
    )


def _flush_series(series: EstimatorSeries, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("block,energy_re,energy_im,total_weight\n")
        for i, (e, w) in enumerate(zip(series.energies, series.total_weights)):
            fh.write(f"{i},{float(e.real)!r},{float(e.imag)!r},{float(w)!r}\n")


@dataclass(frozen=True)
class ReblockLevel:
    level: int
    n_blocks: int
    mean: float
    stderr: float
    stderr_uncertainty: float


@dataclass(frozen=True)
class ReblockReport:
    levels: tuple[ReblockLevel, ...]
    plateau_level: int
    lowest_energy_level: int


def reblock(energies, weights=None, min_blocks: int = 16):
    """Flyvbjerg-Petersen pair-averaging error analysis.

    Returns (mean, stderr, block_length, report).  The plateau level is the
    first one whose error estimate stops growing within its own uncertainty;
    the report also carries the lowest-energy level as an alternative rule.
    """
    x = np.asarray(energies, dtype=float)
    if len(x) < min_blocks:
        raise InsufficientData(
            f"need at least {min_blocks} blocks, got {len(x)}"
        )
    if weights is None:
        w = np.ones(len(x))
    else:
        w = np.asarray(weights, dtype=float)
    mean = float(np.sum(w * x) / np.sum(w))

    levels = []
    cur = x.copy()
    level = 0
    while len(cur) >= 2:
        n = len(cur)
        var = float(np.var(cur, ddof=1)) if n > 1 else 0.0
        se = math.sqrt(var / n)
        se_unc = se / math.sqrt(2.0 * (n - 1)) if n > 1 else 0.0
        levels.append(ReblockLevel(level, n, float(np.mean(cur)), se, se_unc))
        if n < 2 * 2:
            break
        if n % 2:
            cur = cur[:-1]
        cur = 0.5 * (cur[0::2] + cur[1::2])
        level += 1

    plateau = len(levels) - 1
    for i in range(len(levels) - 1):
        if levels[i + 1].stderr <= levels[i].stderr + levels[i].stderr_uncertainty:
            plateau = i
            break
    lowest = min(range(len(levels)), key=lambda i: levels[i].mean)
    report = ReblockReport(
        levels=tuple(levels), plateau_level=plateau, lowest_energy_level=lowest
    )
    chosen = levels[plateau]
    return mean, chosen.stderr, 2**plateau, report
