"""One-time generator for the FCIDUMP fixtures shipped in detforge/data.

Self-contained STO-3G integrals (McMurchie-Davidson scheme), restricted
Hartree-Fock, MO transformation, and optional frozen-core reduction.  Run
from the repository root:

    python3 tools/make_fixtures.py

The emitted dumps are committed; this script exists for provenance and is
not part of the installed package.
"""

import sys
from math import comb
from pathlib import Path

import numpy as np
from scipy.special import gamma, gammainc

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from detforge.fcidump import IntegralsBuilder, emit_fcidump_file

ANGSTROM = 1.0 / 0.52917721092

# STO-3G exponents and contraction coefficients.
STO3G = {
    "H": [("s", [3.42525091, 0.62391373, 0.16885540],
           [0.15432897, 0.53532814, 0.44463454])],
    "N": [("s", [99.1061690, 18.0523120, 4.8856602],
           [0.15432897, 0.53532814, 0.44463454]),
          ("s", [3.7804559, 0.8784966, 0.2857144],
           [-0.09996723, 0.39951283, 0.70011547]),
          ("p", [3.7804559, 0.8784966, 0.2857144],
           [0.15591627, 0.60768372, 0.39195739])],
    "O": [("s", [130.7093200, 23.8088610, 6.4436083],
           [0.15432897, 0.53532814, 0.44463454]),
          ("s", [5.0331513, 1.1695961, 0.3803890],
           [-0.09996723, 0.39951283, 0.70011547]),
          ("p", [5.0331513, 1.1695961, 0.3803890],
           [0.15591627, 0.60768372, 0.39195739])],
}
CHARGE = {"H": 1, "N": 7, "O": 8}


def boys(n, x):
    if x < 1e-12:
        return 1.0 / (2 * n + 1)
    a = n + 0.5
    return 0.5 * gamma(a) * gammainc(a, x) / x**a


def hermite_e(i, j, t, Qx, a, b):
    """Hermite expansion coefficient E_t^{ij} (recursive)."""
    p = a + b
    q = a * b / p
    if t < 0 or t > i + j:
        return 0.0
    if i == j == t == 0:
        return np.exp(-q * Qx * Qx)
    if j == 0:
        return (hermite_e(i - 1, j, t - 1, Qx, a, b) / (2 * p)
                - q * Qx / a * hermite_e(i - 1, j, t, Qx, a, b)
                + (t + 1) * hermite_e(i - 1, j, t + 1, Qx, a, b))
    return (hermite_e(i, j - 1, t - 1, Qx, a, b) / (2 * p)
            + q * Qx / b * hermite_e(i, j - 1, t, Qx, a, b)
            + (t + 1) * hermite_e(i, j - 1, t + 1, Qx, a, b))


def hermite_r(t, u, v, n, p, PC):
    """Hermite Coulomb integral R_{tuv}^n (recursive)."""
    x, y, z = PC
    if t < 0 or u < 0 or v < 0:
        return 0.0
    if t == u == v == 0:
        return (-2 * p) ** n * boys(n, p * (x * x + y * y + z * z))
    if t > 0:
        return (t - 1) * hermite_r(t - 2, u, v, n + 1, p, PC) + x * hermite_r(t - 1, u, v, n + 1, p, PC)
    if u > 0:
        return (u - 1) * hermite_r(t, u - 2, v, n + 1, p, PC) + y * hermite_r(t, u - 1, v, n + 1, p, PC)
    return (v - 1) * hermite_r(t, u, v - 2, n + 1, p, PC) + z * hermite_r(t, u, v - 1, n + 1, p, PC)


class Primitive:
    def __init__(self, exp, lmn, center):
        self.exp = exp
        self.lmn = lmn
        self.center = np.asarray(center, dtype=float)
        l, m, n = lmn
        # Normalization of a cartesian Gaussian primitive.
        def df(k):  # (k)!! with df(-1)=1
            out = 1
            while k > 1:
                out *= k
                k -= 2
            return out
        self.norm = np.sqrt(
            (2 * exp / np.pi) ** 1.5
            * (4 * exp) ** (l + m + n)
            / (df(2 * l - 1) * df(2 * m - 1) * df(2 * n - 1))
        )


class Contracted:
    def __init__(self, exps, coefs, lmn, center):
        self.prims = [Primitive(e, lmn, center) for e in exps]
        self.coefs = list(coefs)
        # Normalize the contraction.
        s = 0.0
        for ca, pa in zip(self.coefs, self.prims):
            for cb, pb in zip(self.coefs, self.prims):
                s += ca * cb * overlap_prim(pa, pb) * pa.norm * pb.norm
        self.coefs = [c / np.sqrt(s) for c in self.coefs]


def overlap_prim(pa, pb):
    a, b = pa.exp, pb.exp
    p = a + b
    S = 1.0
    for d in range(3):
        S *= hermite_e(pa.lmn[d], pb.lmn[d], 0, pa.center[d] - pb.center[d], a, b)
    return S * (np.pi / p) ** 1.5


def kinetic_prim(pa, pb):
    a, b = pa.exp, pb.exp
    l2, m2, n2 = pb.lmn

    def ovl(lmn_b):
        pbb = Primitive(b, lmn_b, pb.center)
        return overlap_prim(pa, pbb)

    term = b * (2 * (l2 + m2 + n2) + 3) * ovl((l2, m2, n2))
    term += -2 * b * b * (ovl((l2 + 2, m2, n2)) + ovl((l2, m2 + 2, n2)) + ovl((l2, m2, n2 + 2)))
    t = 0.0
    if l2 >= 2:
        t += l2 * (l2 - 1) * ovl((l2 - 2, m2, n2))
    if m2 >= 2:
        t += m2 * (m2 - 1) * ovl((l2, m2 - 2, n2))
    if n2 >= 2:
        t += n2 * (n2 - 1) * ovl((l2, m2, n2 - 2))
    return term - 0.5 * t


def nuclear_prim(pa, pb, C):
    a, b = pa.exp, pb.exp
    p = a + b
    P = (a * pa.center + b * pb.center) / p
    val = 0.0
    l1, m1, n1 = pa.lmn
    l2, m2, n2 = pb.lmn
    AB = pa.center - pb.center
    for t in range(l1 + l2 + 1):
        Et = hermite_e(l1, l2, t, AB[0], a, b)
        if Et == 0.0:
            continue
        for u in range(m1 + m2 + 1):
            Eu = hermite_e(m1, m2, u, AB[1], a, b)
            if Eu == 0.0:
                continue
            for v in range(n1 + n2 + 1):
                Ev = hermite_e(n1, n2, v, AB[2], a, b)
                if Ev == 0.0:
                    continue
                val += Et * Eu * Ev * hermite_r(t, u, v, 0, p, P - C)
    return 2 * np.pi / p * val


def eri_prim(pa, pb, pc, pd):
    a, b, c, d = pa.exp, pb.exp, pc.exp, pd.exp
    p, q = a + b, c + d
    P = (a * pa.center + b * pb.center) / p
    Q = (c * pc.center + d * pd.center) / q
    alpha = p * q / (p + q)
    AB = pa.center - pb.center
    CD = pc.center - pd.center
    PQ = P - Q
    l1, m1, n1 = pa.lmn
    l2, m2, n2 = pb.lmn
    l3, m3, n3 = pc.lmn
    l4, m4, n4 = pd.lmn
    val = 0.0
    for t in range(l1 + l2 + 1):
        E1 = hermite_e(l1, l2, t, AB[0], a, b)
        if E1 == 0.0:
            continue
        for u in range(m1 + m2 + 1):
            E2 = hermite_e(m1, m2, u, AB[1], a, b)
            if E2 == 0.0:
                continue
            for v in range(n1 + n2 + 1):
                E3 = hermite_e(n1, n2, v, AB[2], a, b)
                if E3 == 0.0:
                    continue
                for tt in range(l3 + l4 + 1):
                    E4 = hermite_e(l3, l4, tt, CD[0], c, d)
                    if E4 == 0.0:
                        continue
                    for uu in range(m3 + m4 + 1):
                        E5 = hermite_e(m3, m4, uu, CD[1], c, d)
                        if E5 == 0.0:
                            continue
                        for vv in range(n3 + n4 + 1):
                            E6 = hermite_e(n3, n4, vv, CD[2], c, d)
                            if E6 == 0.0:
                                continue
                            R = hermite_r(t + tt, u + uu, v + vv, 0, alpha, PQ)
                            val += (E1 * E2 * E3 * E4 * E5 * E6
                                    * (-1) ** (tt + uu + vv) * R)
    return val * 2 * np.pi ** 2.5 / (p * q * np.sqrt(p + q))


def contracted_integral(prim_fn, *shells):
    val = 0.0
    for idx in np.ndindex(*(len(s.prims) for s in shells)):
        prims = [s.prims[i] for s, i in zip(shells, idx)]
        coef = 1.0
        for s, i, pr in zip(shells, idx, prims):
            coef *= s.coefs[i] * pr.norm
        val += coef * prim_fn(*prims)
    return val


def build_basis(atoms):
    basis = []
    for sym, center in atoms:
        for kind, exps, coefs in STO3G[sym]:
            if kind == "s":
                basis.append(Contracted(exps, coefs, (0, 0, 0), center))
            else:
                for lmn in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
                    basis.append(Contracted(exps, coefs, lmn, center))
    return basis


def ao_integrals(atoms):
    basis = build_basis(atoms)
    n = len(basis)
    S = np.zeros((n, n))
    T = np.zeros((n, n))
    V = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            S[i, j] = S[j, i] = contracted_integral(overlap_prim, basis[i], basis[j])
            T[i, j] = T[j, i] = contracted_integral(kinetic_prim, basis[i], basis[j])
            vij = 0.0
            for sym, center in atoms:
                vij -= CHARGE[sym] * contracted_integral(
                    lambda pa, pb, C=np.asarray(center, float): nuclear_prim(pa, pb, C),
                    basis[i], basis[j])
            V[i, j] = V[j, i] = vij
    eri = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(n):
                for l in range(k + 1):
                    kl = k * (k + 1) // 2 + l
                    if ij < kl:
                        continue
                    val = contracted_integral(eri_prim, basis[i], basis[j], basis[k], basis[l])
                    for a, b in ((i, j), (j, i)):
                        for c, d in ((k, l), (l, k)):
                            eri[a, b, c, d] = eri[c, d, a, b] = val
    e_nuc = 0.0
    for a, (sa, ca) in enumerate(atoms):
        for sb, cb in atoms[:a]:
            e_nuc += CHARGE[sa] * CHARGE[sb] / np.linalg.norm(np.asarray(ca) - np.asarray(cb))
    return S, T + V, eri, e_nuc


def rhf(S, hcore, eri, e_nuc, nocc, max_iter=400, conv=1e-11):
    evals, evecs = np.linalg.eigh(S)
    X = evecs @ np.diag(evals**-0.5) @ evecs.T
    F = hcore.copy()
    energy = 0.0
    diis_f, diis_e = [], []
    for it in range(max_iter):
        Fp = X.T @ F @ X
        _, Cp = np.linalg.eigh(Fp)
        C = X @ Cp
        Cocc = C[:, :nocc]
        D = 2.0 * Cocc @ Cocc.T
        J = np.einsum("pqrs,rs->pq", eri, D)
        K = np.einsum("prqs,rs->pq", eri, D)
        F = hcore + J - 0.5 * K
        new_energy = 0.5 * np.sum(D * (hcore + F)) + e_nuc
        err = F @ D @ S - S @ D @ F
        diis_f.append(F.copy())
        diis_e.append(err.copy())
        if len(diis_f) > 8:
            diis_f.pop(0)
            diis_e.pop(0)
        if len(diis_f) >= 2:
            m = len(diis_f)
            B = -np.ones((m + 1, m + 1))
            B[m, m] = 0.0
            for i in range(m):
                for j in range(m):
                    B[i, j] = np.sum(diis_e[i] * diis_e[j])
            rhs = np.zeros(m + 1)
            rhs[m] = -1.0
            try:
                w = np.linalg.solve(B, rhs)[:m]
                F = sum(wi * Fi for wi, Fi in zip(w, diis_f))
            except np.linalg.LinAlgError:
                pass
        if it > 2 and abs(new_energy - energy) < conv and np.max(np.abs(err)) < 1e-8:
            energy = new_energy
            break
        energy = new_energy
    else:
        raise RuntimeError(f"SCF not converged (last E={energy:.10f})")
    Fp = X.T @ F @ X
    _, Cp = np.linalg.eigh(Fp)
    C = X @ Cp
    return energy, C


def mo_integrals(hcore, eri, e_nuc, C, n_frozen=0):
    h_mo = C.T @ hcore @ C
    eri_mo = np.einsum("pqrs,pa,qb,rc,sd->abcd", eri, C, C, C, C, optimize=True)
    e_core = e_nuc
    if n_frozen:
        core = range(n_frozen)
        for i in core:
            e_core += 2.0 * h_mo[i, i]
            for j in core:
                e_core += 2.0 * eri_mo[i, i, j, j] - eri_mo[i, j, j, i]
        act = slice(n_frozen, None)
        h_act = h_mo[act, act].copy()
        for i in core:
            h_act += 2.0 * eri_mo[act, act, i, i] - eri_mo[act, i, i, act]
        return e_core, h_act, eri_mo[act, act, act, act]
    return e_core, h_mo, eri_mo


def to_fcidump(path, e_core, h, eri, nelec, ms2=0):
    norb = h.shape[0]
    na = (nelec + ms2) // 2
    nb = (nelec - ms2) // 2
    b = IntegralsBuilder(norb, na, nb, ms2=ms2, orbsym=(1,) * norb, isym=1)
    b.e_core = e_core
    for p in range(norb):
        for q in range(p + 1):
            if abs(h[p, q]) > 1e-14:
                b.set_h(p, q, h[p, q])
            for r in range(p + 1):
                smax = q if r == p else r
                for s in range(smax + 1):
                    if abs(eri[p, q, r, s]) > 1e-14:
                        b.set_eri(p, q, r, s, eri[p, q, r, s])
    emit_fcidump_file(b.build(), path)


def make(name, atoms, nelec, n_frozen=0, ms2=0):
    S, hcore, eri, e_nuc = ao_integrals(atoms)
    nocc = (nelec + 2 * n_frozen) // 2
    e_scf, C = rhf(S, hcore, eri, e_nuc, nocc)
    e_core, h_mo, eri_mo = mo_integrals(hcore, eri, e_nuc, C, n_frozen=n_frozen)
    out = Path(__file__).resolve().parents[1] / "src" / "detforge" / "data" / f"{name}.fcidump"
    to_fcidump(out, e_core, h_mo, eri_mo, nelec, ms2=ms2)
    dim = comb(h_mo.shape[0], (nelec + ms2) // 2) * comb(h_mo.shape[0], (nelec - ms2) // 2)
    print(f"{name}: E_RHF={e_scf:.8f}  norb={h_mo.shape[0]} nelec={nelec}  FCI dim={dim}")
    return e_scf


def main():
    r_h2 = 0.7414 * ANGSTROM
    make("h2_sto3g", [("H", (0, 0, 0)), ("H", (0, 0, r_h2))], nelec=2)

    r_h4 = 1.0 * ANGSTROM
    make("h4_sto3g", [("H", (0, 0, i * r_h4)) for i in range(4)], nelec=4)

    r_oh = 0.9584 * ANGSTROM
    ang = np.deg2rad(104.45)
    make("h2o_sto3g",
         [("O", (0.0, 0.0, 0.0)),
          ("H", (r_oh * np.sin(ang / 2), 0.0, r_oh * np.cos(ang / 2))),
          ("H", (-r_oh * np.sin(ang / 2), 0.0, r_oh * np.cos(ang / 2)))],
         nelec=10)

    for r in (1.0, 1.4, 1.8, 2.1, 2.5):
        make(f"n2_sto3g_fc_{r:.1f}",
             [("N", (0, 0, 0)), ("N", (0, 0, r * ANGSTROM))],
             nelec=10, n_frozen=2)


if __name__ == "__main__":
    main()
