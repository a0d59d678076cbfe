"""FCIDUMP parsing/emission and the Integrals container.

Indices are 1-based in the text format and 0-based everywhere else.  The
two-body tensor is stored in chemists' notation (pq|rs) with 8-fold
permutational symmetry: a single canonical entry per orbit, addressed through
composite pair indices.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError


def _npair(norb: int) -> int:
    return norb * (norb + 1) // 2


def pair_index(p: int, q: int) -> int:
    """Canonical composite index of an orbital pair (order-insensitive)."""
    if p < q:
        p, q = q, p
    return p * (p + 1) // 2 + q


@dataclass(frozen=True)
class Integrals:
    """Active-space Hamiltonian: core energy, one-body matrix, two-body tensor.

    ``v_flat`` holds one canonical value per 8-fold symmetry orbit, indexed by
    the composite of the two pair indices.  All energies are in Hartree.
    """

    norb: int
    nelec_alpha: int
    nelec_beta: int
    e_core: float
    h: np.ndarray
    v_flat: np.ndarray
    ms2: int = 0
    orbsym: tuple[int, ...] = ()
    isym: int = 1

    def __post_init__(self):
        if self.norb < 1:
            raise ValueError(f"norb must be >= 1, got {self.norb}")
        for ne in (self.nelec_alpha, self.nelec_beta):
            if not 0 <= ne <= self.norb:
                raise ValueError(f"electron count {ne} outside [0, {self.norb}]")
        if self.h.shape != (self.norb, self.norb):
            raise ValueError("one-body matrix has wrong shape")
        if np.max(np.abs(self.h - self.h.T), initial=0.0) > 1e-12:
            raise ValueError("one-body matrix is not symmetric")
        if self.v_flat.shape != (_npair(_npair(self.norb)),):
            raise ValueError("two-body array has wrong length")
        self.h.setflags(write=False)
        self.v_flat.setflags(write=False)

    @property
    def nelec(self) -> int:
        return self.nelec_alpha + self.nelec_beta

    def get_eri(self, p: int, q: int, r: int, s: int) -> float:
        """(pq|rs) in chemists' notation, resolving all 8 permutations."""
        return float(self.v_flat[pair_index(pair_index(p, q), pair_index(r, s))])

    def pair_matrix(self) -> np.ndarray:
        """Dense symmetric (pq|rs) matrix over composite pair indices."""
        n = _npair(self.norb)
        m = np.zeros((n, n))
        for pq in range(n):
            for rs in range(pq + 1):
                val = self.v_flat[pair_index(pq, rs)]
                m[pq, rs] = m[rs, pq] = val
        return m

    def eri_dense(self) -> np.ndarray:
        """Full 4-index (pq|rs) tensor; convenient at desk scale."""
        n = self.norb
        v = np.zeros((n, n, n, n))
        for p in range(n):
            for q in range(p + 1):
                for r in range(n):
                    for s in range(r + 1):
                        if pair_index(p, q) < pair_index(r, s):
                            continue
                        val = self.get_eri(p, q, r, s)
                        v[p, q, r, s] = v[q, p, r, s] = v[p, q, s, r] = v[q, p, s, r] = val
                        v[r, s, p, q] = v[s, r, p, q] = v[r, s, q, p] = v[s, r, q, p] = val
        return v


class IntegralsBuilder:
    """Mutable accumulator used while parsing or constructing Integrals."""

    def __init__(self, norb: int, nelec_alpha: int, nelec_beta: int, ms2: int = 0,
                 orbsym: tuple[int, ...] = (), isym: int = 1):
        self.norb = norb
        self.nelec_alpha = nelec_alpha
        self.nelec_beta = nelec_beta
        self.ms2 = ms2
        self.orbsym = orbsym
        self.isym = isym
        self.e_core = 0.0
        self.h = np.zeros((norb, norb))
        self.v_flat = np.zeros(_npair(_npair(norb)))

    def set_h(self, p: int, q: int, value: float):
        self.h[p, q] = self.h[q, p] = value

    def set_eri(self, p: int, q: int, r: int, s: int, value: float):
        self.v_flat[pair_index(pair_index(p, q), pair_index(r, s))] = value

    def build(self) -> Integrals:
        return Integrals(
            norb=self.norb,
            nelec_alpha=self.nelec_alpha,
            nelec_beta=self.nelec_beta,
            e_core=self.e_core,
            h=self.h.copy(),
            v_flat=self.v_flat.copy(),
            ms2=self.ms2,
            orbsym=self.orbsym,
            isym=self.isym,
        )


_HEADER_FIELD = re.compile(r"([A-Za-z0-9_]+)\s*=\s*([^=]*?)(?=,?\s*[A-Za-z0-9_]+\s*=|$)")


def parse_fcidump(text) -> Integrals:
    """Parse FCIDUMP text (string or readable stream) into Integrals."""
    if hasattr(text, "read"):
        text = text.read()
    lines = text.splitlines()

    # Header: everything up to the &END / "/" terminator.
    header_parts = []
    body_start = None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if body_start is None:
            content = stripped
            if content.upper().startswith("&FCI"):
                content = content[4:]
            terminated = False
            for marker in ("&END", "$END", "/"):
                idx = content.upper().find(marker)
                if idx >= 0:
                    content = content[:idx]
                    terminated = True
                    break
            header_parts.append(content)
            if terminated:
                body_start = lineno
        else:
            break
    if body_start is None:
        raise ParseError("missing &END/&FCI header terminator", line=len(lines))

    header = " ".join(header_parts)
    fields = {}
    for m in _HEADER_FIELD.finditer(header):
        fields[m.group(1).upper()] = m.group(2).strip().rstrip(",")
    try:
        norb = int(fields["NORB"])
        nelec = int(fields["NELEC"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed header ({exc})", line=1) from exc
    ms2 = int(fields.get("MS2", "0") or "0")
    isym = int(fields.get("ISYM", "1") or "1")
    orbsym_text = fields.get("ORBSYM", "")
    orbsym = tuple(int(t) for t in orbsym_text.replace(",", " ").split() if t)
    if (nelec + ms2) % 2 != 0:
        raise ParseError(f"NELEC={nelec} and MS2={ms2} have incompatible parity", line=1)
    na = (nelec + ms2) // 2
    nb = (nelec - ms2) // 2

    builder = IntegralsBuilder(norb, na, nb, ms2=ms2, orbsym=orbsym, isym=isym)

    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise ParseError(f"expected 'value p q r s', got {len(tokens)} fields", line=lineno)
        try:
            value = float(tokens[0].replace("−", "-"))
        except ValueError:
            raise ParseError(f"non-numeric value field {tokens[0]!r}", line=lineno)
        try:
            p, q, r, s = (int(t) for t in tokens[1:])
        except ValueError:
            raise ParseError(f"non-integer index in {tokens[1:]!r}", line=lineno)
        for idx in (p, q, r, s):
            if not 0 <= idx <= norb:
                raise IndexError(f"line {lineno}: orbital index {idx} outside [0, {norb}]")
        if p and q and r and s:
            builder.set_eri(p - 1, q - 1, r - 1, s - 1, value)
        elif p and q and not r and not s:
            builder.set_h(p - 1, q - 1, value)
        elif not (p or q or r or s):
            builder.e_core = value
        else:
            raise ParseError(f"unsupported index pattern {p} {q} {r} {s}", line=lineno)
    return builder.build()


def parse_fcidump_file(path) -> Integrals:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_fcidump(fh)


def emit_fcidump(integrals: Integrals) -> str:
    """Serialize Integrals to FCIDUMP text (canonical representatives only)."""
    I = integrals
    out = io.StringIO()
    orbsym = I.orbsym if I.orbsym else (1,) * I.norb
    out.write(f"&FCI NORB={I.norb},NELEC={I.nelec},MS2={I.ms2},\n")
    out.write("  ORBSYM=" + ",".join(str(s) for s in orbsym) + ",\n")
    out.write(f"  ISYM={I.isym},\n")
    out.write("&END\n")

    def fmt(value: float) -> str:
        return f"{value: .16e}"

    for p in range(I.norb):
        for q in range(p + 1):
            pq = pair_index(p, q)
            for r in range(p + 1):
                smax = q if r == p else r
                for s in range(smax + 1):
                    val = I.v_flat[pair_index(pq, pair_index(r, s))]
                    if val != 0.0:
                        out.write(f"{fmt(val)} {p + 1} {q + 1} {r + 1} {s + 1}\n")
    for p in range(I.norb):
        for q in range(p + 1):
            if I.h[p, q] != 0.0:
                out.write(f"{fmt(I.h[p, q])} {p + 1} {q + 1} 0 0\n")
    out.write(f"{fmt(I.e_core)} 0 0 0 0\n")
    return out.getvalue()


def emit_fcidump_file(integrals: Integrals, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_fcidump(integrals))
