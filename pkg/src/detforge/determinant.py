"""Bit-level Slater determinants, excitation analysis, and space enumeration.

A determinant is a pair of orbital-occupation bitmasks (alpha, beta), with
orbital 0 at the least-significant bit.  The canonical fermionic ordering is
ascending orbital index, with the full alpha string preceding the full beta
string; all signs produced here follow that convention.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import NamedTuple

from .errors import CapacityError, SymmetryError

#: Widest supported orbital count per spin (single-word bit operations).
MAX_ORBITALS = 64

#: Default cap on enumerated space dimensions.
DEFAULT_SPACE_CAP = 5_000_000


class Determinant(NamedTuple):
    """One Slater configuration: occupation bitmasks per spin."""

    alpha: int
    beta: int


def occupied_orbitals(mask: int) -> list[int]:
    """Ascending list of set bit positions."""
    orbs = []
    while mask:
        low = mask & -mask
        orbs.append(low.bit_length() - 1)
        mask ^= low
    return orbs


def to_bitstring(det: Determinant, norb: int) -> str:
    """Serialize as "beta|alpha" with orbital 0 rightmost in each block."""
    a = format(det.alpha, f"0{norb}b")
    b = format(det.beta, f"0{norb}b")
    return f"{b}|{a}"


def from_bitstring(s: str) -> Determinant:
    """Inverse of :func:`to_bitstring`."""
    b, a = s.split("|")
    return Determinant(alpha=int(a, 2), beta=int(b, 2))


@dataclass(frozen=True)
class ExcitationInfo:
    """Hole/particle decomposition of a determinant pair, with fermionic sign."""

    holes_alpha: tuple[int, ...]
    particles_alpha: tuple[int, ...]
    holes_beta: tuple[int, ...]
    particles_beta: tuple[int, ...]
    sign: int = 1

    @property
    def degree_alpha(self) -> int:
        return len(self.holes_alpha)

    @property
    def degree_beta(self) -> int:
        return len(self.holes_beta)

    @property
    def degree(self) -> int:
        return self.degree_alpha + self.degree_beta


def _spin_excitation(m1: int, m2: int) -> tuple[tuple[int, ...], tuple[int, ...], int]:
    """Holes, particles, and permutation sign for one spin sector.

    Holes (occupied in m1 only) are paired with particles (occupied in m2
    only) in ascending order; the sign is the parity of the permutation
    aligning the two ascending occupation lists under that pairing.
    """
    holes = occupied_orbitals(m1 & ~m2)
    parts = occupied_orbitals(m2 & ~m1)
    sign = 1
    cur = m1
    for h, p in zip(holes, parts):
        lo, hi = (h, p) if h < p else (p, h)
        between = cur & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
        sign *= -1 if between.bit_count() % 2 else 1
        cur ^= (1 << h) | (1 << p)
    return tuple(holes), tuple(parts), sign


def excitation_info(d1: Determinant, d2: Determinant) -> ExcitationInfo:
    """Hole/particle analysis of the excitation taking d1 to d2."""
    if d1.alpha.bit_count() != d2.alpha.bit_count() or d1.beta.bit_count() != d2.beta.bit_count():
        raise SymmetryError(
            "determinants have different per-spin electron counts: "
            f"({d1.alpha.bit_count()},{d1.beta.bit_count()}) vs "
            f"({d2.alpha.bit_count()},{d2.beta.bit_count()})"
        )
    ha, pa, sa = _spin_excitation(d1.alpha, d2.alpha)
    hb, pb, sb = _spin_excitation(d1.beta, d2.beta)
    return ExcitationInfo(ha, pa, hb, pb, sa * sb)


def enumerate_strings(norb: int, ne: int) -> list[int]:
    """All occupation bitmasks of ne electrons in norb orbitals, ascending."""
    if ne < 0 or ne > norb:
        raise SymmetryError(f"cannot place {ne} electrons in {norb} orbitals")
    masks = [
        sum(1 << o for o in occ) for occ in itertools.combinations(range(norb), ne)
    ]
    masks.sort()
    return masks


def enumerate_space(
    norb: int, na: int, nb: int, cap: int = DEFAULT_SPACE_CAP
) -> list[Determinant]:
    """Full determinant space at fixed (na, nb), sorted lexicographically.

    Raises CapacityError when C(norb,na)*C(norb,nb) exceeds ``cap``.
    """
    if norb < 1 or norb > MAX_ORBITALS:
        raise CapacityError(f"norb={norb} outside supported range [1,{MAX_ORBITALS}]")
    dim = comb(norb, na) * comb(norb, nb)
    if dim > cap:
        raise CapacityError(f"space dimension {dim} exceeds cap {cap}")
    alphas = enumerate_strings(norb, na)
    betas = enumerate_strings(norb, nb)
    return [Determinant(a, b) for a in alphas for b in betas]


def hartree_fock_determinant(na: int, nb: int) -> Determinant:
    """Lowest na/nb orbitals occupied (the RHF reference ordering)."""
    return Determinant((1 << na) - 1, (1 << nb) - 1)
