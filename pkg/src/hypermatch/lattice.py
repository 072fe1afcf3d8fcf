"""Integer lattices in Z^d: Hermite normal form, membership, coset groups.

All arithmetic is on Python ints, so nothing overflows. Lattices here are
tiny (d <= 6, entries of a few digits); the algorithms favour clarity.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .hypergraph import k_vectors

Vector = tuple[int, ...]


def _hnf_rows(rows: list[list[int]], d: int) -> list[list[int]]:
    """Row-style HNF: echelon form, positive pivots, entries above pivots in [0, pivot)."""
    rows = [list(r) for r in rows if any(r)]
    basis: list[list[int]] = []
    pivots: list[int] = []
    col = 0
    while rows and col < d:
        live = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        if not live:
            col += 1
            continue
        # Euclid on the column: keep reducing by the row of smallest |entry|
        while len(live) > 1:
            live.sort(key=lambda r: abs(r[col]))
            piv = live[0]
            nxt = [piv]
            for r in live[1:]:
                q = r[col] // piv[col]
                r = [a - q * b for a, b in zip(r, piv)]
                if r[col] != 0:
                    nxt.append(r)
                elif any(r):
                    rest.append(r)
            live = nxt
        piv = live[0]
        if piv[col] < 0:
            piv = [-a for a in piv]
        basis.append(piv)
        pivots.append(col)
        rows = rest
        col += 1
    # reduce entries above each pivot
    for i, (row, c) in enumerate(zip(basis, pivots)):
        p = row[c]
        for j in range(i):
            q = basis[j][c] // p
            if q:
                basis[j] = [a - q * b for a, b in zip(basis[j], row)]
    return basis


@dataclass(frozen=True)
class IntegerLattice:
    """A sublattice of Z^d stored by the rows of its Hermite normal form."""
    d: int
    basis: tuple[Vector, ...]
    pivots: tuple[int, ...] = field(repr=False)

    @property
    def rank(self) -> int:
        return len(self.basis)

    def __contains__(self, v: Sequence[int]) -> bool:
        return lattice_contains(self, v)

    def reduce(self, v: Sequence[int]) -> Vector:
        """Canonical representative of ``v + L``: pivot coordinates land in [0, pivot)."""
        if len(v) != self.d:
            raise ValueError(f"vector of length {len(v)} in dimension {self.d}")
        w = list(v)
        for row, c in zip(self.basis, self.pivots):
            q = w[c] // row[c]
            if q:
                w = [a - q * b for a, b in zip(w, row)]
        return tuple(w)

    def as_json(self) -> dict:
        return {"d": self.d, "rank": self.rank, "basis": [list(r) for r in self.basis]}


def lattice_from_generators(vectors: Iterable[Sequence[int]], d: int | None = None) -> IntegerLattice:
    vecs = [tuple(int(x) for x in v) for v in vectors]
    if d is None:
        if not vecs:
            raise ValueError("dimension needed for an empty generator set")
        d = len(vecs[0])
    if any(len(v) != d for v in vecs):
        raise ValueError("generators of mixed dimension")
    rows = _hnf_rows([list(v) for v in vecs], d)
    pivots = tuple(next(i for i, a in enumerate(r) if a) for r in rows)
    return IntegerLattice(d, tuple(tuple(r) for r in rows), pivots)


def zero_lattice(d: int) -> IntegerLattice:
    return IntegerLattice(d, (), ())


def lattice_max(d: int, r: int) -> IntegerLattice:
    """All v in Z^d with r dividing the coordinate sum (spanned by the r-vectors)."""
    return lattice_from_generators(k_vectors(r, d), d)


def lattice_contains(L: IntegerLattice, v: Sequence[int]) -> bool:
    """Exact membership by forward substitution along the HNF pivots."""
    if len(v) != L.d:
        raise ValueError(f"vector of length {len(v)} in dimension {L.d}")
    w = list(v)
    start = 0
    for row, c in zip(L.basis, L.pivots):
        if any(w[start:c]):
            return False
        if w[c] % row[c]:
            return False
        q = w[c] // row[c]
        if q:
            w = [a - q * b for a, b in zip(w, row)]
        start = c + 1
    return not any(w[start:])


# -- Smith normal form ------------------------------------------------------

def smith_diagonal(matrix: Sequence[Sequence[int]]) -> list[int]:
    """Nonzero invariant factors of an integer matrix, each dividing the next."""
    A = [list(r) for r in matrix]
    if not A or not A[0]:
        return []
    m, n = len(A), len(A[0])
    diag = []
    t = 0
    while t < min(m, n):
        nz = [(abs(A[i][j]), i, j) for i in range(t, m) for j in range(t, n) if A[i][j]]
        if not nz:
            break
        _, i0, j0 = min(nz)
        A[t], A[i0] = A[i0], A[t]
        for row in A:
            row[t], row[j0] = row[j0], row[t]
        while True:
            p = A[t][t]
            dirty = False
            for i in range(t + 1, m):
                if A[i][t]:
                    q = A[i][t] // p
                    A[i] = [a - q * b for a, b in zip(A[i], A[t])]
                    if A[i][t]:
                        dirty = True
            for j in range(t + 1, n):
                if A[t][j]:
                    q = A[t][j] // p
                    for row in A:
                        row[j] -= q * row[t]
                    if A[t][j]:
                        dirty = True
            if not dirty:
                # pivot must also divide the whole remaining block
                bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n)
                            if A[i][j] % p), None)
                if bad is None:
                    break
                A[t] = [a + b for a, b in zip(A[t], A[bad[0]])]
                continue
            # move the smallest remaining entry of row/column t to the pivot
            cand = [(abs(A[i][t]), i, t) for i in range(t, m) if A[i][t]]
            cand += [(abs(A[t][j]), t, j) for j in range(t, n) if A[t][j]]
            _, i0, j0 = min(cand)
            A[t], A[i0] = A[i0], A[t]
            for row in A:
                row[t], row[j0] = row[j0], row[t]
        diag.append(abs(A[t][t]))
        t += 1
    return diag


@dataclass(frozen=True)
class CosetGroup:
    """The quotient L_max / L for L inside L_max = {v : r | |v|}."""
    d: int
    r: int
    invariant_factors: tuple[int, ...]
    free_rank: int
    lattice: IntegerLattice = field(repr=False)

    @property
    def finite(self) -> bool:
        return self.free_rank == 0

    @property
    def size(self) -> float | int:
        if not self.finite:
            return math.inf
        return math.prod(self.invariant_factors)

    def residue(self, v: Sequence[int]) -> Vector:
        return residue(self, v)

    def as_json(self) -> dict:
        return {
            "d": self.d,
            "r": self.r,
            "invariant_factors": list(self.invariant_factors),
            "free_rank": self.free_rank,
            "size": self.size if self.finite else "infinite",
        }


def lmax_coordinates(v: Sequence[int], r: int) -> Vector:
    """Coordinates of v in the basis {r*u_1, u_2 - u_1, ..., u_d - u_1}."""
    total = sum(v)
    if total % r:
        raise ValueError(f"{tuple(v)} is not in L_max (r={r})")
    return (total // r,) + tuple(v[1:])


def coset_group(L: IntegerLattice, r: int) -> CosetGroup:
    if L.d < 1:
        raise ValueError("dimension must be at least 1")
    for row in L.basis:
        if sum(row) % r:
            raise ValueError(f"generator {row} is not in L_max (r={r})")
    coords = [lmax_coordinates(row, r) for row in L.basis]
    factors = [f for f in smith_diagonal(coords) if f != 1]
    rank = len(smith_diagonal(coords)) if coords else 0
    return CosetGroup(L.d, r, tuple(factors), L.d - rank, L)


def residue(Q: CosetGroup, v: Sequence[int]) -> Vector:
    """Canonical representative of v + L; equal outputs iff equal residues."""
    if len(v) != Q.d:
        raise ValueError("dimension mismatch")
    if sum(v) % Q.r:
        raise ValueError(f"r = {Q.r} does not divide |{tuple(v)}|")
    return Q.lattice.reduce(v)


def trivial_coset_bound(d: int, r: int) -> int:
    """|{r-vectors in dimension d}| = C(d + r - 1, r)."""
    return math.comb(d + r - 1, r)


# -- full sets and transfers ------------------------------------------------

def unit(d: int, i: int) -> Vector:
    return tuple(1 if j == i else 0 for j in range(d))


def is_full(I: Iterable[Sequence[int]], k: int, d: int) -> bool:
    """Every (k-1)-vector extends into I by adding one unit vector."""
    vs = {tuple(v) for v in I}
    for v in vs:
        if len(v) != d or sum(v) != k or min(v) < 0:
            raise ValueError(f"{v} is not a {k}-vector in dimension {d}")
    for w in k_vectors(k - 1, d):
        if not any(tuple(x + (j == i) for j, x in enumerate(w)) in vs for i in range(d)):
            return False
    return True


def transfer_index(L: IntegerLattice, v: Sequence[int], i: int) -> int | None:
    """Smallest j with v - u_i + u_j in L, or None."""
    if len(v) != L.d:
        raise ValueError("dimension mismatch")
    base = list(v)
    base[i] -= 1
    for j in range(L.d):
        w = list(base)
        w[j] += 1
        if lattice_contains(L, w):
            return j
    return None


def swap_partner(L: IntegerLattice, i1: int, i2: int, i3: int) -> int | None:
    """Smallest i4 with u_i1 + u_i2 - u_i3 - u_i4 in L, or None."""
    d = L.d
    for i4 in range(d):
        w = [0] * d
        w[i1] += 1
        w[i2] += 1
        w[i3] -= 1
        w[i4] -= 1
        if lattice_contains(L, w):
            return i4
    return None


def full_sets(k: int, d: int) -> Iterable[frozenset[Vector]]:
    """All full sets of k-vectors in dimension d (exhaustive; tiny d only)."""
    kv = k_vectors(k, d)
    for size in range(1, len(kv) + 1):
        for combo in itertools.combinations(kv, size):
            if is_full(combo, k, d):
                yield frozenset(combo)
