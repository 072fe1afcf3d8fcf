"""Slow, obviously-correct reference implementations used by the tests.

Nothing here calls into the package's solvers.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def pm_count_formula(n: int, k: int) -> int:
    if n % k:
        return 0
    return math.factorial(n) // (math.factorial(k) ** (n // k) * math.factorial(n // k))


def naive_pm_count(n: int, edges) -> int:
    """Perfect matchings counted by always covering the smallest uncovered vertex."""
    edges = [frozenset(e) for e in edges]

    def rec(left: frozenset) -> int:
        if not left:
            return 1
        v = min(left)
        return sum(rec(left - e) for e in edges if v in e and e <= left)

    return rec(frozenset(range(n)))


def naive_cover_exists(vertices, blocks) -> bool:
    blocks = [frozenset(b) for b in blocks]

    def rec(left):
        if not left:
            return True
        v = min(left)
        return any(rec(left - b) for b in blocks if v in b and b <= left)

    return rec(frozenset(vertices))


def naive_spans(edges, pattern_edges, r, S) -> bool:
    es = {tuple(sorted(e)) for e in edges}
    for p in itertools.permutations(S):
        if all(tuple(sorted(p[v] for v in e)) in es for e in pattern_edges):
            return True
    return False


def naive_reachable(n, edges, pattern_edges, r, u, v, i) -> int:
    """Count (ir-1)-sets S with both S+u and S+v F-factorable, from scratch."""
    blocks = [S for S in itertools.combinations(range(n), r) if naive_spans(edges, pattern_edges, r, S)]
    rest = [w for w in range(n) if w not in (u, v)]
    count = 0
    for S in itertools.combinations(rest, i * r - 1):
        if naive_cover_exists(set(S) | {u}, [b for b in blocks if set(b) <= set(S) | {u}]) and \
                naive_cover_exists(set(S) | {v}, [b for b in blocks if set(b) <= set(S) | {v}]):
            count += 1
    return count


class BoundedSpan:
    """All integer combinations of generators with coefficients in [-bound, bound]."""

    def __init__(self, gens, d: int, bound: int = 10):
        self.d = d
        gens = np.array(gens, dtype=np.int64).reshape(-1, d)
        g = gens.shape[0]
        if g == 0:
            pts = np.zeros((1, d), dtype=np.int64)
        else:
            coeff = np.array(list(itertools.product(range(-bound, bound + 1), repeat=g)), dtype=np.int64)
            pts = coeff @ gens
        self.offset = int(np.abs(pts).max()) + 64
        self.base = 2 * self.offset + 1
        self.keys = np.unique(self._encode(pts))

    def _encode(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, self.d) + self.offset
        key = np.zeros(pts.shape[0], dtype=np.int64)
        for j in range(self.d):
            key = key * self.base + pts[:, j]
        return key

    def contains_many(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, self.d)
        inside = (np.abs(pts) < self.offset).all(axis=1)
        hit = np.isin(self._encode(np.where(inside[:, None], pts, 0)), self.keys)
        return hit & inside

    def __contains__(self, v) -> bool:
        return bool(self.contains_many([v])[0])


def brute_coset_count(span: BoundedSpan, d: int, r: int, box: int) -> int:
    """Classes of {v in [0, box)^d : r | |v|} under difference-in-span."""
    pts = [v for v in itertools.product(range(box), repeat=d) if sum(v) % r == 0]
    reps: list[tuple] = []
    for v in pts:
        if reps:
            diffs = np.array(reps) - np.array(v)
            if span.contains_many(diffs).any():
                continue
        reps.append(v)
    return len(reps)


def naive_hamilton(adj) -> bool:
    m = len(adj)
    if m == 1:
        return True
    for perm in itertools.permutations(range(1, m)):
        cyc = (0,) + perm
        if all(adj[cyc[i]][cyc[(i + 1) % m]] for i in range(m)):
            return True
    return False


def naive_lo_markstrom(n, k, edges, u, v, alpha) -> bool:
    es = {tuple(sorted(e)) for e in edges}
    alpha = Fraction(alpha)

    def in_edge(S, w):
        return tuple(sorted(S + (w,))) in es

    good = 0
    for S in itertools.combinations(range(n), k - 1):
        if u in S or v in S:
            continue
        if in_edge(S, u) and in_edge(S, v):
            deg = sum(1 for w in range(n) if w not in S and in_edge(S, w))
            if deg >= alpha * n:
                good += 1
    return good >= alpha * math.comb(n, k - 1)


def _det(rows) -> int:
    """Bareiss fraction-free determinant of a square integer matrix."""
    a = [list(r) for r in rows]
    n = len(a)
    sign, prev = 1, 1
    for i in range(n):
        if a[i][i] == 0:
            swap = next((j for j in range(i + 1, n) if a[j][i] != 0), None)
            if swap is None:
                return 0
            a[i], a[swap] = a[swap], a[i]
            sign = -sign
        for j in range(i + 1, n):
            for c in range(i + 1, n):
                a[j][c] = (a[j][c] * a[i][i] - a[j][i] * a[i][c]) // prev
        prev = a[i][i]
    return sign * a[n - 1][n - 1]


def determinantal_divisor(rows, rho: int) -> int:
    """gcd of all rho x rho minors (0 when the rank is below rho)."""
    rows = [list(r) for r in rows]
    d = len(rows[0]) if rows else 0
    g = 0
    for R in itertools.combinations(range(len(rows)), rho):
        for C in itertools.combinations(range(d), rho):
            g = math.gcd(g, _det([[rows[i][j] for j in C] for i in R]))
            if g == 1:
                return 1
    return g


def integer_rank(rows) -> int:
    rows = [[Fraction(x) for x in r] for r in rows]
    rank, d = 0, len(rows[0]) if rows else 0
    for c in range(d):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][c] != 0:
                f = rows[i][c] / rows[rank][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


class ExactSpan:
    """Membership in the integer span of generators via determinantal divisors.

    Adding v to the generators keeps the lattice iff the rank is unchanged and
    the gcd of maximal minors is unchanged (the index of the smaller lattice in
    the larger one is their ratio).
    """

    def __init__(self, gens, d: int):
        self.gens = [list(map(int, g)) for g in gens]
        self.d = d
        self.rank = integer_rank(self.gens) if self.gens else 0
        self.divisor = determinantal_divisor(self.gens, self.rank) if self.rank else 1

    def __contains__(self, v) -> bool:
        v = [int(x) for x in v]
        if self.rank == 0:
            return not any(v)
        rows = self.gens + [v]
        if integer_rank(rows) != self.rank:
            return False
        return determinantal_divisor(rows, self.rank) == self.divisor


def exact_coset_count(span: ExactSpan, d: int, r: int, box: int) -> int:
    pts = [v for v in itertools.product(range(box), repeat=d) if sum(v) % r == 0]
    reps: list[tuple] = []
    for v in pts:
        if not any([a - b for a, b in zip(rep, v)] in span for rep in reps):
            reps.append(v)
    return len(reps)
