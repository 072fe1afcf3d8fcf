"""Exact factor oracles and the sparsified perfect-matching decision procedure."""
from __future__ import annotations

import itertools
import math
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .hypergraph import (
    Hypergraph,
    PatternGraph,
    VertexPartition,
    edge_stream,
    index_vector,
    k_vectors,
    mask_of,
    spanning_sets,
    vertices_of,
)
from .lattice import IntegerLattice, lattice_contains

Vector = tuple[int, ...]


# -- exact cover over blocks --------------------------------------------------

class CoverSolver:
    """Exact covers of vertex masks by a fixed family of blocks.

    Branches on the uncovered vertex lying in the fewest live blocks, which
    is a function of the uncovered set alone, so counts can be memoised.
    """

    def __init__(self, blocks: Sequence[int], n: int):
        self.blocks = list(blocks)
        self.n = n
        by_vertex: list[list[int]] = [[] for _ in range(n)]
        for b in self.blocks:
            for v in vertices_of(b):
                by_vertex[v].append(b)
        self.by_vertex = by_vertex
        self._count_memo: dict[int, int] = {}
        self._dead: set[int] = set()
        self._lock = threading.Lock()

    def _branch(self, mask: int) -> tuple[int, list[int]]:
        best_v, best = -1, None
        m = mask
        while m:
            low = m & -m
            v = low.bit_length() - 1
            m ^= low
            live = [b for b in self.by_vertex[v] if b & mask == b]
            if best is None or len(live) < len(best):
                best_v, best = v, live
                if not live:
                    break
        return best_v, best or []

    def count(self, mask: int) -> int:
        if mask == 0:
            return 1
        memo = self._count_memo
        hit = memo.get(mask)
        if hit is not None:
            return hit
        _, live = self._branch(mask)
        total = sum(self.count(mask ^ b) for b in live)
        with self._lock:
            memo[mask] = total
        return total

    def exists(self, mask: int) -> bool:
        return self.find(mask) is not None

    def find(self, mask: int, rng: np.random.Generator | None = None) -> list[int] | None:
        """One exact cover of ``mask`` (random branch order when ``rng`` is given)."""
        out: list[int] = []
        if self._find(mask, out, rng):
            return out
        return None

    def _find(self, mask: int, out: list[int], rng) -> bool:
        if mask == 0:
            return True
        if mask in self._dead:
            return False
        _, live = self._branch(mask)
        if rng is not None and len(live) > 1:
            live = [live[i] for i in rng.permutation(len(live))]
        for b in live:
            out.append(b)
            if self._find(mask ^ b, out, rng):
                return True
            out.pop()
        with self._lock:
            self._dead.add(mask)
        return False

    def enumerate(self, mask: int) -> Iterator[list[int]]:
        if mask == 0:
            yield []
            return
        _, live = self._branch(mask)
        for b in live:
            for rest in self.enumerate(mask ^ b):
                yield [b] + rest


@dataclass
class PackingWitness:
    """Vertex-disjoint r-sets, each spanning a copy of the pattern."""
    copies: list[tuple[int, ...]]

    @property
    def disjoint(self) -> bool:
        seen: set[int] = set()
        for c in self.copies:
            if seen & set(c):
                return False
            seen |= set(c)
        return True

    @property
    def vertices(self) -> set[int]:
        return {v for c in self.copies for v in c}

    def as_json(self) -> dict:
        return {"copies": [list(c) for c in self.copies], "disjoint": self.disjoint}


def _as_tuple(mask: int) -> tuple[int, ...]:
    return tuple(vertices_of(mask))


def count_perfect_matchings(H: Hypergraph) -> int:
    """Exact number of perfect matchings (0 when k does not divide n)."""
    if H.n % H.k:
        return 0
    return CoverSolver(H.edge_masks, H.n).count((1 << H.n) - 1)


def find_perfect_matching(H: Hypergraph, rng: np.random.Generator | None = None) -> list[tuple[int, ...]] | None:
    if H.n % H.k:
        return None
    sol = CoverSolver(H.edge_masks, H.n).find((1 << H.n) - 1, rng)
    return None if sol is None else sorted(_as_tuple(b) for b in sol)


def is_perfect_matching(H: Hypergraph, M: Iterable[Sequence[int]]) -> bool:
    covered: list[int] = []
    for e in M:
        if not H.has_edge(e):
            return False
        covered.extend(e)
    return sorted(covered) == list(range(H.n))


class FactorOracle:
    """Memoised F-factor existence on induced vertex sets of a fixed host.

    The memo lives in the cover solver and is keyed on the vertex mask.
    Insertions take a lock; lookups are plain dict reads.
    """

    def __init__(self, H: Hypergraph, F: PatternGraph):
        self.H, self.F = H, F
        self.sets = spanning_sets(H, F)
        self.solver = CoverSolver([mask_of(s) for s in self.sets], H.n)
        self._memo: dict[int, bool] = {}
        self._lock = threading.Lock()

    def has_factor(self, vertices: Iterable[int] | int) -> bool:
        mask = vertices if isinstance(vertices, int) else mask_of(vertices)
        hit = self._memo.get(mask)
        if hit is not None:
            return hit
        if bin(mask).count("1") % self.F.r:
            res = False
        else:
            res = self.solver.exists(mask)
        with self._lock:
            self._memo[mask] = res
        return res

    def factor(self, vertices: Iterable[int] | int, rng=None) -> PackingWitness | None:
        mask = vertices if isinstance(vertices, int) else mask_of(vertices)
        if bin(mask).count("1") % self.F.r:
            return None
        sol = self.solver.find(mask, rng)
        return None if sol is None else PackingWitness(sorted(_as_tuple(b) for b in sol))


def has_f_factor(H: Hypergraph, F: PatternGraph, rng=None) -> PackingWitness | None:
    if H.n % F.r:
        return None
    return FactorOracle(H, F).factor((1 << H.n) - 1, rng)


def count_f_factors(H: Hypergraph, F: PatternGraph) -> int:
    """Number of F-factors counted as families of spanning r-sets."""
    if H.n % F.r:
        return 0
    sets = spanning_sets(H, F)
    return CoverSolver([mask_of(s) for s in sets], H.n).count((1 << H.n) - 1)


# -- searches with prescribed index vectors ---------------------------------

def edges_by_vector(H: Hypergraph, P: VertexPartition) -> dict[Vector, list[tuple[int, ...]]]:
    out: dict[Vector, list[tuple[int, ...]]] = defaultdict(list)
    for e in H.edge_list:
        out[index_vector(P, e)].append(e)
    return dict(out)


def find_matching_with_vectors(
    H: Hypergraph,
    P: VertexPartition,
    vs: Sequence[Sequence[int]],
    forbidden: Iterable[int] = (),
    *,
    present: Callable[[tuple[int, ...]], bool] | None = None,
    buckets: dict[Vector, list[tuple[int, ...]]] | None = None,
    max_vectors: int | None = None,
) -> list[tuple[int, ...]] | None:
    """A matching with one edge of each required index vector, avoiding ``forbidden``.

    ``present`` filters candidate edges (the sparsified-edge oracle); it is
    called lazily, in backtracking order, only on edges of the requested
    vectors.
    """
    want = sorted(tuple(v) for v in vs)
    if max_vectors is not None and len(want) > max_vectors:
        raise ValueError(f"{len(want)} vectors exceed the bound {max_vectors}")
    if buckets is None:
        buckets = edges_by_vector(H, P)
    blocked = mask_of(forbidden)
    known: dict[tuple[int, ...], bool] = {}

    def ok(e):
        if present is None:
            return True
        if e not in known:
            known[e] = present(e)
        return known[e]

    chosen: list[tuple[int, ...]] = []

    def rec(i: int, used: int, start: int) -> bool:
        if i == len(want):
            return True
        cand = buckets.get(want[i], [])
        # equal consecutive vectors: edges in increasing order only
        lo = start if i > 0 and want[i] == want[i - 1] else 0
        for j in range(lo, len(cand)):
            e = cand[j]
            m = mask_of(e)
            if m & used:
                continue
            if not ok(e):
                continue
            chosen.append(e)
            if rec(i + 1, used | m, j + 1):
                return True
            chosen.pop()
        return False

    if rec(0, blocked, 0):
        return list(chosen)
    return None


def find_q_solution(
    H: Hypergraph,
    F: PatternGraph,
    P: VertexPartition,
    L: IntegerLattice,
    q: int,
) -> PackingWitness | None:
    """Smallest F-packing M (|M| <= q) with i_P(V(H) - V(M)) in L, or None.

    Vector multisets are screened by lattice membership before any
    disjoint realisation is attempted.
    """
    sets = spanning_sets(H, F)
    by_vec: dict[Vector, list[tuple[int, ...]]] = defaultdict(list)
    for S in sorted(sets):
        by_vec[index_vector(P, S)].append(S)
    vecs = sorted(by_vec)
    target = index_vector(P, range(H.n))
    for size in range(q + 1):
        for combo in itertools.combinations_with_replacement(vecs, size):
            rest = [t - sum(c[i] for c in combo) for i, t in enumerate(target)]
            if not lattice_contains(L, rest):
                continue
            found = _realise(by_vec, combo)
            if found is not None:
                return PackingWitness(found)
    return None


def _realise(by_vec, combo) -> list[tuple[int, ...]] | None:
    chosen: list[tuple[int, ...]] = []

    def rec(i, used, start):
        if i == len(combo):
            return True
        cand = by_vec[combo[i]]
        lo = start if i > 0 and combo[i] == combo[i - 1] else 0
        for j in range(lo, len(cand)):
            m = mask_of(cand[j])
            if m & used:
                continue
            chosen.append(cand[j])
            if rec(i + 1, used | m, j + 1):
                return True
            chosen.pop()
        return False

    return list(chosen) if rec(0, 0, 0) else None


# -- the sparsified decision procedure --------------------------------------

class EdgeOracle:
    """Answers "is this edge of H present in H_p?" and records every query.

    Presence uses the same PCG64 stream as :func:`hypermatch.hypergraph.sparsify`,
    so ``EdgeOracle(H, p, seed)`` agrees edge-by-edge with ``sparsify(H, p, seed)``.
    """

    def __init__(self, H: Hypergraph, p: float = 1.0, seed: int = 0, *, kept: Hypergraph | None = None):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p = {p} outside [0, 1]")
        self.H = H
        if kept is not None:
            self._present = set(kept.edges)
        else:
            u = edge_stream(seed).random(H.num_edges)
            self._present = {e for e, x in zip(H.edge_list, u) if x < p}
        self.revealed: list[tuple[int, ...]] = []
        self._seen: set[tuple[int, ...]] = set()

    def __call__(self, edge: tuple[int, ...]) -> bool:
        e = tuple(sorted(edge))
        if e not in self.H.edges:
            raise KeyError(f"{e} is not an edge of the host")
        if e not in self._seen:
            self._seen.add(e)
            self.revealed.append(e)
        return e in self._present

    def reveal_all(self) -> Hypergraph:
        for e in self.H.edge_list:
            self(e)
        return Hypergraph(self.H.k, self.H.n, self._present)


@dataclass
class DecisionOutcome:
    verdict: str  # "accept" | "reject"
    witness: list[tuple[int, ...]] | None = None
    vector_set: list[Vector] | None = None
    certificate: dict | None = None
    revealed_edges: list[tuple[int, ...]] = field(default_factory=list)
    extension: list[tuple[int, ...]] | None = None
    extension_revealed: list[tuple[int, ...]] = field(default_factory=list)
    extension_complete: bool | None = None
    remainder_in_lattice: bool | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    @property
    def matching(self) -> list[tuple[int, ...]]:
        """M' followed by the greedy extension (when it ran)."""
        return list(self.witness or []) + list(self.extension or [])

    def as_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": [list(e) for e in self.witness] if self.witness is not None else None,
            "vector_set": [list(v) for v in self.vector_set] if self.vector_set is not None else None,
            "certificate": self.certificate,
            "revealed_edge_count": len(self.revealed_edges),
            "revealed_edges": [list(e) for e in self.revealed_edges],
            "extension": [list(e) for e in self.extension] if self.extension is not None else None,
            "extension_revealed_count": len(self.extension_revealed),
            "extension_complete": self.extension_complete,
            "remainder_in_lattice": self.remainder_in_lattice,
            "warnings": self.warnings,
        }


def robust_threshold(eta, n: int, r: int) -> int:
    """ceil(eta * n^r) in exact arithmetic."""
    return math.ceil(_rational(eta) * n ** r)


def _rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def procedure_perfect_matching(
    H: Hypergraph,
    P: VertexPartition,
    L: IntegerLattice,
    oracle: EdgeOracle,
    *,
    eta=Fraction(1, 5000),
    extend: bool = True,
    max_vectors: int | None = None,
    brute_force_below: int = 0,
) -> DecisionOutcome:
    """Decide whether H_p (seen only through ``oracle``) has a perfect matching.

    ``L`` is the lattice generated by the mu-robust edge vectors of ``H``.
    Vector multisets are tried smallest first, lexicographically; edges whose
    index vector is eta-robust are never queried during the search.
    """
    k, n, d = H.k, H.n, P.d
    if n % k:
        raise ValueError(f"k = {k} does not divide n = {n}")
    if n < brute_force_below:
        Hp = oracle.reveal_all()
        M = find_perfect_matching(Hp)
        return DecisionOutcome("accept" if M else "reject", witness=M,
                               certificate={"brute_force": True},
                               revealed_edges=list(oracle.revealed))
    buckets = edges_by_vector(H, P)
    eta_thr = robust_threshold(eta, n, k)
    eta_robust = {v for v, es in buckets.items() if len(es) >= eta_thr}
    bound = k - 1 if max_vectors is None else max_vectors
    kv = k_vectors(k, d)
    target = index_vector(P, range(n))
    failed: set[tuple[Vector, ...]] = set()
    checked = 0
    admissible = 0

    def present(e):
        return oracle(e)

    for size in range(bound + 1):
        for combo in itertools.combinations_with_replacement(kv, size):
            checked += 1
            rest = [t - sum(c[i] for c in combo) for i, t in enumerate(target)]
            if not lattice_contains(L, rest):
                continue
            admissible += 1
            need = tuple(v for v in combo if v not in eta_robust)
            if need in failed:
                continue
            Mp = find_matching_with_vectors(H, P, need, present=present, buckets=buckets)
            if Mp is None:
                failed.add(need)
                continue
            out = DecisionOutcome("accept", witness=Mp, vector_set=list(combo),
                                  revealed_edges=list(oracle.revealed))
            if extend:
                _extend(H, P, oracle, out, combo, eta_robust, buckets, robust_threshold(eta, n, k), L)
            return out
    return DecisionOutcome(
        "reject",
        certificate={"vector_sets_checked": checked, "lattice_admissible": admissible,
                     "unrealisable": [[list(v) for v in s] for s in sorted(failed)],
                     "eta_threshold": eta_thr},
        revealed_edges=list(oracle.revealed),
    )


def _extend(H, P, oracle: EdgeOracle, out: DecisionOutcome, combo, eta_robust, buckets, cap, L):
    before = len(oracle.revealed)
    used = mask_of(v for e in out.witness for v in e)
    ext: list[tuple[int, ...]] = []
    complete = True
    for vec in (v for v in combo if v in eta_robust):
        reveals = 0
        got = None
        for e in buckets.get(vec, []):
            if mask_of(e) & used:
                continue
            if reveals >= cap:
                break
            reveals += 1
            if oracle(e):
                got = e
                break
        if got is None:
            complete = False
            out.warnings.append(f"extension found no present edge with vector {list(vec)} "
                                f"within {cap} reveals")
            continue
        ext.append(got)
        used |= mask_of(got)
    out.extension = ext
    out.extension_complete = complete
    out.extension_revealed = oracle.revealed[before:]
    covered = [v for e in out.matching for v in e]
    rest = [t - c for t, c in zip(index_vector(P, range(H.n)), index_vector(P, covered))]
    out.remainder_in_lattice = lattice_contains(L, rest)


# -- density parameters -------------------------------------------------------

@dataclass(frozen=True)
class DensityParams:
    d1: Fraction
    m1: Fraction
    e_F: int
    strictly_1_balanced: bool
    subgraph_d1: dict
    # p >= C * n^exponent * log(n)^log_power
    threshold_exponent: Fraction
    threshold_log_power: Fraction

    def as_json(self) -> dict:
        return {
            "d1": str(self.d1),
            "m1": str(self.m1),
            "e_F": self.e_F,
            "strictly_1_balanced": self.strictly_1_balanced,
            "threshold": {"exponent": str(self.threshold_exponent),
                          "log_power": str(self.threshold_log_power)},
        }


def density_params(F: PatternGraph) -> DensityParams:
    """d_1 = e/(v-1), its maximum m_1 over subgraphs, and the matching threshold."""
    if F.r < 2:
        raise ValueError("density parameters need at least two vertices")
    if F.r > 10:
        raise ValueError("subgraph enumeration limited to r <= 10")
    d1 = Fraction(F.e_F, F.r - 1)
    per_subset = {}
    for size in range(2, F.r + 1):
        for S in itertools.combinations(range(F.r), size):
            s = set(S)
            e = sum(1 for x in F.edges if s.issuperset(x))
            per_subset[S] = Fraction(e, size - 1)
    m1 = max(per_subset.values())
    # dropping edges only lowers d_1, so induced proper vertex subsets decide strictness
    strict = all(val < d1 for S, val in per_subset.items() if len(S) < F.r)
    if m1 == 0:
        exponent = Fraction(0)
    else:
        exponent = -1 / m1
    log_power = Fraction(1, F.e_F) if strict and F.e_F else Fraction(1)
    return DensityParams(d1, m1, F.e_F, strict, per_subset, exponent, log_power)
