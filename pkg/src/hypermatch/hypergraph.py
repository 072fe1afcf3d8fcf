"""k-uniform hypergraphs, vertex partitions, index vectors and generators.

Edges are stored as sorted tuples. Every hypergraph also keeps the bitmask of
each edge, since the exact solvers in :mod:`hypermatch.decision` work on
bitmasks of uncovered vertices.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

# eager codegree index only when n * C(n, k-1) stays below this many entries
CODEGREE_BUDGET = 2_000_000


class HypergraphFormatError(ValueError):
    pass


class DuplicateEdgeWarning(UserWarning):
    pass


def _canonical(edge: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(edge))


def mask_of(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


def vertices_of(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


class Hypergraph:
    """An immutable k-uniform hypergraph on vertices ``0..n-1``."""

    __slots__ = ("k", "n", "_edges", "_edge_list", "_masks", "_index", "_incident")

    def __init__(self, k: int, n: int, edges: Iterable[Iterable[int]] = (),
                 *, eager_index: bool | None = None):
        if k < 1 or n < 0:
            raise ValueError(f"invalid sizes k={k}, n={n}")
        self.k = int(k)
        self.n = int(n)
        canon: set[tuple[int, ...]] = set()
        for e in edges:
            t = _canonical(e)
            if len(t) != k or len(set(t)) != k:
                raise ValueError(f"edge {tuple(e)} is not a set of {k} distinct vertices")
            if t[0] < 0 or t[-1] >= n:
                raise ValueError(f"edge {t} has a vertex outside [0, {n})")
            canon.add(t)
        self._edges = frozenset(canon)
        self._edge_list = tuple(sorted(canon))
        self._masks = tuple(mask_of(e) for e in self._edge_list)
        self._index: dict[tuple[int, ...], frozenset[int]] | None = None
        self._incident: tuple[tuple[int, ...], ...] | None = None
        if eager_index is None:
            eager_index = n * math.comb(n, max(k - 1, 0)) <= CODEGREE_BUDGET
        if eager_index:
            self._build_index()

    # -- basic accessors -------------------------------------------------

    @property
    def edges(self) -> frozenset[tuple[int, ...]]:
        return self._edges

    @property
    def edge_list(self) -> tuple[tuple[int, ...], ...]:
        """Edges in canonical (lexicographic) order."""
        return self._edge_list

    @property
    def edge_masks(self) -> tuple[int, ...]:
        return self._masks

    @property
    def num_edges(self) -> int:
        return len(self._edge_list)

    def __len__(self) -> int:
        return len(self._edge_list)

    def __contains__(self, edge) -> bool:
        return _canonical(edge) in self._edges

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypergraph):
            return NotImplemented
        return self.k == other.k and self.n == other.n and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self.k, self.n, self._edges))

    def __repr__(self) -> str:
        return f"Hypergraph(k={self.k}, n={self.n}, edges={len(self._edge_list)})"

    def has_edge(self, edge: Iterable[int]) -> bool:
        return _canonical(edge) in self._edges

    # -- codegree index ----------------------------------------------------

    def _build_index(self) -> None:
        index: dict[tuple[int, ...], set[int]] = defaultdict(set)
        k = self.k
        for e in self._edge_list:
            for i in range(k):
                index[e[:i] + e[i + 1:]].add(e[i])
        self._index = {s: frozenset(vs) for s, vs in index.items()}

    @property
    def codegree_index(self) -> Mapping[tuple[int, ...], frozenset[int]]:
        if self._index is None:
            self._build_index()
        return self._index

    def link(self, S: Iterable[int]) -> frozenset[int]:
        """Vertices v with S + {v} an edge, for a (k-1)-set S."""
        s = _canonical(S)
        if len(s) != self.k - 1:
            raise ValueError("link needs a (k-1)-set")
        return self.codegree_index.get(s, frozenset())

    @property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        """For each vertex, the indices (into ``edge_list``) of edges containing it."""
        if self._incident is None:
            inc: list[list[int]] = [[] for _ in range(self.n)]
            for idx, e in enumerate(self._edge_list):
                for v in e:
                    inc[v].append(idx)
            self._incident = tuple(tuple(x) for x in inc)
        return self._incident

    # -- derived graphs ----------------------------------------------------

    def induced(self, vertices: Iterable[int]) -> tuple["Hypergraph", list[int]]:
        """Induced subhypergraph relabelled to ``0..len-1``; also returns the label map."""
        vs = sorted(set(vertices))
        pos = {v: i for i, v in enumerate(vs)}
        keep = mask_of(vs)
        edges = [tuple(pos[v] for v in e) for e, m in zip(self._edge_list, self._masks)
                 if m & keep == m]
        return Hypergraph(self.k, len(vs), edges), vs

    def without_edges(self, removed: Iterable[Iterable[int]]) -> "Hypergraph":
        gone = {_canonical(e) for e in removed}
        return Hypergraph(self.k, self.n, (e for e in self._edge_list if e not in gone))

    def relabel(self, perm: Sequence[int]) -> "Hypergraph":
        return Hypergraph(self.k, self.n, (tuple(perm[v] for v in e) for e in self._edge_list))


@dataclass(frozen=True)
class PatternGraph:
    """A small k-graph F on vertices ``0..r-1`` (the pattern of a factor)."""
    r: int
    k: int
    edges: frozenset

    def __init__(self, r: int, k: int, edges: Iterable[Iterable[int]]):
        canon = frozenset(_canonical(e) for e in edges)
        for e in canon:
            if len(e) != k or len(set(e)) != k or e[0] < 0 or e[-1] >= r:
                raise ValueError(f"bad pattern edge {e}")
        object.__setattr__(self, "r", int(r))
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "edges", canon)

    @property
    def e_F(self) -> int:
        return len(self.edges)

    @classmethod
    def single_edge(cls, k: int) -> "PatternGraph":
        return cls(k, k, [tuple(range(k))])

    @classmethod
    def clique(cls, r: int, k: int = 2) -> "PatternGraph":
        return cls(r, k, itertools.combinations(range(r), k))

    @classmethod
    def path(cls, r: int) -> "PatternGraph":
        return cls(r, 2, [(i, i + 1) for i in range(r - 1)])

    @property
    def is_single_edge(self) -> bool:
        return self.r == self.k and self.e_F == 1

    def automorphism_count(self) -> int:
        edges = self.edges
        return sum(1 for p in itertools.permutations(range(self.r))
                   if all(_canonical(p[v] for v in e) in edges for e in edges))

    def embeddings_into(self, H: Hypergraph, S: Sequence[int]) -> int:
        """Number of bijections V(F) -> S mapping every edge of F onto an edge of H."""
        edges = list(self.edges)
        return sum(1 for p in itertools.permutations(S)
                   if all(H.has_edge(p[v] for v in e) for e in edges))


@dataclass(frozen=True)
class VertexPartition:
    """Ordered partition of ``0..n-1`` into ``d`` nonempty parts."""
    assignment: tuple[int, ...]
    d: int

    def __init__(self, assignment: Sequence[int], d: int | None = None, *, allow_empty: bool = False):
        a = tuple(int(x) for x in assignment)
        if d is None:
            d = max(a) + 1 if a else 0
        if any(x < 0 or x >= d for x in a):
            raise ValueError("part index out of range")
        if d and not allow_empty and len(set(a)) != d:
            raise ValueError("every part of a partition must be nonempty")
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "d", int(d))

    @classmethod
    def from_parts(cls, parts: Sequence[Iterable[int]], n: int | None = None) -> "VertexPartition":
        parts = [sorted(p) for p in parts]
        if n is None:
            n = sum(len(p) for p in parts)
        a = [-1] * n
        for i, p in enumerate(parts):
            for v in p:
                if a[v] != -1:
                    raise ValueError(f"vertex {v} appears in two parts")
                a[v] = i
        if -1 in a:
            raise ValueError(f"vertex {a.index(-1)} is in no part")
        return cls(a, len(parts))

    @classmethod
    def trivial(cls, n: int) -> "VertexPartition":
        return cls([0] * n, 1)

    def project(self, vertices: Sequence[int]) -> "VertexPartition":
        """The partition restricted to ``vertices`` (relabelled in the given order); parts may be empty."""
        return VertexPartition([self.assignment[v] for v in vertices], self.d, allow_empty=True)

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def parts(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.d)]
        for v, i in enumerate(self.assignment):
            out[i].append(v)
        return out

    @property
    def sizes(self) -> list[int]:
        s = [0] * self.d
        for i in self.assignment:
            s[i] += 1
        return s

    def part_of(self, v: int) -> int:
        return self.assignment[v]

    def index_vector(self, S: Iterable[int]) -> tuple[int, ...]:
        return index_vector(self, S)


def index_vector(P: VertexPartition, S: Iterable[int]) -> tuple[int, ...]:
    """Per-part intersection sizes of ``S`` with the parts of ``P``."""
    coords = [0] * P.d
    a = P.assignment
    for v in S:
        if v < 0 or v >= len(a):
            raise ValueError(f"vertex {v} outside the partition host")
        coords[a[v]] += 1
    return tuple(coords)


def k_vectors(k: int, d: int) -> list[tuple[int, ...]]:
    """All nonnegative integer vectors of length d summing to k, lexicographic."""
    out = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(prefix + (left,))
            return
        for x in range(left, -1, -1):
            rec(prefix + (x,), left - x, slots - 1)

    if d == 0:
        return [()] if k == 0 else []
    rec((), k, d)
    return sorted(out)


# -- text formats -----------------------------------------------------------

def _lines(text: str | bytes) -> Iterator[tuple[int, str]]:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    for no, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield no, line


def parse_hypergraph(text: str | bytes, *, duplicates: str = "warn") -> Hypergraph:
    """Parse the ``k n`` header + one-edge-per-line format.

    ``duplicates`` is ``"warn"`` (dedupe with a warning), ``"ignore"`` or
    ``"error"``.
    """
    it = _lines(text)
    try:
        no, header = next(it)
    except StopIteration:
        raise HypergraphFormatError("missing header line 'k n'") from None
    parts = header.split()
    if len(parts) != 2 or not all(p.lstrip("-").isdigit() for p in parts):
        raise HypergraphFormatError(f"line {no}: malformed header {header!r}")
    k, n = int(parts[0]), int(parts[1])
    if k < 1 or n < 0:
        raise HypergraphFormatError(f"line {no}: invalid sizes k={k} n={n}")
    seen: set[tuple[int, ...]] = set()
    for no, line in it:
        toks = line.split()
        try:
            e = [int(t) for t in toks]
        except ValueError:
            raise HypergraphFormatError(f"line {no}: non-integer vertex in {line!r}") from None
        if len(e) != k or len(set(e)) != k:
            raise HypergraphFormatError(f"line {no}: edge {line!r} does not have {k} distinct vertices")
        if min(e) < 0 or max(e) >= n:
            raise HypergraphFormatError(f"line {no}: vertex out of range [0, {n})")
        t = _canonical(e)
        if t in seen:
            if duplicates == "error":
                raise HypergraphFormatError(f"line {no}: duplicate edge {t}")
            if duplicates == "warn":
                warnings.warn(f"line {no}: duplicate edge {t} dropped", DuplicateEdgeWarning, stacklevel=2)
            continue
        seen.add(t)
    return Hypergraph(k, n, seen)


def serialize_hypergraph(H: Hypergraph) -> str:
    lines = [f"{H.k} {H.n}"]
    lines.extend(" ".join(map(str, e)) for e in H.edge_list)
    return "\n".join(lines) + "\n"


def parse_partition(text: str | bytes, n: int | None = None) -> VertexPartition:
    it = _lines(text)
    try:
        no, header = next(it)
        d = int(header)
    except (StopIteration, ValueError):
        raise HypergraphFormatError("missing or malformed partition header 'd'") from None
    assign: dict[int, int] = {}
    for no, line in it:
        toks = line.split()
        if len(toks) != 2:
            raise HypergraphFormatError(f"line {no}: expected 'vertex part'")
        v, p = int(toks[0]), int(toks[1])
        if v in assign:
            raise HypergraphFormatError(f"line {no}: vertex {v} assigned twice")
        assign[v] = p
    size = n if n is not None else len(assign)
    if sorted(assign) != list(range(size)):
        raise HypergraphFormatError("partition must assign every vertex 0..n-1 exactly once")
    return VertexPartition([assign[v] for v in range(size)], d)


def serialize_partition(P: VertexPartition) -> str:
    lines = [str(P.d)]
    lines.extend(f"{v} {p}" for v, p in enumerate(P.assignment))
    return "\n".join(lines) + "\n"


# -- queries ----------------------------------------------------------------

def codegree(H: Hypergraph, S: Iterable[int]) -> int:
    """Number of edges of ``H`` containing ``S``."""
    s = _canonical(set(S))
    if len(s) > H.k:
        raise ValueError(f"|S| = {len(s)} exceeds k = {H.k}")
    if s and (s[0] < 0 or s[-1] >= H.n):
        raise ValueError("vertex out of range")
    if len(s) == H.k:
        return int(s in H.edges)
    if len(s) == H.k - 1:
        return len(H.codegree_index.get(s, ()))
    if not s:
        return H.num_edges
    # smaller sets: count through the incidence list of one member
    m = mask_of(s)
    masks = H.edge_masks
    return sum(1 for i in H.incident[s[0]] if masks[i] & m == m)


def min_degree(H: Hypergraph, ell: int) -> int:
    """Minimum over all ell-sets of the number of edges containing them."""
    if ell < 0 or ell > H.k:
        raise ValueError("need 0 <= ell <= k")
    if H.n < ell:
        raise ValueError(f"n = {H.n} < ell = {ell}")
    if ell == H.k - 1:
        idx = H.codegree_index
        if len(idx) < math.comb(H.n, ell):
            return 0
        return min(len(v) for v in idx.values())
    counts = Counter()
    for e in H.edge_list:
        for s in itertools.combinations(e, ell):
            counts[s] += 1
    if len(counts) < math.comb(H.n, ell):
        return 0
    return min(counts.values()) if counts else 0


def degree_sequence(H: Hypergraph) -> list[int]:
    return [len(x) for x in H.incident]


# -- sparsification -----------------------------------------------------------

def edge_stream(seed: int) -> np.random.Generator:
    """The PCG64 stream behind every sparsification: one double per edge."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & (2**64 - 1))))


def sparsify(H: Hypergraph, p: float, seed: int) -> Hypergraph:
    """Keep each edge independently with probability ``p``.

    Draws one uniform double per edge from a PCG64 stream seeded by ``seed``,
    in canonical edge order, and keeps the edge when the draw is below ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p = {p} outside [0, 1]")
    u = edge_stream(seed).random(H.num_edges)
    kept = [e for e, x in zip(H.edge_list, u) if x < p]
    return Hypergraph(H.k, H.n, kept)


# -- generators ---------------------------------------------------------------

def complete_kgraph(n: int, k: int) -> Hypergraph:
    if k > n:
        raise ValueError(f"k = {k} > n = {n}")
    return Hypergraph(k, n, itertools.combinations(range(n), k))


def divisibility_barrier(n: int, k: int, x: int) -> Hypergraph:
    """All k-sets meeting X = {0..x-1} in an even number of vertices."""
    if k < 3 or not 0 < x < n:
        raise ValueError(f"invalid barrier sizes n={n}, k={k}, x={x}")
    return Hypergraph(k, n, (e for e in itertools.combinations(range(n), k)
                             if sum(1 for v in e if v < x) % 2 == 0))


def random_kgraph(n: int, k: int, density: float, rng: np.random.Generator) -> Hypergraph:
    """Binomial random k-graph: each k-set is an edge with probability ``density``."""
    all_sets = list(itertools.combinations(range(n), k))
    keep = rng.random(len(all_sets)) < density
    return Hypergraph(k, n, (e for e, b in zip(all_sets, keep) if b))


def disjoint_union(*graphs: Hypergraph) -> Hypergraph:
    k = graphs[0].k
    edges, off = [], 0
    for G in graphs:
        if G.k != k:
            raise ValueError("mixed uniformity")
        edges.extend(tuple(v + off for v in e) for e in G.edge_list)
        off += G.n
    return Hypergraph(k, off, edges)


def cycle_graph(n: int) -> Hypergraph:
    return Hypergraph(2, n, [(i, (i + 1) % n) for i in range(n)])


# -- copies of a pattern ----------------------------------------------------

def spanning_sets(H: Hypergraph, F: PatternGraph) -> dict[tuple[int, ...], int]:
    """Every r-set of V(H) spanning at least one copy of F, with its copy count.

    Copies are counted as subhypergraphs: embeddings divided by |Aut(F)|.
    """
    if F.k != H.k:
        raise ValueError("pattern and host have different uniformity")
    if F.r > H.n:
        raise ValueError(f"r = {F.r} > n = {H.n}")
    if F.is_single_edge:
        return {e: 1 for e in H.edge_list}
    aut = F.automorphism_count()
    out = {}
    if F.e_F == 0:
        for S in itertools.combinations(range(H.n), F.r):
            out[S] = math.factorial(F.r) // aut
        return out
    for S in itertools.combinations(range(H.n), F.r):
        c = F.embeddings_into(H, S)
        if c:
            out[S] = c // aut
    return out


def pattern_copies(H: Hypergraph, F: PatternGraph, P: VertexPartition) -> dict[tuple[int, ...], int]:
    """Copies of F in H bucketed by the index vector of their vertex set."""
    counts: Counter = Counter()
    for S, c in spanning_sets(H, F).items():
        counts[index_vector(P, S)] += c
    return dict(counts)
