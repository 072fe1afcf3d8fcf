"""Random clustering, redistribution, residue correction and per-cluster factor assembly.

A desk-scale, executable version of the random-cluster F-factor sampler.
Every stage either succeeds with checked invariants or returns a structured
failure naming the stage.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .decision import CoverSolver, FactorOracle, PackingWitness, _rational
from .hypergraph import (
    Hypergraph,
    PatternGraph,
    VertexPartition,
    index_vector,
    mask_of,
    min_degree,
    spanning_sets,
    vertices_of,
)
from .lattice import CosetGroup, IntegerLattice, coset_group, lattice_contains, lattice_from_generators
from .robustness import RobustProfile, robust_profile, reachable_count, threshold

Vector = tuple[int, ...]


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 stream for (master seed, key...), independent of scheduling."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ClusterParams:
    C: int = 12
    q: int | None = None          # None: |Q| of the robust lattice (at least 1)
    c: Fraction = Fraction(1, 6)   # part-size fraction for (A1)
    eps: Fraction = Fraction(1, 100)
    mu: Fraction = Fraction(1, 1000)
    gamma: Fraction = Fraction(1, 20)
    delta: Fraction | None = None  # baseline degree fraction; None means 1/k
    ell: int | None = None         # degree level; None means k-1
    beta: Fraction = Fraction(1, 1000)
    t: int = 1
    check_closedness: bool = True
    retries: int = 100
    allow_small_c: bool = False

    def as_json(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = str(v) if isinstance(v, Fraction) else v
        return out


# -- step 1: raw clusters -------------------------------------------------------

def first_window(n: int, C: int) -> int:
    """|W_1| = (C-1)C + (n mod (C-1)C), clamped to n when n < (C-1)C."""
    block = (C - 1) * C
    return min(n, block + n % block)


def window_sizes(n: int, C: int) -> list[int]:
    if C < 2:
        raise ValueError("C must be at least 2")
    if n < 1:
        raise ValueError("n too small for one window")
    c1 = first_window(n, C)
    rest = n - c1
    if rest % (C - 1):
        raise ValueError(f"n - C1 = {rest} is not a multiple of C - 1")
    return [c1] + [C - 1] * (rest // (C - 1))


def sample_clusters(n: int, C: int, rng: np.random.Generator) -> list[list[int]]:
    """U_i' = {v : pi(v) in W_i} for a uniformly random permutation pi."""
    sizes = window_sizes(n, C)
    pi = rng.permutation(n)
    bounds = np.cumsum([0] + sizes)
    window = np.searchsorted(bounds, pi, side="right") - 1
    out: list[list[int]] = [[] for _ in sizes]
    # order inside a cluster follows pi, which makes later "first" choices random
    for v in np.argsort(pi, kind="stable"):
        out[window[v]].append(int(v))
    return out


# -- robust link counts -----------------------------------------------------------

class RobustLinks:
    """|F^mu(v, U)|: robust r-sets through v whose other vertices lie in U."""

    def __init__(self, profile: RobustProfile, n: int):
        self.n = n
        per: list[list[int]] = [[] for _ in range(n)]
        for S in profile.robust_sets:
            m = mask_of(S)
            for v in S:
                per[v].append(m & ~(1 << v))
        self.small = n <= 64
        if self.small:
            self.per = [np.array(p, dtype=np.uint64) for p in per]
        else:
            self.per = per
        self.sets_through = [[] for _ in range(n)]
        for S in profile.robust_sets:
            for v in S:
                self.sets_through[v].append(S)

    def count(self, v: int, U: int) -> int:
        if self.small:
            outside = np.uint64(((1 << self.n) - 1) & ~U)
            return int(np.count_nonzero((self.per[v] & outside) == 0))
        return sum(1 for m in self.per[v] if m & ~U == 0)


# -- step 1b: classification --------------------------------------------------------

def choose_T(clusters: Sequence[Sequence[int]], P: VertexPartition, r: int, q: int) -> tuple[list[list[int]], list[bool]]:
    """rq vertices per part, earliest in cluster order; falls back to any rqd vertices."""
    Ts, ok = [], []
    for U in clusters:
        by_part: list[list[int]] = [[] for _ in range(P.d)]
        for v in U:
            by_part[P.part_of(v)].append(v)
        if all(len(b) >= r * q for b in by_part):
            Ts.append(sorted(v for b in by_part for v in b[: r * q]))
            ok.append(True)
        else:
            Ts.append(sorted(U[: r * q * P.d]))
            ok.append(False)
    return Ts, ok


def auxiliary_digraph(clusters, Ts, links: RobustLinks, eps, r: int) -> np.ndarray:
    """(i, j) is an arc iff every v in T_i has |F^mu(v, U_j')| >= 2 eps |U_i'|^(r-1) / 3."""
    m = len(clusters)
    masks = [mask_of(U) for U in clusters]
    D = np.zeros((m, m), dtype=bool)
    e = _rational(eps)
    for i in range(m):
        need = math.ceil(2 * e * len(clusters[i]) ** (r - 1) / 3)
        for j in range(m):
            if i != j:
                D[i, j] = all(links.count(v, masks[j]) >= need for v in Ts[i])
    return D


def _closed_in(H: Hypergraph, F: PatternGraph, U: Sequence[int], part: Sequence[int], beta, t: int) -> bool:
    sub, labels = H.induced(U)
    pos = {v: i for i, v in enumerate(labels)}
    size = t * F.r - 1
    if size > sub.n - 2:
        return False
    need = threshold(beta, sub.n, size)
    oracle = FactorOracle(sub, F)
    loc = [pos[v] for v in part]
    return all(reachable_count(sub, F, a, b, t, oracle) >= need for a, b in itertools.combinations(loc, 2))


def _min_degree_sub(H: Hypergraph, U: Sequence[int], ell: int) -> int:
    sub, _ = H.induced(U)
    if sub.n < ell:
        return 0
    return min_degree(sub, ell)


def cluster_conditions(H: Hypergraph, F: PatternGraph, P: VertexPartition, profile: RobustProfile,
                       U: Sequence[int], links: RobustLinks, D_in: int, m: int,
                       params: ClusterParams, q: int, *, first: bool = False) -> list[str]:
    """Names of the violated conditions (A1)-(A5) for one raw cluster."""
    k, r, n, d = H.k, F.r, H.n, P.d
    size = len(U)
    bad = []
    counts = index_vector(P, U)
    if any(Fraction(x) < 2 * _rational(params.c) * size / 3 for x in counts):
        bad.append("A1")
    if not first and Fraction(D_in) < (1 - r * q * d / math.sqrt(params.C)) * m:
        bad.append("A2")
    if not first:
        mask = mask_of(U)
        need = Fraction(2) * _rational(params.eps) * size ** (r - 1) / 3
        weak = sum(1 for v in range(n) if links.count(v, mask) < need)
        if weak >= math.exp(-float(_rational(params.eps)) ** 2 * params.C / 50) * n:
            bad.append("A3")
    ell = k - 1 if params.ell is None else params.ell
    delta = Fraction(1, k) if params.delta is None else _rational(params.delta)
    deg_need = (delta + 2 * _rational(params.gamma) / 3) * math.comb(size - ell, k - ell)
    deg_ok = _min_degree_sub(H, U, ell) >= deg_need
    closed_ok = True
    if deg_ok and params.check_closedness:
        for j in range(d):
            part = [v for v in U if P.part_of(v) == j]
            if len(part) >= 2 and not _closed_in(H, F, U, part, 2 * _rational(params.beta) / 3, params.t):
                closed_ok = False
                break
    if not (deg_ok and closed_ok):
        bad.append("A4")
    sub, labels = H.induced(U)
    sub_prof = robust_profile(sub, F, P.project(labels), 2 * _rational(params.mu) / 3)
    if not set(profile.robust_vectors) <= set(sub_prof.robust_vectors):
        bad.append("A5")
    return bad


def classify_bad_clusters(H, F, P, profile, clusters, params: ClusterParams, q: int,
                          links: RobustLinks | None = None, Ts=None, D=None) -> dict:
    """Bad raw clusters among U_2', ..., U_m' with their violated conditions."""
    if links is None:
        links = RobustLinks(profile, H.n)
    if Ts is None:
        Ts, _ = choose_T(clusters, P, F.r, q)
    if D is None:
        D = auxiliary_digraph(clusters, Ts, links, params.eps, F.r)
    m = len(clusters)
    indeg = D.sum(axis=0)
    out = {}
    for i in range(1, m):
        why = cluster_conditions(H, F, P, profile, clusters[i], links, int(indeg[i]), m, params, q)
        if why:
            out[i] = why
    return out


# -- step 1c: redistribution ------------------------------------------------------

@dataclass
class HallViolation(Exception):
    vertices: list[int]
    neighbours: list[int]

    def __str__(self):
        return (f"Hall violator: {len(self.vertices)} vertices with only "
                f"{len(self.neighbours)} neighbouring clusters")


def bipartite_perfect_matching(adj: Sequence[Sequence[int]], right: int, rng: np.random.Generator) -> list[int]:
    """Randomised augmenting-path perfect matching of left vertices into ``range(right)``.

    Raises HallViolation with the failing alternating-tree set.
    """
    left = len(adj)
    match_r = [-1] * right
    match_l = [-1] * left
    order = rng.permutation(left)
    nbrs = [list(a) for a in adj]
    for a in nbrs:
        rng.shuffle(a)
    for u in order:
        u = int(u)
        seen_r: set[int] = set()
        seen_l: set[int] = {u}

        def aug(x):
            for y in nbrs[x]:
                if y in seen_r:
                    continue
                seen_r.add(y)
                if match_r[y] == -1 or (seen_l.add(match_r[y]) or aug(match_r[y])):
                    match_r[y] = x
                    match_l[x] = y
                    return True
            return False

        if not aug(u):
            raise HallViolation(sorted(seen_l), sorted(seen_r))
    return match_l


def redistribution_graph(H, F, P, profile, clusters, Ts, good: Sequence[int], A: Sequence[int],
                         links: RobustLinks) -> list[list[int]]:
    """u ~ U_i' iff some robust r-set through u has its other vertices in U_i' - T_i."""
    robust = profile.robust_vectors
    targets = [mask_of(set(clusters[i]) - set(Ts[i])) for i in good]
    adj = []
    for u in A:
        row = []
        for j, tm in enumerate(targets):
            if links.count(u, tm) > 0:
                row.append(j)
        adj.append(row)
    return adj


def hamilton_cycle(D: np.ndarray, start: int = 0) -> list[int] | None:
    """A directed Hamilton cycle through ``start`` by backtracking, or None."""
    m = D.shape[0]
    if m == 1:
        return [start]
    path = [start]
    used = {start}

    def rec():
        if len(path) == m:
            return bool(D[path[-1], start])
        x = path[-1]
        # try low out-degree successors first
        cand = [y for y in range(m) if D[x, y] and y not in used]
        cand.sort(key=lambda y: int(D[y].sum()))
        for y in cand:
            path.append(y)
            used.add(y)
            if rec():
                return True
            path.pop()
            used.discard(y)
        return False

    return list(path) if rec() else None


def hamilton_order(D: np.ndarray, first: int = 0) -> list[int] | None:
    """Cyclic order o with arcs (o[i], o[i-1]) and o[0] = first."""
    cyc = hamilton_cycle(D, first)
    if cyc is None:
        return None
    return [cyc[0]] + cyc[:0:-1]


def semi_degree_ok(D: np.ndarray) -> bool:
    m = D.shape[0]
    return bool(min(D.sum(axis=0).min(), D.sum(axis=1).min()) >= m / 2) if m > 1 else True


# -- step 2: residue correction ---------------------------------------------------

def pigeonhole_shrink(vecs: Sequence[Vector], L: IntegerLattice, q: int) -> list[int]:
    """Indices of a sub-family with the same residue sum and at most q - 1 members.

    Repeatedly deletes a contiguous block whose residues sum to zero, found as
    a repeated partial sum. Requires |Q| <= q.
    """
    keep = list(range(len(vecs)))
    d = L.d
    while len(keep) >= q:
        seen = {L.reduce((0,) * d): 0}
        s = [0] * d
        cut = None
        for pos, idx in enumerate(keep, start=1):
            s = [a + b for a, b in zip(s, vecs[idx])]
            key = L.reduce(s)
            if key in seen:
                cut = (seen[key], pos)
                break
            seen[key] = pos
        if cut is None:
            raise ValueError("no repeated partial sum; the coset group exceeds q")
        keep = keep[: cut[0]] + keep[cut[1]:]
    return keep


@dataclass
class ClusterPlan:
    clusters: list[list[int]]            # final clusters U_i' after correction, in cyclic order
    raw_clusters: list[list[int]]
    T: list[list[int]]
    L: list[list[int]]
    J: list[list[int]]
    cyclic_order: list[int]              # raw indices of kept clusters in cyclic order
    bad: dict
    seed: int
    attempts: int
    sizes_raw: list[int]
    sizes_post: list[int]
    absorbed: list[int | None] = field(default_factory=list)
    conservation: list[dict] = field(default_factory=list)

    def as_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def residue_correct(P: VertexPartition, L: IntegerLattice, r: int, clusters: list[list[int]],
                    Ts: list[list[int]], q: int) -> tuple[list[list[int]], list[list[int]]]:
    """Move at most q-1 r-sets from T_{i+1} into cluster i so every cluster lands in L.

    Returns the corrected clusters and J (J[i] = vertices exported by cluster i).
    """
    M = len(clusters)
    total = index_vector(P, range(P.n))
    if not lattice_contains(L, total):
        raise ResidueError(f"i_P(V) = {total} is not in the lattice", 0)
    J: list[list[int]] = [[] for _ in range(M)]
    out: list[list[int]] = []
    for i in range(M):
        cur = sorted(set(clusters[i]) - set(J[i]))
        if i == M - 1:
            out.append(cur)
            break
        # the later vertices, chopped into r-sets, carry residue -v0
        later = sorted(v for j in range(i + 1, M) for v in clusters[j])
        chunks = [later[a:a + r] for a in range(0, len(later), r)]
        vecs = [index_vector(P, c) for c in chunks]
        keep = pigeonhole_shrink(vecs, L, q) if q >= 1 else []
        need = [vecs[j] for j in keep]
        # realise the same index vectors inside T_{i+1}
        pool: list[list[int]] = [[] for _ in range(P.d)]
        for v in Ts[i + 1]:
            pool[P.part_of(v)].append(v)
        moved: list[int] = []
        for vec in need:
            for part, cnt in enumerate(vec):
                if len(pool[part]) < cnt:
                    raise ResidueError(f"T of cluster {i + 1} cannot host vector {vec}", i)
                moved.extend(pool[part][:cnt])
                pool[part] = pool[part][cnt:]
        J[i + 1] = sorted(moved)
        fixed = sorted(cur + moved)
        if not lattice_contains(L, index_vector(P, fixed)):
            raise ResidueError(f"cluster {i} residue not corrected", i)
        out.append(fixed)
    if not lattice_contains(L, index_vector(P, out[-1])):
        raise ResidueError("last cluster outside the lattice", M - 1)
    return out, J


class ResidueError(RuntimeError):
    def __init__(self, message: str, cluster: int):
        super().__init__(message)
        self.cluster = cluster


# -- full pipeline ------------------------------------------------------------------

@dataclass
class FactorSample:
    success: bool
    factor: PackingWitness | None
    plan: ClusterPlan | None
    failure: dict | None = None

    def as_json(self) -> dict:
        return {
            "success": self.success,
            "factor": self.factor.as_json() if self.factor else None,
            "plan": self.plan.as_json() if self.plan else None,
            "failure": self.failure,
        }


class ClusterContext:
    """Everything about (H, F, P) that does not depend on the seed."""

    def __init__(self, H: Hypergraph, F: PatternGraph, P: VertexPartition, params: ClusterParams):
        if H.n % F.r:
            raise ValueError(f"r = {F.r} does not divide n = {H.n}")
        if params.C % F.r:
            raise ValueError(f"r = {F.r} does not divide C = {params.C}")
        self.H, self.F, self.P, self.params = H, F, P, params
        self.sets = spanning_sets(H, F)
        self.profile = robust_profile(H, F, P, params.mu, sets=self.sets)
        self.L = lattice_from_generators(self.profile.robust_vectors, P.d)
        self.Q: CosetGroup = coset_group(self.L, F.r)
        if params.q is not None:
            self.q = params.q
        else:
            self.q = max(1, int(self.Q.size)) if self.Q.finite else math.comb(P.d + F.r - 1, F.r)
        need = F.r * self.q * P.d + F.r + 2 * H.k
        self.size_problem = None
        if params.C < need and not params.allow_small_c:
            self.size_problem = f"C = {params.C} below r*q*d + r + 2k = {need}"
        self.links = RobustLinks(self.profile, H.n)
        self.set_masks = {S: mask_of(S) for S in self.sets}


def _conservation(ctx: ClusterContext, stage: str, clusters) -> dict:
    L, P = ctx.L, ctx.P
    total = [0] * P.d
    for U in clusters:
        total = [a + b for a, b in zip(total, L.reduce(index_vector(P, U)))]
    ok = L.reduce(total) == L.reduce(index_vector(P, range(P.n)))
    return {"stage": stage, "holds": ok}


def sample_f_factor(H: Hypergraph, F: PatternGraph, P: VertexPartition,
                    params: ClusterParams = ClusterParams(), seed: int = 0,
                    ctx: ClusterContext | None = None) -> FactorSample:
    if ctx is None:
        try:
            ctx = ClusterContext(H, F, P, params)
        except ValueError as exc:
            return FactorSample(False, None, None, {"stage": "setup", "message": str(exc)})
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & (2**64 - 1))))
    n, r, q = H.n, F.r, ctx.q
    if not lattice_contains(ctx.L, index_vector(P, range(n))):
        return FactorSample(False, None, None, {
            "stage": "residue_correct",
            "message": f"i_P(V) = {index_vector(P, range(n))} is outside the robust lattice",
            "lattice": ctx.L.as_json(), "coset_group": ctx.Q.as_json()})
    if ctx.size_problem:
        return FactorSample(False, None, None, {"stage": "setup", "message": ctx.size_problem})

    last_reason = None
    for attempt in range(1, params.retries + 1):
        raw = sample_clusters(n, params.C, rng)
        m = len(raw)
        Ts, t_ok = choose_T(raw, P, r, q)
        D = auxiliary_digraph(raw, Ts, ctx.links, params.eps, r)
        indeg = D.sum(axis=0)
        first_bad = cluster_conditions(H, F, P, ctx.profile, raw[0], ctx.links, int(indeg[0]), m,
                                       params, q, first=True)
        if first_bad:
            last_reason = {"stage": "classify", "message": f"U_1' violates {first_bad}"}
            continue
        bad = {}
        for i in range(1, m):
            why = cluster_conditions(H, F, P, ctx.profile, raw[i], ctx.links, int(indeg[i]), m, params, q)
            if not t_ok[i]:
                why = why + ["T"]
            if why:
                bad[i] = why
        quota = (m - 1) // params.C
        if len(bad) > quota:
            last_reason = {"stage": "classify", "message": f"{len(bad)} bad clusters exceed {quota}",
                           "bad": {str(k): v for k, v in bad.items()}}
            continue
        pool = [i for i in range(1, m) if i not in bad]
        extra = rng.choice(pool, size=quota - len(bad), replace=False) if quota > len(bad) else []
        bad_set = sorted(set(bad) | {int(x) for x in extra})
        good = [i for i in range(1, m) if i not in bad_set]
        A = sorted(v for i in bad_set for v in raw[i])

        # redistribution
        adj = redistribution_graph(H, F, P, ctx.profile, raw, Ts, good, A, ctx.links)
        try:
            mate = bipartite_perfect_matching(adj, len(good), rng) if A else []
        except HallViolation as hv:
            last_reason = {"stage": "redistribute", "message": str(hv),
                           "hall_violator": [A[i] for i in hv.vertices],
                           "neighbours": [good[j] for j in hv.neighbours]}
            continue
        absorbed: dict[int, int] = {}
        for ai, gj in enumerate(mate):
            absorbed[good[gj]] = A[ai]
        Lsets: dict[int, list[int]] = {}
        for i in good:
            u = absorbed.get(i)
            if u is None:
                continue
            room = set(raw[i]) - set(Ts[i])
            cands = [S for S in ctx.links.sets_through[u] if all(x == u or x in room for x in S)]
            Lsets[i] = list(cands[int(rng.integers(len(cands)))])

        kept = [0] + good
        Dk = D[np.ix_(kept, kept)]
        order_local = hamilton_order(Dk, 0)
        if order_local is None:
            last_reason = {"stage": "hamilton_order", "message": "no directed Hamilton cycle in D'",
                           "semi_degree_condition": semi_degree_ok(Dk)}
            continue
        order = [kept[x] for x in order_local]
        clusters = [sorted(raw[i] + ([absorbed[i]] if i in absorbed else [])) for i in order]
        T_ord = [Ts[i] for i in order]
        L_ord = [Lsets.get(i, []) for i in order]
        sizes_post = [len(U) for U in clusters]
        cons = [_conservation(ctx, "raw", raw), _conservation(ctx, "redistributed", clusters)]
        try:
            fixed, J = residue_correct(P, ctx.L, r, clusters, T_ord, q)
        except (ResidueError, ValueError) as exc:
            return FactorSample(False, None, None, {"stage": "residue_correct", "message": str(exc)})
        cons.append(_conservation(ctx, "corrected", fixed))
        plan = ClusterPlan(fixed, raw, T_ord, L_ord, J, order, {str(k): v for k, v in bad.items()},
                           int(seed), attempt, [len(U) for U in raw], sizes_post,
                           [absorbed.get(i) for i in order], cons)
        if not all(c["holds"] for c in cons):
            return FactorSample(False, None, plan, {"stage": "conservation", "message": "residue sum drifted"})

        # step 3: M1 then brute force on the rest
        copies: list[tuple[int, ...]] = []
        for i, U in enumerate(fixed):
            inside = set(U)
            used: set[int] = set()
            if L_ord[i]:
                copies.append(tuple(L_ord[i]))
                used |= set(L_ord[i])
            nxt = J[i + 1] if i + 1 < len(fixed) else []
            for v in nxt:
                if v in used:
                    continue
                cands = [S for S in ctx.links.sets_through[v]
                         if all(x in inside and x not in used for x in S)]
                if not cands:
                    return FactorSample(False, None, plan, {
                        "stage": "cover_J", "message": f"no robust copy for imported vertex {v}",
                        "cluster": i})
                S = cands[int(rng.integers(len(cands)))]
                copies.append(tuple(S))
                used |= set(S)
            rest = mask_of(inside - used)
            blocks = [m_ for m_ in ctx.set_masks.values() if m_ & rest == m_]
            sol = CoverSolver(blocks, n).find(rest, rng)
            if sol is None:
                return FactorSample(False, None, plan, {
                    "stage": "cluster_factor", "message": f"cluster {i} remainder has no factor",
                    "cluster": i, "size": bin(rest).count("1")})
            copies.extend(tuple(vertices_of(b)) for b in sol)
        W = PackingWitness(sorted(copies))
        if not is_f_factor(H, F, W, ctx.sets):
            return FactorSample(False, None, plan, {"stage": "verify", "message": "assembled family is not a factor"})
        return FactorSample(True, W, plan)
    return FactorSample(False, None, None, dict(last_reason or {}, attempts=params.retries))


def is_f_factor(H: Hypergraph, F: PatternGraph, W: PackingWitness, sets: dict | None = None) -> bool:
    if sets is None:
        sets = spanning_sets(H, F)
    covered = sorted(v for c in W.copies for v in c)
    return covered == list(range(H.n)) and all(tuple(sorted(c)) in sets for c in W.copies)
