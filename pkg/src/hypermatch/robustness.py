"""Robust index vectors, reachability, and good-partition construction."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .decision import FactorOracle, _rational
from .hypergraph import (
    Hypergraph,
    PatternGraph,
    VertexPartition,
    index_vector,
    mask_of,
    pattern_copies,
    spanning_sets,
)

Vector = tuple[int, ...]


def threshold(x, n: int, power: int) -> int:
    """ceil(x * n^power), exact for rational x."""
    return math.ceil(_rational(x) * n ** power)


@dataclass
class RobustProfile:
    mu: Fraction
    robust_vectors: frozenset
    link_counts: list[int]
    raw_counts: dict
    threshold: int
    # r-sets spanning a copy whose index vector is robust
    robust_sets: list[tuple[int, ...]] = field(default_factory=list, repr=False)

    def as_json(self) -> dict:
        return {
            "mu": str(self.mu),
            "threshold": self.threshold,
            "robust_vectors": sorted(list(v) for v in self.robust_vectors),
            "raw_counts": {",".join(map(str, v)): c for v, c in sorted(self.raw_counts.items())},
            "link_counts": self.link_counts,
        }


def robust_profile(H: Hypergraph, F: PatternGraph, P: VertexPartition, mu,
                   *, sets: dict | None = None) -> RobustProfile:
    if P.n != H.n:
        raise ValueError("partition and hypergraph disagree on n")
    mu = _rational(mu)
    if not 0 < mu <= 1:
        raise ValueError(f"mu = {mu} outside (0, 1]")
    if sets is None:
        sets = spanning_sets(H, F)
    raw: dict[Vector, int] = {}
    vec_of = {}
    for S, c in sets.items():
        v = index_vector(P, S)
        vec_of[S] = v
        raw[v] = raw.get(v, 0) + c
    thr = threshold(mu, H.n, F.r)
    robust = frozenset(v for v, c in raw.items() if c >= thr)
    links = [0] * H.n
    rsets = []
    for S in sets:
        if vec_of[S] in robust:
            rsets.append(S)
            for x in S:
                links[x] += 1
    return RobustProfile(mu, robust, links, raw, thr, sorted(rsets))


# -- reachability -------------------------------------------------------------

def reachable_count(H: Hypergraph, F: PatternGraph, u: int, v: int, i: int,
                    oracle: FactorOracle | None = None) -> int:
    """Number of (ir-1)-sets S avoiding u, v with S+u and S+v both F-factorable."""
    if u == v:
        raise ValueError("u and v must differ")
    size = i * F.r - 1
    if i < 1 or size > H.n - 2:
        raise ValueError(f"i = {i} too large for n = {H.n}")
    if oracle is None:
        oracle = FactorOracle(H, F)
    rest = [w for w in range(H.n) if w != u and w != v]
    bu, bv = 1 << u, 1 << v
    count = 0
    for S in itertools.combinations(rest, size):
        m = mask_of(S)
        if oracle.has_factor(m | bu) and oracle.has_factor(m | bv):
            count += 1
    return count


def lo_markstrom_test(H: Hypergraph, u: int, v: int, alpha) -> bool:
    """Many common (k-1)-neighbour sets of u and v, each with codegree >= alpha*n."""
    if u == v:
        raise ValueError("u and v must differ")
    alpha = _rational(alpha)
    idx = H.codegree_index

    def nbhd(w):
        return {e[:j] + e[j + 1:] for e in (H.edge_list[t] for t in H.incident[w])
                for j in range(H.k) if e[j] == w}

    common = nbhd(u) & nbhd(v)
    good = sum(1 for S in common if len(idx.get(S, ())) >= alpha * H.n)
    return good >= alpha * math.comb(H.n, H.k - 1)


# -- partition construction ---------------------------------------------------

@dataclass(frozen=True)
class PartitionParams:
    alpha: Fraction = Fraction(1, 10)
    beta1: Fraction = Fraction(1, 1000)
    mu: Fraction = Fraction(1, 1000)
    eps: Fraction = Fraction(1, 100)
    eta2: Fraction = Fraction(1, 100)
    rho: Fraction = Fraction(1, 2)
    # None means 1/(2k)
    min_part_fraction: Fraction | None = None
    reach_mode: str = "exact"  # or "lo-markstrom"
    relocation: str = "strict"  # or "best-effort"

    def part_fraction(self, k: int) -> Fraction:
        if self.min_part_fraction is None:
            return Fraction(1, 2 * k)
        return _rational(self.min_part_fraction)

    def as_json(self) -> dict:
        return {
            "alpha": str(self.alpha), "beta1": str(self.beta1), "mu": str(self.mu),
            "eps": str(self.eps), "eta2": str(self.eta2), "rho": str(self.rho),
            "min_part_fraction": None if self.min_part_fraction is None else str(self.min_part_fraction),
            "reach_mode": self.reach_mode, "relocation": self.relocation,
        }


@dataclass
class GoodPartition:
    partition: VertexPartition
    beta: Fraction
    t: int
    min_part_fraction: Fraction
    mu: Fraction
    eps: Fraction
    certificates: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def as_json(self) -> dict:
        return {
            "assignment": list(self.partition.assignment),
            "d": self.partition.d,
            "sizes": self.partition.sizes,
            "beta": str(self.beta), "t": self.t,
            "min_part_fraction": str(self.min_part_fraction),
            "mu": str(self.mu), "eps": str(self.eps),
            "certificates": self.certificates,
            "diagnostics": self.diagnostics,
        }


class RelocationError(RuntimeError):
    def __init__(self, vertex: int, message: str):
        super().__init__(message)
        self.vertex = vertex


def reachability_matrix(H: Hypergraph, F: PatternGraph, params: PartitionParams,
                        oracle: FactorOracle | None = None) -> np.ndarray:
    """Boolean n x n matrix of level-1 reachable pairs under the configured test."""
    n = H.n
    R = np.zeros((n, n), dtype=bool)
    if params.reach_mode == "lo-markstrom":
        if not F.is_single_edge:
            raise ValueError("the codegree surrogate only applies to perfect matchings")
        for u, v in itertools.combinations(range(n), 2):
            R[u, v] = R[v, u] = lo_markstrom_test(H, u, v, params.alpha)
        return R
    if params.reach_mode != "exact":
        raise ValueError(f"unknown reach mode {params.reach_mode!r}")
    thr = max(1, threshold(params.beta1, n, F.r - 1))
    if oracle is None:
        oracle = FactorOracle(H, F)
    for u, v in itertools.combinations(range(n), 2):
        R[u, v] = R[v, u] = reachable_count(H, F, u, v, 1, oracle) >= thr
    return R


def merge_parts(R: np.ndarray, rho) -> list[list[int]]:
    """Average-linkage agglomeration: merge the pair of parts with the highest
    fraction of reachable cross pairs while that fraction is at least rho."""
    rho = _rational(rho)
    parts = [[v] for v in range(R.shape[0])]
    cross = R.astype(np.int64)
    while len(parts) > 1:
        sizes = np.array([len(p) for p in parts], dtype=np.int64)
        frac = cross / np.outer(sizes, sizes)
        np.fill_diagonal(frac, -1.0)
        a, b = np.unravel_index(int(np.argmax(frac)), frac.shape)
        a, b = min(a, b), max(a, b)
        # exact comparison against rho
        if Fraction(int(cross[a, b]), int(sizes[a] * sizes[b])) < rho:
            break
        parts[a] = sorted(parts[a] + parts[b])
        del parts[b]
        cross[a, :] += cross[b, :]
        cross[:, a] += cross[:, b]
        cross = np.delete(np.delete(cross, b, axis=0), b, axis=1)
    parts.sort(key=lambda p: p[0])
    return parts


def build_partition(H: Hypergraph, F: PatternGraph, params: PartitionParams = PartitionParams()) -> GoodPartition:
    n, r = H.n, F.r
    c = params.part_fraction(H.k)
    min_size = math.ceil(c * n)
    oracle = FactorOracle(H, F)
    R = reachability_matrix(H, F, params, oracle)
    parts = merge_parts(R, params.rho)

    # undersized parts: attach each vertex to the big part it reaches most
    big = [p for p in parts if len(p) >= min_size]
    small = [v for p in parts if len(p) < min_size for v in p]
    provisional = {}
    if not big:
        big = [list(range(n))]
        small = []
    for v in small:
        fr = [Fraction(int(R[v, p].sum()), len(p)) for p in big]
        provisional[v] = max(range(len(big)), key=lambda i: (fr[i], -i))
    groups = [list(p) for p in big]
    for v, i in provisional.items():
        groups[i].append(v)
    P = VertexPartition.from_parts(groups, n)

    # low robust degree vertices
    sets = oracle.sets
    prof = robust_profile(H, F, P, params.mu, sets=sets)
    low = threshold(2 * _rational(params.eps), n, r - 1)
    U0 = [v for v in range(n) if prof.link_counts[v] < low]

    # relocation, with every count taken against P before any move
    need = threshold(_rational(params.eta2) / math.factorial(r), n, r - 1)
    target = {}
    relocation_counts = {}
    for v in U0:
        counts: dict[tuple[Vector, int], int] = {}
        for S in sets:
            if v not in S:
                continue
            Rv = index_vector(P, (x for x in S if x != v))
            for i in range(P.d):
                w = tuple(a + (j == i) for j, a in enumerate(Rv))
                if w in prof.robust_vectors:
                    counts[(w, i)] = counts.get((w, i), 0) + 1
        per_part = [max((cnt for (w, i), cnt in counts.items() if i == j), default=0)
                    for j in range(P.d)]
        valid = [j for j in range(P.d) if per_part[j] >= need]
        if valid:
            target[v] = valid[0]
        elif params.relocation == "best-effort" and max(per_part, default=0) > 0:
            target[v] = max(range(P.d), key=lambda j: (per_part[j], -j))
        else:
            raise RelocationError(v, f"vertex {v} has no relocation target "
                                     f"(best count {max(per_part, default=0)} < {need})")
        relocation_counts[v] = per_part
    a = list(P.assignment)
    for v, i in target.items():
        a[v] = i
    used = sorted(set(a))
    remap = {old: new for new, old in enumerate(used)}
    final = VertexPartition([remap[x] for x in a], len(used))

    return GoodPartition(
        final, _rational(params.beta1), 1, c, _rational(params.mu) / 2, _rational(params.eps),
        diagnostics={
            "params": params.as_json(),
            "stage1_parts": [list(p) for p in parts],
            "provisional": {str(v): i for v, i in provisional.items()},
            "robust_vectors": sorted(list(v) for v in prof.robust_vectors),
            "U0": U0,
            "relocations": {str(v): {"to": remap[target[v]], "counts": relocation_counts[v]}
                            for v in U0},
            "relocation_threshold": need,
            "low_link_threshold": low,
        },
    )


# -- verification ---------------------------------------------------------------

@dataclass
class VerificationReport:
    passed: bool
    properties: dict

    def as_json(self) -> dict:
        return {"passed": self.passed, "properties": self.properties}


def _wilson(successes: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ph = successes / trials
    den = 1 + z * z / trials
    mid = (ph + z * z / (2 * trials)) / den
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if successes == 0 else max(0.0, mid - half)
    hi = 1.0 if successes == trials else min(1.0, mid + half)
    return lo, hi


def verify_partition(H: Hypergraph, F: PatternGraph, GP: GoodPartition, *,
                     beta=None, t: int | None = None, eps=None, mu=None,
                     mode: str = "auto", budget: int = 2_000_000, samples: int = 400,
                     seed: int = 0) -> VerificationReport:
    """Check sizes, closedness and robust link counts of a partition."""
    P = GP.partition
    n, r = H.n, F.r
    beta = _rational(GP.beta if beta is None else beta)
    t = GP.t if t is None else t
    eps = _rational(GP.eps if eps is None else eps)
    mu = _rational(GP.mu if mu is None else mu)
    props = {}

    min_size = math.ceil(GP.min_part_fraction * n)
    small = [i for i, s in enumerate(P.sizes) if s < min_size]
    props["P1"] = {"passed": not small, "min_size": min_size, "sizes": P.sizes,
                   "counterexamples": small}

    oracle = FactorOracle(H, F)
    size = t * r - 1
    thr = threshold(beta, n, size)
    pairs = [(u, v) for part in P.parts for u, v in itertools.combinations(part, 2)]
    total_sets = math.comb(n - 2, size) if size <= n - 2 else 0
    if mode == "auto":
        mode = "exhaustive" if len(pairs) * total_sets <= budget else "sampled"
    bad = []
    certs = []
    if total_sets == 0:
        bad = list(pairs)
    elif mode == "exhaustive":
        per_part_min = {}
        for u, v in pairs:
            c = reachable_count(H, F, u, v, t, oracle)
            i = P.part_of(u)
            per_part_min[i] = min(per_part_min.get(i, c), c)
            if c < thr:
                bad.append((u, v, c))
        certs = [{"part": i, "mode": "exhaustive", "pairs": math.comb(s, 2),
                  "min_count": per_part_min.get(i)} for i, s in enumerate(P.sizes)]
    elif mode == "sampled":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        need_frac = thr / total_sets
        for u, v in pairs:
            rest = np.array([w for w in range(n) if w != u and w != v])
            hits = 0
            for _ in range(samples):
                S = rng.choice(rest, size=size, replace=False)
                m = mask_of(int(x) for x in S)
                if oracle.has_factor(m | 1 << u) and oracle.has_factor(m | 1 << v):
                    hits += 1
            lo, hi = _wilson(hits, samples)
            if hi < need_frac:
                bad.append((u, v, round(hits / samples * total_sets)))
        certs = [{"part": i, "mode": "sampled", "pairs": math.comb(s, 2),
                  "samples_per_pair": samples, "confidence_sigma": 3}
                 for i, s in enumerate(P.sizes)]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    GP.certificates = certs
    props["P2"] = {"passed": not bad, "t": t, "threshold": thr, "mode": mode,
                   "counterexamples": [list(x) for x in bad[:20]], "violations": len(bad)}

    prof = robust_profile(H, F, P, mu, sets=oracle.sets)
    low = threshold(eps, n, r - 1)
    weak = [v for v in range(n) if prof.link_counts[v] < low]
    props["P3"] = {"passed": not weak, "threshold": low, "counterexamples": weak}
    return VerificationReport(all(p["passed"] for p in props.values()), props)
