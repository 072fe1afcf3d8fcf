"""Monte Carlo harnesses: spread estimates, threshold curves, inheritance by random subsets."""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .clustering import ClusterContext, ClusterParams, sample_f_factor, trial_rng
from .decision import CoverSolver, FactorOracle, _rational, density_params
from .hypergraph import (
    Hypergraph,
    PatternGraph,
    VertexPartition,
    index_vector,
    mask_of,
    min_degree,
    sparsify,
    spanning_sets,
    vertices_of,
)
from .robustness import reachable_count, robust_profile, threshold


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    ph = successes / trials
    den = 1 + z * z / trials
    mid = (ph + z * z / (2 * trials)) / den
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if successes == 0 else max(0.0, mid - half)
    hi = 1.0 if successes == trials else min(1.0, mid + half)
    return lo, hi


def map_trials(fn: Callable[[int], object], trials: int, threads: int = 1) -> list:
    """Run fn(0..trials-1); results come back in trial order whatever the thread count."""
    if threads <= 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(trials)))


# -- spread -----------------------------------------------------------------------

@dataclass
class SpreadEstimate:
    trials: int
    max_single_frequency: float
    max_pair_frequency: float
    bound: float | None
    fitted_constant: float
    exceedances: list = field(default_factory=list)
    argmax_single: tuple | None = None
    argmax_pair: tuple | None = None

    def standard_error(self, p: float) -> float:
        return math.sqrt(p * (1 - p) / self.trials)

    def as_json(self) -> dict:
        return {
            "trials": self.trials,
            "max_single_frequency": self.max_single_frequency,
            "max_single_se": self.standard_error(self.max_single_frequency),
            "max_pair_frequency": self.max_pair_frequency,
            "max_pair_se": self.standard_error(self.max_pair_frequency),
            "bound": self.bound,
            "fitted_constant": self.fitted_constant,
            "exceedances": self.exceedances,
            "argmax_single": self.argmax_single,
            "argmax_pair": self.argmax_pair,
        }


def estimate_vertex_spread(sampler: Callable[[int], Sequence[int] | None], n: int, m: int,
                           trials: int, *, constant: float | None = None, threads: int = 1) -> SpreadEstimate:
    """Placement frequencies of (vertex, cluster) events and of pairs of them.

    ``sampler(trial)`` returns the cluster index of every vertex (or None on
    failure, which is skipped). The fitted constant C' is the smallest value
    with every single frequency <= C'/n and every pair frequency <= (C'/n)^2.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    results = map_trials(sampler, trials, threads)
    used = [a for a in results if a is not None]
    T = len(used)
    if T == 0:
        raise RuntimeError("every trial failed")
    N = n * m
    single = np.zeros(N)
    pair = np.zeros((N, N))
    for a in used:
        idx = np.arange(n) * m + np.asarray(a)
        x = np.zeros(N)
        x[idx] = 1.0
        single += x
        pair += np.outer(x, x)
    single /= T
    pair /= T
    # pairs must involve distinct vertices
    for v in range(n):
        pair[v * m:(v + 1) * m, v * m:(v + 1) * m] = 0.0
    f1 = float(single.max())
    f2 = float(pair.max())
    i1 = int(single.argmax())
    i2 = np.unravel_index(int(pair.argmax()), pair.shape)
    fitted = max(n * f1, n * math.sqrt(f2))
    exceed = []
    if constant is not None:
        b1, b2 = constant / n, (constant / n) ** 2
        for j in np.nonzero(single - 3 * np.sqrt(single * (1 - single) / T) > b1)[0]:
            exceed.append({"event": [int(j // m), int(j % m)], "frequency": float(single[j])})
        se2 = np.sqrt(pair * (1 - pair) / T)
        for a, b in zip(*np.nonzero(np.triu(pair - 3 * se2 > b2, 1))):
            exceed.append({"event": [[int(a // m), int(a % m)], [int(b // m), int(b % m)]],
                           "frequency": float(pair[a, b])})
    return SpreadEstimate(T, f1, f2, constant, fitted, exceed,
                          (i1 // m, i1 % m), ((int(i2[0]) // m, int(i2[0]) % m), (int(i2[1]) // m, int(i2[1]) % m)))


def estimate_factor_spread(sampler: Callable[[int], Iterable[Sequence[int]] | None], F: PatternGraph, n: int,
                           trials: int, *, constant: float | None = None, threads: int = 1,
                           sizes: Sequence[int] = (1, 2)) -> SpreadEstimate:
    """P[S in M] for single copies and pairs of copies, against (C''/n^(1/m_1))^|S|."""
    results = map_trials(sampler, trials, threads)
    used = [sorted(tuple(sorted(c)) for c in M) for M in results if M is not None]
    T = len(used)
    if T == 0:
        raise RuntimeError("every trial failed")
    c1: dict = {}
    c2: dict = {}
    for M in used:
        for e in M:
            c1[e] = c1.get(e, 0) + 1
        if 2 in sizes:
            for pr in itertools.combinations(M, 2):
                c2[pr] = c2.get(pr, 0) + 1
    f1 = max(c1.values()) / T
    f2 = max(c2.values()) / T if c2 else 0.0
    scale = n ** (1 / float(density_params(F).m1))
    fitted = max(f1 * scale, math.sqrt(f2) * scale)
    exceed = []
    if constant is not None:
        b = constant / scale
        for e, c in c1.items():
            p = c / T
            if p - 3 * math.sqrt(p * (1 - p) / T) > b:
                exceed.append({"event": [list(e)], "frequency": p})
        for pr, c in c2.items():
            p = c / T
            if p - 3 * math.sqrt(p * (1 - p) / T) > b * b:
                exceed.append({"event": [list(x) for x in pr], "frequency": p})
    a1 = max(c1, key=c1.get)
    a2 = max(c2, key=c2.get) if c2 else None
    return SpreadEstimate(T, f1, f2, constant, fitted, exceed, a1, a2)


def enumerate_perfect_matchings(H: Hypergraph) -> list[list[tuple[int, ...]]]:
    if H.n % H.k:
        return []
    solver = CoverSolver(H.edge_masks, H.n)
    return [sorted(tuple(vertices_of(b)) for b in sol) for sol in solver.enumerate((1 << H.n) - 1)]


class UniformPMSampler:
    """Exactly uniform perfect matchings, by enumerating them all once."""

    def __init__(self, H: Hypergraph, seed: int = 0):
        self.matchings = enumerate_perfect_matchings(H)
        if not self.matchings:
            raise ValueError("no perfect matching to sample")
        self.seed = seed

    def __call__(self, trial: int) -> list[tuple[int, ...]]:
        rng = trial_rng(self.seed, trial)
        return self.matchings[int(rng.integers(len(self.matchings)))]


class PipelineSampler:
    """Seeded cluster pipeline runs; returns the factor or the cluster map."""

    def __init__(self, H: Hypergraph, F: PatternGraph, P: VertexPartition, params: ClusterParams, seed: int = 0):
        self.H, self.F, self.P, self.params, self.seed = H, F, P, params, seed
        self.ctx = ClusterContext(H, F, P, params)

    def run(self, trial: int):
        s = int(np.random.SeedSequence(entropy=self.seed, spawn_key=(trial,)).generate_state(1, np.uint64)[0])
        return sample_f_factor(self.H, self.F, self.P, self.params, s, self.ctx)

    def factor(self, trial: int):
        out = self.run(trial)
        return out.factor.copies if out.success else None

    def placement(self, trial: int):
        out = self.run(trial)
        return None if out.plan is None else placement_of(out.plan, self.H.n)


def placement_of(plan, n: int) -> list[int]:
    """Cyclic position of every vertex after redistribution, before residue correction."""
    where = [0] * n
    for pos, idx in enumerate(plan.cyclic_order):
        for v in plan.raw_clusters[idx]:
            where[v] = pos
        a = plan.absorbed[pos]
        if a is not None:
            where[a] = pos
    return where


# -- threshold curves -------------------------------------------------------------

@dataclass
class CurvePoint:
    p: float
    trials: int
    successes: int
    lower: float
    upper: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials


def trial_seed(master: int, *key: int) -> int:
    return int(np.random.SeedSequence(entropy=int(master) & (2**64 - 1), spawn_key=key).generate_state(1, np.uint64)[0])


def mc_threshold(H: Hypergraph, grid: Sequence[float], trials: int, seed: int = 0, *,
                 threads: int = 1) -> list[CurvePoint]:
    """Empirical P[H_p has a perfect matching] with Wilson intervals, per p."""
    if not grid:
        raise ValueError("empty p grid")
    if any(not 0.0 <= p <= 1.0 for p in grid):
        raise ValueError("grid values must lie in [0, 1]")
    if trials < 1:
        raise ValueError("trials must be positive")
    full = (1 << H.n) - 1
    divisible = H.n % H.k == 0
    out = []
    for gi, p in enumerate(grid):
        def one(t, gi=gi, p=p):
            if not divisible:
                return False
            Hp = sparsify(H, p, trial_seed(seed, gi, t))
            return CoverSolver(Hp.edge_masks, H.n).exists(full)

        hits = sum(map_trials(one, trials, threads))
        lo, hi = wilson_interval(hits, trials)
        out.append(CurvePoint(float(p), trials, hits, lo, hi))
    return out


def curve_csv(points: Sequence[CurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "trials", "successes", "lower", "upper"])
    for pt in points:
        w.writerow([repr(pt.p), pt.trials, pt.successes, f"{pt.lower:.6f}", f"{pt.upper:.6f}"])
    return buf.getvalue()


def monotone_within(points: Sequence[CurvePoint], widths: float = 3.0) -> bool:
    """Each rate is at least the previous rate minus ``widths`` Wilson-interval widths."""
    for a, b in zip(points, points[1:]):
        slack = widths * max(a.upper - a.lower, b.upper - b.lower)
        if b.rate + slack < a.rate:
            return False
    return True


# -- inheritance by random subsets --------------------------------------------------

@dataclass
class InheritanceReport:
    prop: str
    subset_size: int
    trials: int
    failures: int
    lower: float
    upper: float
    bound: float | None
    constants: dict

    @property
    def rate(self) -> float:
        return self.failures / self.trials

    def as_json(self) -> dict:
        return dict(self.__dict__, rate=self.rate)


def subset_inheritance_test(H: Hypergraph, P: VertexPartition, prop: str, subset_size: int, trials: int,
                            seed: int = 0, *, F: PatternGraph | None = None, mu=Fraction(1, 1000),
                            gamma_prime=None, delta=None, ell: int | None = None,
                            beta_prime=None, t: int = 1, vertex: int = 0, vector=None) -> InheritanceReport:
    """Failure rate of an inherited property on uniform random subsets A of size ``subset_size``.

    prop: "codegree"      min ell-degree of H[A] >= (delta + gamma') C(|A|-ell, k-ell)
          "robust-copies" H[A] keeps >= gamma' |A|^r copies with index vector ``vector``
          "robust-links"  |F^mu(vertex, A)| >= gamma' |A|^(r-1)
          "reachability"  every part meets A in a (F, beta', t)-closed set of H[A]
    """
    n, k = H.n, H.k
    if not 0 < subset_size <= n:
        raise ValueError("subset size out of range")
    F = F or PatternGraph.single_edge(k)
    r = F.r
    ell = k - 1 if ell is None else ell
    sets = spanning_sets(H, F)
    rng = trial_rng(seed, 0)
    consts: dict = {}
    bound = None
    if prop == "codegree":
        full = min_degree(H, ell) / math.comb(n - ell, k - ell)
        delta = _rational(delta) if delta is not None else Fraction(0)
        gamma = Fraction(full).limit_denominator(10**9) - delta
        gp = gamma / 2 if gamma_prime is None else _rational(gamma_prime)
        need = (delta + gp) * math.comb(subset_size - ell, k - ell)
        consts = {"delta": str(delta), "gamma": str(gamma), "gamma_prime": str(gp)}

        def fails(A):
            sub, _ = H.induced(A)
            return min_degree(sub, ell) < need
    elif prop == "robust-copies":
        counts: dict = {}
        for S, c in sets.items():
            v = index_vector(P, S)
            counts[v] = counts.get(v, 0) + c
        if vector is None:
            vector = max(counts, key=counts.get)
        vector = tuple(vector)
        gamma = Fraction(counts.get(vector, 0), n ** r)
        gp = gamma / 2 if gamma_prime is None else _rational(gamma_prime)
        need = gp * subset_size ** r
        per = [(mask_of(S), c) for S, c in sets.items() if index_vector(P, S) == vector]
        bound = 2 * math.exp(-subset_size * float(gamma - gp) ** 2 / 2)
        consts = {"vector": list(vector), "gamma": str(gamma), "gamma_prime": str(gp)}

        def fails(A):
            am = mask_of(A)
            return sum(c for m, c in per if m & am == m) < need
    elif prop == "robust-links":
        prof = robust_profile(H, F, P, mu, sets=sets)
        gamma = Fraction(min(prof.link_counts), n ** (r - 1))
        gp = gamma / 2 if gamma_prime is None else _rational(gamma_prime)
        need = gp * subset_size ** (r - 1)
        rest = [mask_of(S) & ~(1 << vertex) for S in prof.robust_sets if vertex in S]
        bound = 2 * math.exp(-subset_size * float(gamma - gp) ** 2 / 2)
        consts = {"mu": str(_rational(mu)), "gamma": str(gamma), "gamma_prime": str(gp), "vertex": vertex}

        def fails(A):
            am = mask_of(A)
            return sum(1 for m in rest if m & ~am == 0) < need
    elif prop == "reachability":
        bp = Fraction(1, 1000) if beta_prime is None else _rational(beta_prime)
        consts = {"beta_prime": str(bp), "t": t}

        def fails(A):
            sub, labels = H.induced(A)
            need_ = threshold(bp, sub.n, t * r - 1)
            oracle = FactorOracle(sub, F)
            for part in P.project(labels).parts:
                for a, b in itertools.combinations(part, 2):
                    if reachable_count(sub, F, a, b, t, oracle) < need_:
                        return True
            return False
    else:
        raise ValueError(f"unknown property {prop!r}")
    bad = 0
    for _ in range(trials):
        A = sorted(int(x) for x in rng.choice(n, size=subset_size, replace=False))
        bad += bool(fails(A))
    lo, hi = wilson_interval(bad, trials)
    return InheritanceReport(prop, subset_size, trials, bad, lo, hi, bound, consts)
