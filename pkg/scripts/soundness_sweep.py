"""Decision procedure at p=1 against exact matching counts on random and noisy-barrier 3-graphs."""
import argparse
import itertools
import json
from collections import Counter

import numpy as np

from hypermatch.decision import EdgeOracle, count_perfect_matchings, find_perfect_matching, procedure_perfect_matching
from hypermatch.hypergraph import Hypergraph, PatternGraph, VertexPartition, divisibility_barrier, min_degree, random_kgraph
from hypermatch.lattice import lattice_from_generators
from hypermatch.robustness import PartitionParams, RelocationError, build_partition, robust_profile

EDGE3 = PatternGraph.single_edge(3)


def lattice(H, P, mu):
    return lattice_from_generators(robust_profile(H, EDGE3, P, mu).robust_vectors, P.d)


def judge(H, P, mu, tally, label):
    out = procedure_perfect_matching(H, P, lattice(H, P, mu), EdgeOracle(H, 1.0, 0))
    if out.accepted:
        used = {v for e in out.matching for v in e}
        sub, _ = H.induced([v for v in range(H.n) if v not in used])
        ok = find_perfect_matching(sub) is not None
    else:
        ok = count_perfect_matchings(H) == 0
    tally[(label, out.verdict, "ok" if ok else "VIOLATION")] += 1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--graphs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    rng = np.random.Generator(np.random.PCG64(args.seed))
    tally = Counter()
    mu = PartitionParams().mu
    for n, density in ((9, 0.8), (12, 0.72)):
        done = 0
        while done < args.graphs // 2:
            H = random_kgraph(n, 3, density, rng)
            if min_degree(H, 2) < n / 3 + 1:
                continue
            done += 1
            try:
                GP = build_partition(H, EDGE3)
                judge(H, GP.partition, GP.mu * 2, tally, f"random n={n}")
            except RelocationError:
                tally[(f"random n={n}", "build-failed", "-")] += 1
    for _ in range(args.graphs):
        n = int(rng.choice([9, 12]))
        x = int(rng.choice([3, 5] if n == 9 else [3, 5, 7]))
        odd = [e for e in itertools.combinations(range(n), 3) if sum(v < x for v in e) % 2]
        extra = [odd[i] for i in rng.choice(len(odd), int(rng.integers(0, 4)), replace=False)]
        H = Hypergraph(3, n, list(divisibility_barrier(n, 3, x).edge_list) + extra)
        judge(H, VertexPartition.from_parts([range(x), range(x, n)]), mu, tally, "noisy barrier")
    print(json.dumps({" / ".join(k): v for k, v in sorted(tally.items())}, indent=2))


if __name__ == "__main__":
    main()
