"""Edge and vertex spread of the cluster pipeline on K_n^(3), next to the uniform sampler."""
import argparse
import json

from hypermatch.clustering import ClusterParams
from hypermatch.experiments import (
    PipelineSampler,
    UniformPMSampler,
    estimate_factor_spread,
    estimate_vertex_spread,
    placement_of,
)
from hypermatch.hypergraph import PatternGraph, VertexPartition, complete_kgraph

EDGE3 = PatternGraph.single_edge(3)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=24)
    ap.add_argument("--C", type=int, default=12)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--allow-small-c", action="store_true")
    args = ap.parse_args()
    H, P = complete_kgraph(args.n, 3), VertexPartition.trivial(args.n)
    s = PipelineSampler(H, EDGE3, P, ClusterParams(C=args.C, allow_small_c=args.allow_small_c), args.seed)
    runs = [s.run(t) for t in range(args.trials)]
    ok = [r for r in runs if r.success]
    report = {"n": args.n, "C": args.C, "trials": args.trials, "successes": len(ok)}
    if ok:
        report["pipeline_edge_spread"] = estimate_factor_spread(
            lambda t: ok[t].factor.copies, EDGE3, args.n, len(ok)).as_json()
        m = max(len(r.plan.cyclic_order) for r in ok)
        report["pipeline_vertex_spread"] = estimate_vertex_spread(
            lambda t: placement_of(ok[t].plan, args.n), args.n, m, len(ok)).as_json()
    if args.n <= 12:
        report["uniform_edge_spread"] = estimate_factor_spread(
            UniformPMSampler(H, args.seed), EDGE3, args.n, args.trials).as_json()
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
