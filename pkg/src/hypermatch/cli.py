"""Command-line entry point: ``hypermatch <subcommand> ...``."""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import ClusterParams
from .decision import EdgeOracle, count_perfect_matchings, density_params, find_perfect_matching, procedure_perfect_matching
from .experiments import (
    PipelineSampler,
    curve_csv,
    estimate_factor_spread,
    estimate_vertex_spread,
    map_trials,
    mc_threshold,
    placement_of,
)
from .hypergraph import (
    HypergraphFormatError,
    PatternGraph,
    VertexPartition,
    complete_kgraph,
    cycle_graph,
    degree_sequence,
    divisibility_barrier,
    index_vector,
    min_degree,
    parse_hypergraph,
    parse_partition,
    random_kgraph,
    serialize_hypergraph,
    serialize_partition,
)
from .lattice import coset_group, lattice_contains, lattice_from_generators, residue
from .robustness import (
    GoodPartition,
    PartitionParams,
    RelocationError,
    build_partition,
    robust_profile,
    verify_partition,
)

SCHEMA_VERSION = 1
THREADS_ENV = "HYPERMATCH_THREADS"


class UsageError(Exception):
    pass


class DomainError(Exception):
    pass


def _frac(text: str) -> Fraction:
    try:
        x = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")
    if x <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return x


def _prob(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"probability outside [0, 1]: {text}")
    return p


def _seed(text: str) -> int:
    s = int(text)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return s


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _pattern(text: str, k: int) -> PatternGraph:
    if text == "edge":
        return PatternGraph.single_edge(k)
    kind, _, size = text.partition(":")
    if kind in ("clique", "path") and size.isdigit():
        if k != 2:
            raise UsageError(f"{kind} patterns are graphs (k = 2), host has k = {k}")
        r = int(size)
        return PatternGraph.clique(r) if kind == "clique" else PatternGraph.path(r)
    raise UsageError(f"unknown pattern {text!r} (use edge, clique:R, path:R)")


# -- io ------------------------------------------------------------------------

def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")


def _load_graph(path: str):
    try:
        return parse_hypergraph(_read(path))
    except HypergraphFormatError as exc:
        raise DomainError(f"{path}: {exc}")


def atomic_write(path: str, text: str) -> None:
    """Write to a temporary file in the target directory, then rename over the target."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serialisable: {type(x).__name__}")


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def emit(args, result: dict, started: float) -> None:
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": "hypermatch",
        "version": __version__,
        "subcommand": args.command,
        "config": _config(args),
        "result": result,
        # everything run-dependent lives under this one key
        "timestamp": {
            "utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "wall_seconds": round(time.perf_counter() - started, 6),
        },
    }
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if getattr(args, "output", None):
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)


def _partition_params(args) -> PartitionParams:
    return PartitionParams(alpha=args.alpha, beta1=args.beta, mu=args.mu, eps=args.eps,
                           eta2=args.eta2, rho=args.rho, min_part_fraction=args.c,
                           reach_mode=args.reach_mode)


def _get_partition(args, H, F):
    if getattr(args, "partition", None):
        try:
            return parse_partition(_read(args.partition), H.n), None
        except ValueError as exc:
            raise DomainError(f"{args.partition}: {exc}")
    try:
        GP = build_partition(H, F, _partition_params(args))
    except RelocationError as exc:
        raise DomainError(f"partition construction failed at vertex {exc.vertex}: {exc}")
    return GP.partition, GP


# -- subcommands -------------------------------------------------------------------

def cmd_gen(args, started):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed)))
    if args.kind == "complete":
        H = complete_kgraph(args.n, args.k)
    elif args.kind == "barrier":
        if args.x is None:
            raise UsageError("--x is required for a barrier")
        H = divisibility_barrier(args.n, args.k, args.x)
    elif args.kind == "random":
        H = random_kgraph(args.n, args.k, args.density, rng)
    elif args.kind == "cycle":
        H = cycle_graph(args.n)
    else:
        raise UsageError(f"unknown kind {args.kind}")
    text = serialize_hypergraph(H)
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_analyze(args, started):
    H = _load_graph(args.input)
    degs = degree_sequence(H)
    result = {
        "n": H.n, "k": H.k, "edges": H.num_edges,
        "min_degrees": {str(l): min_degree(H, l) for l in range(1, H.k) if H.n >= l},
        "codegree": min_degree(H, H.k - 1) if H.n >= H.k - 1 else None,
        "degree_min": min(degs) if degs else 0,
        "degree_max": max(degs) if degs else 0,
        "k_divides_n": H.n % H.k == 0,
    }
    emit(args, result, started)
    return 0


def cmd_partition(args, started):
    H = _load_graph(args.input)
    F = _pattern(args.pattern, H.k)
    P, GP = _get_partition(args, H, F)
    if GP is None:
        # a supplied partition is checked against the command-line constants
        GP = GoodPartition(P, args.beta, args.t, _partition_params(args).part_fraction(H.k), args.mu, args.eps)
    rep = verify_partition(H, F, GP, t=args.t, mode=args.mode, seed=args.seed)
    if args.partition_output:
        atomic_write(args.partition_output, serialize_partition(P))
    emit(args, {"partition": GP.as_json(), "verification": rep.as_json()}, started)
    return 0


def cmd_lattice(args, started):
    H = _load_graph(args.input)
    F = _pattern(args.pattern, H.k)
    P, _ = _get_partition(args, H, F)
    prof = robust_profile(H, F, P, args.mu)
    L = lattice_from_generators(prof.robust_vectors, P.d)
    Q = coset_group(L, F.r)
    total = index_vector(P, range(H.n))
    result = {
        "partition": list(P.assignment),
        "robust": prof.as_json(),
        "lattice": L.as_json(),
        "coset_group": Q.as_json(),
        "index_vector": list(total),
        "index_vector_in_lattice": lattice_contains(L, total),
        "residue": list(residue(Q, total)) if sum(total) % F.r == 0 else None,
    }
    emit(args, result, started)
    return 0


def cmd_decide(args, started):
    H = _load_graph(args.input)
    if H.n % H.k:
        raise DomainError(f"k = {H.k} does not divide n = {H.n}")
    F = PatternGraph.single_edge(H.k)
    P, _ = _get_partition(args, H, F)
    prof = robust_profile(H, F, P, args.mu)
    L = lattice_from_generators(prof.robust_vectors, P.d)
    oracle = EdgeOracle(H, args.p, args.seed)
    t0 = time.perf_counter()
    out = procedure_perfect_matching(H, P, L, oracle, eta=args.eta, extend=args.extend)
    result = out.as_json()
    result["partition"] = list(P.assignment)
    result["lattice"] = L.as_json()
    result["coset_group"] = coset_group(L, H.k).as_json()
    if args.verify_with_oracle:
        Hp = oracle.reveal_all()
        result["oracle_has_perfect_matching"] = find_perfect_matching(Hp) is not None
    emit(args, result, started)
    return 0


def cmd_count(args, started):
    H = _load_graph(args.input)
    result = {"perfect_matchings": count_perfect_matchings(H), "k_divides_n": H.n % H.k == 0}
    emit(args, result, started)
    return 0


def cmd_mc(args, started):
    H = _load_graph(args.input)
    try:
        grid = [_prob(x) for x in args.grid.split(",") if x.strip()]
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc))
    if not grid:
        raise UsageError("empty --grid")
    pts = mc_threshold(H, grid, args.trials, args.seed, threads=args.threads)
    if args.csv:
        atomic_write(args.csv, curve_csv(pts))
    emit(args, {"curve": [dict(p=p.p, trials=p.trials, successes=p.successes, lower=p.lower, upper=p.upper)
                          for p in pts]}, started)
    return 0


def cmd_cluster_sim(args, started):
    H = _load_graph(args.input)
    F = _pattern(args.pattern, H.k)
    P, _ = _get_partition(args, H, F)
    params = ClusterParams(C=args.C, q=args.q, mu=args.mu, eps=args.eps, beta=args.beta,
                           gamma=args.gamma, check_closedness=not args.skip_closedness,
                           retries=args.retries, allow_small_c=args.allow_small_c)
    try:
        sampler = PipelineSampler(H, F, P, params, args.seed)
    except ValueError as exc:
        raise DomainError(str(exc))
    runs = map_trials(sampler.run, args.trials, args.threads)
    failures: dict[str, int] = {}
    for r in runs:
        if not r.success:
            stage = r.failure.get("stage", "unknown")
            failures[stage] = failures.get(stage, 0) + 1
    result = {"trials": args.trials, "successes": sum(r.success for r in runs), "failures": failures,
              "q": sampler.ctx.q, "coset_group": sampler.ctx.Q.as_json(),
              "first_run": runs[0].as_json() if runs else None}
    if args.spread and any(r.success for r in runs):
        cache = {t: r for t, r in enumerate(runs)}
        fac = estimate_factor_spread(lambda t: cache[t].factor.copies if cache[t].success else None,
                                     F, H.n, args.trials)
        result["factor_spread"] = fac.as_json()
        planned = [r for r in runs if r.plan is not None]
        m = max(len(r.plan.cyclic_order) for r in planned)
        ver = estimate_vertex_spread(lambda t: placement_of(planned[t].plan, H.n), H.n, m, len(planned))
        result["vertex_spread"] = ver.as_json()
    emit(args, result, started)
    return 0 if result["successes"] else 1


# -- parser ------------------------------------------------------------------------

def _add_constants(p):
    p.add_argument("--pattern", default="edge", help="edge | clique:R | path:R")
    p.add_argument("--partition", help="partition file; built from the graph when omitted")
    p.add_argument("--mu", type=_frac, default=Fraction(1, 1000))
    p.add_argument("--eps", type=_frac, default=Fraction(1, 100))
    p.add_argument("--alpha", type=_frac, default=Fraction(1, 10))
    p.add_argument("--beta", type=_frac, default=Fraction(1, 1000))
    p.add_argument("--eta2", type=_frac, default=Fraction(1, 100))
    p.add_argument("--rho", type=_frac, default=Fraction(1, 2))
    p.add_argument("--c", type=_frac, default=None, help="minimum part fraction (default 1/(2k))")
    p.add_argument("--gamma", type=_frac, default=Fraction(1, 20))
    p.add_argument("--reach-mode", choices=["exact", "lo-markstrom"], default="exact")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypermatch", description="Perfect matchings and factors in dense hypergraphs.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a hypergraph")
    g.add_argument("--kind", choices=["complete", "barrier", "random", "cycle"], required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--x", type=int)
    g.add_argument("--density", type=_prob, default=0.5)
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--output")
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("analyze", help="degree statistics")
    a.add_argument("--input", required=True)
    a.add_argument("--output")
    a.set_defaults(func=cmd_analyze)

    p = sub.add_parser("partition", help="build and verify a good partition")
    p.add_argument("--input", required=True)
    _add_constants(p)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--mode", choices=["auto", "exhaustive", "sampled"], default="auto")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--partition-output")
    p.add_argument("--output")
    p.set_defaults(func=cmd_partition)

    la = sub.add_parser("lattice", help="robust vectors, lattice and coset group")
    la.add_argument("--input", required=True)
    _add_constants(la)
    la.add_argument("--output")
    la.set_defaults(func=cmd_lattice)

    d = sub.add_parser("decide", help="run the sparsified perfect-matching decision procedure")
    d.add_argument("--input", required=True)
    _add_constants(d)
    d.add_argument("--p", type=_prob, default=1.0)
    d.add_argument("--seed", type=_seed, default=0)
    d.add_argument("--eta", type=_frac, default=Fraction(1, 5000))
    d.add_argument("--extend", action=argparse.BooleanOptionalAction, default=True)
    d.add_argument("--verify-with-oracle", action="store_true")
    d.add_argument("--output")
    d.set_defaults(func=cmd_decide)

    c = sub.add_parser("count", help="exact number of perfect matchings")
    c.add_argument("--input", required=True)
    c.add_argument("--output")
    c.set_defaults(func=cmd_count)

    m = sub.add_parser("mc", help="Monte Carlo threshold curve")
    m.add_argument("--input", required=True)
    m.add_argument("--grid", default="0,0.02,0.05,0.1,0.2,0.5,1")
    m.add_argument("--trials", type=int, default=500)
    m.add_argument("--seed", type=_seed, default=0)
    m.add_argument("--threads", type=int, default=_default_threads())
    m.add_argument("--csv")
    m.add_argument("--output")
    m.set_defaults(func=cmd_mc)

    cs = sub.add_parser("cluster-sim", help="sample factors through the random cluster pipeline")
    cs.add_argument("--input", required=True)
    _add_constants(cs)
    cs.add_argument("--C", type=int, default=12)
    cs.add_argument("--q", type=int)
    cs.add_argument("--trials", type=int, default=10)
    cs.add_argument("--seed", type=_seed, default=0)
    cs.add_argument("--retries", type=int, default=100)
    cs.add_argument("--allow-small-c", action="store_true")
    cs.add_argument("--skip-closedness", action="store_true")
    cs.add_argument("--spread", action="store_true")
    cs.add_argument("--threads", type=int, default=_default_threads())
    cs.add_argument("--output")
    cs.set_defaults(func=cmd_cluster_sim)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        if getattr(args, "trials", 1) is not None and getattr(args, "trials", 1) < 1:
            raise UsageError("--trials must be positive")
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be positive")
        return args.func(args, started)
    except UsageError as exc:
        print(f"hypermatch {args.command}: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ValueError) as exc:
        print(f"hypermatch {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
