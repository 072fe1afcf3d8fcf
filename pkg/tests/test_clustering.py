import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypermatch.clustering import (
    ClusterContext,
    ClusterParams,
    HallViolation,
    ResidueError,
    RobustLinks,
    auxiliary_digraph,
    bipartite_perfect_matching,
    choose_T,
    first_window,
    hamilton_cycle,
    hamilton_order,
    is_f_factor,
    pigeonhole_shrink,
    residue_correct,
    sample_clusters,
    sample_f_factor,
    semi_degree_ok,
    trial_rng,
    window_sizes,
)
from hypermatch.decision import PackingWitness
from hypermatch.hypergraph import PatternGraph, VertexPartition, complete_kgraph, divisibility_barrier, index_vector
from hypermatch.lattice import lattice_contains, lattice_from_generators
from hypermatch.robustness import robust_profile
from oracles import naive_hamilton

EDGE3 = PatternGraph.single_edge(3)
Z2 = lattice_from_generators([(3, 0), (1, 2)], 2)


def test_window_sizes():
    assert first_window(24, 12) == 24
    assert window_sizes(24, 12) == [24]
    assert window_sizes(60, 6) == [30] + [5] * 6
    assert window_sizes(25, 4) == [13, 3, 3, 3, 3]
    assert sum(window_sizes(200, 6)) == 200
    with pytest.raises(ValueError):
        window_sizes(10, 1)


@settings(max_examples=30)
@given(st.integers(12, 90), st.integers(3, 7), st.integers(0, 1000))
def test_sample_clusters_partition_vertices(n, C, seed):
    sizes = window_sizes(n, C)
    U = sample_clusters(n, C, np.random.default_rng(seed))
    assert [len(u) for u in U] == sizes
    assert sorted(v for u in U for v in u) == list(range(n))


def test_sample_clusters_uniform_first_member():
    hits = np.zeros(6)
    for s in range(3000):
        hits[sample_clusters(6, 2, np.random.default_rng(s))[1][0]] += 1
    # 3 sigma on each of 6 cells of a fair die
    assert np.all(np.abs(hits / 3000 - 1 / 6) < 3 * np.sqrt((1 / 6) * (5 / 6) / 3000))


def test_trial_rng_is_keyed():
    a = trial_rng(5, 1, 2).integers(1 << 30, size=4)
    b = trial_rng(5, 1, 2).integers(1 << 30, size=4)
    c = trial_rng(5, 2, 1).integers(1 << 30, size=4)
    assert (a == b).all() and not (a == c).all()


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.floats(0.2, 0.9), st.integers(0, 10_000))
def test_hamilton_cycle_matches_permutation_search(m, p, seed):
    rng = np.random.default_rng(seed)
    D = rng.random((m, m)) < p
    np.fill_diagonal(D, False)
    cyc = hamilton_cycle(D)
    assert (cyc is not None) == naive_hamilton(D)
    if cyc is not None:
        assert sorted(cyc) == list(range(m)) and cyc[0] == 0
        assert m == 1 or all(D[cyc[i], cyc[(i + 1) % m]] for i in range(m))
        o = hamilton_order(D)
        assert o[0] == 0 and (m == 1 or all(D[o[i], o[i - 1]] for i in range(m)))


def test_semi_degree():
    D = np.ones((4, 4), dtype=bool)
    np.fill_diagonal(D, False)
    assert semi_degree_ok(D)
    D[0, :] = False
    assert not semi_degree_ok(D)


def test_bipartite_matching_and_hall_violation():
    rng = np.random.default_rng(0)
    mate = bipartite_perfect_matching([[0, 1], [0], [1, 2]], 3, rng)
    assert mate == [1, 0, 2]
    with pytest.raises(HallViolation) as info:
        bipartite_perfect_matching([[0], [0], [1]], 2, rng)
    hv = info.value
    assert len(hv.vertices) > len(hv.neighbours)
    assert set(hv.vertices) == {0, 1} and hv.neighbours == [0]


def test_bipartite_matching_is_randomised():
    adj = [[0, 1, 2]] * 3
    seen = {tuple(bipartite_perfect_matching(adj, 3, np.random.default_rng(s))) for s in range(40)}
    assert len(seen) == 6


def test_pigeonhole_shrink_keeps_residue():
    vecs = [(0, 3), (0, 3), (2, 1), (3, 0), (0, 3)]
    keep = pigeonhole_shrink(vecs, Z2, 2)
    assert len(keep) <= 1
    total = [sum(vecs[i][j] for i in range(5)) for j in range(2)]
    part = [sum(vecs[i][j] for i in keep) for j in range(2)]
    assert lattice_contains(Z2, [a - b for a, b in zip(total, part)])
    with pytest.raises(ValueError):
        pigeonhole_shrink([(0, 3), (0, 3)], lattice_from_generators([(3, 0)], 2), 2)


def test_residue_correction_moves_one_set():
    P = VertexPartition.from_parts([range(6), range(6, 12)])
    clusters = [[0, 1, 6], [2, 3, 4, 5, 7, 8, 9, 10, 11]]
    assert not lattice_contains(Z2, index_vector(P, clusters[0]))
    Ts = [[0, 1, 6], [2, 3, 7, 8, 9, 10]]
    fixed, J = residue_correct(P, Z2, 3, clusters, Ts, 2)
    assert J[0] == [] and len(J[1]) == 3 and set(J[1]) <= set(Ts[1])
    # the moved set carries the same nonzero class as the first cluster's deficit
    assert not lattice_contains(Z2, index_vector(P, J[1]))
    assert all(lattice_contains(Z2, index_vector(P, U)) for U in fixed)
    assert sorted(v for U in fixed for v in U) == list(range(12))


def test_residue_correction_no_moves_when_aligned():
    P = VertexPartition.from_parts([range(6), range(6, 12)])
    clusters = [[0, 6, 7], [1, 2, 3, 4, 5, 8, 9, 10, 11]]
    fixed, J = residue_correct(P, Z2, 3, clusters, [[], [1, 2, 8, 9]], 2)
    assert J == [[], []] and fixed == [sorted(c) for c in clusters]


def test_residue_correction_errors():
    P = VertexPartition.from_parts([range(6), range(6, 12)])
    with pytest.raises(ResidueError):
        residue_correct(P, Z2, 3, [[0, 1, 6], [2, 3, 4, 5, 7, 8, 9, 10, 11]], [[], [2, 3, 4]], 2)
    P5 = VertexPartition.from_parts([range(5), range(5, 12)])
    with pytest.raises(ResidueError):
        residue_correct(P5, lattice_from_generators([(0, 3), (2, 1)], 2), 3, [list(range(12))], [[]], 2)


def test_choose_t_takes_earliest_per_part():
    P = VertexPartition.from_parts([range(4), range(4, 8)])
    Ts, ok = choose_T([[5, 0, 6, 1, 2, 7]], P, 1, 2)
    assert Ts == [[0, 1, 5, 6]] and ok == [True]
    Ts, ok = choose_T([[5, 6, 7, 0]], P, 1, 2)
    assert ok == [False]


def test_auxiliary_digraph_complete_for_clique():
    H = complete_kgraph(12, 3)
    P = VertexPartition.trivial(12)
    prof = robust_profile(H, EDGE3, P, Fraction(1, 1000))
    links = RobustLinks(prof, 12)
    assert links.count(0, (1 << 12) - 1) == 55
    clusters = [list(range(0, 6)), list(range(6, 9)), list(range(9, 12))]
    Ts, _ = choose_T(clusters, P, 3, 1)
    D = auxiliary_digraph(clusters, Ts, links, Fraction(1, 100), 3)
    assert D.sum() == 6 and not D.diagonal().any()


def test_default_q_is_coset_size():
    H = divisibility_barrier(12, 3, 6)
    P = VertexPartition.from_parts([range(6), range(6, 12)])
    ctx = ClusterContext(H, EDGE3, P, ClusterParams())
    assert ctx.Q.size == 2 and ctx.q == 2
    assert ctx.size_problem is not None
    assert ClusterContext(complete_kgraph(12, 3), EDGE3, VertexPartition.trivial(12), ClusterParams()).q == 1


def test_k24_pipeline_runs_are_reproducible():
    H, P = complete_kgraph(24, 3), VertexPartition.trivial(24)
    ctx = ClusterContext(H, EDGE3, P, ClusterParams())
    a = sample_f_factor(H, EDGE3, P, seed=3, ctx=ctx)
    b = sample_f_factor(H, EDGE3, P, seed=3, ctx=ctx)
    assert a.success and a.factor.copies == b.factor.copies
    assert is_f_factor(H, EDGE3, a.factor)
    assert {c["stage"] for c in a.plan.conservation} == {"raw", "redistributed", "corrected"}


def test_multi_cluster_pipeline():
    n = 60
    H, P = complete_kgraph(n, 3), VertexPartition.trivial(n)
    params = ClusterParams(C=6, allow_small_c=True)
    ctx = ClusterContext(H, EDGE3, P, params)
    for seed in range(3):
        out = sample_f_factor(H, EDGE3, P, params, seed, ctx)
        assert out.success, out.failure
        plan = out.plan
        assert plan.sizes_raw == [30] + [5] * 6
        assert len(plan.clusters) == len(plan.cyclic_order)
        assert all(len(U) % 3 == 0 for U in plan.clusters)
        assert sorted(v for U in plan.clusters for v in U) == list(range(n))
        assert all(c["holds"] for c in plan.conservation)
        assert is_f_factor(H, EDGE3, out.factor)


def test_small_c_is_refused_without_override():
    n = 60
    H, P = complete_kgraph(n, 3), VertexPartition.trivial(n)
    out = sample_f_factor(H, EDGE3, P, ClusterParams(C=6), 0)
    assert not out.success and out.failure["stage"] == "setup"


def test_barrier_fails_at_residue_stage():
    H = divisibility_barrier(12, 3, 5)
    P = VertexPartition.from_parts([range(5), range(5, 12)])
    out = sample_f_factor(H, EDGE3, P, ClusterParams(), 0)
    assert not out.success and out.failure["stage"] == "residue_correct"


def test_setup_errors_are_reported():
    out = sample_f_factor(complete_kgraph(12, 3), EDGE3, VertexPartition.trivial(12), ClusterParams(C=10), 0)
    assert out.failure["stage"] == "setup"


def test_is_f_factor_checks():
    H = complete_kgraph(6, 3)
    assert is_f_factor(H, EDGE3, PackingWitness([(0, 1, 2), (3, 4, 5)]))
    assert not is_f_factor(H, EDGE3, PackingWitness([(0, 1, 2)]))
    assert not is_f_factor(divisibility_barrier(6, 3, 3), EDGE3, PackingWitness([(0, 1, 2), (3, 4, 5)]))
