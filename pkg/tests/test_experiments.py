import math
from fractions import Fraction

import pytest

from hypermatch.clustering import ClusterParams, trial_rng
from hypermatch.experiments import (
    CurvePoint,
    PipelineSampler,
    UniformPMSampler,
    curve_csv,
    enumerate_perfect_matchings,
    estimate_factor_spread,
    estimate_vertex_spread,
    map_trials,
    mc_threshold,
    monotone_within,
    subset_inheritance_test,
    wilson_interval,
)
from hypermatch.hypergraph import PatternGraph, VertexPartition, complete_kgraph, divisibility_barrier
from oracles import pm_count_formula

EDGE3 = PatternGraph.single_edge(3)


def test_wilson_interval():
    lo, hi = wilson_interval(5, 10)
    assert lo == pytest.approx(1 - hi) and lo < 0.5 < hi
    assert wilson_interval(0, 20)[0] == 0.0
    assert wilson_interval(20, 20)[1] == 1.0
    # textbook value for 8/10 at 95%
    lo, hi = wilson_interval(8, 10)
    assert lo == pytest.approx(0.4902, abs=1e-4) and hi == pytest.approx(0.9433, abs=1e-4)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_map_trials_order_independent_of_threads():
    f = lambda t: int(trial_rng(1, t).integers(1000))  # noqa: E731
    assert map_trials(f, 50, 1) == map_trials(f, 50, 4)


def test_mc_threshold_reproducible_and_thread_invariant():
    H = complete_kgraph(9, 3)
    a = mc_threshold(H, [0.0, 0.3, 1.0], 60, seed=2)
    b = mc_threshold(H, [0.0, 0.3, 1.0], 60, seed=2, threads=3)
    assert [p.successes for p in a] == [p.successes for p in b]
    assert a[0].successes == 0 and a[-1].successes == 60
    assert all(p.lower <= p.rate <= p.upper for p in a)


def test_mc_threshold_validation_and_indivisible_n():
    H = complete_kgraph(7, 3)
    assert mc_threshold(H, [1.0], 5)[0].successes == 0
    with pytest.raises(ValueError):
        mc_threshold(H, [], 5)
    with pytest.raises(ValueError):
        mc_threshold(H, [1.5], 5)
    with pytest.raises(ValueError):
        mc_threshold(H, [0.5], 0)


def test_curve_csv_columns():
    pts = [CurvePoint(0.5, 10, 5, 0.2, 0.8)]
    text = curve_csv(pts)
    assert text.splitlines()[0] == "p,trials,successes,lower,upper"
    assert text.splitlines()[1] == "0.5,10,5,0.200000,0.800000"


def test_monotone_within():
    up = [CurvePoint(p, 100, s, *wilson_interval(s, 100)) for p, s in [(0.1, 10), (0.2, 50), (0.3, 90)]]
    assert monotone_within(up)
    down = [CurvePoint(0.1, 1000, 900, *wilson_interval(900, 1000)),
            CurvePoint(0.2, 1000, 100, *wilson_interval(100, 1000))]
    assert not monotone_within(down)


def test_uniform_sampler_enumerates_all():
    H = complete_kgraph(6, 3)
    assert len(enumerate_perfect_matchings(H)) == pm_count_formula(6, 3)
    s = UniformPMSampler(H, seed=1)
    counts = {}
    for t in range(2000):
        key = tuple(s(t))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 10
    chi2 = sum((c - 200) ** 2 / 200 for c in counts.values())
    assert chi2 < 27.88  # 0.999 quantile, 9 degrees of freedom
    with pytest.raises(ValueError):
        UniformPMSampler(divisibility_barrier(6, 3, 3))


def test_factor_spread_on_uniform_matchings():
    H = complete_kgraph(6, 3)
    est = estimate_factor_spread(UniformPMSampler(H, seed=2), EDGE3, 6, 3000)
    # every edge lies in exactly one of the ten matchings
    assert abs(est.max_single_frequency - 0.1) < 4 * math.sqrt(0.09 / 3000)
    assert est.max_pair_frequency == pytest.approx(est.max_single_frequency, abs=0.02)
    assert est.fitted_constant == pytest.approx(36 * math.sqrt(est.max_pair_frequency))
    tight = estimate_factor_spread(UniformPMSampler(H, seed=2), EDGE3, 6, 3000, constant=1.0)
    assert tight.exceedances


def test_vertex_spread_on_uniform_placement():
    n, m, T = 8, 4, 4000

    def sampler(t):
        return [int(x) for x in trial_rng(3, t).integers(m, size=n)]

    est = estimate_vertex_spread(sampler, n, m, T)
    assert est.trials == T
    assert abs(est.max_single_frequency - 1 / m) < 4 * math.sqrt(0.25 * 0.75 / T) + 0.01
    assert est.fitted_constant >= n * est.max_single_frequency
    assert estimate_vertex_spread(sampler, n, m, T, constant=1.0).exceedances
    assert not estimate_vertex_spread(sampler, n, m, T, constant=float(n)).exceedances


def test_vertex_spread_skips_failures():
    est = estimate_vertex_spread(lambda t: None if t % 2 else [0, 1], 2, 2, 10)
    assert est.trials == 5 and est.max_single_frequency == 1.0
    with pytest.raises(RuntimeError):
        estimate_vertex_spread(lambda t: None, 2, 2, 3)


def test_pipeline_sampler_on_k24():
    H, P = complete_kgraph(24, 3), VertexPartition.trivial(24)
    s = PipelineSampler(H, EDGE3, P, ClusterParams(), seed=4)
    M = s.factor(0)
    assert M is not None and sorted(v for e in M for v in e) == list(range(24))
    assert s.placement(0) == [0] * 24
    est = estimate_factor_spread(s.factor, EDGE3, 24, 20)
    assert est.trials == 20


@pytest.mark.parametrize("prop", ["codegree", "robust-copies", "robust-links", "reachability"])
def test_inheritance_on_complete_graph(prop):
    H = complete_kgraph(12, 3)
    rep = subset_inheritance_test(H, VertexPartition.trivial(12), prop, 9, 10, seed=1)
    assert rep.trials == 10 and rep.failures == 0 and rep.prop == prop
    assert rep.lower == 0.0


def test_inheritance_detects_strict_requirement():
    H = divisibility_barrier(12, 3, 6)
    P = VertexPartition.from_parts([range(6), range(6, 12)])
    rep = subset_inheritance_test(H, P, "robust-copies", 6, 40, seed=0, vector=(2, 1),
                                  gamma_prime=Fraction(1, 2))
    assert rep.failures == 40
    ok = subset_inheritance_test(H, P, "reachability", 9, 10, seed=0)
    assert ok.failures == 0
    with pytest.raises(ValueError):
        subset_inheritance_test(H, P, "other", 6, 1)
    with pytest.raises(ValueError):
        subset_inheritance_test(H, P, "codegree", 13, 1)
