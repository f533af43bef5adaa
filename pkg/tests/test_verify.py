import numpy as np
import pytest

from normforge import (CutFunction, SumNorm, apply_weights, empirical_eps,
                       exact_cut_eps, seminorm_suite)
from normforge.norms import Linear

from conftest import complete_graph_edges, graph_norm, l1_norm


class TestEmpiricalEps:
    def test_identity_gives_zero(self, rng):
        N = l1_norm(4)
        rep = empirical_eps(N, N, probes=2000, rng=rng, epsilon=0.1)
        assert rep.max_rel_err == 0.0
        assert rep.passed

    def test_uniform_inflation_measured_exactly(self, rng):
        N = graph_norm(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0)])
        delta = 0.17
        Nt = apply_weights(N, np.full(3, 1.0 + delta))
        rep = empirical_eps(N, Nt, probes=1000, rng=rng)
        assert rep.max_rel_err == pytest.approx(delta, abs=1e-12)

    def test_dropped_orthogonal_term(self, rng):
        N = SumNorm(2, 1.0, (Linear([1.0, 0.0]), Linear([0.0, 1.0])))
        Nt = apply_weights(N, [1.0, 0.0])
        rep = empirical_eps(N, Nt, probes=400, rng=rng)
        assert rep.max_rel_err == pytest.approx(1.0)

    def test_mismatched_shapes_rejected(self, rng):
        with pytest.raises(ValueError):
            empirical_eps(l1_norm(2), l1_norm(3), probes=10, rng=rng)

    def test_determinism(self):
        N = l1_norm(3)
        Nt = apply_weights(N, [1.0, 0.5, 2.0])
        a = empirical_eps(N, Nt, probes=500, rng=np.random.default_rng(5))
        b = empirical_eps(N, Nt, probes=500, rng=np.random.default_rng(5))
        assert a.max_rel_err == b.max_rel_err
        assert a.argmax_probe == b.argmax_probe


class TestExactCutEps:
    def test_all_ones_weights(self):
        F = CutFunction(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.5)])
        rep = exact_cut_eps(F, np.ones(3))
        assert rep.max_rel_err == 0.0
        assert rep.exact

    def test_triangle_hand_computed(self):
        # cuts of K3 all separate exactly two edges; weights (3/2, 3/2, 0)
        # give cut values (3, 3/2, 3/2) against (2, 2, 2): worst error 1/2
        F = CutFunction(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])
        rep = exact_cut_eps(F, np.array([1.5, 1.5, 0.0]))
        assert rep.max_rel_err == pytest.approx(0.5)

    def test_zero_consistency_violation_reported(self):
        # disconnected pair: the cut separating {0,1} from {2,3} has F = 0;
        # a component list with mass across that cut is inconsistent
        F = CutFunction(4, [(0, 1, 1.0), (2, 3, 1.0)])
        assert exact_cut_eps(F, np.array([2.0, 3.0])).zero_violations == 0
        phantom = [CutFunction(4, [(0, 1, 1.0)]),
                   CutFunction(4, [(2, 3, 1.0)]),
                   CutFunction(4, [(1, 2, 1.0)])]
        rep = exact_cut_eps(F, np.array([1.0, 1.0, 0.5]), components=phantom)
        assert rep.zero_violations > 0
        assert not rep.passed

    def test_component_functions_match_edge_decomposition(self):
        edges = [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5)]
        F = CutFunction(3, edges)
        w = np.array([1.1, 0.9, 1.3])
        by_edges = exact_cut_eps(F, w)
        by_funcs = exact_cut_eps(F, w, components=[CutFunction(3, [e]) for e in edges])
        assert by_funcs.max_rel_err == pytest.approx(by_edges.max_rel_err, rel=1e-12)

    def test_enumeration_guard(self):
        F = CutFunction(21, [(0, 1, 1.0)])
        with pytest.raises(ValueError, match="n <= 20"):
            exact_cut_eps(F, np.ones(1))

    def test_weight_length_checked(self):
        F = CutFunction(3, [(0, 1, 1.0)])
        with pytest.raises(ValueError):
            exact_cut_eps(F, np.ones(2))

    def test_counts_all_nontrivial_cuts(self):
        F = CutFunction(5, [(0, 1, 1.0)])
        rep = exact_cut_eps(F, np.ones(1))
        assert rep.probe_counts["cuts"] == 2 ** 4 - 1


def test_empirical_with_indicators_lower_bounds_exact(rng):
    n = 8
    edges = complete_graph_edges(n)
    N = graph_norm(n, edges)
    g = np.random.default_rng(0)
    w = g.random(len(edges)) * 2.0
    Nt = apply_weights(N, w)
    F = CutFunction(n, edges)
    exact = exact_cut_eps(F, w)
    indicators = ((np.arange(1, 2 ** (n - 1), dtype=np.uint64)[:, None]
                   >> np.arange(n, dtype=np.uint64)[None, :]) & 1).astype(float)
    emp = empirical_eps(N, Nt, probes=1000, rng=rng, mu_samples=indicators)
    assert emp.max_rel_err <= exact.max_rel_err + 1e-12
    assert emp.max_rel_err == pytest.approx(exact.max_rel_err, rel=1e-9)


def test_seminorm_suite_pass_and_fail(rng):
    assert seminorm_suite(l1_norm(4), trials=400, rng=rng)["passed"]
    report = seminorm_suite(graph_norm(3, [(0, 1, 1.0), (1, 2, 0.5)], p=2.0),
                            trials=400, rng=np.random.default_rng(2))
    assert report["passed"]
