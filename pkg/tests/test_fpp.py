import math

import numpy as np
import pytest

from critfpp.distributions import DegreeModel, Exponential, PowerNearZero, WeightModel
from critfpp.fpp import (
    assign_weights,
    brute_force_passage_time,
    flood,
    forward_degree_trace,
    grow_swg,
    passage_time,
    two_source_growth,
)
from critfpp.graphgen import HalfEdgeGraph, align_edge_values, configuration_model, match_half_edges

REG3 = DegreeModel.regular(3)
P24 = DegreeModel.from_pairs([[2, 0.5], [4, 0.5]])


def weighted(n, edges, weights):
    g = HalfEdgeGraph.from_edges(n, edges)
    return g, align_edge_values(g, edges, np.asarray(weights, dtype=float))


def boundary_by_scan(g, vertices):
    inside = np.zeros(g.n, bool)
    inside[vertices] = True
    out = set()
    for x in vertices:
        for y in g.neighbours(int(x)).tolist():
            if not inside[y]:
                out.add(y)
    return len(out)


class TestPassageTime:
    def test_triangle_detour(self):
        g, w = weighted(3, [(0, 1), (1, 2), (0, 2)], [1.0, 1.0, 3.0])
        r = passage_time(g, w, 0, 2)
        assert (r.T, r.H) == (2.0, 2)

    def test_tie_prefers_fewer_hops(self):
        g, w = weighted(3, [(0, 1), (1, 2), (0, 2)], [1.0, 1.0, 2.0])
        r = passage_time(g, w, 0, 2)
        assert (r.T, r.H) == (2.0, 1)

    def test_zero_weights(self):
        g, w = weighted(4, [(0, 1), (1, 2), (2, 3)], [0.0, 0.0, 0.0])
        r = passage_time(g, w, 0, 3)
        assert (r.T, r.H) == (0.0, 3)

    def test_disconnected(self):
        g, w = weighted(4, [(0, 1), (2, 3)], [1.0, 1.0])
        r = passage_time(g, w, 0, 3)
        assert r.T == math.inf and r.H is None and not r.connected

    def test_same_vertex(self):
        g, w = weighted(2, [(0, 1)], [1.0])
        assert passage_time(g, w, 1, 1).T == 0.0

    def test_parallel_edges_use_lightest(self):
        g, w = weighted(2, [(0, 1), (0, 1), (0, 0)], [5.0, 2.0, 0.0])
        assert passage_time(g, w, 0, 1).T == 2.0

    def test_weight_length_checked(self):
        g, _ = weighted(2, [(0, 1)], [1.0])
        with pytest.raises(ValueError):
            passage_time(g, np.ones(2), 0, 1)
        with pytest.raises(IndexError):
            passage_time(g, np.ones(1), 0, 5)

    def test_matches_brute_force(self, rng):
        w_model = WeightModel.critical(REG3, PowerNearZero(1.0))
        for _ in range(100):
            n = int(rng.integers(2, 8))
            degrees = rng.integers(1, 4, n)
            if degrees.sum() % 2:
                degrees[0] += 1
            g = match_half_edges(degrees, rng)
            w = assign_weights(g, w_model, rng)
            u, v = (int(x) for x in rng.choice(n, 2, replace=False))
            a, b = passage_time(g, w, u, v), brute_force_passage_time(g, w, u, v)
            assert (a.T, a.H) == (b.T, b.H)


class TestFlood:
    def test_agrees_with_pairwise(self, rng):
        g = configuration_model(P24, 300, rng)
        w = assign_weights(g, WeightModel.critical(P24, Exponential(1.0)), rng)
        f = flood(g, w, 0)
        for v in rng.choice(g.n, 20, replace=False):
            r = passage_time(g, w, 0, int(v))
            assert f.times[v] == r.T
            if r.connected:
                assert f.hops[v] == r.H

    def test_triangle_inequality(self, rng):
        g = configuration_model(REG3, 400, rng)
        w = assign_weights(g, WeightModel.critical(REG3, Exponential(1.0)), rng)
        d0, d1 = flood(g, w, 0).times, flood(g, w, 1).times
        ok = np.isfinite(d0) & np.isfinite(d1)
        assert np.all(d0[ok] <= d0[1] + d1[ok] + 1e-12)

    def test_unreachable(self):
        g, w = weighted(4, [(0, 1), (2, 3)], [1.0, 2.0])
        f = flood(g, w, 0)
        assert f.unreachable_count == 2
        assert f.max_time == 1.0


class TestSmallestWeightGraph:
    def test_star_from_centre(self):
        g, w = weighted(5, [(0, 1), (0, 2), (0, 3), (0, 4)], [0.2, 0.005, 0.08, 0.03])
        t = grow_swg(g, w, 0)
        assert t.vertices.tolist() == [0, 2, 4, 3, 1]
        np.testing.assert_allclose(t.arrival, [0.0, 0.005, 0.03, 0.08, 0.2])
        assert t.stop_reason == "exhausted"
        assert not t.collided

    def test_star_small_weight_boundary(self):
        g, w = weighted(5, [(0, 1), (0, 2), (0, 3), (0, 4)], [0.2, 0.005, 0.08, 0.03])
        t = grow_swg(g, w, 0, max_steps=1)
        assert t.boundary == 4
        assert t.eps_count.tolist() == [1, 2, 3]
        assert t.eps_degree.tolist() == [1, 2, 3]

    def test_all_zero_path_is_one_cluster(self):
        g, w = weighted(4, [(0, 1), (1, 2), (2, 3)], [0.0, 0.0, 0.0])
        t = grow_swg(g, w, 0)
        assert t.sigma.tolist() == [4]
        assert np.all(t.arrival == 0.0)
        assert t.cluster_sizes.tolist() == [4]

    def test_triangle_collides(self):
        g, w = weighted(3, [(0, 1), (1, 2), (0, 2)], [1.0, 1.0, 3.0])
        t = grow_swg(g, w, 0)
        assert t.collided
        assert t.r_col == 4
        assert t.stop_reason == "collision"

    def test_arrival_equals_flood(self, rng):
        g = configuration_model(P24, 2000, rng)
        w = assign_weights(g, WeightModel.critical(P24, PowerNearZero(1.0)), rng)
        t = grow_swg(g, w, 5, stop_at_collision=False)
        f = flood(g, w, 5)
        np.testing.assert_array_equal(t.arrival, f.times[t.vertices])
        assert np.all(np.diff(t.arrival) >= 0)
        assert t.size == f.reachable.sum()

    def test_sequences_monotone(self, rng):
        g = configuration_model(REG3, 5000, rng)
        w = assign_weights(g, WeightModel.critical(REG3, PowerNearZero(1.0)), rng)
        t = grow_swg(g, w, 0, max_steps=500, stop_at_collision=False)
        assert np.all(np.diff(t.r) > 0)
        assert np.all(t.r >= np.arange(1, t.size + 1))
        assert np.all(np.diff(t.sigma) > 0)
        assert np.unique(t.vertices).size == t.size

    def test_boundary_matches_scan(self, rng):
        g = configuration_model(P24, 3000, rng)
        w = assign_weights(g, WeightModel.critical(P24, PowerNearZero(1.0)), rng)
        for steps in (1, 10, 100, 400):
            t = grow_swg(g, w, 3, max_steps=steps, stop_at_collision=False)
            assert t.boundary == boundary_by_scan(g, t.vertices)

    def test_sigma_boundary_matches_scan(self, rng):
        g = configuration_model(REG3, 3000, rng)
        w = assign_weights(g, WeightModel.critical(REG3, PowerNearZero(1.0)), rng)
        t = grow_swg(g, w, 0, max_sigma_index=5, stop_at_collision=False)
        for ell in range(1, t.sigma.size + 1):
            inside = t.vertices[: t.sigma[ell - 1]]
            assert t.sigma_boundary[ell - 1] == boundary_by_scan(g, inside)

    def test_stop_rules(self, rng):
        g = configuration_model(REG3, 2000, rng)
        w = assign_weights(g, WeightModel.critical(REG3, Exponential(1.0)), rng)
        assert grow_swg(g, w, 0, max_steps=7, stop_at_collision=False).size == 7
        t = grow_swg(g, w, 0, max_time=0.5, stop_at_collision=False)
        assert t.stop_reason == "max_time" and np.all(t.arrival <= 0.5)
        assert grow_swg(g, w, 0, max_sigma_index=3, stop_at_collision=False).sigma.size == 3

    def test_forward_degrees_regular(self, rng):
        g = configuration_model(REG3, 10_000, rng)
        w = assign_weights(g, WeightModel.critical(REG3, PowerNearZero(1.0)), rng)
        t = grow_swg(g, w, 0, max_steps=50)
        assert np.all(forward_degree_trace(t, g) == 2)

    def test_to_dict(self, rng):
        g, w = weighted(3, [(0, 1), (1, 2)], [1.0, 2.0])
        d = grow_swg(g, w, 0).to_dict()
        assert d["vertices"] == [0, 1, 2]
        assert d["stop_reason"] == "exhausted"


class TestTwoSource:
    def test_same_zero_cluster_meets_immediately(self):
        g, w = weighted(4, [(0, 1), (1, 2), (2, 3)], [0.0, 0.0, 0.0])
        r = two_source_growth(g, w, 0, 3, steps=4)
        assert r.intersected
        assert r.passage.T == 0.0

    def test_separate_components_never_meet(self):
        edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]
        g, w = weighted(6, edges, [1.0, 2.0, 3.0, 1.0, 2.0, 3.0])
        r = two_source_growth(g, w, 0, 3, steps=3)
        assert not r.intersected
        assert r.passage.T == math.inf

    def test_large_graph_mostly_disjoint(self, rng):
        g = configuration_model(REG3, 10 ** 5, rng)
        w = assign_weights(g, WeightModel.critical(REG3, PowerNearZero(1.0)), rng)
        r = two_source_growth(g, w, 0, 1, steps=30)
        assert r.disjoint

    def test_sources_must_differ(self):
        g, w = weighted(2, [(0, 1)], [1.0])
        with pytest.raises(ValueError):
            two_source_growth(g, w, 0, 0, 1)
