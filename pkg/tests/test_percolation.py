import math

import numpy as np
import pytest

from critfpp.distributions import DegreeModel
from critfpp.graphgen import HalfEdgeGraph, configuration_model
from critfpp.percolation import (
    cluster_census,
    critical_window_p,
    isolated_path_census,
    percolate,
    write_census_csv,
)

REG3 = DegreeModel.regular(3)
P24 = DegreeModel.from_pairs([[2, 0.5], [4, 0.5]])


def union_find_sizes(n, u, v):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(u.tolist(), v.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    roots = [find(x) for x in range(n)]
    return sorted(np.bincount(roots, minlength=n)[np.unique(roots)].tolist(), reverse=True)


class TestPercolate:
    def test_extremes(self, rng):
        g = configuration_model(REG3, 100, rng)
        assert percolate(g, 1.0, rng).all()
        assert not percolate(g, 0.0, rng).any()

    def test_retained_fraction(self, rng):
        g = configuration_model(REG3, 20_000, rng)
        kept = percolate(g, 0.5, rng).sum()
        assert abs(kept - g.m / 2) < 4 * math.sqrt(g.m / 4)

    def test_bad_probability(self, rng):
        g = configuration_model(REG3, 10, rng)
        with pytest.raises(ValueError):
            percolate(g, 1.5, rng)

    def test_critical_window(self):
        assert critical_window_p(REG3, 1000) == 0.5
        assert critical_window_p(REG3, 1000, lam=1.0) == pytest.approx(0.6)
        assert critical_window_p(REG3, 1000, lam=-100.0) == 0.0


class TestCensus:
    def test_triangle_all_kept(self):
        g = HalfEdgeGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
        c = cluster_census(g, np.ones(3, bool))
        assert c.sizes.tolist() == [3]
        assert c.zero_edges.tolist() == [3]
        assert c.pos_stubs.tolist() == [0]

    def test_triangle_none_kept(self):
        g = HalfEdgeGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
        c = cluster_census(g, np.zeros(3, bool))
        assert c.sizes.tolist() == [1, 1, 1]
        assert c.pos_stubs.tolist() == [2, 2, 2]
        assert c.labels.tolist() == [0, 1, 2]

    def test_tie_break_by_smallest_vertex(self):
        g = HalfEdgeGraph.from_edges(4, [(2, 3), (0, 1)])
        c = cluster_census(g, np.ones(2, bool))
        assert c.labels.tolist() == [0, 0, 1, 1]

    def test_self_loop_counts_as_internal(self):
        g = HalfEdgeGraph.from_edges(2, [(0, 0), (0, 1)])
        c = cluster_census(g, np.array([True, False]))
        assert c.sizes.tolist() == [1, 1]
        assert c.zero_edges.tolist() == [1, 0]
        assert c.pos_stubs.tolist() == [1, 1]

    @pytest.mark.parametrize("p", [0.3, 0.5, 1.0])
    def test_matches_union_find(self, rng, p):
        g = configuration_model(P24, 3000, rng)
        mask = percolate(g, p, rng)
        c = cluster_census(g, mask)
        assert c.sizes.tolist() == union_find_sizes(g.n, g.edge_u[mask], g.edge_v[mask])

    def test_stub_identity(self, rng):
        g = configuration_model(REG3, 5000, rng)
        c = cluster_census(g, percolate(g, 0.5, rng))
        assert c.sizes.sum() == g.n
        assert np.all(c.pos_stubs + 2 * c.zero_edges == np.bincount(c.labels, weights=g.degrees))
        assert np.all(np.diff(c.sizes) <= 0)

    def test_vertex_survival_exact(self):
        g = HalfEdgeGraph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
        c = cluster_census(g, np.ones(3, bool))
        np.testing.assert_allclose(c.vertex_cluster_survival([1, 2, 3, 4]), [1.0, 1.0, 0.6, 0.0])

    def test_mask_length(self, rng):
        g = configuration_model(REG3, 10, rng)
        with pytest.raises(ValueError):
            cluster_census(g, np.ones(g.m + 1, bool))

    def test_rows_and_csv(self, tmp_path, rng):
        g = configuration_model(REG3, 200, rng)
        c = cluster_census(g, percolate(g, 0.5, rng))
        rows = list(c.rows(0, 0.0, limit=3))
        assert [r["rank"] for r in rows] == [1, 2, 3]
        path = tmp_path / "census.csv"
        write_census_csv(path, rows)
        assert path.read_text().splitlines()[0] == "replica,n,lambda,rank,size,zero_edges,pos_stubs"


class TestIsolatedPaths:
    def test_path_of_degree_two(self):
        # 0 - 1 - 2 - 3 - 4 with degree-3 endpoints held by extra loops
        edges = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 0), (4, 4)]
        g = HalfEdgeGraph.from_edges(5, edges)
        assert g.degrees.tolist() == [3, 2, 2, 2, 3]
        assert isolated_path_census(g) == 3

    def test_cycle_is_not_a_path(self):
        g = HalfEdgeGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
        assert isolated_path_census(g) == 0

    def test_no_degree_two(self, rng):
        g = configuration_model(REG3, 100, rng)
        assert isolated_path_census(g) == 0

    def test_single_vertex_chain(self):
        g = HalfEdgeGraph.from_edges(3, [(0, 1), (1, 2), (0, 0), (2, 2)])
        assert isolated_path_census(g) == 1
