"""Bond percolation on half-edge graphs and the resulting cluster census."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .distributions import DegreeModel
from .graphgen import HalfEdgeGraph


def percolate(g: HalfEdgeGraph, p: float, rng: np.random.Generator) -> np.ndarray:
    """Keep each edge independently with probability ``p``; returns a boolean mask."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be a probability")
    return rng.random(g.m) < p


def critical_window_p(degree: DegreeModel, n: int, lam: float = 0.0) -> float:
    """``p = 1/nu + lam * n^{-1/3}`` clipped to [0, 1]."""
    return float(min(max(degree.p_c + lam * n ** (-1.0 / 3.0), 0.0), 1.0))


def _components(n: int, u: np.ndarray, v: np.ndarray) -> tuple[int, np.ndarray]:
    adj = coo_matrix((np.ones(u.size, dtype=np.int8), (u, v)), shape=(n, n))
    return connected_components(adj, directed=False)


@dataclass(frozen=True)
class ClusterCensus:
    """Clusters ranked by size (descending), ties broken by smallest vertex id.

    ``labels[v]`` is the rank of the cluster containing ``v``.
    """

    sizes: np.ndarray
    zero_edges: np.ndarray
    pos_stubs: np.ndarray
    labels: np.ndarray

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def largest(self) -> int:
        return int(self.sizes[0])

    @property
    def largest_pos_stubs(self) -> int:
        return int(self.pos_stubs[0])

    def vertex_cluster_survival(self, m) -> np.ndarray:
        """Exact ``P(|C(U)| >= m)`` for a uniform vertex ``U`` of this graph."""
        m = np.atleast_1d(np.asarray(m))
        order = np.sort(self.sizes)
        mass = np.cumsum(order[::-1])[::-1]  # mass of clusters with size >= order[i]
        idx = np.searchsorted(order, m, side="left")
        out = np.zeros(m.shape)
        ok = idx < order.size
        out[ok] = mass[idx[ok]] / self.n
        return out

    def rows(self, replica: int, lam: float, limit: int | None = None):
        k = self.sizes.size if limit is None else min(limit, self.sizes.size)
        for r in range(k):
            yield {"replica": replica, "n": self.n, "lambda": lam, "rank": r + 1,
                   "size": int(self.sizes[r]), "zero_edges": int(self.zero_edges[r]),
                   "pos_stubs": int(self.pos_stubs[r])}


def cluster_census(g: HalfEdgeGraph, mask) -> ClusterCensus:
    """Clusters of the retained edges with their internal edge and positive-stub counts.

    A retained self-loop counts as an internal edge (two zero-degree units)
    but never merges anything.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.size != g.m:
        raise ValueError("mask length differs from the number of edges")
    u, v = g.edge_u[mask], g.edge_v[mask]
    k, raw = _components(g.n, u, v)
    sizes = np.bincount(raw, minlength=k)
    zero = np.bincount(raw[u], minlength=k)
    stubs = np.bincount(raw, weights=g.degrees, minlength=k).astype(np.int64)
    pos = stubs - 2 * zero
    first = np.full(k, g.n, dtype=np.int64)
    np.minimum.at(first, raw, np.arange(g.n, dtype=np.int64))
    order = np.lexsort((first, -sizes))
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    return ClusterCensus(sizes[order], zero[order], pos[order], rank[raw])


def write_census_csv(path, rows) -> None:
    fields = ["replica", "n", "lambda", "rank", "size", "zero_edges", "pos_stubs"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def isolated_path_census(g: HalfEdgeGraph) -> int:
    """Vertex count of the longest chain of degree-2 vertices.

    Chains are the components of the subgraph induced on degree-2 vertices;
    components that close into a cycle are not paths and are skipped.
    """
    two = g.degrees == 2
    if not np.any(two):
        return 0
    keep = two[g.edge_u] & two[g.edge_v]
    u, v = g.edge_u[keep], g.edge_v[keep]
    _, labels = _components(g.n, u, v)
    lab2 = labels[two]
    if lab2.size == 0:
        return 0
    size = np.bincount(lab2, minlength=labels.max() + 1)
    internal = np.bincount(labels[u], minlength=size.size)
    is_path = (size > 0) & (internal == size - 1)
    return int(size[is_path].max()) if np.any(is_path) else 0
