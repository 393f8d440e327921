"""Configuration-model multigraphs stored as half-edge pairings.

Half-edges (stubs) are numbered vertex-major: vertex ``v`` owns the
contiguous range ``offsets[v]:offsets[v+1]``. The pairing is an involution
``partner`` without fixed points, so self-loops and multi-edges are kept.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import DegreeModel


class ContractViolation(ValueError):
    """Input violates a documented precondition."""


@dataclass(frozen=True, eq=False)
class HalfEdgeGraph:
    n: int
    degrees: np.ndarray
    offsets: np.ndarray
    partner: np.ndarray
    stub_vertex: np.ndarray
    stub_edge: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray

    @property
    def n_stubs(self) -> int:
        return int(self.partner.size)

    @property
    def m(self) -> int:
        return int(self.edge_u.size)

    @classmethod
    def from_pairing(cls, degrees, partner) -> "HalfEdgeGraph":
        degrees = np.ascontiguousarray(degrees, dtype=np.int64)
        partner = np.ascontiguousarray(partner, dtype=np.int64)
        offsets = np.zeros(degrees.size + 1, dtype=np.int64)
        np.cumsum(degrees, out=offsets[1:])
        if partner.size != offsets[-1]:
            raise ContractViolation("pairing length differs from the degree sum")
        stubs = np.arange(partner.size, dtype=np.int64)
        if np.any(partner[partner] != stubs) or np.any(partner == stubs):
            raise ContractViolation("pairing is not a fixed-point-free involution")
        stub_vertex = np.repeat(np.arange(degrees.size, dtype=np.int64), degrees)
        # one edge per pair, numbered by the lower stub index
        lower = stubs[stubs < partner]
        stub_edge = np.empty(partner.size, dtype=np.int64)
        stub_edge[lower] = np.arange(lower.size, dtype=np.int64)
        stub_edge[partner[lower]] = stub_edge[lower]
        return cls(int(degrees.size), degrees, offsets, partner, stub_vertex, stub_edge,
                   stub_vertex[lower], stub_vertex[partner[lower]])

    @classmethod
    def from_edges(cls, n: int, edges) -> "HalfEdgeGraph":
        """Deterministic graph from an explicit edge list (used by tests and fixtures).

        Edge ``i`` keeps index ``i`` as long as edges are listed in increasing
        order of their first endpoint; :func:`align_edge_values` maps per-edge
        values given in input order onto the internal numbering.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ContractViolation("edge endpoint out of range")
        degrees = np.bincount(edges.ravel(), minlength=n).astype(np.int64)
        offsets = np.concatenate([[0], np.cumsum(degrees)])
        fill = offsets[:-1].copy()
        partner = np.empty(offsets[-1], dtype=np.int64)
        for a, b in edges:
            ha = fill[a]
            fill[a] += 1
            hb = fill[b]
            fill[b] += 1
            partner[ha] = hb
            partner[hb] = ha
        return cls.from_pairing(degrees, partner)

    def edges(self) -> np.ndarray:
        return np.column_stack([self.edge_u, self.edge_v])

    def edge_index(self, u: int, v: int) -> np.ndarray:
        """Indices of all edges between ``u`` and ``v`` (either orientation)."""
        hit = ((self.edge_u == u) & (self.edge_v == v)) | ((self.edge_u == v) & (self.edge_v == u))
        return np.flatnonzero(hit)

    def stubs_of(self, v: int) -> np.ndarray:
        return np.arange(self.offsets[v], self.offsets[v + 1])

    def neighbours(self, v: int) -> np.ndarray:
        return self.stub_vertex[self.partner[self.stubs_of(v)]]

    def endpoint_degree(self) -> np.ndarray:
        """Degree recomputed from the edge list; self-loops count twice."""
        return np.bincount(np.concatenate([self.edge_u, self.edge_v]), minlength=self.n)


def sample_degrees(degree: DegreeModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. degrees; an odd total is fixed by adding one to the last vertex."""
    if n < 2:
        raise ContractViolation("need at least two vertices")
    d = rng.choice(degree.pmf.size, size=n, p=degree.pmf).astype(np.int64)
    if d.sum() % 2:
        d[-1] += 1
    return d


def match_half_edges(degrees, rng: np.random.Generator) -> HalfEdgeGraph:
    """Uniform perfect matching of all stubs.

    Pairing consecutive entries of a uniform permutation gives every one of the
    ``(L-1)!!`` matchings the same probability, as sequential pairing does.
    """
    degrees = np.asarray(degrees, dtype=np.int64)
    total = int(degrees.sum())
    if total % 2:
        raise ContractViolation("degree sum is odd")
    perm = rng.permutation(total)
    partner = np.empty(total, dtype=np.int64)
    partner[perm[0::2]] = perm[1::2]
    partner[perm[1::2]] = perm[0::2]
    return HalfEdgeGraph.from_pairing(degrees, partner)


def configuration_model(degree: DegreeModel, n: int, rng: np.random.Generator) -> HalfEdgeGraph:
    return match_half_edges(sample_degrees(degree, n, rng), rng)


def forward_degree_empirical(g: HalfEdgeGraph) -> np.ndarray:
    """``g_k = (k+1) #{i : d_i = k+1} / L_n``, indexed by ``k``."""
    counts = np.bincount(g.degrees)
    k1 = np.arange(counts.size)
    mass = k1 * counts / g.degrees.sum()
    return mass[1:] if mass.size > 1 else np.zeros(1)


def write_edge_list(g: HalfEdgeGraph, path, seed: int, weights=None) -> None:
    """Text dump: header ``n m seed`` then ``u v weight`` per edge."""
    w = np.zeros(g.m) if weights is None else np.asarray(weights, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m} {seed}\n")
        for u, v, t in zip(g.edge_u.tolist(), g.edge_v.tolist(), w.tolist()):
            fh.write(f"{u} {v} {t!r}\n")


def read_edge_list(path):
    """Inverse of :func:`write_edge_list`; returns ``(graph, weights, seed)``."""
    with open(path) as fh:
        n, m, seed = (int(x) for x in fh.readline().split())
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != m:
        raise ContractViolation(f"header announces {m} edges, found {len(rows)}")
    edges = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64).reshape(-1, 2)
    weights = np.array([float(r[2]) for r in rows])
    g = HalfEdgeGraph.from_edges(n, edges)
    # from_edges renumbers edges by lower stub; carry the weights along
    return g, align_edge_values(g, edges, weights), seed


def align_edge_values(g: HalfEdgeGraph, edges, weights) -> np.ndarray:
    """Map weights given in input-edge order onto ``g``'s edge numbering."""
    out = np.empty(g.m)
    fill = g.offsets[:-1].copy()
    for i, (a, b) in enumerate(edges):
        ha = fill[a]
        fill[a] += 1
        fill[b] += 1
        out[g.stub_edge[ha]] = weights[i]
    return out
