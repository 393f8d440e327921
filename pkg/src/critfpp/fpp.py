"""First passage percolation on half-edge graphs.

Passage times come from label-setting search with lexicographic
``(time, hops)`` labels, so the hopcount is the fewest edges among
time-optimal paths. Smallest-weight-graph growth works on stubs: a vertex's
stubs become free when it joins, zero-weight free stubs are always used
first (lowest stub index), then the free stub with the smallest
``arrival(owner) + weight`` (ties by stub index).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._jit import JIT, heap_pop, heap_push
from .distributions import WeightModel
from .graphgen import HalfEdgeGraph

DEFAULT_EPS_GRID = (0.01, 0.05, 0.1)


def assign_weights(g: HalfEdgeGraph, w: WeightModel, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. weights from ``w``, one per edge."""
    return np.asarray(w.sample(rng, g.m), dtype=np.float64)


# ---------------------------------------------------------------------------
# label-setting search
# ---------------------------------------------------------------------------

@njit(**JIT)
def _dijkstra(offsets, partner, stub_vertex, stub_edge, weights, source, target):
    n = offsets.shape[0] - 1
    dist = np.full(n, np.inf)
    hops = np.full(n, -1, np.int64)
    done = np.zeros(n, np.bool_)
    cap = 64
    ka = np.empty(cap, np.float64)
    kb = np.empty(cap, np.int64)
    kc = np.empty(cap, np.int64)
    size = 0
    dist[source] = 0.0
    hops[source] = 0
    size = heap_push(ka, kb, kc, size, 0.0, 0, source)
    while size > 0:
        d, h, x, size = heap_pop(ka, kb, kc, size)
        if done[x]:
            continue
        done[x] = True
        if x == target:
            break
        for s in range(offsets[x], offsets[x + 1]):
            y = stub_vertex[partner[s]]
            if done[y]:
                continue
            nd = d + weights[stub_edge[s]]
            nh = h + 1
            if nd < dist[y] or (nd == dist[y] and nh < hops[y]):
                dist[y] = nd
                hops[y] = nh
                if size >= ka.shape[0]:
                    ka2 = np.empty(2 * ka.shape[0], np.float64)
                    kb2 = np.empty(2 * ka.shape[0], np.int64)
                    kc2 = np.empty(2 * ka.shape[0], np.int64)
                    ka2[:size] = ka[:size]
                    kb2[:size] = kb[:size]
                    kc2[:size] = kc[:size]
                    ka, kb, kc = ka2, kb2, kc2
                size = heap_push(ka, kb, kc, size, nd, nh, y)
    return dist, hops


@dataclass(frozen=True)
class FppResult:
    """Passage time ``T`` (``math.inf`` when disconnected) and hopcount ``H`` (``None`` then)."""

    source: int
    target: int
    T: float
    H: int | None

    @property
    def connected(self) -> bool:
        return self.H is not None


def _run(g: HalfEdgeGraph, weights, source: int, target: int):
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if weights.size != g.m:
        raise ValueError("one weight per edge is required")
    if not 0 <= source < g.n or not -1 <= target < g.n:
        raise IndexError("vertex out of range")
    return _dijkstra(g.offsets, g.partner, g.stub_vertex, g.stub_edge, weights, int(source), int(target))


def passage_time(g: HalfEdgeGraph, weights, u: int, v: int) -> FppResult:
    dist, hops = _run(g, weights, u, v)
    if not math.isfinite(dist[v]):
        return FppResult(u, v, math.inf, None)
    return FppResult(u, v, float(dist[v]), int(hops[v]))


@dataclass(frozen=True)
class FloodResult:
    """Single-source times to every vertex; unreachable vertices hold ``inf``."""

    source: int
    times: np.ndarray
    hops: np.ndarray

    @property
    def reachable(self) -> np.ndarray:
        return np.isfinite(self.times)

    @property
    def max_time(self) -> float:
        return float(self.times[self.reachable].max())

    @property
    def unreachable_count(self) -> int:
        return int(self.times.size - self.reachable.sum())


def flood(g: HalfEdgeGraph, weights, u: int) -> FloodResult:
    dist, hops = _run(g, weights, u, -1)
    return FloodResult(u, dist, hops)


def brute_force_passage_time(g: HalfEdgeGraph, weights, u: int, v: int) -> FppResult:
    """Enumerate every simple path (parallel edges counted separately); tiny graphs only.

    Sums are accumulated from ``u`` outward, the same order the search uses,
    so results compare exactly.
    """
    if u == v:
        return FppResult(u, v, 0.0, 0)
    weights = np.asarray(weights, dtype=float)
    adj = [[] for _ in range(g.n)]
    for s in range(g.n_stubs):
        x, y = g.stub_vertex[s], g.stub_vertex[g.partner[s]]
        if x != y:
            adj[x].append((int(y), float(weights[g.stub_edge[s]])))
    best = [math.inf, None]
    visited = [False] * g.n

    def dfs(x, t, h):
        if x == v:
            if t < best[0] or (t == best[0] and h < best[1]):
                best[0], best[1] = t, h
            return
        visited[x] = True
        for y, w in adj[x]:
            if not visited[y]:
                dfs(y, t + w, h + 1)
        visited[x] = False

    dfs(u, 0.0, 0)
    return FppResult(u, v, best[0], best[1])


# ---------------------------------------------------------------------------
# smallest-weight-graph growth
# ---------------------------------------------------------------------------

STOP_CODES = ("max_steps", "max_sigma_index", "max_time", "collision", "exhausted", "intersection")


@njit(**JIT)
def _grow_heap(ka, kb, kc):
    n = ka.shape[0] * 2
    a = np.empty(n, np.float64)
    b = np.empty(n, np.int64)
    c = np.empty(n, np.int64)
    a[: ka.shape[0]] = ka
    b[: ka.shape[0]] = kb
    c[: ka.shape[0]] = kc
    return a, b, c


@njit(**JIT)
def _swg_kernel(offsets, partner, stub_vertex, stub_edge, weights, source, max_steps,
                max_sigma, max_time, stop_at_collision, blocked, eps):
    n = offsets.shape[0] - 1
    in_swg = np.zeros(n, np.bool_)
    arrival = np.full(n, np.inf)
    used = np.zeros(partner.shape[0], np.bool_)
    count = np.zeros(n, np.int64)  # free SWG stubs pointing at a vertex outside the SWG
    has_block = blocked.shape[0] == n

    za = np.empty(64, np.float64)
    zb = np.empty(64, np.int64)
    zc = np.empty(64, np.int64)
    zs = 0
    pa = np.empty(64, np.float64)
    pb = np.empty(64, np.int64)
    pc = np.empty(64, np.int64)
    ps = 0

    order = [source]
    times = [0.0]
    r_seq = [1]
    sigma = [0]
    sigma_boundary = [0]
    sigma.pop()
    sigma_boundary.pop()
    boundary = 0
    pairings = 0
    r_col = -1
    hit_at = -1
    stop = 4

    if has_block and blocked[source]:
        order.pop()
        times.pop()
        r_seq.pop()
        hit_at = 0
        stop = 5
    else:
        x = source
        t = 0.0
        entry = -1
        while True:
            # x joins the SWG at time t through stub ``entry`` (or is the source)
            in_swg[x] = True
            arrival[x] = t
            if count[x] > 0:
                boundary -= 1
            for s in range(offsets[x], offsets[x + 1]):
                if s == entry:
                    continue
                y = stub_vertex[partner[s]]
                if not in_swg[y]:
                    count[y] += 1
                    if count[y] == 1:
                        boundary += 1
                w = weights[stub_edge[s]]
                if w == 0.0:
                    if zs >= za.shape[0]:
                        za, zb, zc = _grow_heap(za, zb, zc)
                    zs = heap_push(za, zb, zc, zs, 0.0, s, s)
                else:
                    if ps >= pa.shape[0]:
                        pa, pb, pc = _grow_heap(pa, pb, pc)
                    ps = heap_push(pa, pb, pc, ps, t + w, s, s)
            # stubs of x that pointed into x from earlier SWG vertices are internal now
            count[x] = 0
            m = len(order)
            while zs > 0 and used[zc[0]]:
                _a, _b, _c, zs = heap_pop(za, zb, zc, zs)
            if zs == 0:
                sigma.append(m)
                sigma_boundary.append(boundary)
                if max_sigma > 0 and len(sigma) >= max_sigma:
                    stop = 1
                    break
            if max_steps > 0 and m >= max_steps:
                stop = 0
                break
            # choose the next stub
            found = False
            while True:
                while zs > 0 and used[zc[0]]:
                    _a, _b, _c, zs = heap_pop(za, zb, zc, zs)
                while ps > 0 and used[pc[0]]:
                    _a, _b, _c, ps = heap_pop(pa, pb, pc, ps)
                if zs > 0:
                    _a, _b, s, zs = heap_pop(za, zb, zc, zs)
                    tk = arrival[stub_vertex[s]]
                elif ps > 0:
                    if pa[0] > max_time:
                        stop = 2
                        break
                    tk, _b, s, ps = heap_pop(pa, pb, pc, ps)
                else:
                    stop = 4
                    break
                used[s] = True
                h2 = partner[s]
                y = stub_vertex[h2]
                pairings += 1
                if has_block and blocked[y]:
                    hit_at = m
                    stop = 5
                    break
                if in_swg[y]:
                    # both ends already in the SWG: a cycle
                    used[h2] = True
                    if r_col < 0:
                        r_col = m + 1
                        if stop_at_collision:
                            stop = 3
                            break
                    continue
                used[h2] = True
                found = True
                break
            if not found:
                break
            x = y
            t = tk
            entry = h2
            order.append(x)
            times.append(t)
            r_seq.append(pairings + 1)

    # S^eps: boundary vertices joined to the SWG by an edge of weight <= eps
    k = eps.shape[0]
    eps_count = np.zeros(k, np.int64)
    eps_deg = np.zeros(k, np.int64)
    mark = np.zeros(n, np.int64)
    for j in range(k):
        for v in order:
            for s in range(offsets[v], offsets[v + 1]):
                if used[s]:
                    continue
                y = stub_vertex[partner[s]]
                if in_swg[y] or mark[y] == j + 1:
                    continue
                if weights[stub_edge[s]] <= eps[j]:
                    mark[y] = j + 1
                    eps_count[j] += 1
                    eps_deg[j] += offsets[y + 1] - offsets[y]
    return (np.array(order), np.array(times), np.array(r_seq), np.array(sigma),
            np.array(sigma_boundary), boundary, r_col, hit_at, stop, eps_count, eps_deg)


@dataclass
class SwgTrace:
    """Growth record of the smallest-weight graph from ``source``.

    ``vertices[m-1]`` is the m-th vertex to join and ``arrival[m-1]`` its
    passage time; ``r[m-1]`` is the construction step at which the SWG first
    held ``m`` vertices. ``sigma[l-1]`` is the SWG size when the l-th
    zero-weight cluster is exhausted and ``sigma_boundary[l-1]`` the number of
    outside vertices joined to the SWG by a free stub at that moment.
    """

    source: int
    vertices: np.ndarray
    arrival: np.ndarray
    r: np.ndarray
    sigma: np.ndarray
    sigma_boundary: np.ndarray
    boundary: int
    r_col: int | None
    stop_reason: str
    eps: tuple
    eps_count: np.ndarray
    eps_degree: np.ndarray
    intersection_step: int | None = None

    @property
    def size(self) -> int:
        return int(self.vertices.size)

    @property
    def collided(self) -> bool:
        return self.r_col is not None

    @property
    def cluster_sizes(self) -> np.ndarray:
        """``|C(v_{sigma_l + 1})|`` for each closed zero cluster."""
        return np.diff(np.concatenate([[0], self.sigma]))

    def to_dict(self) -> dict:
        return {
            "source": self.source, "vertices": self.vertices.tolist(),
            "arrival": self.arrival.tolist(), "r": self.r.tolist(),
            "sigma": self.sigma.tolist(), "sigma_boundary": self.sigma_boundary.tolist(),
            "boundary": self.boundary, "r_col": self.r_col, "stop_reason": self.stop_reason,
            "eps": list(self.eps), "eps_count": self.eps_count.tolist(),
            "eps_degree": self.eps_degree.tolist(), "intersection_step": self.intersection_step,
        }


def grow_swg(g: HalfEdgeGraph, weights, u: int, *, max_steps: int | None = None,
             max_sigma_index: int | None = None, max_time: float | None = None,
             stop_at_collision: bool = True, eps=DEFAULT_EPS_GRID, blocked=None) -> SwgTrace:
    """Grow the SWG from ``u`` until a stop rule fires.

    ``blocked`` (boolean per vertex) marks vertices owned by another growth;
    reaching one stops the run with reason ``intersection``.
    """
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if weights.size != g.m:
        raise ValueError("one weight per edge is required")
    if not 0 <= u < g.n:
        raise IndexError("vertex out of range")
    block = np.zeros(0, np.bool_) if blocked is None else np.ascontiguousarray(blocked, dtype=np.bool_)
    eps_arr = np.ascontiguousarray(eps, dtype=np.float64)
    out = _swg_kernel(g.offsets, g.partner, g.stub_vertex, g.stub_edge, weights, int(u),
                      int(max_steps or 0), int(max_sigma_index or 0),
                      float(max_time if max_time is not None else math.inf),
                      bool(stop_at_collision), block, eps_arr)
    order, times, r_seq, sigma, sigma_b, boundary, r_col, hit_at, stop, ec, ed = out
    return SwgTrace(int(u), order, times, r_seq, sigma, sigma_b, int(boundary),
                    None if r_col < 0 else int(r_col), STOP_CODES[stop], tuple(float(e) for e in eps),
                    ec, ed, None if hit_at < 0 else int(hit_at))


def forward_degree_trace(trace: SwgTrace, g: HalfEdgeGraph) -> np.ndarray:
    """Forward degree ``deg - 1`` of each vertex after the source, in discovery order."""
    return g.degrees[trace.vertices[1:]] - 1


@dataclass(frozen=True)
class TwoSourceResult:
    trace_v: SwgTrace
    trace_u: SwgTrace
    intersected: bool
    passage: FppResult

    @property
    def disjoint(self) -> bool:
        """Neither growth collided and the second never touched the first."""
        return not (self.intersected or self.trace_v.collided or self.trace_u.collided)


def two_source_growth(g: HalfEdgeGraph, weights, u: int, v: int, steps: int) -> TwoSourceResult:
    """Grow from ``v`` for ``steps`` vertices, then from ``u`` until it meets that SWG.

    After the first intersection the exact passage time is obtained by a
    plain label-setting search.
    """
    if u == v:
        raise ValueError("sources must differ")
    tv = grow_swg(g, weights, v, max_steps=steps)
    block = np.zeros(g.n, dtype=bool)
    block[tv.vertices] = True
    tu = grow_swg(g, weights, u, max_steps=steps, blocked=block)
    return TwoSourceResult(tv, tu, tu.stop_reason == "intersection", passage_time(g, weights, u, v))
