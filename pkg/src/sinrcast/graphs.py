"""Geometric graphs induced by the radio ranges, plus small graph utilities.

An induced graph connects two nodes when their distance is at most a given
fraction of the weak range (closed comparison, same boundary slack as the
decoding test). The growth bound captures how many mutually independent
nodes can sit inside a hop-ball of the strong graph.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .model import BOUNDARY_RTOL, NodeId, SinrParams, Topology, transmission_range


class Graph:
    """Undirected graph over integer node ids with frozen adjacency."""

    def __init__(self, nodes: Iterable[NodeId], edges: Iterable[Tuple[NodeId, NodeId]]):
        self._nodes: Tuple[NodeId, ...] = tuple(sorted(set(nodes)))
        adj: Dict[NodeId, Set[NodeId]] = {v: set() for v in self._nodes}
        for u, v in edges:
            if u == v:
                raise ValueError(f"self loop at {u}")
            if u not in adj or v not in adj:
                raise ValueError(f"edge ({u}, {v}) references unknown node")
            adj[u].add(v)
            adj[v].add(u)
        self._adj: Dict[NodeId, FrozenSet[NodeId]] = {
            v: frozenset(s) for v, s in adj.items()
        }

    @property
    def nodes(self) -> Tuple[NodeId, ...]:
        return self._nodes

    def neighbors(self, v: NodeId) -> FrozenSet[NodeId]:
        return self._adj[v]

    def has_edge(self, u: NodeId, v: NodeId) -> bool:
        return v in self._adj[u]

    def degree(self, v: NodeId) -> int:
        return len(self._adj[v])

    def max_degree(self) -> int:
        return max((len(s) for s in self._adj.values()), default=0)

    def edges(self) -> List[Tuple[NodeId, NodeId]]:
        out = []
        for u in self._nodes:
            for v in self._adj[u]:
                if u < v:
                    out.append((u, v))
        return out

    def edge_count(self) -> int:
        return sum(len(s) for s in self._adj.values()) // 2

    def subgraph(self, keep: Iterable[NodeId]) -> "Graph":
        ks = set(keep)
        return Graph(
            ks, [(u, v) for u, v in self.edges() if u in ks and v in ks]
        )

    def hop_distances(self, source: NodeId) -> Dict[NodeId, int]:
        """BFS hop counts from source; unreachable nodes are absent."""
        dist = {source: 0}
        frontier = [source]
        while frontier:
            nxt = []
            for u in frontier:
                for w in self._adj[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        nxt.append(w)
            frontier = nxt
        return dist

    def ball(self, center: NodeId, hops: int) -> Set[NodeId]:
        """All nodes within the given hop count of center, center included."""
        dist = {center: 0}
        frontier = [center]
        for _ in range(hops):
            nxt = []
            for u in frontier:
                for w in self._adj[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        nxt.append(w)
            frontier = nxt
        return set(dist)

    def is_connected(self) -> bool:
        if not self._nodes:
            return True
        return len(self.hop_distances(self._nodes[0])) == len(self._nodes)

    def diameter(self) -> Optional[int]:
        """Longest shortest path; None when the graph is disconnected."""
        if not self._nodes:
            return None
        best = 0
        for v in self._nodes:
            dist = self.hop_distances(v)
            if len(dist) < len(self._nodes):
                return None
            best = max(best, max(dist.values()))
        return best

    def __repr__(self) -> str:
        return f"Graph(n={len(self._nodes)}, m={self.edge_count()})"


def induced_graph(topology: Topology, params: SinrParams, scale: float) -> Graph:
    """Connect nodes whose distance is at most scale times the weak range."""
    if not 0 < scale <= 1:
        raise ValueError(f"scale must lie in (0, 1], got {scale}")
    cutoff = scale * transmission_range(params).weak * (1.0 + BOUNDARY_RTOL)
    d = topology.distance_matrix
    n = topology.n
    edges = []
    iu, ju = np.nonzero(np.triu(d <= cutoff, k=1))
    for u, v in zip(iu.tolist(), ju.tolist()):
        edges.append((u, v))
    return Graph(range(n), edges)


def weak_graph(topology: Topology, params: SinrParams) -> Graph:
    return induced_graph(topology, params, 1.0)


def strong_graph(topology: Topology, params: SinrParams) -> Graph:
    return induced_graph(topology, params, 1.0 - params.eps)


def approx_graph(topology: Topology, params: SinrParams) -> Graph:
    return induced_graph(topology, params, 1.0 - 2.0 * params.eps)


def greedy_mis(graph: Graph, order: Optional[Sequence[NodeId]] = None) -> Set[NodeId]:
    """Greedy maximal independent set, ascending node id by default."""
    if order is None:
        order = graph.nodes
    else:
        if sorted(order) != sorted(graph.nodes):
            raise ValueError("order must be a permutation of the node set")
    chosen: Set[NodeId] = set()
    blocked: Set[NodeId] = set()
    for v in order:
        if v not in blocked:
            chosen.add(v)
            blocked.add(v)
            blocked |= graph.neighbors(v)
    return chosen


def max_independent_set_size(graph: Graph, node_limit: int = 20) -> int:
    """Exact maximum independent set size by branch and bound.

    Refuses graphs above node_limit; callers fall back to a greedy witness.
    """
    nodes = list(graph.nodes)
    if len(nodes) > node_limit:
        raise ValueError(f"exact search capped at {node_limit} nodes, got {len(nodes)}")
    adj = {v: graph.neighbors(v) for v in nodes}
    best = 0

    def expand(candidates: List[NodeId], size: int) -> None:
        nonlocal best
        if size + len(candidates) <= best:
            return
        if not candidates:
            best = max(best, size)
            return
        v = candidates[0]
        rest = candidates[1:]
        # branch 1: take v
        expand([w for w in rest if w not in adj[v]], size + 1)
        # branch 2: skip v
        expand(rest, size)

    expand(sorted(nodes, key=lambda v: -len(adj[v])), 0)
    return best


@dataclass(frozen=True)
class GrowthBound:
    """Polynomial cap on independent nodes inside a hop-ball.

    coefficients are ascending powers of the radius; evaluate(r) gives the
    cap at hop radius r.
    """

    coefficients: Tuple[float, ...]

    def evaluate(self, radius: float) -> float:
        acc = 0.0
        for k, c in enumerate(self.coefficients):
            acc += c * radius ** k
        return acc


def default_growth_bound(lam: float) -> GrowthBound:
    """The quadratic cap (1 + 2 r lam)^2 written out as coefficients."""
    if lam < 1:
        raise ValueError(f"range-to-spacing ratio below 1 makes no sense, got {lam}")
    return GrowthBound((1.0, 4.0 * lam, 4.0 * lam * lam))


@dataclass(frozen=True)
class GrowthViolation:
    center: NodeId
    radius: int
    independent: int
    allowed: float


def check_growth_bound(
    graph: Graph,
    bound: GrowthBound,
    radii: Sequence[int],
    exact_limit: int = 20,
) -> List[GrowthViolation]:
    """Look for hop-balls whose independent-set size beats the bound.

    Balls small enough get the exact search; large balls get a greedy
    lower-bound witness, which can only ever under-report violations.
    """
    out: List[GrowthViolation] = []
    for v in graph.nodes:
        for r in radii:
            ball = graph.ball(v, r)
            sub = graph.subgraph(ball)
            if len(ball) <= exact_limit:
                size = max_independent_set_size(sub, node_limit=exact_limit)
            else:
                size = len(greedy_mis(sub))
            allowed = bound.evaluate(r)
            if size > allowed:
                out.append(GrowthViolation(v, r, size, allowed))
    return out
