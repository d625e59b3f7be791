"""Directed-graph and bipartite-matching primitives.

Vertices are 1-based integers.  An edge ``(u, v)`` means information flows
from ``u`` to ``v``; in a sparsity pattern it corresponds to the entry in
row ``v``, column ``u``.  Every routine iterates vertices and edges in
ascending order so results are reproducible.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

Edge = tuple[int, int]


@dataclass(frozen=True)
class Digraph:
    """Directed graph on vertices ``1..vertex_count``; self-loops allowed."""

    vertex_count: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.vertex_count < 0:
            raise ValueError("vertex_count must be non-negative")
        edges = frozenset((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if not (1 <= u <= self.vertex_count and 1 <= v <= self.vertex_count):
                raise ValueError(f"edge {(u, v)} outside 1..{self.vertex_count}")
        object.__setattr__(self, "edges", edges)

    @property
    def vertices(self) -> range:
        return range(1, self.vertex_count + 1)

    def successors(self) -> dict[int, list[int]]:
        succ: dict[int, list[int]] = {v: [] for v in self.vertices}
        for u, v in sorted(self.edges):
            succ[u].append(v)
        return succ

    def predecessors(self) -> dict[int, list[int]]:
        pred: dict[int, list[int]] = {v: [] for v in self.vertices}
        for u, v in sorted(self.edges):
            pred[v].append(u)
        return pred

    def induced(self, keep: Iterable[int]) -> "Digraph":
        """Subgraph induced by ``keep``, relabelled ``1..len(keep)`` in sorted order."""
        order = sorted(set(keep))
        index = {v: k for k, v in enumerate(order, start=1)}
        edges = {(index[u], index[v]) for u, v in self.edges if u in index and v in index}
        return Digraph(len(order), frozenset(edges))


@dataclass(frozen=True)
class BipartiteGraph:
    left: tuple[Hashable, ...]
    right: tuple[Hashable, ...]
    edges: frozenset[tuple[Hashable, Hashable]]

    def __post_init__(self) -> None:
        left = tuple(sorted(set(self.left)))
        right = tuple(sorted(set(self.right)))
        lset, rset = set(left), set(right)
        edges = frozenset(self.edges)
        for a, b in edges:
            if a not in lset or b not in rset:
                raise ValueError(f"edge {(a, b)} references a missing vertex")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "edges", edges)

    def adjacency(self) -> dict[Hashable, list[Hashable]]:
        adj: dict[Hashable, list[Hashable]] = {u: [] for u in self.left}
        for a, b in sorted(self.edges):
            adj[a].append(b)
        return adj


@dataclass(frozen=True)
class Matching:
    matched_edges: frozenset[tuple[Hashable, Hashable]]
    left_unmatched: frozenset[Hashable]
    right_unmatched: frozenset[Hashable]

    @property
    def size(self) -> int:
        return len(self.matched_edges)

    @property
    def mate(self) -> dict[Hashable, Hashable]:
        """Left vertex -> matched right vertex."""
        return dict(self.matched_edges)

    @classmethod
    def from_pairs(cls, b: BipartiteGraph, pairs: Iterable[tuple[Hashable, Hashable]]) -> "Matching":
        pairs = frozenset(pairs)
        lefts = [a for a, _ in pairs]
        rights = [r for _, r in pairs]
        if len(set(lefts)) != len(lefts) or len(set(rights)) != len(rights):
            raise ValueError("edge set is not a matching")
        if not pairs <= b.edges:
            raise ValueError("matching uses edges outside the bipartite graph")
        return cls(
            pairs,
            frozenset(b.left) - frozenset(lefts),
            frozenset(b.right) - frozenset(rights),
        )


@dataclass(frozen=True)
class PathCycleDecomposition:
    paths: tuple[tuple[int, ...], ...]
    cycles: tuple[tuple[int, ...], ...]

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(v for part in self.paths + self.cycles for v in part)


def bipartite_representation(g: Digraph, left: Iterable[int] | None = None) -> BipartiteGraph:
    """Left copy = sources, right copy = targets, one bipartite edge per digraph edge.

    Restricting ``left`` keeps only edges leaving those vertices; output
    vertices of a state-output digraph are usually left out this way.
    """
    left_set = set(g.vertices) if left is None else set(left)
    edges = frozenset((u, v) for u, v in g.edges if u in left_set)
    return BipartiteGraph(tuple(left_set), tuple(g.vertices), edges)


def strongly_connected_components(g: Digraph) -> list[frozenset[int]]:
    """Tarjan's algorithm; components come out in topological order of the condensation."""
    succ = g.successors()
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[frozenset[int]] = []
    counter = 0

    for root in g.vertices:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            recurse = False
            nbrs = succ[v]
            while i < len(nbrs):
                w = nbrs[i]
                i += 1
                if w not in index:
                    work.append((v, i))
                    work.append((w, 0))
                    recurse = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                out.append(frozenset(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    # Tarjan finishes sink components first.
    out.reverse()
    return out


def is_strongly_connected(g: Digraph) -> bool:
    return g.vertex_count <= 1 or len(strongly_connected_components(g)) == 1


def all_reach(g: Digraph, target: int) -> frozenset[int]:
    """Vertices with a directed path to ``target`` (``target`` included)."""
    if not 1 <= target <= g.vertex_count:
        raise ValueError(f"target {target} not in graph")
    pred = g.predecessors()
    seen = {target}
    queue = deque([target])
    while queue:
        v = queue.popleft()
        for u in pred[v]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return frozenset(seen)


def reachable_from(g: Digraph, source: int) -> frozenset[int]:
    succ = g.successors()
    seen = {source}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return frozenset(seen)


def max_matching(b: BipartiteGraph) -> Matching:
    """Maximum-cardinality matching by Hopcroft-Karp phases.

    Free left vertices are processed in label order and adjacency lists are
    sorted, so the returned matching is a deterministic function of ``b``.
    """
    adj = b.adjacency()
    pair_l: dict[Hashable, Hashable] = {}
    pair_r: dict[Hashable, Hashable] = {}

    def bfs() -> dict[Hashable, float]:
        dist: dict[Hashable, float] = {}
        queue = deque()
        for u in b.left:
            if u not in pair_l:
                dist[u] = 0
                queue.append(u)
        found = math.inf
        while queue:
            u = queue.popleft()
            if dist[u] >= found:
                continue
            for v in adj[u]:
                w = pair_r.get(v)
                if w is None:
                    found = min(found, dist[u] + 1)
                elif w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist if found < math.inf else {}

    def dfs(u: Hashable, dist: dict[Hashable, float]) -> bool:
        for v in adj[u]:
            w = pair_r.get(v)
            if w is None or (dist.get(w) == dist[u] + 1 and dfs(w, dist)):
                pair_l[u] = v
                pair_r[v] = u
                return True
        dist[u] = math.inf
        return False

    while True:
        dist = bfs()
        if not dist:
            break
        for u in b.left:
            if u not in pair_l:
                dfs(u, dist)

    return Matching.from_pairs(b, pair_l.items())


def min_cost_max_matching(
    b: BipartiteGraph, cost: Mapping[tuple[Hashable, Hashable], float]
) -> Matching:
    """Minimum-cost matching among those of maximum cardinality.

    Successive shortest augmenting paths on the unit-capacity flow network
    source -> left -> right -> sink, with Dijkstra on reduced costs.  Edges
    missing from ``cost`` cost 0; edges with infinite cost are dropped.
    """
    for e in b.edges:
        c = cost.get(e, 0.0)
        if c < 0:
            raise ValueError(f"negative cost on edge {e}")
    left = list(b.left)
    right = list(b.right)
    source = 0
    li = {u: k + 1 for k, u in enumerate(left)}
    ri = {v: len(left) + 1 + k for k, v in enumerate(right)}
    sink = len(left) + len(right) + 1
    n_nodes = sink + 1

    # Residual arcs: to, capacity, cost, index of reverse arc.
    arcs: list[list] = []
    out: list[list[int]] = [[] for _ in range(n_nodes)]

    def add(u: int, v: int, c: float) -> None:
        out[u].append(len(arcs))
        arcs.append([v, 1, c, len(arcs) + 1])
        out[v].append(len(arcs))
        arcs.append([u, 0, -c, len(arcs) - 1])

    for u in left:
        add(source, li[u], 0.0)
    for a, r in sorted(b.edges):
        c = float(cost.get((a, r), 0.0))
        if math.isinf(c):
            continue
        add(li[a], ri[r], c)
    for v in right:
        add(ri[v], sink, 0.0)

    potential = [0.0] * n_nodes
    while True:
        dist = [math.inf] * n_nodes
        via = [-1] * n_nodes
        dist[source] = 0.0
        heap = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for k in out[u]:
                v, cap, c, _ = arcs[k]
                if cap <= 0:
                    continue
                nd = d + max(c + potential[u] - potential[v], 0.0)
                if nd < dist[v]:
                    dist[v] = nd
                    via[v] = k
                    heapq.heappush(heap, (nd, v))
        if math.isinf(dist[sink]):
            break
        for v in range(n_nodes):
            if dist[v] < math.inf:
                potential[v] += dist[v]
        v = sink
        while v != source:
            k = via[v]
            arcs[k][1] -= 1
            arcs[arcs[k][3]][1] += 1
            v = arcs[arcs[k][3]][0]

    pairs = []
    for u in left:
        for k in out[li[u]]:
            v, cap, c, _ = arcs[k]
            if len(left) < v <= len(left) + len(right) and cap == 0 and c >= 0:
                pairs.append((u, right[v - len(left) - 1]))
    return Matching.from_pairs(b, pairs)


def matching_cost(m: Matching, cost: Mapping[tuple[Hashable, Hashable], float]) -> float:
    return float(sum(cost.get(e, 0.0) for e in m.matched_edges))


def spanned_by_disjoint_cycles(g: Digraph) -> bool:
    """True iff a family of vertex-disjoint cycles covers every vertex.

    Equivalent to a perfect matching of the bipartite representation; the
    empty graph is trivially spanned.
    """
    if g.vertex_count == 0:
        return True
    return max_matching(bipartite_representation(g)).size == g.vertex_count


def path_cycle_decomposition(g: Digraph, m: Matching) -> PathCycleDecomposition:
    """Split the digraph formed by the matched edges into paths and cycles.

    Each matched pair ``(u, v)`` is read as the digraph edge ``u -> v``.
    Paths start at vertices with no incoming matched edge (right-unmatched)
    and end at vertices with no outgoing matched edge (left-unmatched).
    Vertices touched by no matched edge are not reported.
    """
    succ: dict[int, int] = {}
    pred: dict[int, int] = {}
    for u, v in sorted(m.matched_edges):
        if (u, v) not in g.edges:
            raise ValueError(f"matched pair {(u, v)} is not an edge of the graph")
        if u in succ or v in pred:
            raise ValueError("edge set is not a matching")
        succ[u] = v
        pred[v] = u

    touched = sorted(set(succ) | set(pred))
    seen: set[int] = set()
    paths = []
    for start in touched:
        if start in pred:
            continue
        path = [start]
        seen.add(start)
        while path[-1] in succ:
            path.append(succ[path[-1]])
            seen.add(path[-1])
        paths.append(tuple(path))
    cycles = []
    for start in touched:
        if start in seen:
            continue
        cycle = [start]
        seen.add(start)
        while succ[cycle[-1]] != start:
            cycle.append(succ[cycle[-1]])
            seen.add(cycle[-1])
        cycles.append(tuple(cycle))
    return PathCycleDecomposition(tuple(paths), tuple(cycles))
