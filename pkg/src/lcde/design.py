"""Minimum-cost communication graph design.

Feasibility of an edge set is monotone (adding links only adds nonzeros and
outputs), so the full finite-cost graph is the best case.  Every solver
certifies its answer with :func:`theorem4_check`.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .graphs import BipartiteGraph, Edge, min_cost_max_matching, reachable_from, all_reach
from .structure import (
    CommGraph,
    LinkingWitness,
    NotObservableError,
    SensorMode,
    SystemStructure,
    normalize_modes,
    state_left_unmatched,
    structural_observability,
    theorem4_check,
)

log = logging.getLogger(__name__)

INF = math.inf
TOL = 1e-9


class InfeasibleDesignError(ValueError):
    """No finite-cost communication graph satisfies the conditions."""


CostMatrix = Mapping[Edge, float]


def uniform_costs(
    m: int,
    default: float = 1.0,
    self_loop: float = INF,
    overrides: Mapping[Edge, float] | Iterable[tuple[int, int, float]] | None = None,
) -> dict[Edge, float]:
    """Cost for every ordered sensor pair; self-loops get ``self_loop``."""
    costs = {(i, j): (self_loop if i == j else default) for i in range(1, m + 1) for j in range(1, m + 1)}
    if overrides:
        items = overrides.items() if isinstance(overrides, Mapping) else (((a, b), c) for a, b, c in overrides)
        for (a, b), c in items:
            if (a, b) not in costs:
                raise ValueError(f"cost override {(a, b)} outside 1..{m}")
            costs[(a, b)] = float(c)
    return costs


@dataclass(frozen=True)
class DesignProblem:
    sys: SystemStructure
    modes: tuple[SensorMode, ...]
    costs: Mapping[Edge, float]
    forced: frozenset[Edge] = frozenset()
    forbidden: frozenset[Edge] = frozenset()

    def __post_init__(self) -> None:
        m = self.sys.m
        object.__setattr__(self, "modes", normalize_modes(self.modes, m))
        costs = {(a, b): float(c) for (a, b), c in self.costs.items()}
        pairs = {(i, j) for i in range(1, m + 1) for j in range(1, m + 1)}
        if set(costs) != pairs:
            raise ValueError("costs must cover every ordered sensor pair")
        if any(c < 0 or math.isnan(c) for c in costs.values()):
            raise ValueError("costs must be non-negative")
        object.__setattr__(self, "costs", costs)
        forced = frozenset(self.forced)
        forbidden = frozenset(self.forbidden)
        if forced & forbidden:
            raise ValueError("an edge cannot be both forced and forbidden")
        if any(math.isinf(costs[e]) for e in forced):
            raise ValueError("forced edges must have finite cost")
        object.__setattr__(self, "forced", forced)
        object.__setattr__(self, "forbidden", forbidden)

    @property
    def m(self) -> int:
        return self.sys.m

    @property
    def candidates(self) -> list[Edge]:
        """Usable edges sorted by cost, then lexicographically."""
        usable = [e for e, c in self.costs.items() if not math.isinf(c) and e not in self.forbidden]
        return sorted(usable, key=lambda e: (self.costs[e], e))

    def cost(self, edges: Iterable[Edge]) -> float:
        return float(sum(self.costs[e] for e in edges))


@dataclass(frozen=True)
class DesignSolution:
    edges: tuple[Edge, ...]
    total_cost: float
    certificates: tuple[LinkingWitness, ...]
    optimal: bool
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def graph(self) -> CommGraph:
        return CommGraph(len(self.certificates), frozenset(self.edges))


@dataclass(frozen=True)
class CutConstraint:
    """At least one chosen edge must leave ``S`` (a proper nonempty sensor set)."""

    S: frozenset[int]
    m: int

    def __post_init__(self) -> None:
        if not self.S or len(self.S) >= self.m or not all(1 <= v <= self.m for v in self.S):
            raise ValueError("cut set must be a proper nonempty subset")

    def edges(self, universe: Iterable[Edge]) -> frozenset[Edge]:
        return frozenset((a, b) for a, b in universe if a in self.S and b not in self.S)

    def satisfied_by(self, edges: Iterable[Edge]) -> bool:
        return any(a in self.S and b not in self.S for a, b in edges)


def strong_connectivity_cuts(m: int, edges: Iterable[Edge]) -> list[CutConstraint]:
    """Cuts violated by ``edges``: the forward-reachable set of each vertex, when proper."""
    g = CommGraph(m, frozenset(edges)).digraph
    cuts = []
    seen = set()
    for v in range(1, m + 1):
        for S in (reachable_from(g, v), frozenset(range(1, m + 1)) - all_reach(g, v)):
            if S and len(S) < m and S not in seen:
                seen.add(S)
                cuts.append(CutConstraint(S, m))
    return cuts


def _strongly_connected(m: int, edges: Iterable[Edge]) -> bool:
    if m <= 1:
        return True
    g = CommGraph(m, frozenset(edges)).digraph
    return len(reachable_from(g, 1)) == m and len(all_reach(g, 1)) == m


class _Oracle:
    """Cached feasibility test on edge sets."""

    def __init__(self, p: DesignProblem):
        self.p = p
        self.cache: dict[frozenset[Edge], bool] = {}
        self.calls = 0

    def __call__(self, edges: Iterable[Edge]) -> bool:
        key = frozenset(edges)
        hit = self.cache.get(key)
        if hit is None:
            self.calls += 1
            if not _strongly_connected(self.p.m, key):
                hit = False
            else:
                hit = theorem4_check(self.p.sys, CommGraph(self.p.m, key), self.p.modes).passed
            self.cache[key] = hit
        return hit


def _precheck(p: DesignProblem, oracle: _Oracle) -> None:
    if not structural_observability(p.sys.A_bar, p.sys.C_bar).passed:
        raise NotObservableError("(A, C) is not structurally observable")
    full = set(p.candidates) | set(p.forced)
    if not oracle(full):
        raise InfeasibleDesignError("the full finite-cost communication graph fails the check")


def _solution(p: DesignProblem, edges: Iterable[Edge], optimal: bool, **stats) -> DesignSolution:
    edges = tuple(sorted(edges))
    rep = theorem4_check(p.sys, CommGraph(p.m, frozenset(edges)), p.modes)
    if not rep.passed:
        raise AssertionError("design produced an infeasible graph")
    certs = tuple(r.witness for r in rep.sensors)
    return DesignSolution(edges, p.cost(edges), certs, optimal, dict(stats))


def validate_topology(p: DesignProblem, edges: Iterable[Edge]) -> tuple[bool, float]:
    edges = frozenset(edges)
    for e in edges:
        if e not in p.costs or math.isinf(p.costs[e]):
            raise ValueError(f"edge {e} has no finite cost")
    ok = _strongly_connected(p.m, edges) and theorem4_check(p.sys, CommGraph(p.m, edges), p.modes).passed
    return ok, p.cost(edges)


# --------------------------------------------------------------------------
# Exact branch and bound


class _BranchAndBound:
    """Depth-first branch and bound over binary edge variables.

    Node bounds come from an LP with in/out-degree constraints and the
    global cut pool.  Integral LP points that are not strongly connected
    add reachability cuts.  Strongly connected but infeasible points add a
    no-good cut: grow the point to a maximal infeasible superset ``U``.
    By monotonicity every feasible graph then uses an edge outside ``U``.
    """

    def __init__(self, p: DesignProblem, oracle: _Oracle):
        self.p = p
        self.oracle = oracle
        self.universe = p.candidates
        self.index = {e: k for k, e in enumerate(self.universe)}
        self.cost = np.array([p.costs[e] for e in self.universe])
        self.cuts: list[frozenset[int]] = []
        self.cut_keys: set[frozenset[int]] = set()
        self.nodes = 0
        self.lp_solves = 0
        self.m = p.m

    def _add_cut(self, edge_ids: Iterable[int]) -> None:
        key = frozenset(edge_ids)
        if key not in self.cut_keys:
            self.cut_keys.add(key)
            self.cuts.append(key)

    def _degree_rows(self) -> list[frozenset[int]]:
        if self.m < 2:
            return []
        rows = []
        for v in range(1, self.m + 1):
            rows.append(frozenset(k for k, (a, b) in enumerate(self.universe) if a == v and b != v))
            rows.append(frozenset(k for k, (a, b) in enumerate(self.universe) if b == v and a != v))
        return rows

    def _lp(self, include: frozenset[int], exclude: frozenset[int]):
        """Return (bound, x) or None if the node is infeasible."""
        self.lp_solves += 1
        free = [k for k in range(len(self.universe)) if k not in include and k not in exclude]
        pos = {k: t for t, k in enumerate(free)}
        base = float(self.cost[list(include)].sum()) if include else 0.0
        rows = []
        for row in self._degree_rows() + self.cuts:
            if row & include:
                continue
            live = [pos[k] for k in row if k in pos]
            if not live:
                return None
            rows.append(live)
        x = np.zeros(len(self.universe))
        x[list(include)] = 1.0
        if not free:
            return base, x
        if not rows:
            return base, x
        A = np.zeros((len(rows), len(free)))
        for r, live in enumerate(rows):
            A[r, live] = -1.0
        res = linprog(
            self.cost[free], A_ub=A, b_ub=-np.ones(len(rows)), bounds=(0.0, 1.0), method="highs"
        )
        if res.status == 2:
            return None
        if res.status != 0:
            raise RuntimeError(f"LP solver failed: {res.message}")
        x[free] = res.x
        return base + float(res.fun), x

    def _no_good(self, chosen: set[int]) -> None:
        grown = set(chosen)
        for k in range(len(self.universe)):
            if k in grown:
                continue
            trial = grown | {k}
            if not self.oracle(self.universe[t] for t in trial):
                grown = trial
        self._add_cut(k for k in range(len(self.universe)) if k not in grown)

    def search(
        self,
        include: frozenset[int],
        exclude: frozenset[int],
        upper: float,
        strict: bool = True,
        first: bool = False,
    ) -> tuple[float, frozenset[int]] | None:
        """Best solution in the subtree with cost below ``upper``.

        With ``strict=False`` cost equal to ``upper`` is accepted; ``first``
        stops at the first acceptable solution.
        """
        best: tuple[float, frozenset[int]] | None = None
        stack = [(include, exclude)]
        while stack:
            inc, exc = stack.pop()
            self.nodes += 1
            while True:
                out = self._lp(inc, exc)
                if out is None:
                    break
                bound, x = out
                limit = best[0] if best is not None else upper
                if (bound > limit - TOL) if (strict or best is not None) else (bound > limit + TOL):
                    break
                frac = [k for k in range(len(self.universe)) if TOL < x[k] < 1 - TOL]
                if frac:
                    k = frac[0]  # universe is ordered by cost, then edge
                    stack.append((inc, exc | {k}))
                    stack.append((inc | {k}, exc))
                    break
                chosen = {k for k in range(len(self.universe)) if x[k] > 0.5}
                edges = [self.universe[k] for k in chosen]
                if not _strongly_connected(self.m, edges):
                    for cut in strong_connectivity_cuts(self.m, edges):
                        self._add_cut(self.index[e] for e in cut.edges(self.universe))
                    continue
                if self.oracle(edges):
                    best = (bound, frozenset(chosen))
                    if first:
                        return best
                    break
                self._no_good(chosen)
        return best


def solve_min_cost_topology(p: DesignProblem) -> DesignSolution:
    """Provably minimum-cost feasible communication graph.

    Ties in cost go to the lexicographically smallest sorted edge list.
    Raises :class:`InfeasibleDesignError` if even the full finite-cost graph
    fails, and :class:`NotObservableError` if ``(A, C)`` is not observable.
    """
    oracle = _Oracle(p)
    _precheck(p, oracle)
    incumbent = heuristic_topology(p, oracle=oracle)
    bb = _BranchAndBound(p, oracle)
    forced = frozenset(bb.index[e] for e in p.forced)
    found = bb.search(forced, frozenset(), incumbent.total_cost)
    c_star = found[0] if found is not None else incumbent.total_cost
    c_star = p.cost(bb.universe[k] for k in found[1]) if found is not None else c_star

    # Lexicographic refinement among cost-c* solutions: fix the smallest
    # possible next edge, excluding everything skipped over.
    lex = sorted(range(len(bb.universe)), key=lambda k: bb.universe[k])
    prefix: list[int] = []
    pos = 0
    while True:
        chosen = set(prefix)
        if forced <= chosen and abs(p.cost(bb.universe[k] for k in chosen) - c_star) <= TOL * max(1.0, c_star):
            if oracle(bb.universe[k] for k in chosen):
                break
        for t in range(pos, len(lex)):
            skipped = frozenset(lex[pos:t])
            if skipped & forced:
                raise AssertionError("lexicographic refinement lost a forced edge")
            inc = frozenset(chosen | {lex[t]}) | forced
            exc = skipped
            if bb.search(inc, exc, c_star, strict=False, first=True) is not None:
                prefix.append(lex[t])
                pos = t + 1
                break
        else:
            raise AssertionError("lexicographic refinement found no optimal completion")
    edges = [bb.universe[k] for k in prefix]
    log.debug("branch and bound: %d nodes, %d LPs, %d cuts", bb.nodes, bb.lp_solves, len(bb.cuts))
    return _solution(
        p, edges, True, nodes=bb.nodes, lp_solves=bb.lp_solves, cuts=len(bb.cuts),
        oracle_calls=oracle.calls, heuristic_cost=incumbent.total_cost,
    )


# --------------------------------------------------------------------------
# Heuristic


def _linking_edges(p: DesignProblem, i: int, chosen: set[Edge]) -> set[Edge]:
    """Cheapest set of new links giving sensor ``i`` a linking, via one matching run.

    Left vertices are plant and sensor states.  Right vertices are those
    states, the sensor's own measurement, and one output per candidate
    in-neighbour.  Plant edges are free.  A communication edge costs its
    link cost unless it has already been chosen.
    """
    sys, n, m = p.sys, p.sys.n, p.m
    usable = set(p.candidates)
    own = ("y", 0)
    edges: dict[tuple, float] = {}
    for u, v in sys.state_edges:
        edges[(("x", u), ("x", v))] = 0.0
    for x, s in sys.measurements:
        edges[(("x", x), own if s == i else ("z", s))] = 0.0
    for a, b in usable:
        edges[(("z", a), ("z", b))] = 0.0 if (a, b) in chosen else p.costs[(a, b)]
    if p.modes[i - 1] is SensorMode.SELF_ONLY:
        edges[(("z", i), ("s", i))] = 0.0
    else:
        for j in range(1, m + 1):
            if (j, i) in usable:
                edges[(("z", j), ("s", j))] = 0.0 if (j, i) in chosen else p.costs[(j, i)]
    left = [("x", k) for k in range(1, n + 1)] + [("z", k) for k in range(1, m + 1)]
    right = left + [own] + [("s", k) for k in range(1, m + 1)]
    b = BipartiteGraph(tuple(left), tuple(right), frozenset(edges))
    match = min_cost_max_matching(b, edges)
    if match.left_unmatched:
        raise InfeasibleDesignError(f"sensor {i} has no linking over finite-cost links")
    new = set()
    for (ka, a), (kb, bb) in match.matched_edges:
        if ka == "z" and kb == "z":
            new.add((a, bb))
        elif ka == "z" and kb == "s" and p.modes[i - 1] is SensorMode.NEIGHBORS:
            new.add((a, i))
    return new


def _connect(p: DesignProblem, chosen: set[Edge]) -> None:
    """Greedy rooted arborescences (out of and into sensor 1) over the cheapest links."""
    m = p.m
    if m <= 1:
        return
    usable = [e for e in p.candidates if e[0] != e[1]]
    for forward in (True, False):
        while True:
            g = CommGraph(m, frozenset(chosen)).digraph
            inside = reachable_from(g, 1) if forward else all_reach(g, 1)
            if len(inside) == m:
                break
            options = [e for e in usable if (e[0] in inside) != (e[1] in inside)
                       and ((e[0] in inside) if forward else (e[1] in inside))]
            if not options:
                raise InfeasibleDesignError("no finite-cost links make the graph strongly connected")
            chosen.add(options[0])


def heuristic_topology(p: DesignProblem, oracle: _Oracle | None = None) -> DesignSolution:
    """Feasible, not necessarily optimal, design built sensor by sensor.

    Steps: per-sensor cheapest linking (shared links become free for later
    sensors), greedy strong-connectivity augmentation, then repair (add the
    cheapest links until feasible) and reverse-delete of removable links.
    """
    oracle = oracle or _Oracle(p)
    _precheck(p, oracle)
    unmatched = state_left_unmatched(p.sys)
    chosen: set[Edge] = set(p.forced)
    for i in range(1, p.m + 1):
        chosen |= _linking_edges(p, i, chosen)
    _connect(p, chosen)
    for e in p.candidates:
        if oracle(chosen):
            break
        chosen.add(e)
    for e in sorted(chosen, key=lambda e: (-p.costs[e], tuple(-v for v in e))):
        if e in p.forced:
            continue
        if oracle(chosen - {e}):
            chosen.discard(e)
    return _solution(p, chosen, False, state_left_unmatched=unmatched)


# --------------------------------------------------------------------------
# Exhaustive oracle


def _subsets_by_cost(costs: Sequence[float]):
    """Yield ``(cost, index tuple)`` for all subsets in nondecreasing cost order.

    ``costs`` must be sorted ascending.
    """
    heap = [(0.0, ())]
    while heap:
        c, s = heapq.heappop(heap)
        yield c, s
        j = s[-1] if s else -1
        if j + 1 < len(costs):
            heapq.heappush(heap, (c + costs[j + 1], s + (j + 1,)))
            if s:
                heapq.heappush(heap, (c - costs[j] + costs[j + 1], s[:-1] + (j + 1,)))


def _sc_mask(m: int, edges: Sequence[Edge], subset: int) -> bool:
    """Strong connectivity of the edges selected by bitmask ``subset``."""
    if m <= 1:
        return True
    out = [0] * m
    inn = [0] * m
    k = 0
    while subset:
        if subset & 1:
            a, b = edges[k]
            out[a - 1] |= 1 << (b - 1)
            inn[b - 1] |= 1 << (a - 1)
        subset >>= 1
        k += 1
    full = (1 << m) - 1
    for adj in (out, inn):
        seen = frontier = 1
        while frontier:
            nxt = 0
            f = frontier
            while f:
                low = f & -f
                nxt |= adj[low.bit_length() - 1]
                f ^= low
            frontier = nxt & ~seen
            seen |= nxt
        if seen != full:
            return False
    return True


def brute_force_topology(p: DesignProblem, max_m: int = 4) -> DesignSolution:
    """Scan edge subsets in increasing cost; return the cheapest feasible one.

    Pruning is exact: subsets that are not strongly connected are skipped,
    and so is any subset of a known infeasible set (feasibility is
    monotone).  Each infeasible subset is grown to a maximal infeasible one
    before being recorded.  Among equal-cost feasible subsets the
    lexicographically smallest sorted edge list wins.
    """
    if p.m > max_m:
        raise ValueError(f"m={p.m} exceeds the brute-force limit {max_m}")
    oracle = _Oracle(p)
    _precheck(p, oracle)
    optional = [e for e in p.candidates if e not in p.forced]
    forced_edges = list(p.forced)
    universe = forced_edges + optional
    forced_mask = (1 << len(forced_edges)) - 1
    costs = [p.costs[e] for e in optional]
    everything = (1 << len(universe)) - 1

    def edges_of(mask: int) -> list[Edge]:
        return [universe[k] for k in range(len(universe)) if mask >> k & 1]

    infeasible: list[int] = []
    best_cost = None
    best: list[Edge] | None = None
    examined = tested = 0
    for c, s in _subsets_by_cost(costs):
        if best_cost is not None and c > best_cost + TOL * max(1.0, best_cost):
            break
        examined += 1
        mask = forced_mask
        for k in s:
            mask |= 1 << (len(forced_edges) + k)
        if not _sc_mask(p.m, universe, mask):
            continue
        if any(mask & ~bad == 0 for bad in infeasible):
            continue
        tested += 1
        if not oracle(edges_of(mask)):
            grown = mask
            for k in range(len(universe)):
                bit = 1 << k
                if not grown & bit and not oracle(edges_of(grown | bit)):
                    grown |= bit
            if grown != everything:
                infeasible.append(grown)
            continue
        edges = sorted(edges_of(mask))
        if best is None or edges < best:
            best_cost = c if best_cost is None else best_cost
            best = edges
    if best is None:
        raise InfeasibleDesignError("no feasible subset")
    log.debug("brute force: %d subsets, %d oracle tests", examined, tested)
    return _solution(p, best, True, examined=examined, tested=tested, infeasible_sets=len(infeasible))
