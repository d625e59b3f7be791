"""Structural observability of plants, sensor networks and their augmentation.

Plant states occupy vertices ``1..n`` of the augmented digraph and sensor
states ``n+1..n+m``.  Output vertices used by the matching tests are
numbered after those.

Sensor ``i`` sees its own measurement ``c_i^T x`` together with the sensor
states indexed by its target set ``J_i``.  The same row ``c_i`` also drives
``z_i``.  Because of that shared parameter, observability of the augmented
pair matches that of the pair in which ``c_i`` is removed from the
dynamics of ``z_i`` and kept only as an output.  Any unobservable direction
has ``c_i x = 0``, so its dynamics do not change.  Every per-sensor test in
this module uses that decoupled pair, which has independent parameters.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .graphs import (
    BipartiteGraph,
    Digraph,
    Edge,
    all_reach,
    bipartite_representation,
    is_strongly_connected,
    max_matching,
    min_cost_max_matching,
    path_cycle_decomposition,
    spanned_by_disjoint_cycles,
    strongly_connected_components,
)


class NotObservableError(ValueError):
    """The plant/sensor pair (A, C) is not structurally observable."""


@dataclass(frozen=True)
class SparsityPattern:
    rows: int
    cols: int
    nonzeros: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        nz = frozenset((int(r), int(c)) for r, c in self.nonzeros)
        for r, c in nz:
            if not (1 <= r <= self.rows and 1 <= c <= self.cols):
                raise ValueError(f"entry {(r, c)} outside {self.rows}x{self.cols}")
        object.__setattr__(self, "nonzeros", nz)

    def row(self, r: int) -> frozenset[int]:
        return frozenset(c for rr, c in self.nonzeros if rr == r)

    def to_array(self):
        import numpy as np

        out = np.zeros((self.rows, self.cols), dtype=bool)
        for r, c in self.nonzeros:
            out[r - 1, c - 1] = True
        return out

    @classmethod
    def from_array(cls, arr) -> "SparsityPattern":
        rows, cols = arr.shape
        nz = {(r + 1, c + 1) for r in range(rows) for c in range(cols) if arr[r, c]}
        return cls(rows, cols, frozenset(nz))


def pattern_digraph(M: SparsityPattern) -> Digraph:
    """Digraph of a square pattern: entry (r, c) is the edge c -> r."""
    if M.rows != M.cols:
        raise ValueError("pattern must be square")
    return Digraph(M.rows, frozenset((c, r) for r, c in M.nonzeros))


@dataclass(frozen=True)
class SystemStructure:
    n: int
    m: int
    A_bar: SparsityPattern
    C_bar: SparsityPattern

    def __post_init__(self) -> None:
        if (self.A_bar.rows, self.A_bar.cols) != (self.n, self.n):
            raise ValueError("A_bar must be n x n")
        if (self.C_bar.rows, self.C_bar.cols) != (self.m, self.n):
            raise ValueError("C_bar must be m x n")

    @classmethod
    def from_edges(
        cls, n: int, m: int, state_edges: Iterable[Edge], measurements: Iterable[tuple[int, int]]
    ) -> "SystemStructure":
        """``state_edges`` are ``(from, to)`` pairs; ``measurements`` are ``(state, sensor)``."""
        A = SparsityPattern(n, n, frozenset((v, u) for u, v in state_edges))
        C = SparsityPattern(m, n, frozenset((s, x) for x, s in measurements))
        return cls(n, m, A, C)

    @property
    def state_edges(self) -> list[Edge]:
        return sorted((c, r) for r, c in self.A_bar.nonzeros)

    @property
    def measurements(self) -> list[tuple[int, int]]:
        return sorted((x, s) for s, x in self.C_bar.nonzeros)

    def measured_states(self, sensor: int) -> frozenset[int]:
        return self.C_bar.row(sensor)


@dataclass(frozen=True)
class CommGraph:
    """Sensor communication graph; ``(j, i)`` means sensor ``i`` receives from ``j``."""

    m: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        edges = frozenset((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if not (1 <= u <= self.m and 1 <= v <= self.m):
                raise ValueError(f"communication edge {(u, v)} outside 1..{self.m}")
        object.__setattr__(self, "edges", edges)

    @property
    def digraph(self) -> Digraph:
        return Digraph(self.m, self.edges)

    def in_neighbors(self, i: int) -> frozenset[int]:
        return frozenset(j for j, k in self.edges if k == i)

    def without(self, vertices: Iterable[int]) -> Digraph:
        """Induced subgraph on the remaining sensors, relabelled in sorted order."""
        drop = set(vertices)
        return self.digraph.induced(v for v in range(1, self.m + 1) if v not in drop)


class SensorMode(enum.Enum):
    NEIGHBORS = "neighbors"
    SELF_ONLY = "self"


def normalize_modes(modes: SensorMode | str | Sequence[SensorMode | str], m: int) -> tuple[SensorMode, ...]:
    if isinstance(modes, (SensorMode, str)):
        return (SensorMode(modes),) * m
    out = tuple(SensorMode(x) for x in modes)
    if len(out) != m:
        raise ValueError(f"expected {m} sensor modes, got {len(out)}")
    return out


def target_set(g: CommGraph, i: int, mode: SensorMode | str) -> frozenset[int]:
    """Sensors whose states sensor ``i`` can read: its in-neighbors, or only itself."""
    if not 1 <= i <= g.m:
        raise ValueError(f"invalid sensor index {i}")
    if SensorMode(mode) is SensorMode.SELF_ONLY:
        return frozenset({i})
    return g.in_neighbors(i)


@dataclass(frozen=True)
class AugmentedStructure:
    n: int
    m: int
    pattern: SparsityPattern

    @property
    def digraph(self) -> Digraph:
        return pattern_digraph(self.pattern)


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a structural test.

    ``passed`` holds exactly when every entry of ``conditions`` is true; a
    witness is attached on success and a counterexample on failure.
    """

    passed: bool
    conditions: dict[str, bool]
    witness: Any = None
    counterexample: Any = None
    sensor: int | None = None


@dataclass(frozen=True)
class LinkingWitness:
    """Vertex-disjoint communication paths ending in ``J_i`` plus a cycle cover of the rest.

    Sensors are numbered ``1..m``.
    """

    sensor: int
    paths: tuple[tuple[int, ...], ...]
    remainder_cycles: tuple[tuple[int, ...], ...]

    @property
    def path_vertices(self) -> frozenset[int]:
        return frozenset(v for p in self.paths for v in p)


@dataclass(frozen=True)
class DecentralizedReport:
    passed: bool
    strongly_connected: bool
    sensors: tuple[CheckReport, ...]

    @property
    def conditions(self) -> dict[str, bool]:
        out = {"strong connectivity": self.strongly_connected}
        for rep in self.sensors:
            out[f"sensor {rep.sensor}"] = rep.passed
        return out

    @property
    def failing_conditions(self) -> list[str]:
        return [k for k, v in self.conditions.items() if not v]


def _check_dims(sys: SystemStructure, g: CommGraph) -> None:
    if g.m != sys.m:
        raise ValueError(f"communication graph has {g.m} sensors, system has {sys.m}")


def build_augmented(sys: SystemStructure, g: CommGraph) -> AugmentedStructure:
    """Pattern of ``[A 0; C W(G)]``; ``W[i, j]`` is nonzero iff ``j -> i`` is in ``g``."""
    _check_dims(sys, g)
    n = sys.n
    nz = set(sys.A_bar.nonzeros)
    nz |= {(n + s, x) for s, x in sys.C_bar.nonzeros}
    nz |= {(n + i, n + j) for j, i in g.edges}
    return AugmentedStructure(n, sys.m, SparsityPattern(n + sys.m, n + sys.m, frozenset(nz)))


def sensor_output_structure(
    sys: SystemStructure, g: CommGraph, i: int, mode: SensorMode | str
) -> SparsityPattern:
    """Rows ``[c_i | 0]`` then ``[0 | e_j]`` for each ``j`` in ``J_i`` (ascending)."""
    _check_dims(sys, g)
    targets = sorted(target_set(g, i, mode))
    n = sys.n
    nz = {(1, x) for x in sys.measured_states(i)}
    nz |= {(2 + k, n + j) for k, j in enumerate(targets)}
    return SparsityPattern(1 + len(targets), n + sys.m, frozenset(nz))


def sensor_pair(
    sys: SystemStructure, g: CommGraph, i: int, mode: SensorMode | str
) -> tuple[SparsityPattern, SparsityPattern]:
    """Parameter-independent structural pair for sensor ``i``.

    Equal to ``(build_augmented, sensor_output_structure)`` except that the
    entries of ``c_i`` are dropped from row ``n + i`` of the dynamics.
    """
    aug = build_augmented(sys, g).pattern
    n = sys.n
    nz = frozenset((r, c) for r, c in aug.nonzeros if not (r == n + i and c <= n))
    return SparsityPattern(aug.rows, aug.cols, nz), sensor_output_structure(sys, g, i, mode)


def structural_observability(A_bar: SparsityPattern, C_bar: SparsityPattern) -> CheckReport:
    """Every state reaches an output, and a matching leaves no state left-unmatched."""
    n = A_bar.rows
    if A_bar.cols != n or C_bar.cols != n:
        raise ValueError("inconsistent dimensions")
    p = C_bar.rows
    edges = {(c, r) for r, c in A_bar.nonzeros} | {(c, n + r) for r, c in C_bar.nonzeros}
    g = Digraph(n + p, frozenset(edges))

    reach: set[int] = set()
    for y in range(n + 1, n + p + 1):
        reach |= all_reach(g, y)
    unreached = [x for x in range(1, n + 1) if x not in reach]

    m = max_matching(bipartite_representation(g, left=range(1, n + 1)))
    conditions = {"reachability": not unreached, "matching": not m.left_unmatched}
    if all(conditions.values()):
        return CheckReport(True, conditions, witness=m)
    counter = {"unreached": unreached, "left_unmatched": sorted(m.left_unmatched)}
    return CheckReport(False, conditions, counterexample=counter)


def single_output_family_check(M_bar: SparsityPattern) -> CheckReport:
    """Is ``(M, e_i^T)`` structurally observable for every ``i``?

    Holds iff the digraph of ``M`` is strongly connected and spanned by
    disjoint cycles.
    """
    g = pattern_digraph(M_bar)
    comps = strongly_connected_components(g)
    conditions = {
        "strong connectivity": len(comps) <= 1,
        "cycle cover": spanned_by_disjoint_cycles(g),
    }
    if all(conditions.values()):
        m = max_matching(bipartite_representation(g))
        return CheckReport(True, conditions, witness=path_cycle_decomposition(g, m))
    return CheckReport(False, conditions, counterexample={"components": [sorted(c) for c in comps]})


def _require_observable(sys: SystemStructure) -> None:
    rep = structural_observability(sys.A_bar, sys.C_bar)
    if not rep.passed:
        raise NotObservableError(f"(A, C) is not structurally observable: {rep.counterexample}")


@dataclass(frozen=True)
class _SensorGraph:
    """Decoupled state-output digraph of one sensor with its output vertices."""

    digraph: Digraph
    n: int
    m: int
    measurement_output: int
    target_outputs: dict[int, int]  # sensor j -> output vertex reading z_j

    @property
    def dynamic_vertices(self) -> range:
        return range(1, self.n + self.m + 1)

    def bipartite(self) -> BipartiteGraph:
        return bipartite_representation(self.digraph, left=self.dynamic_vertices)


def _sensor_graph(sys: SystemStructure, g: CommGraph, i: int, mode: SensorMode | str) -> _SensorGraph:
    n, m = sys.n, sys.m
    y0 = n + m + 1
    targets = sorted(target_set(g, i, mode))
    outs = {j: y0 + 1 + k for k, j in enumerate(targets)}
    edges = {(u, v) for u, v in sys.state_edges}
    for x, s in sys.measurements:
        edges.add((x, y0) if s == i else (x, n + s))
    edges |= {(n + u, n + v) for u, v in g.edges}
    edges |= {(n + j, o) for j, o in outs.items()}
    return _SensorGraph(Digraph(y0 + len(outs), frozenset(edges)), n, m, y0, outs)


def theorem2_check(sys: SystemStructure, g: CommGraph, i: int, mode: SensorMode | str) -> CheckReport:
    """Reachability/left-unmatched form of the per-sensor test.

    (i) every augmented vertex has a path to ``z_i``; (ii) some matching of
    the augmented state graph leaves no plant state unmatched and only
    sensors in ``J_i`` unmatched (one state measured by sensor ``i`` may
    instead end at its own measurement).  (ii) is decided in one matching
    run by attaching an output to each member of ``J_i``.
    """
    _check_dims(sys, g)
    n = sys.n
    aug = build_augmented(sys, g).digraph
    reach = all_reach(aug, n + i)
    sg = _sensor_graph(sys, g, i, mode)
    m = max_matching(sg.bipartite())
    conditions = {"reachability": len(reach) == aug.vertex_count, "matching": not m.left_unmatched}
    if all(conditions.values()):
        return CheckReport(True, conditions, witness=m, sensor=i)
    counter = {
        "unreached": sorted(set(aug.vertices) - reach),
        "left_unmatched": sorted(m.left_unmatched),
    }
    return CheckReport(False, conditions, counterexample=counter, sensor=i)


def _reach_set(sg: _SensorGraph) -> set[int]:
    reach: set[int] = set()
    for y in [sg.measurement_output, *sg.target_outputs.values()]:
        reach |= all_reach(sg.digraph, y)
    return reach


def _outputs_reached(sg: _SensorGraph) -> bool:
    reach = _reach_set(sg)
    return all(v in reach for v in sg.dynamic_vertices)


def _linking(sys: SystemStructure, g: CommGraph, i: int, mode: SensorMode | str) -> LinkingWitness | None:
    """Extract a linking from a left-perfect matching of the sensor graph, if any."""
    sg = _sensor_graph(sys, g, i, mode)
    b = sg.bipartite()
    m = min_cost_max_matching(b, {e: 0.0 for e in b.edges})
    if m.left_unmatched:
        return None
    n = sys.n
    dec = path_cycle_decomposition(sg.digraph, m)
    paths = []
    for path in dec.paths:
        segment = tuple(v - n for v in path if n < v <= n + sys.m)
        if segment:
            paths.append(segment)
    cycles = [tuple(v - n for v in c) for c in dec.cycles if c[0] > n]
    return LinkingWitness(i, tuple(sorted(paths)), tuple(sorted(cycles)))


def find_linking(
    sys: SystemStructure, g: CommGraph, i: int, mode: SensorMode | str
) -> LinkingWitness | None:
    """Linking witness for sensor ``i``, or ``None`` when its pair is not observable.

    Raises :class:`NotObservableError` when ``(A, C)`` itself is not.
    """
    _check_dims(sys, g)
    _require_observable(sys)
    if not _outputs_reached(_sensor_graph(sys, g, i, mode)):
        return None
    return _linking(sys, g, i, mode)


def validate_linking(
    sys: SystemStructure, g: CommGraph, witness: LinkingWitness, mode: SensorMode | str
) -> bool:
    """Check a linking witness independently of how it was produced.

    The paths must be simple, vertex-disjoint paths of ``g`` ending in
    ``J_i``.  The sensors off the paths must be covered by the given
    disjoint cycles of ``g``.  The plant states must be matchable into
    states, path starts, or the sensor's own measurement.
    """
    _check_dims(sys, g)
    i = witness.sensor
    targets = target_set(g, i, mode)
    used: set[int] = set()
    for path in witness.paths:
        if not path or len(set(path)) != len(path) or used & set(path):
            return False
        if any((a, b) not in g.edges for a, b in zip(path, path[1:])):
            return False
        if path[-1] not in targets:
            return False
        used |= set(path)
    covered: set[int] = set()
    for cycle in witness.remainder_cycles:
        if not cycle or len(set(cycle)) != len(cycle) or (used | covered) & set(cycle):
            return False
        if any((a, b) not in g.edges for a, b in zip(cycle, cycle[1:] + cycle[:1])):
            return False
        covered |= set(cycle)
    if used | covered != set(range(1, sys.m + 1)):
        return False
    if not spanned_by_disjoint_cycles(g.without(used)):
        return False

    # States route into each other, into a path start, or into sensor i's own output.
    n = sys.n
    starts = {p[0] for p in witness.paths}
    own = n + sys.m + 1
    edges = set(sys.state_edges)
    for x, s in sys.measurements:
        if s == i:
            edges.add((x, own))
        elif s in starts:
            edges.add((x, n + s))
    right = list(range(1, n + 1)) + [n + s for s in starts] + [own]
    b = BipartiteGraph(tuple(range(1, n + 1)), tuple(right), frozenset(edges))
    return not max_matching(b).left_unmatched


def theorem4_check(
    sys: SystemStructure, g: CommGraph, modes: SensorMode | str | Sequence[SensorMode | str]
) -> DecentralizedReport:
    """Decentralized observability from every sensor.

    The network passes when the communication graph is strongly connected
    and every sensor has a linking whose removal leaves a cycle-spanned
    remainder.  Each sensor's report also requires that every sensor can
    reach it.  That condition is implied by strong connectivity, and with
    it the report agrees sensor by sensor with the structural test of that
    sensor's pair.
    """
    _check_dims(sys, g)
    _require_observable(sys)
    modes = normalize_modes(modes, sys.m)
    sc = is_strongly_connected(g.digraph)
    reports = []
    for i, mode in enumerate(modes, start=1):
        sg = _sensor_graph(sys, g, i, mode)
        reached = _outputs_reached(sg)
        witness = _linking(sys, g, i, mode)
        conditions = {"reachability": reached, "linking": witness is not None}
        if witness is not None:
            conditions["remainder cycles"] = spanned_by_disjoint_cycles(g.without(witness.path_vertices))
        if all(conditions.values()):
            reports.append(CheckReport(True, conditions, witness=witness, sensor=i))
        else:
            counter = {
                "sensor": i,
                "unreached": sorted(set(sg.dynamic_vertices) - _reach_set(sg)),
            }
            reports.append(CheckReport(False, conditions, counterexample=counter, sensor=i))
    passed = sc and all(r.passed for r in reports)
    return DecentralizedReport(passed, sc, tuple(reports))


def state_left_unmatched(sys: SystemStructure) -> int:
    """Number of left-unmatched vertices of a maximum matching of the plant's state graph."""
    return len(max_matching(bipartite_representation(pattern_digraph(sys.A_bar))).left_unmatched)
