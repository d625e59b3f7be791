import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcde.design import (
    CutConstraint,
    DesignProblem,
    InfeasibleDesignError,
    brute_force_topology,
    heuristic_topology,
    solve_min_cost_topology,
    strong_connectivity_cuts,
    uniform_costs,
    validate_topology,
)
from lcde.fixtures import FIG2_COMM_EDGES, random_instance
from lcde.structure import CommGraph, NotObservableError, SystemStructure, theorem4_check
from oracles import strongly_connected


def random_problem(seed: int, m_max: int = 4) -> DesignProblem:
    rng = np.random.default_rng(seed)
    sys, _, modes = random_instance(rng, n_max=4, m_max=m_max)
    overrides = [(a, b, int(rng.integers(1, 4))) for a in range(1, sys.m + 1) for b in range(1, sys.m + 1) if a != b]
    return DesignProblem(sys, modes, uniform_costs(sys.m, overrides=overrides))


def test_uniform_costs():
    c = uniform_costs(3, overrides={(1, 2): 5})
    assert c[(1, 1)] == math.inf and c[(2, 3)] == 1 and c[(1, 2)] == 5
    with pytest.raises(ValueError):
        uniform_costs(2, overrides=[(1, 3, 1.0)])


def test_problem_validation(fig1):
    with pytest.raises(ValueError):
        DesignProblem(fig1, "neighbors", {(1, 2): 1})
    costs = uniform_costs(5)
    with pytest.raises(ValueError):
        DesignProblem(fig1, "neighbors", {**costs, (1, 2): -1})
    with pytest.raises(ValueError):
        DesignProblem(fig1, "neighbors", costs, forced=frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        DesignProblem(fig1, "neighbors", costs, forced=frozenset({(1, 2)}), forbidden=frozenset({(1, 2)}))


def test_candidates_sorted(fig1):
    p = DesignProblem(fig1, "neighbors", uniform_costs(5, overrides={(5, 4): 0.5}))
    assert p.candidates[0] == (5, 4)
    assert p.candidates[1:4] == [(1, 2), (1, 3), (1, 4)]
    assert all(a != b for a, b in p.candidates)


def test_validate_fig2(fig1):
    p = DesignProblem(fig1, "neighbors", uniform_costs(5))
    assert validate_topology(p, FIG2_COMM_EDGES) == (True, 11.0)
    assert validate_topology(p, []) == (False, 0.0)
    minus = set(FIG2_COMM_EDGES) - {(3, 5)}
    ok, cost = validate_topology(p, minus)
    assert cost == 10.0
    assert ok == theorem4_check(fig1, CommGraph(5, frozenset(minus)), "neighbors").passed
    with pytest.raises(ValueError):
        validate_topology(p, [(1, 1)])


def test_ring_design(ring):
    sys, _ = ring
    p = DesignProblem(sys, "neighbors", uniform_costs(2))
    for solve in (solve_min_cost_topology, heuristic_topology, brute_force_topology):
        sol = solve(p)
        assert sol.edges == ((1, 2), (2, 1)) and sol.total_cost == 2
    assert solve_min_cost_topology(p).optimal
    assert not heuristic_topology(p).optimal


def test_forced_superset_returned(fig1):
    p = DesignProblem(fig1, "neighbors", uniform_costs(5), forced=frozenset(FIG2_COMM_EDGES))
    assert heuristic_topology(p).edges == tuple(sorted(FIG2_COMM_EDGES))
    sol = solve_min_cost_topology(p)
    assert sol.edges == tuple(sorted(FIG2_COMM_EDGES)) and sol.total_cost == 11


def test_relay_sensor():
    # sensor 3 measures nothing; it can only pass information along
    sys = SystemStructure.from_edges(2, 3, [(1, 2), (2, 1)], [(1, 1), (2, 2)])
    costs = uniform_costs(3, overrides=[(1, 2, 5), (2, 1, 5)])
    p = DesignProblem(sys, "neighbors", costs)
    exact, brute = solve_min_cost_topology(p), brute_force_topology(p)
    assert exact.total_cost == brute.total_cost
    assert exact.edges == brute.edges
    assert any(b == 3 for _, b in exact.edges) and any(a == 3 for a, _ in exact.edges)


def test_infeasible_design(ring):
    sys, _ = ring
    costs = uniform_costs(2, default=math.inf)
    p = DesignProblem(sys, "neighbors", costs)
    for solve in (solve_min_cost_topology, heuristic_topology, brute_force_topology):
        with pytest.raises(InfeasibleDesignError):
            solve(p)


def test_unobservable_plant_rejected():
    sys = SystemStructure.from_edges(2, 2, [(1, 2)], [(1, 1), (1, 2)])
    with pytest.raises(NotObservableError):
        solve_min_cost_topology(DesignProblem(sys, "neighbors", uniform_costs(2)))


def test_brute_force_size_limit(fig1):
    with pytest.raises(ValueError):
        brute_force_topology(DesignProblem(fig1, "neighbors", uniform_costs(5)))


def test_cut_constraint():
    c = CutConstraint(frozenset({1, 2}), 3)
    assert c.edges([(1, 3), (3, 1), (2, 3), (1, 2)]) == {(1, 3), (2, 3)}
    assert c.satisfied_by([(2, 3)]) and not c.satisfied_by([(3, 1)])
    for bad in (frozenset(), frozenset({1, 2, 3}), frozenset({4})):
        with pytest.raises(ValueError):
            CutConstraint(bad, 3)


def test_cuts_of_disconnected_graph():
    cuts = strong_connectivity_cuts(3, [(1, 2), (2, 1)])
    assert cuts and all(not c.satisfied_by([(1, 2), (2, 1)]) for c in cuts)
    assert strong_connectivity_cuts(3, [(1, 2), (2, 3), (3, 1)]) == []


all_pairs = [(a, b) for a in range(1, 5) for b in range(1, 5) if a != b]


@given(st.sets(st.sampled_from(all_pairs)), st.sets(st.sampled_from(all_pairs)))
def test_cuts_never_remove_strongly_connected_sets(cut_source, edges):
    for c in strong_connectivity_cuts(4, cut_source):
        if strongly_connected(4, edges):
            assert c.satisfied_by(edges)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_exact_matches_brute_force(seed):
    p = random_problem(seed)
    try:
        brute = brute_force_topology(p)
    except InfeasibleDesignError:
        with pytest.raises(InfeasibleDesignError):
            solve_min_cost_topology(p)
        return
    exact = solve_min_cost_topology(p)
    heur = heuristic_topology(p)
    assert exact.total_cost == brute.total_cost
    assert exact.edges == brute.edges
    assert heur.total_cost >= exact.total_cost
    for sol in (exact, heur):
        assert validate_topology(p, sol.edges) == (True, sol.total_cost)
        assert all(a != b for a, b in sol.edges)


def test_solver_is_deterministic():
    p = random_problem(2024)
    runs = [solve_min_cost_topology(p) for _ in range(3)]
    assert all(r.edges == runs[0].edges and r.stats == runs[0].stats for r in runs)


def test_self_loops_allowed_when_priced():
    sys = SystemStructure.from_edges(1, 1, [], [(1, 1)])
    p = DesignProblem(sys, "neighbors", uniform_costs(1, self_loop=1.0))
    assert solve_min_cost_topology(p).edges == ((1, 1),)
    with pytest.raises(InfeasibleDesignError):
        solve_min_cost_topology(DesignProblem(sys, "neighbors", uniform_costs(1)))


def test_fig1_heuristic_feasible(fig1):
    p = DesignProblem(fig1, "neighbors", uniform_costs(5))
    sol = heuristic_topology(p)
    assert validate_topology(p, sol.edges)[0]
    assert sol.total_cost >= 11
    for w in sol.certificates:
        assert w is not None


@pytest.mark.parametrize("m", [2, 3])
def test_exhaustive_small_enumeration(m):
    # every feasible subset costs at least the brute force optimum
    sys = SystemStructure.from_edges(1, m, [(1, 1)], [(1, s) for s in range(1, m + 1)])
    p = DesignProblem(sys, "neighbors", uniform_costs(m))
    best = brute_force_topology(p).total_cost
    cands = p.candidates
    for k in range(len(cands) + 1):
        for sub in itertools.combinations(cands, k):
            if validate_topology(p, sub)[0]:
                assert k >= best
    assert solve_min_cost_topology(p).total_cost == best
