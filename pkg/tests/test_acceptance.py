"""Numbered acceptance criteria, each at its stated tolerance and time budget.

Every test prints a one-line summary; the terminal summary collects one
pass/fail line per criterion.
"""

import functools
import time

import numpy as np
import pytest

from lcde.design import (
    DesignProblem,
    InfeasibleDesignError,
    brute_force_topology,
    heuristic_topology,
    solve_min_cost_topology,
    uniform_costs,
    validate_topology,
)
from lcde.fixtures import FIG1_STATE_EDGES, FIG2_COMM_EDGES, fig1_system, fig2_graph, random_instance, ring_graph, ring_system
from lcde.graphs import (
    BipartiteGraph,
    Digraph,
    bipartite_representation,
    matching_cost,
    max_matching,
    min_cost_max_matching,
)
from lcde.numeric import (
    cycle_matrix,
    cycle_spectrum,
    finite_time_estimate,
    generic_observability_test,
    observability_rank,
    realize,
    simulate,
)
from lcde.structure import (
    CommGraph,
    LinkingWitness,
    SensorMode,
    SystemStructure,
    sensor_pair,
    state_left_unmatched,
    structural_observability,
    theorem2_check,
    theorem4_check,
    validate_linking,
)
from oracles import max_matching_size, min_cost_of_max

INSTANCE_SEED = 20240101
DESIGN_SEED = 777


@functools.lru_cache(maxsize=None)
def random_family(count: int = 200):
    rng = np.random.default_rng(INSTANCE_SEED)
    return [random_instance(rng, n_max=4, m_max=3, density=(0.3, 0.7)) for _ in range(count)]


@functools.lru_cache(maxsize=None)
def design_suite(count: int = 60):
    """Random design problems with m <= 4 and Omega_ii = inf; solved once, shared by two criteria."""
    rng = np.random.default_rng(DESIGN_SEED)
    out = []
    for _ in range(count):
        sys, _, modes = random_instance(rng, n_max=4, m_max=4, density=(0.3, 0.7))
        overrides = [
            (a, b, int(rng.integers(1, 4)))
            for a in range(1, sys.m + 1) for b in range(1, sys.m + 1) if a != b
        ]
        p = DesignProblem(sys, modes, uniform_costs(sys.m, overrides=overrides))
        try:
            brute = brute_force_topology(p)
        except InfeasibleDesignError:
            out.append((p, None, None, None))
            continue
        out.append((p, brute, solve_min_cost_topology(p), heuristic_topology(p)))
    return out


@pytest.mark.acceptance(1, "FIG1 state graph matching leaves 2 left-unmatched vertices")
def test_criterion_01_fig1_matching():
    t0 = time.perf_counter()
    m = max_matching(bipartite_representation(Digraph(5, frozenset(FIG1_STATE_EDGES))))
    elapsed = time.perf_counter() - t0
    assert len(m.left_unmatched) == 2, f"left-unmatched {sorted(m.left_unmatched)}"
    assert elapsed < 0.1, f"{elapsed:.3f}s"
    print(f"left-unmatched {sorted(m.left_unmatched)} in {elapsed * 1e3:.2f} ms")


@pytest.mark.acceptance(2, "FIG1+FIG2 checker passes every sensor with valid witnesses")
def test_criterion_02_fig1_fig2_check():
    sys, g = fig1_system(), fig2_graph()
    t0 = time.perf_counter()
    rep = theorem4_check(sys, g, "neighbors")
    valid = [validate_linking(sys, g, r.witness, "neighbors") for r in rep.sensors if r.passed]
    hand = validate_linking(sys, g, LinkingWitness(1, ((1, 4, 5), (2, 3)), ()), "neighbors")
    elapsed = time.perf_counter() - t0
    assert rep.passed and len(valid) == 5 and all(valid)
    assert g.in_neighbors(1) == {3, 5}
    assert hand, "witness (1,4,5) + (2,3) rejected"
    assert elapsed < 0.1, f"{elapsed:.3f}s"
    print(f"5/5 sensors pass, J_1 = {sorted(g.in_neighbors(1))}, hand witness valid, {elapsed * 1e3:.1f} ms")


@pytest.mark.acceptance(3, "exact design on FIG1 unit costs, confirmed by pruned exhaustive search")
def test_criterion_03_fig1_design():
    sys = fig1_system()
    p = DesignProblem(sys, "neighbors", uniform_costs(5))
    t0 = time.perf_counter()
    sol = solve_min_cost_topology(p)
    fig2_ok, fig2_cost = validate_topology(p, FIG2_COMM_EDGES)
    brute = brute_force_topology(p, max_m=5)
    elapsed = time.perf_counter() - t0
    assert sol.total_cost <= 11
    assert fig2_ok and fig2_cost == 11
    assert brute.total_cost == sol.total_cost and brute.edges == sol.edges
    assert validate_topology(p, sol.edges) == (True, sol.total_cost)
    assert elapsed < 300, f"{elapsed:.1f}s"
    same = "c* = 11, FIG2 is optimal" if sol.total_cost == 11 else f"c* = {sol.total_cost} < 11"
    print(f"{same}; exhaustive agrees; {elapsed:.1f}s")


@pytest.mark.acceptance(4, "per-sensor structural tests agree on random instances")
def test_criterion_04_structural_equivalence():
    t0 = time.perf_counter()
    pairs = agree = 0
    for sys, g, modes in random_family():
        rep = theorem4_check(sys, g, modes)
        for i, mode in enumerate(modes, start=1):
            a = rep.sensors[i - 1].passed
            b = theorem2_check(sys, g, i, mode).passed
            c = structural_observability(*sensor_pair(sys, g, i, mode)).passed
            pairs += 1
            agree += a == b == c
    elapsed = time.perf_counter() - t0
    assert len(random_family()) >= 50
    assert agree == pairs, f"{pairs - agree} disagreements out of {pairs}"
    assert elapsed < 60, f"{elapsed:.1f}s"
    print(f"{agree}/{pairs} (instance, sensor) pairs agree over {len(random_family())} instances, {elapsed:.2f}s")


@pytest.mark.acceptance(5, "structural verdicts agree with random-realization rank tests")
def test_criterion_05_structural_numeric():
    t0 = time.perf_counter()
    pairs = agree = 0
    unexplained = []
    for k, (sys, g, modes) in enumerate(random_family()):
        rep = theorem4_check(sys, g, modes)
        num = generic_observability_test(sys, g, modes, trials=20, seed=k, tol=1e-8)
        for s, n in zip(rep.sensors, num.sensors):
            pairs += 1
            if s.passed == n.generic:
                agree += 1
            elif not n.failure_conditions or min(n.failure_conditions) <= 1e8:
                unexplained.append((k, s.sensor, s.passed, n.passes))
    elapsed = time.perf_counter() - t0
    assert agree / pairs >= 0.98, f"agreement {agree}/{pairs}"
    assert not unexplained, f"unexplained disagreements {unexplained[:5]}"
    assert elapsed < 300, f"{elapsed:.1f}s"
    print(f"{agree}/{pairs} pairs agree, no unexplained disagreement, {elapsed:.1f}s")


@pytest.mark.acceptance(6, "finite-time recovery from exact outputs")
def test_criterion_06_recovery():
    t0 = time.perf_counter()
    worst = 0.0
    for sys, g in ((fig1_system(), fig2_graph()), (ring_system(), ring_graph())):
        r = realize(sys, g, 7)
        rng = np.random.default_rng(7)
        x0, z0 = rng.standard_normal(sys.n), rng.standard_normal(sys.m)
        N = sys.n + sys.m
        traj = simulate(r, g, "neighbors", x0, z0, N - 1)
        for i in range(1, sys.m + 1):
            est = finite_time_estimate(r, g, "neighbors", i, traj.outputs[i], traj.states[0])
            assert est.relative_error < 1e-6, f"sensor {i}: {est.relative_error:.2e}"
            worst = max(worst, est.relative_error)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1, f"{elapsed:.2f}s"
    print(f"worst relative error {worst:.1e}, {elapsed * 1e3:.0f} ms")


@pytest.mark.acceptance(7, "matching routines agree with exhaustive enumeration")
def test_criterion_07_matching_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(31337)
    count = 250
    for _ in range(count):
        nl, nr = (int(v) for v in rng.integers(1, 9, size=2))
        p = rng.uniform(0.1, 0.7)
        edges = frozenset((a, b) for a in range(nl) for b in range(nr) if rng.random() < p)
        b = BipartiteGraph(tuple(range(nl)), tuple(range(nr)), edges)
        cost = {e: int(rng.integers(0, 10)) for e in sorted(edges)}
        assert max_matching(b).size == max_matching_size(sorted(edges), list(b.left))
        mc = min_cost_max_matching(b, cost)
        assert mc.size == max_matching(b).size
        assert matching_cost(mc, cost) == min_cost_of_max(sorted(edges), list(b.left), cost)
    elapsed = time.perf_counter() - t0
    assert elapsed < 60, f"{elapsed:.1f}s"
    print(f"{count} graphs up to 8+8 vertices agree, {elapsed:.1f}s")


@pytest.mark.acceptance(8, "exact design matches brute force; heuristic feasible and no cheaper")
def test_criterion_08_design_oracle():
    t0 = time.perf_counter()
    suite = design_suite()
    solved = 0
    for p, brute, exact, heur in suite:
        if brute is None:
            with pytest.raises(InfeasibleDesignError):
                solve_min_cost_topology(p)
            continue
        solved += 1
        assert exact.total_cost == brute.total_cost, (exact.edges, brute.edges)
        assert exact.edges == brute.edges
        assert heur.total_cost >= exact.total_cost
        assert validate_topology(p, heur.edges)[0] and validate_topology(p, exact.edges)[0]
    elapsed = time.perf_counter() - t0
    assert solved >= 50, f"only {solved} feasible instances"
    assert elapsed < 300, f"{elapsed:.1f}s"
    gap = sum(h.total_cost > e.total_cost for _, _, e, h in suite if e is not None)
    print(f"{solved} feasible instances agree; heuristic above optimum on {gap}; {elapsed:.1f}s")


@pytest.mark.acceptance(9, "no designed solution uses a self-loop when self-loops cost inf")
def test_criterion_09_memoryless():
    loops = []
    total = 0
    for p, brute, exact, heur in design_suite():
        for sol in (brute, exact, heur):
            if sol is None:
                continue
            total += 1
            loops += [e for e in sol.edges if e[0] == e[1]]
    fig = solve_min_cost_topology(DesignProblem(fig1_system(), "neighbors", uniform_costs(5)))
    total += 1
    loops += [e for e in fig.edges if e[0] == e[1]]
    assert not loops, f"self-loops {loops}"
    print(f"{total} solutions, none with a self-loop")


@pytest.mark.acceptance(10, "self-only mode versus left-unmatched plant states")
def test_criterion_10_self_only():
    rng = np.random.default_rng(4242)
    cases = [(fig1_system(), fig2_graph())]
    while len(cases) < 40:
        sys, g, _ = random_instance(rng, n_max=5, m_max=3, density=(0.15, 0.5))
        if state_left_unmatched(sys) >= 2:
            cases.append((sys, g))
    passing = []
    for k, (sys, g) in enumerate(cases):
        rep = theorem4_check(sys, g, "self")
        for r in rep.sensors:
            if r.passed:
                rr = realize(sys, g, 0)
                rank = observability_rank(rr.augmented, rr.output_matrix(g, r.sensor, SensorMode.SELF_ONLY))
                passing.append((k, r.sensor, rank, sys.n + sys.m))

    # Positive side: a plant with no left-unmatched state where self-only works.
    sys = SystemStructure.from_edges(2, 2, [(1, 2), (2, 1)], [(1, 1), (2, 2)])
    ring_ok = theorem4_check(sys, CommGraph(2, frozenset({(1, 2), (2, 1)})), "self").passed
    assert ring_ok and state_left_unmatched(sys) <= 1

    assert not passing, (
        f"{len(passing)} sensors pass in self-only mode despite >= 2 left-unmatched states; "
        f"first (case, sensor, numeric rank, n+m): {passing[:3]}"
    )
    print(f"{len(cases)} instances with >= 2 left-unmatched states: no self-only sensor passes")


@pytest.mark.acceptance(11, "cycle spectrum formula matches eigenvalues")
def test_criterion_11_cycle_spectrum():
    rng = np.random.default_rng(11)
    worst = 0.0
    for r in range(1, 9):
        for _ in range(20):
            w = rng.uniform(0.2, 2.0, size=r) * rng.choice([-1, 1], size=r)
            formula = cycle_spectrum(list(w))
            eig = list(np.linalg.eigvals(cycle_matrix(w)))
            for lam in formula:
                k = min(range(len(eig)), key=lambda j: abs(eig[j] - lam))
                worst = max(worst, abs(eig[k] - lam))
                eig.pop(k)
    assert worst < 1e-9, f"max deviation {worst:.2e}"
    print(f"160 cycles, max deviation {worst:.1e}")
