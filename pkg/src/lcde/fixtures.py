"""Reference instances and a random instance generator."""

from __future__ import annotations

import numpy as np

from .structure import CommGraph, SensorMode, SystemStructure, structural_observability

FIG1_STATE_EDGES = ((1, 2), (3, 2), (3, 4), (4, 3), (4, 5), (5, 4))
FIG2_COMM_EDGES = (
    (1, 3), (1, 4), (2, 3), (3, 1), (3, 2), (3, 4),
    (3, 5), (4, 5), (5, 1), (5, 2), (5, 4),
)


def fig1_system() -> SystemStructure:
    """Five-state plant, sensor ``i`` measuring state ``i``."""
    return SystemStructure.from_edges(5, 5, FIG1_STATE_EDGES, [(i, i) for i in range(1, 6)])


def fig2_graph() -> CommGraph:
    return CommGraph(5, frozenset(FIG2_COMM_EDGES))


def ring_system() -> SystemStructure:
    """Two states coupled both ways, each measured by its own sensor."""
    return SystemStructure.from_edges(2, 2, [(1, 2), (2, 1)], [(1, 1), (2, 2)])


def ring_graph() -> CommGraph:
    return CommGraph(2, frozenset({(1, 2), (2, 1)}))


def random_edges(rng: np.random.Generator, rows: int, cols: int, density: float) -> list[tuple[int, int]]:
    mask = rng.random((rows, cols)) < density
    return [(r + 1, c + 1) for r in range(rows) for c in range(cols) if mask[r, c]]


def random_instance(
    rng: np.random.Generator,
    n_max: int = 4,
    m_max: int = 3,
    density: tuple[float, float] = (0.3, 0.7),
    mixed_modes: bool = True,
    max_tries: int = 1000,
) -> tuple[SystemStructure, CommGraph, tuple[SensorMode, ...]]:
    """Random plant with a structurally observable ``(A, C)`` and a random network.

    Edge probability is drawn once per instance from ``density``; every
    ordered pair (self-loops included) is an edge independently.
    """
    for _ in range(max_tries):
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(1, m_max + 1))
        p = float(rng.uniform(*density))
        state_edges = random_edges(rng, n, n, p)
        measurements = random_edges(rng, n, m, p)
        sys = SystemStructure.from_edges(n, m, state_edges, measurements)
        if not structural_observability(sys.A_bar, sys.C_bar).passed:
            continue
        g = CommGraph(m, frozenset(random_edges(rng, m, m, p)))
        if mixed_modes:
            modes = tuple(
                SensorMode.SELF_ONLY if rng.random() < 0.3 else SensorMode.NEIGHBORS for _ in range(m)
            )
        else:
            modes = (SensorMode.NEIGHBORS,) * m
        return sys, g, modes
    raise RuntimeError("could not draw an observable instance")
