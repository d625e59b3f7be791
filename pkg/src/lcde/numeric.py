"""Weighted realizations, observability rank, simulation and finite-time recovery."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .structure import (
    CommGraph,
    SensorMode,
    SystemStructure,
    normalize_modes,
    target_set,
)

WEIGHT_LOW, WEIGHT_HIGH = 0.5, 1.5
EPS = 1e-12
GENERIC_THRESHOLD = 0.9


class RankDeficientError(ValueError):
    """The stacked observability matrix of a sensor is not full rank."""

    def __init__(self, sensor: int, rank: int, size: int):
        super().__init__(f"sensor {sensor}: observability rank {rank} < {size}")
        self.sensor = sensor
        self.rank = rank
        self.size = size


@dataclass(frozen=True, eq=False)
class WeightedRealization:
    A: np.ndarray
    C: np.ndarray
    W: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def augmented(self) -> np.ndarray:
        n, m = self.n, self.m
        return np.block([[self.A, np.zeros((n, m))], [self.C, self.W]])

    def output_matrix(self, g: CommGraph, i: int, mode: SensorMode | str) -> np.ndarray:
        """``C~_i``: own measurement row, then one row per sensor in ``J_i``."""
        targets = sorted(target_set(g, i, mode))
        out = np.zeros((1 + len(targets), self.n + self.m))
        out[0, : self.n] = self.C[i - 1]
        for k, j in enumerate(targets):
            out[1 + k, self.n + j - 1] = 1.0
        return out

    def scaled(self, block: str, entry: tuple[int, int], factor: float) -> "WeightedRealization":
        mats = {"A": self.A.copy(), "C": self.C.copy(), "W": self.W.copy()}
        r, c = entry
        mats[block][r - 1, c - 1] *= factor
        return WeightedRealization(mats["A"], mats["C"], mats["W"], self.seed)


def realize(
    sys: SystemStructure,
    g: CommGraph,
    seed: int,
    weights: Mapping[str, Mapping[tuple[int, int], float]] | None = None,
) -> WeightedRealization:
    """Draw every pattern nonzero uniformly from [0.5, 1.5].

    Entries are drawn in the order A, C, W, each row-major.  ``weights`` may
    pin entries by block (``"A"``, ``"C"``, ``"W"``) and 1-based
    ``(row, col)``; pinned entries still consume a draw so the rest of the
    realization does not shift.
    """
    if g.m != sys.m:
        raise ValueError("communication graph and system disagree on m")
    rng = np.random.default_rng(seed)
    n, m = sys.n, sys.m
    A = np.zeros((n, n))
    C = np.zeros((m, n))
    W = np.zeros((m, m))
    supports = {
        "A": (A, sys.A_bar.nonzeros),
        "C": (C, sys.C_bar.nonzeros),
        "W": (W, frozenset((i, j) for j, i in g.edges)),
    }
    weights = weights or {}
    for name, (mat, nz) in supports.items():
        pinned = weights.get(name, {})
        for key in pinned:
            if key not in nz:
                raise ValueError(f"explicit weight {name}{key} on a structural zero")
        for r, c in sorted(nz):
            value = rng.uniform(WEIGHT_LOW, WEIGHT_HIGH)
            mat[r - 1, c - 1] = pinned.get((r, c), value)
    return WeightedRealization(A, C, W, seed)


def observability_matrix(Atilde: np.ndarray, Ctilde: np.ndarray) -> np.ndarray:
    """``[C; CA; ...; CA^(N-1)]`` for ``N = Atilde.shape[0]``."""
    N = Atilde.shape[0]
    blocks = []
    block = np.asarray(Ctilde, dtype=float)
    for _ in range(N):
        blocks.append(block)
        block = block @ Atilde
    return np.vstack(blocks) if blocks else np.zeros((0, N))


def _equilibrate(O: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm rows (zero rows dropped) and columns; returns matrix and column scales."""
    rn = np.linalg.norm(O, axis=1)
    O = O[rn > 0] / rn[rn > 0, None]
    cn = np.linalg.norm(O, axis=0)
    cn = np.where(cn > 0, cn, 1.0)
    return O / cn, cn


def _check_finite(*mats: np.ndarray) -> None:
    for M in mats:
        if not np.all(np.isfinite(M)):
            raise ValueError("non-finite entries")


def observability_rank(Atilde: np.ndarray, Ctilde: np.ndarray, tol: float = 1e-8) -> int:
    """Numeric rank of the stacked observability matrix.

    Rows and columns are scaled to unit norm, then a column-pivoted QR is
    thresholded at ``tol`` times the largest pivot.
    """
    Atilde = np.asarray(Atilde, dtype=float)
    Ctilde = np.atleast_2d(np.asarray(Ctilde, dtype=float))
    if Atilde.ndim != 2 or Atilde.shape[0] != Atilde.shape[1] or Ctilde.shape[1] != Atilde.shape[0]:
        raise ValueError("dimension mismatch")
    _check_finite(Atilde, Ctilde)
    O, _ = _equilibrate(observability_matrix(Atilde, Ctilde))
    if O.size == 0:
        return 0
    R = scipy.linalg.qr(O, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return 0
    return int(np.sum(d > tol * d[0]))


def observability_condition(Atilde: np.ndarray, Ctilde: np.ndarray) -> float:
    O, _ = _equilibrate(observability_matrix(Atilde, Ctilde))
    if O.shape[0] < O.shape[1]:
        return math.inf
    s = np.linalg.svd(O, compute_uv=False)
    return math.inf if s[-1] == 0 else float(s[0] / s[-1])


@dataclass(frozen=True)
class SensorTrials:
    sensor: int
    passes: int
    trials: int
    failure_conditions: tuple[float, ...] = ()

    @property
    def fraction(self) -> float:
        return self.passes / self.trials

    @property
    def generic(self) -> bool:
        return self.fraction >= GENERIC_THRESHOLD


@dataclass(frozen=True)
class GenericReport:
    sensors: tuple[SensorTrials, ...]
    trials: int
    seed: int
    tol: float

    @property
    def generic(self) -> bool:
        return all(s.generic for s in self.sensors)


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def generic_observability_test(
    sys: SystemStructure,
    g: CommGraph,
    modes: SensorMode | str | Sequence[SensorMode | str],
    trials: int = 20,
    seed: int = 0,
    tol: float = 1e-8,
) -> GenericReport:
    """Fraction of random realizations with full observability rank, per sensor.

    A sensor is declared generic when at least 90% of the trials reach full
    rank.  Failing trials record the condition number of the equilibrated
    stacked matrix.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    modes = normalize_modes(modes, sys.m)
    N = sys.n + sys.m
    passes = [0] * sys.m
    conds: list[list[float]] = [[] for _ in range(sys.m)]
    for t in range(trials):
        r = realize(sys, g, trial_seed(seed, t))
        At = r.augmented
        for i, mode in enumerate(modes, start=1):
            Ct = r.output_matrix(g, i, mode)
            if observability_rank(At, Ct, tol) == N:
                passes[i - 1] += 1
            else:
                conds[i - 1].append(observability_condition(At, Ct))
    sensors = tuple(
        SensorTrials(i + 1, passes[i], trials, tuple(conds[i])) for i in range(sys.m)
    )
    return GenericReport(sensors, trials, seed, tol)


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray  # (K+1, n+m)
    outputs: dict[int, np.ndarray] = field(default_factory=dict)  # sensor -> (K+1, rows)


def simulate(
    r: WeightedRealization,
    g: CommGraph,
    modes: SensorMode | str | Sequence[SensorMode | str],
    x0: Sequence[float],
    z0: Sequence[float],
    K: int,
) -> Trajectory:
    """Run ``x[k+1] = A x[k]``, ``z[k+1] = C x[k] + W z[k]`` for ``K`` steps."""
    if K < 0:
        raise ValueError("K must be non-negative")
    x0 = np.asarray(x0, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    if x0.shape != (r.n,) or z0.shape != (r.m,) or g.m != r.m:
        raise ValueError("dimension mismatch")
    modes = normalize_modes(modes, r.m)
    states = np.empty((K + 1, r.n + r.m))
    x, z = x0, z0
    for k in range(K + 1):
        states[k, : r.n] = x
        states[k, r.n :] = z
        x, z = r.A @ x, r.C @ x + r.W @ z
    outputs = {
        i: states @ r.output_matrix(g, i, mode).T for i, mode in enumerate(modes, start=1)
    }
    return Trajectory(states, outputs)


@dataclass(frozen=True, eq=False)
class EstimationResult:
    sensor: int
    estimate: np.ndarray
    relative_error: float
    condition_number: float


def finite_time_estimate(
    r: WeightedRealization,
    g: CommGraph,
    modes: SensorMode | str | Sequence[SensorMode | str],
    i: int,
    outputs: np.ndarray,
    truth: np.ndarray | None = None,
    tol: float = 1e-8,
) -> EstimationResult:
    """Recover ``x~[0]`` from sensor ``i``'s outputs over ``n+m`` steps.

    ``outputs`` has one row per time step.  ``relative_error`` is measured
    against ``truth`` when given and is NaN otherwise.
    """
    modes = normalize_modes(modes, r.m)
    N = r.n + r.m
    At = r.augmented
    Ct = r.output_matrix(g, i, modes[i - 1])
    outputs = np.asarray(outputs, dtype=float)
    if outputs.shape[0] < N or outputs.shape[1] != Ct.shape[0]:
        raise ValueError(f"need {N} output samples of width {Ct.shape[0]}")
    rank = observability_rank(At, Ct, tol)
    if rank < N:
        raise RankDeficientError(i, rank, N)
    O = observability_matrix(At, Ct)
    Y = outputs[:N].reshape(-1)
    cn = np.linalg.norm(O, axis=0)
    cn = np.where(cn > 0, cn, 1.0)
    sol, *_ = np.linalg.lstsq(O / cn, Y, rcond=None)
    estimate = sol / cn
    cond = observability_condition(At, Ct)
    if truth is None:
        err = math.nan
    else:
        truth = np.asarray(truth, dtype=float)
        err = float(np.linalg.norm(estimate - truth) / max(np.linalg.norm(truth), EPS))
    return EstimationResult(i, estimate, err, cond)


def cycle_matrix(weights: Sequence[float]) -> np.ndarray:
    """Matrix of the weighted directed cycle ``1 -> 2 -> ... -> r -> 1``."""
    r = len(weights)
    M = np.zeros((r, r))
    for k, w in enumerate(weights):
        M[(k + 1) % r, k] = w
    return M


def cycle_spectrum(weights: Sequence[float]) -> list[complex]:
    """Eigenvalues of a weighted ``r``-cycle: the ``r``-th roots of the weight product."""
    r = len(weights)
    if r < 1:
        raise ValueError("need at least one weight")
    if any(w == 0 for w in weights):
        raise ValueError("weights must be nonzero")
    prod = math.prod(weights)
    base = complex(prod) ** (1.0 / r) if prod < 0 else complex(prod ** (1.0 / r))
    return [base * cmath.exp(2j * math.pi * k / r) for k in range(r)]
