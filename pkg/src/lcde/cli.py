"""Command-line entry point: check, design, verify, simulate, estimate."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .design import (
    DesignProblem,
    InfeasibleDesignError,
    heuristic_topology,
    solve_min_cost_topology,
)
from .io import InputError, Report, SensorResult, SystemFile, normalize, parse_system_file
from .numeric import (
    RankDeficientError,
    finite_time_estimate,
    generic_observability_test,
    observability_rank,
    realize,
    simulate,
)
from .structure import NotObservableError, theorem4_check

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
ESTIMATE_TOL = 1e-6


def resolve_seed(flag: int | None, sf: SystemFile) -> int:
    """Flag, then the file's seed, then ``LCDE_SEED``, then 0."""
    if flag is not None:
        return flag
    if sf.seed is not None:
        return sf.seed
    env = os.environ.get("LCDE_SEED")
    if env is None or env == "":
        return 0
    try:
        value = int(env)
    except ValueError:
        raise InputError("semantic", f"LCDE_SEED must be an integer, got {env!r}") from None
    if value < 0:
        raise InputError("semantic", "LCDE_SEED must be non-negative")
    return value


def initial_state(sf: SystemFile, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Standard normal ``x[0]`` and ``z[0]`` from a stream separate from the weights."""
    rng = np.random.default_rng([seed, 1])
    return rng.standard_normal(sf.sys.n), rng.standard_normal(sf.sys.m)


def _witness_lists(w) -> tuple[list[list[int]], list[list[int]]]:
    if w is None:
        return [], []
    return [list(p) for p in w.paths], [list(c) for c in w.remainder_cycles]


def cmd_check(sf: SystemFile, args, argv) -> Report:
    rep = theorem4_check(sf.sys, sf.g, sf.modes)
    sensors = []
    for r in rep.sensors:
        paths, cycles = _witness_lists(r.witness)
        detail = {"mode": sf.modes[r.sensor - 1].value}
        if r.counterexample:
            detail["unreached"] = r.counterexample["unreached"]
        sensors.append(SensorResult(r.sensor, r.passed, dict(r.conditions), paths, cycles, detail))
    data = {"failing_conditions": rep.failing_conditions}
    return Report(argv, EXIT_PASS if rep.passed else EXIT_FAIL, {"strong connectivity": rep.strongly_connected}, sensors, data)


def cmd_design(sf: SystemFile, args, argv) -> Report:
    p = DesignProblem(sf.sys, sf.modes, sf.costs)
    try:
        sol = heuristic_topology(p) if args.heuristic else solve_min_cost_topology(p)
    except InfeasibleDesignError as exc:
        return Report(argv, EXIT_FAIL, errors=[str(exc)])
    sensors = []
    for w in sol.certificates:
        paths, cycles = _witness_lists(w)
        sensors.append(SensorResult(w.sensor, True, {}, paths, cycles))
    data = normalize({
        "method": "heuristic" if args.heuristic else "exact",
        "edges": [list(e) for e in sol.edges],
        "total_cost": sol.total_cost,
        "optimal": sol.optimal,
        "stats": sol.stats,
    })
    if args.out:
        extra = {"design": {k: data[k] for k in ("method", "total_cost", "optimal")}}
        extra["design"]["certificates"] = [
            {"sensor": s.sensor, "paths": s.paths, "cycles": s.cycles} for s in sensors
        ]
        Path(args.out).write_text(json.dumps(normalize(sf.to_json(sol.edges, extra)), indent=2) + "\n")
        data["out"] = args.out
    return Report(argv, EXIT_PASS, {}, sensors, data)


def cmd_verify(sf: SystemFile, args, argv) -> Report:
    if args.trials < 1:
        raise InputError("semantic", "--trials must be >= 1")
    seed = resolve_seed(args.seed, sf)
    rep = generic_observability_test(sf.sys, sf.g, sf.modes, trials=args.trials, seed=seed, tol=args.tol)
    sensors = [
        SensorResult(
            s.sensor, s.generic, {},
            detail=normalize({"passes": s.passes, "trials": s.trials, "failure_conditions": list(s.failure_conditions)}),
        )
        for s in rep.sensors
    ]
    data = {"seed": seed, "trials": args.trials, "tol": args.tol, "generic": rep.generic}
    return Report(argv, EXIT_PASS if rep.generic else EXIT_FAIL, {}, sensors, data)


def cmd_simulate(sf: SystemFile, args, argv) -> Report:
    if args.steps < 0:
        raise InputError("semantic", "--steps must be >= 0")
    seed = resolve_seed(args.seed, sf)
    r = realize(sf.sys, sf.g, seed, sf.weights)
    x0, z0 = initial_state(sf, seed)
    traj = simulate(r, sf.g, sf.modes, x0, z0, args.steps)
    data = normalize({
        "seed": seed,
        "steps": args.steps,
        "states": traj.states.tolist(),
        "outputs": {str(i): y.tolist() for i, y in traj.outputs.items()},
    })
    return Report(argv, EXIT_PASS, {}, [], data)


def cmd_estimate(sf: SystemFile, args, argv) -> Report:
    seed = resolve_seed(args.seed, sf)
    m = sf.sys.m
    which = [args.sensor] if args.sensor is not None else list(range(1, m + 1))
    for i in which:
        if not 1 <= i <= m:
            raise InputError("semantic", f"--sensor {i} outside 1..{m}")
    r = realize(sf.sys, sf.g, seed, sf.weights)
    x0, z0 = initial_state(sf, seed)
    N = sf.sys.n + m
    traj = simulate(r, sf.g, sf.modes, x0, z0, N - 1)
    truth = traj.states[0]
    sensors, errors = [], []
    for i in which:
        try:
            est = finite_time_estimate(r, sf.g, sf.modes, i, traj.outputs[i], truth)
        except RankDeficientError as exc:
            errors.append(str(exc))
            sensors.append(SensorResult(i, False, {}, detail={"rank": exc.rank, "size": exc.size}))
            continue
        ok = est.relative_error < ESTIMATE_TOL
        detail = normalize({
            "rank": observability_rank(r.augmented, r.output_matrix(sf.g, i, sf.modes[i - 1])),
            "relative_error": est.relative_error,
            "condition_number": est.condition_number,
        })
        sensors.append(SensorResult(i, ok, {}, detail=detail))
    passed = all(s.passed for s in sensors)
    return Report(argv, EXIT_PASS if passed else EXIT_FAIL, {}, sensors, {"seed": seed, "window": N}, errors)


COMMANDS = {
    "check": cmd_check,
    "design": cmd_design,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcde", description="Structural checks and design for sensor networks.")
    parser.add_argument("--json", action="store_true", help="machine-readable report on stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help)
        sp.add_argument("file", help="system file path or bundled fixture name")
        sp.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
        return sp

    add("check", "per-sensor structural observability")
    sp = add("design", "minimum-cost communication graph")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true", help="branch and bound (default)")
    group.add_argument("--heuristic", action="store_true")
    sp.add_argument("--out", help="write the system file with the designed edges")
    sp = add("verify", "random-realization rank test")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp = add("simulate", "run the augmented dynamics")
    sp.add_argument("--steps", type=int, default=10)
    sp.add_argument("--seed", type=int)
    sp = add("estimate", "finite-time recovery of the initial state")
    sp.add_argument("--sensor", type=int)
    sp.add_argument("--seed", type=int)
    return parser


def run_command(argv: list[str]) -> tuple[int, Report]:
    """Parse ``argv`` and run one subcommand; argparse usage errors exit with 2."""
    args = build_parser().parse_args(argv)
    echo = list(argv)
    try:
        sf = parse_system_file(args.file)
        report = COMMANDS[args.command](sf, args, echo)
    except InputError as exc:
        report = Report(echo, EXIT_INPUT, errors=[str(exc)])
    except NotObservableError as exc:
        report = Report(echo, EXIT_FAIL, {"plant observability": False}, errors=[str(exc)])
    except ValueError as exc:
        report = Report(echo, EXIT_INPUT, errors=[f"semantic error: {exc}"])
    return report.exit_code, report


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    code, report = run_command(argv)
    as_json = "--json" in argv
    if as_json:
        print(report.to_json())
    else:
        out = sys.stderr if code == EXIT_INPUT else sys.stdout
        print(report.render(), file=out)
    return code


if __name__ == "__main__":
    sys.exit(main())
