"""JSON system files and command reports.

A system file is a JSON object::

    {"n": 5, "m": 5,
     "state_edges": [[1, 2], ...],          # from, to
     "measurements": [[1, 1], ...],         # state, sensor
     "comm_edges": [[1, 3], ...],           # from, to
     "costs": {"default": 1, "self_loop": "inf", "overrides": [[1, 2, 3.5]]},
     "modes": "neighbors",                  # or "self", or one per sensor
     "weights": {"state": [[1, 2, 0.8]], "measurements": [], "comm": []},
     "seed": 7}

Indices are 1-based.  ``"inf"`` is the only way to write an infinite cost.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .design import uniform_costs
from .structure import CommGraph, SensorMode, SystemStructure, normalize_modes

KNOWN_KEYS = {
    "n", "m", "state_edges", "measurements", "comm_edges", "costs",
    "modes", "weights", "seed", "design", "description",
}
WEIGHT_BLOCKS = {"state": "A", "measurements": "C", "comm": "W"}


class InputError(ValueError):
    """Malformed or inconsistent input file; ``kind`` is "file", "syntax" or "semantic"."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind} error: {message}")
        self.kind = kind


@dataclass(frozen=True, eq=False)
class SystemFile:
    sys: SystemStructure
    g: CommGraph
    modes: tuple[SensorMode, ...]
    costs: dict[tuple[int, int], float]
    weights: dict[str, dict[tuple[int, int], float]] | None = None
    seed: int | None = None
    source: str = "<memory>"

    def to_json(self, comm_edges=None, extra: dict | None = None) -> dict:
        m = self.sys.m
        edges = sorted(self.g.edges if comm_edges is None else comm_edges)
        default = 1.0
        diag = {self.costs[(i, i)] for i in range(1, m + 1)}
        self_loop = diag.pop() if len(diag) == 1 else math.inf
        off = [c for (a, b), c in self.costs.items() if a != b]
        if off:
            default = max(set(off), key=lambda c: (off.count(c), -c))
        overrides = [
            [a, b, _cost_token(c)]
            for (a, b), c in sorted(self.costs.items())
            if c != (self_loop if a == b else default)
        ]
        modes = [x.value for x in self.modes]
        out: dict[str, Any] = {
            "n": self.sys.n,
            "m": m,
            "state_edges": [list(e) for e in self.sys.state_edges],
            "measurements": [list(e) for e in self.sys.measurements],
            "comm_edges": [list(e) for e in edges],
            "costs": {"default": _cost_token(default), "self_loop": _cost_token(self_loop), "overrides": overrides},
            "modes": modes[0] if len(set(modes)) == 1 else modes,
        }
        if self.weights:
            out["weights"] = {
                key: [_weight_entry(block, k, v) for k, v in sorted(self.weights.get(block, {}).items())]
                for key, block in WEIGHT_BLOCKS.items()
            }
        if self.seed is not None:
            out["seed"] = self.seed
        if extra:
            out.update(extra)
        return out


def _cost_token(c: float):
    return "inf" if math.isinf(c) else c


def _weight_entry(block: str, key: tuple[int, int], value: float) -> list:
    r, c = key
    # A[to, from], C[sensor, state], W[to, from] back to file order
    return [c, r, value]


def bundled_fixtures() -> list[str]:
    root = resources.files("lcde") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_path(name: str) -> tuple[str, str]:
    """Return (text, source label) for a file path or a bundled fixture name."""
    p = Path(name)
    if p.is_file():
        return p.read_text(), str(p)
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    bundled = resources.files("lcde") / "data" / f"{stem}.json"
    if str(p) == p.name and bundled.is_file():
        return bundled.read_text(), f"<fixture {stem}>"
    raise InputError("file", f"no such file or fixture: {name}")


def parse_system_file(path: str) -> SystemFile:
    text, source = resolve_path(path)
    return parse_system_text(text, source)


def parse_system_text(text: str, source: str = "<string>") -> SystemFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError("syntax", f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return system_from_dict(data, source)


def _fail(msg: str):
    raise InputError("semantic", msg)


def _int(data: dict, key: str, lo: int = 0) -> int:
    v = data.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        _fail(f"'{key}' must be an integer >= {lo}")
    return v


def _pairs(data: dict, key: str, rows: int, cols: int, what: tuple[str, str]) -> list[tuple[int, int]]:
    raw = data.get(key, [])
    if not isinstance(raw, list):
        _fail(f"'{key}' must be a list of pairs")
    out = []
    for k, item in enumerate(raw):
        if not (isinstance(item, list) and len(item) == 2 and all(_is_int(x) for x in item)):
            _fail(f"{key}[{k}] must be a pair of integers")
        a, b = item
        if not 1 <= a <= rows:
            _fail(f"{key}[{k}]: {what[0]} index {a} outside 1..{rows}")
        if not 1 <= b <= cols:
            _fail(f"{key}[{k}]: {what[1]} index {b} outside 1..{cols}")
        if (a, b) in out:
            _fail(f"{key}[{k}]: duplicate entry {[a, b]}")
        out.append((a, b))
    return out


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _number(x, where: str, allow_inf: bool) -> float:
    if allow_inf and x == "inf":
        return math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        _fail(f"{where} must be a finite number" + (' or "inf"' if allow_inf else ""))
    return float(x)


def _costs(raw, m: int) -> dict[tuple[int, int], float]:
    if raw is None:
        return uniform_costs(m)
    if not isinstance(raw, dict) or set(raw) - {"default", "self_loop", "overrides"}:
        _fail("'costs' must be an object with default, self_loop and overrides")
    default = _number(raw.get("default", 1.0), "costs.default", True)
    self_loop = _number(raw.get("self_loop", "inf"), "costs.self_loop", True)
    overrides = []
    for k, item in enumerate(raw.get("overrides", [])):
        if not (isinstance(item, list) and len(item) == 3 and _is_int(item[0]) and _is_int(item[1])):
            _fail(f"costs.overrides[{k}] must be [from, to, cost]")
        a, b = item[0], item[1]
        if not (1 <= a <= m and 1 <= b <= m):
            _fail(f"costs.overrides[{k}]: sensor index outside 1..{m}")
        c = _number(item[2], f"costs.overrides[{k}] cost", True)
        if (a, b) in [(x, y) for x, y, _ in overrides]:
            _fail(f"costs.overrides[{k}]: duplicate pair {[a, b]}")
        overrides.append((a, b, c))
    for name, c in (("default", default), ("self_loop", self_loop)):
        if c < 0:
            _fail(f"costs.{name} must be non-negative")
    if any(c < 0 for _, _, c in overrides):
        _fail("cost overrides must be non-negative")
    return uniform_costs(m, default, self_loop, overrides)


def _weights(raw, declared: dict[str, set[tuple[int, int]]]) -> dict[str, dict[tuple[int, int], float]] | None:
    if raw is None:
        return None
    if not isinstance(raw, dict) or set(raw) - set(WEIGHT_BLOCKS):
        _fail("'weights' must be an object with keys state, measurements, comm")
    out: dict[str, dict[tuple[int, int], float]] = {}
    for key, block in WEIGHT_BLOCKS.items():
        entries = {}
        for k, item in enumerate(raw.get(key, [])):
            if not (isinstance(item, list) and len(item) == 3 and _is_int(item[0]) and _is_int(item[1])):
                _fail(f"weights.{key}[{k}] must be [from, to, value]")
            a, b = item[0], item[1]
            if (a, b) not in declared[key]:
                _fail(f"weights.{key}[{k}]: {[a, b]} is not a declared edge")
            value = _number(item[2], f"weights.{key}[{k}] value", False)
            if value == 0:
                _fail(f"weights.{key}[{k}]: value must be nonzero")
            entries[(b, a)] = value
        out[block] = entries
    return out


def system_from_dict(data: Any, source: str = "<dict>") -> SystemFile:
    if not isinstance(data, dict):
        _fail("top level must be an object")
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        _fail(f"unknown keys {sorted(unknown)}")
    n = _int(data, "n", 1)
    m = _int(data, "m", 1)
    state_edges = _pairs(data, "state_edges", n, n, ("state", "state"))
    measurements = _pairs(data, "measurements", n, m, ("state", "sensor"))
    comm = _pairs(data, "comm_edges", m, m, ("sensor", "sensor"))
    try:
        modes = normalize_modes(data.get("modes", "neighbors"), m)
    except ValueError as exc:
        _fail(f"modes: {exc}")
    seed = data.get("seed")
    if seed is not None and (not _is_int(seed) or seed < 0):
        _fail("'seed' must be a non-negative integer")
    costs = _costs(data.get("costs"), m)
    weights = _weights(
        data.get("weights"),
        {"state": set(state_edges), "measurements": set(measurements), "comm": set(comm)},
    )
    sys = SystemStructure.from_edges(n, m, state_edges, measurements)
    return SystemFile(sys, CommGraph(m, frozenset(comm)), modes, costs, weights, seed, source)


# --------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class SensorResult:
    sensor: int
    passed: bool
    conditions: dict[str, bool] = field(default_factory=dict)
    paths: list[list[int]] = field(default_factory=list)
    cycles: list[list[int]] = field(default_factory=list)
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Report:
    command: list[str]
    exit_code: int
    conditions: dict[str, bool] = field(default_factory=dict)
    sensors: list[SensorResult] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return {0: "pass", 1: "fail"}.get(self.exit_code, "error")

    def to_json(self) -> str:
        body = asdict(self)
        body["verdict"] = self.verdict
        return json.dumps(_jsonable(body), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        body = json.loads(text)
        body.pop("verdict", None)
        body["sensors"] = [SensorResult(**s) for s in body.get("sensors", [])]
        return cls(**body)

    def render(self) -> str:
        lines = [f"{' '.join(self.command)}: {self.verdict.upper()}"]
        for name, ok in self.conditions.items():
            lines.append(f"  {name}: {'ok' if ok else 'FAILED'}")
        for s in self.sensors:
            bits = ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in s.conditions.items())
            lines.append(f"  sensor {s.sensor}: {'pass' if s.passed else 'fail'}" + (f" ({bits})" if bits else ""))
            if s.paths or s.cycles:
                lines.append(f"    paths {_fmt_seq(s.paths)}  cycles {_fmt_seq(s.cycles)}")
            for k, v in s.detail.items():
                lines.append(f"    {k}: {v}")
        for k, v in self.data.items():
            if isinstance(v, list) and len(v) > 12:
                v = f"[{len(v)} items]"
            lines.append(f"  {k}: {v}")
        for e in self.errors:
            lines.append(f"  error: {e}")
        return "\n".join(lines)


def _fmt_seq(seqs) -> str:
    return "[" + ", ".join("(" + " ".join(str(v) for v in s) + ")" for s in seqs) + "]"


def _jsonable(x):
    """Plain JSON types; infinities become "inf"."""
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if hasattr(x, "item"):
        return _jsonable(x.item())
    return x


def normalize(x):
    """Round-trip a value through JSON so it compares equal after parsing."""
    return json.loads(json.dumps(_jsonable(x)))
