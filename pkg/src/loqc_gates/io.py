"""Text formats for matrices, gate specs, run configs and traces.

Matrices are plain text: a ``rows cols`` line, then one ``re im`` pair per
entry in row-major order, each printed with 17 significant digits so that a
load/save cycle reproduces the file byte for byte.

Traces are JSON lines: a header with the gate spec and run config, one
record per optimized point, then (if the run finished) a summary with the
coalescence events.  Wall-clock times go to a ``.timing`` sidecar so that
the trace itself depends only on the inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .contraction import COALESCENCE_TOL
from .errors import LoadError
from .fock import FockState
from .targets import GateSpec, TargetGate

TRACE_FORMAT = "loqc-trace/1"
UNIT_TOL = 1e-8


def _num(x: float) -> str:
    return format(float(x), ".16e")


def format_matrix(u: np.ndarray) -> str:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got {u.ndim} dimensions")
    lines = [f"{u.shape[0]} {u.shape[1]}"]
    lines += [f"{_num(z.real)} {_num(z.imag)}" for z in u.ravel()]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, source: str = "<matrix>") -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise LoadError(f"{source}: dimensions: file is empty")
    head = lines[0].split()
    try:
        rows, cols = (int(x) for x in head)
    except ValueError:
        raise LoadError(f"{source}: dimensions: expected 'rows cols', got {lines[0]!r}") from None
    if rows < 1 or cols < 1:
        raise LoadError(f"{source}: dimensions: must be positive, got {rows}x{cols}")
    body = lines[1:]
    if len(body) != rows * cols:
        raise LoadError(f"{source}: entries: expected {rows * cols} entries for {rows}x{cols}, found {len(body)}")
    out = np.empty(rows * cols, dtype=complex)
    for i, ln in enumerate(body):
        parts = ln.split()
        where = f"entry ({i // cols},{i % cols})"
        if len(parts) != 2:
            raise LoadError(f"{source}: {where}: expected 're im', got {ln!r}")
        try:
            re, im = float(parts[0]), float(parts[1])
        except ValueError:
            raise LoadError(f"{source}: {where}: not a number: {ln!r}") from None
        if not (math.isfinite(re) and math.isfinite(im)):
            raise LoadError(f"{source}: {where}: non-finite value")
        out[i] = complex(re, im)
    return out.reshape(rows, cols)


def save_matrix(path, u: np.ndarray) -> None:
    Path(path).write_text(format_matrix(u))


def load_matrix(path, square: bool = True, contraction: bool = False, unitary: bool = False) -> np.ndarray:
    """Read a matrix file and check what the caller needs from it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise LoadError(f"{path}: file: {exc.strerror}") from None
    u = parse_matrix(text, str(path))
    if (square or contraction or unitary) and u.shape[0] != u.shape[1]:
        raise LoadError(f"{path}: dimensions: matrix must be square, got {u.shape[0]}x{u.shape[1]}")
    if contraction and np.linalg.norm(u, 2) > 1 + UNIT_TOL:
        raise LoadError(f"{path}: spectral_norm: {np.linalg.norm(u, 2):.12g} exceeds 1")
    if unitary:
        err = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
        if err > UNIT_TOL:
            raise LoadError(f"{path}: unitarity: |U^dag U - I| = {err:.3g}")
    return u


def load_target(path, label: str | None = None) -> TargetGate:
    """A D x D unitary with D a power of two; the qubit count follows from D."""
    m = load_matrix(path, unitary=True)
    d = m.shape[0]
    n = d.bit_length() - 1
    if d < 2 or 2**n != d:
        raise LoadError(f"{path}: dimensions: target size {d} is not a power of two")
    return TargetGate(n, m, label or Path(path).stem)


# ---------------------------------------------------------------------------
# gate specs


def _pairs(m: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(m, dtype=complex).ravel()]


def _from_pairs(data, shape: tuple[int, int], name: str) -> np.ndarray:
    try:
        arr = np.array([complex(float(re), float(im)) for re, im in data])
    except (TypeError, ValueError):
        raise LoadError(f"{name}: expected a list of [re, im] pairs") from None
    if arr.size != shape[0] * shape[1]:
        raise LoadError(f"{name}: expected {shape[0] * shape[1]} entries, found {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise LoadError(f"{name}: non-finite entry")
    return arr.reshape(shape)


def spec_to_dict(spec: GateSpec) -> dict:
    return {
        "label": spec.target.label,
        "n_qubits": spec.n_qubits,
        "target": _pairs(spec.target.matrix),
        "n_ancilla_modes": spec.n_ancilla_modes,
        "ancilla_occupations": list(spec.ancilla_occupations.occupations),
        "n_vacuum_modes": spec.n_vacuum_modes,
        "measured_pattern": list(spec.measured_pattern),
    }


def _field(d: dict, name: str, kind, where: str):
    if name not in d:
        raise LoadError(f"{where}.{name}: missing")
    v = d[name]
    if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise LoadError(f"{where}.{name}: expected an integer, got {v!r}")
    if kind is float and (isinstance(v, bool) or not isinstance(v, (int, float))):
        raise LoadError(f"{where}.{name}: expected a number, got {v!r}")
    if kind is list and not isinstance(v, list):
        raise LoadError(f"{where}.{name}: expected a list, got {type(v).__name__}")
    if kind is str and not isinstance(v, str):
        raise LoadError(f"{where}.{name}: expected a string, got {v!r}")
    if kind is bool and not isinstance(v, bool):
        raise LoadError(f"{where}.{name}: expected true/false, got {v!r}")
    return v


def spec_from_dict(d: dict, where: str = "gate") -> GateSpec:
    if not isinstance(d, dict):
        raise LoadError(f"{where}: expected an object")
    n = _field(d, "n_qubits", int, where)
    if not 1 <= n <= 4:
        raise LoadError(f"{where}.n_qubits: {n} outside 1..4")
    m = _from_pairs(_field(d, "target", list, where), (2**n, 2**n), f"{where}.target")
    label = _field(d, "label", str, where)
    try:
        target = TargetGate(n, m, label)
    except ValueError as exc:
        raise LoadError(f"{where}.target: {exc}") from None
    occ = _field(d, "ancilla_occupations", list, where)
    if not all(isinstance(k, int) and not isinstance(k, bool) and k >= 0 for k in occ):
        raise LoadError(f"{where}.ancilla_occupations: expected non-negative integers, got {occ}")
    pattern = _field(d, "measured_pattern", list, where)
    if not all(isinstance(k, int) and not isinstance(k, bool) and k >= 0 for k in pattern):
        raise LoadError(f"{where}.measured_pattern: expected non-negative integers, got {pattern}")
    if sum(pattern) != sum(occ):
        raise LoadError(
            f"{where}.measured_pattern: detects {sum(pattern)} photons but ancillas inject {sum(occ)}"
        )
    try:
        return GateSpec(
            target,
            _field(d, "n_ancilla_modes", int, where),
            FockState(tuple(occ)),
            n_vacuum_modes=_field(d, "n_vacuum_modes", int, where),
            measured_pattern=tuple(pattern),
        )
    except (ValueError, TypeError) as exc:
        raise LoadError(f"{where}: {exc}") from None


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to repeat a run.  Round-trips through JSON unchanged."""

    gate: str | None = None
    target_file: str | None = None
    cartan: tuple[float, float, float] | None = None
    n_ancillas: int | None = None
    epsilon: float = 1e-6
    eps_min: float | None = None
    eps_max: float | None = None
    eps_steps: int = 40
    restarts: int = 20
    seed: int = 0
    sigma: float = 1e-3
    coalescence_tol: float = COALESCENCE_TOL
    gradient_tolerance: float = 1e-6
    max_iterations: int = 4000
    continuation_start: float = 1.0
    continuation_factor: float = 100.0
    structure: str = "auto"
    out: str = "."

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.cartan is not None:
            d["cartan"] = list(self.cartan)
        return d

    @classmethod
    def from_dict(cls, d: dict, where: str = "config") -> "RunConfig":
        if not isinstance(d, dict):
            raise LoadError(f"{where}: expected an object")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise LoadError(f"{where}.{unknown[0]}: unknown field")
        kw = {}
        for name, value in d.items():
            if value is None:
                kw[name] = None
                continue
            if name in ("gate", "target_file", "structure", "out"):
                kw[name] = _field(d, name, str, where)
            elif name == "cartan":
                c = _field(d, name, list, where)
                if len(c) != 3 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in c):
                    raise LoadError(f"{where}.cartan: expected three numbers, got {c!r}")
                kw[name] = tuple(float(x) for x in c)
            elif name in ("eps_steps", "restarts", "seed", "max_iterations", "n_ancillas"):
                kw[name] = _field(d, name, int, where)
            else:
                kw[name] = float(_field(d, name, float, where))
        cfg = cls(**kw)
        problem = cfg.problem()
        if problem:
            raise LoadError(f"{where}.{problem[0]}: {problem[1]}")
        return cfg

    def problem(self) -> tuple[str, str] | None:
        """First violated invariant as (field, reason), or None."""
        sources = sum(x is not None for x in (self.gate, self.target_file, self.cartan))
        if sources != 1:
            return ("gate", "exactly one of gate, target_file, cartan is required")
        if self.epsilon <= 0:
            return ("epsilon", "must be positive")
        if self.eps_steps < 1:
            return ("eps_steps", "must be at least 1")
        if self.eps_min is not None and self.eps_min <= 0:
            return ("eps_min", "must be positive")
        if self.eps_min is not None and self.eps_max is not None and self.eps_max < self.eps_min:
            return ("eps_max", "must not be below eps_min")
        if self.restarts < 1:
            return ("restarts", "must be at least 1")
        if self.sigma < 0:
            return ("sigma", "must be non-negative")
        if not 0 < self.coalescence_tol < 1:
            return ("coalescence_tol", "must lie in (0, 1)")
        if self.gradient_tolerance <= 0:
            return ("gradient_tolerance", "must be positive")
        if self.max_iterations < 1:
            return ("max_iterations", "must be at least 1")
        if self.continuation_factor <= 1:
            return ("continuation_factor", "must exceed 1")
        if self.structure not in ("auto", "full", "knill"):
            return ("structure", f"unknown search structure {self.structure!r}")
        if self.n_ancillas is not None and self.n_ancillas < 0:
            return ("n_ancillas", "must be non-negative")
        return None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class TraceRecord:
    epsilon: float
    delta: float
    success: float
    fidelity: float
    nsv: tuple[float, ...]
    implied_vacuum_modes: int
    s_min: float
    s_max: float
    knill_form_score: float
    converged: bool
    u: np.ndarray = field(repr=False, compare=False)
    wall_time: float | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "success": self.success,
            "fidelity": self.fidelity,
            "nsv": list(self.nsv),
            "implied_vacuum_modes": self.implied_vacuum_modes,
            "s_min": self.s_min,
            "s_max": self.s_max,
            "knill_form_score": self.knill_form_score,
            "converged": self.converged,
            "u": _pairs(self.u),
        }


RECORD_FIELDS = {
    "epsilon": float,
    "delta": float,
    "success": float,
    "fidelity": float,
    "nsv": list,
    "implied_vacuum_modes": int,
    "s_min": float,
    "s_max": float,
    "knill_form_score": float,
    "converged": bool,
    "u": list,
}


def record_from_point(point, knill: float, wall_time: float | None = None) -> TraceRecord:
    m = point.metrics
    return TraceRecord(
        epsilon=float(point.epsilon),
        delta=m.infidelity,
        success=m.success,
        fidelity=m.fidelity,
        nsv=tuple(m.nsv),
        implied_vacuum_modes=m.implied_vacuum_modes,
        s_min=m.s_min,
        s_max=m.s_max,
        knill_form_score=float(knill),
        converged=bool(point.converged),
        u=np.asarray(point.u),
        wall_time=wall_time,
    )


def record_from_dict(d: dict, coalescence_tol: float, where: str) -> TraceRecord:
    if not isinstance(d, dict):
        raise LoadError(f"{where}: expected an object")
    extra = sorted(set(d) - set(RECORD_FIELDS) - {"kind"})
    if extra:
        raise LoadError(f"{where}.{extra[0]}: unknown field")
    vals = {name: _field(d, name, kind, where) for name, kind in RECORD_FIELDS.items()}
    for name, kind in RECORD_FIELDS.items():
        if kind is float and not math.isfinite(vals[name]):
            raise LoadError(f"{where}.{name}: non-finite value")
    nsv = vals["nsv"]
    if not nsv or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in nsv):
        raise LoadError(f"{where}.nsv: expected a non-empty list of numbers")
    nsv = tuple(float(x) for x in nsv)
    if abs(nsv[0] - 1) > UNIT_TOL or any(b > a + UNIT_TOL for a, b in zip(nsv, nsv[1:])) or nsv[-1] < 0:
        raise LoadError(f"{where}.nsv: must be descending in [0, 1] starting at 1")
    n = len(nsv)
    u = _from_pairs(vals["u"], (n, n), f"{where}.u")
    if vals["epsilon"] <= 0:
        raise LoadError(f"{where}.epsilon: must be positive")
    if not -UNIT_TOL <= vals["fidelity"] <= 1 + UNIT_TOL:
        raise LoadError(f"{where}.fidelity: {vals['fidelity']} outside [0, 1]")
    if abs(vals["delta"] - (1 - vals["fidelity"])) > 1e-12 or vals["delta"] < 0:
        raise LoadError(f"{where}.delta: inconsistent with fidelity")
    if vals["success"] < 0 or not vals["s_min"] - UNIT_TOL <= vals["success"] <= vals["s_max"] + UNIT_TOL:
        raise LoadError(f"{where}.success: must lie between s_min and s_max")
    if vals["implied_vacuum_modes"] != sum(1 - x > coalescence_tol for x in nsv):
        raise LoadError(f"{where}.implied_vacuum_modes: does not match nsv at tolerance {coalescence_tol:g}")
    if not -UNIT_TOL <= vals["knill_form_score"] <= 1 + UNIT_TOL:
        raise LoadError(f"{where}.knill_form_score: outside [0, 1]")
    vals.update(nsv=nsv, u=u)
    return TraceRecord(**vals)


@dataclass
class Trace:
    spec: GateSpec
    config: RunConfig
    records: list[TraceRecord]
    label: str = ""
    coalescence_events: list[tuple[float, int]] | None = None
    aborted: bool | None = None

    @property
    def complete(self) -> bool:
        return self.coalescence_events is not None

    def frontier(self) -> list[tuple[float, float]]:
        return [(r.delta, r.success) for r in self.records]


def _line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False) + "\n"


class TraceWriter:
    """Appends records as they arrive so that an interrupted run keeps its prefix."""

    def __init__(self, path, spec: GateSpec, config: RunConfig, label: str = ""):
        self.path = Path(path)
        self.timing_path = timing_path(self.path)
        header = {
            "kind": "header",
            "format": TRACE_FORMAT,
            "label": label,
            "gate": spec_to_dict(spec),
            "config": config.to_dict(),
        }
        self.path.write_text(_line(header))
        self.timing_path.write_text("")

    def append(self, record: TraceRecord) -> None:
        with self.path.open("a") as fh:
            fh.write(_line({"kind": "point", **record.to_dict()}))
        with self.timing_path.open("a") as fh:
            fh.write(_line({"epsilon": record.epsilon, "wall_time": record.wall_time}))

    def finish(self, events: list[tuple[float, int]], aborted: bool) -> None:
        summary = {
            "kind": "summary",
            "coalescence_events": [[float(d), int(i)] for d, i in events],
            "aborted": bool(aborted),
        }
        with self.path.open("a") as fh:
            fh.write(_line(summary))


def timing_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".timing")


def load_trace(path) -> Trace:
    """Parse and re-validate a trace file; any broken invariant names its line and field."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise LoadError(f"{path}: file: {exc.strerror}") from None
    objs = []
    for i, ln in enumerate(lines, 1):
        if not ln.strip():
            continue
        try:
            obj = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise LoadError(f"{path}:{i}: json: {exc.msg}") from None
        if not isinstance(obj, dict) or "kind" not in obj:
            raise LoadError(f"{path}:{i}: kind: missing")
        objs.append((i, obj))
    if not objs or objs[0][1]["kind"] != "header":
        raise LoadError(f"{path}:1: kind: first line must be the header")
    _, head = objs[0]
    if head.get("format") != TRACE_FORMAT:
        raise LoadError(f"{path}:1: format: expected {TRACE_FORMAT!r}, got {head.get('format')!r}")
    spec = spec_from_dict(head.get("gate"), f"{path}:1: gate")
    config = RunConfig.from_dict(head.get("config"), f"{path}:1: config")
    records: list[TraceRecord] = []
    events = aborted = None
    for i, obj in objs[1:]:
        where = f"{path}:{i}"
        if events is not None:
            raise LoadError(f"{where}: kind: nothing may follow the summary")
        if obj["kind"] == "point":
            rec = record_from_dict(obj, config.coalescence_tol, where)
            if rec.u.shape[0] != spec.n_modes:
                raise LoadError(f"{where}.u: {rec.u.shape[0]} modes, gate needs {spec.n_modes}")
            if records and rec.epsilon <= records[-1].epsilon:
                raise LoadError(f"{where}.epsilon: not increasing")
            records.append(rec)
        elif obj["kind"] == "summary":
            ev = _field(obj, "coalescence_events", list, where)
            try:
                events = [(float(d), int(k)) for d, k in ev]
            except (TypeError, ValueError):
                raise LoadError(f"{where}.coalescence_events: expected [delta, index] pairs") from None
            aborted = _field(obj, "aborted", bool, where)
        else:
            raise LoadError(f"{where}.kind: unknown record kind {obj['kind']!r}")
    records = _attach_timing(path, records)
    return Trace(spec, config, records, head.get("label", ""), events, aborted)


def _attach_timing(path: Path, records: list[TraceRecord]) -> list[TraceRecord]:
    tp = timing_path(path)
    if not tp.exists():
        return records
    times = []
    for ln in tp.read_text().splitlines():
        try:
            times.append(json.loads(ln).get("wall_time"))
        except (json.JSONDecodeError, AttributeError):
            raise LoadError(f"{tp}: json: malformed timing line") from None
    if len(times) < len(records):
        return records
    return [TraceRecord(**{**r.__dict__, "wall_time": t}) for r, t in zip(records, times)]


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")
