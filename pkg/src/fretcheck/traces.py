"""Execution traces, signal bindings and grounding of requirement atoms.

A trace is a uniform-step table whose first column is `time`. Numeric cells
may be unavailable (stored as NaN); boolean cells never are. Requirement
names are resolved through a signal map, then the parameter set, then a
trace column of the same name.
"""

from __future__ import annotations

import csv
import io
import json
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .model import (
    BOOL, NUMERIC, Binary, BoolLit, Call, Expr, Group, Name, Null, Number, ParameterSet, Unary,
    signal_key, strip_groups,
)
from .temporal import BoolTrace

TIME = "time"
UNIFORM_RTOL = 1e-9
_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class TraceFormatError(ValueError):
    pass


class BindingError(ValueError):
    pass


class Trace:
    """Immutable column store over n uniformly spaced steps."""

    def __init__(self, times, columns: Mapping[str, tuple], timestep: Optional[float] = None):
        times = np.array(times, dtype=float)
        if times.ndim != 1 or len(times) < 1:
            raise TraceFormatError("a trace has at least one step")
        if not np.all(np.isfinite(times)):
            raise TraceFormatError("time values must be finite numbers")
        n = len(times)
        if n > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise TraceFormatError("time must be strictly increasing")
            nominal = (times[-1] - times[0]) / (n - 1)
            if np.any(np.abs(steps - nominal) > UNIFORM_RTOL * nominal):
                raise TraceFormatError("non-uniform timestep")
            timestep = float(nominal) if timestep is None else float(timestep)
        elif timestep is None:
            timestep = 1.0
        if not timestep > 0:
            raise TraceFormatError("timestep must be positive")
        cols = {}
        for name, (kind, values) in columns.items():
            if name == TIME:
                raise TraceFormatError("'time' is reserved for the time axis")
            if kind == BOOL:
                arr = np.array(values, dtype=bool)
            elif kind == NUMERIC:
                arr = np.array([np.nan if v is None else v for v in values], dtype=float)
                if np.any(np.isinf(arr)):
                    raise TraceFormatError(f"column {name!r} holds an infinite value")
            else:
                raise TraceFormatError(f"unknown column kind {kind!r}")
            if arr.shape != (n,):
                raise TraceFormatError(f"column {name!r} has {arr.size} values, expected {n}")
            arr.setflags(write=False)
            cols[name] = (kind, arr)
        times.setflags(write=False)
        self.times = times
        self.timestep = timestep
        self._cols = cols

    @property
    def length(self) -> int:
        return len(self.times)

    def __len__(self):
        return self.length

    @property
    def names(self) -> list:
        return list(self._cols)

    def kind(self, name) -> str:
        return self._cols[name][0]

    def values(self, name) -> np.ndarray:
        if name == TIME:
            return self.times
        return self._cols[name][1]

    def __contains__(self, name):
        return name == TIME or name in self._cols

    def kinds(self) -> dict:
        return {name: kind for name, (kind, _) in self._cols.items()}

    def equals(self, other: "Trace", rtol: float = 1e-12) -> bool:
        if not isinstance(other, Trace) or self.names != other.names or self.length != other.length:
            return False
        if not math.isclose(self.timestep, other.timestep, rel_tol=rtol):
            return False
        if not np.allclose(self.times, other.times, rtol=rtol, atol=0):
            return False
        for name in self.names:
            k1, a = self._cols[name]
            k2, b = other._cols[name]
            if k1 != k2:
                return False
            if k1 == BOOL:
                if not np.array_equal(a, b):
                    return False
            elif not np.allclose(a, b, rtol=rtol, atol=0, equal_nan=True):
                return False
        return True

    def __repr__(self):
        return f"Trace(n={self.length}, timestep={self.timestep!r}, columns={self.names})"


# -- CSV -----------------------------------------------------------------------------


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    # a string without a line break is a path; trace text always has a header line
    if isinstance(source, Path) or "\n" not in source:
        return Path(source).read_text(encoding="utf-8")
    return source


_TIMESTEP_LINE = "# timestep:"


def _parse_csv(text: str, timestep=None) -> Trace:
    # a single-row trace records its timestep on a line before the header
    if text.startswith(_TIMESTEP_LINE):
        first, _, text = text.partition("\n")
        cell = first[len(_TIMESTEP_LINE):].strip()
        if not _NUMBER_RE.match(cell):
            raise TraceFormatError(f"line 1: bad timestep {cell!r}")
        if timestep is None:
            timestep = float(cell)
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise TraceFormatError("missing header row")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != TIME:
        raise TraceFormatError("first column must be 'time'")
    if len(set(header)) != len(header):
        raise TraceFormatError("duplicate column names in header")
    body = rows[1:]
    if not body:
        raise TraceFormatError("a trace has at least one step")
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise TraceFormatError(f"line {i}: ragged row with {len(row)} cells, expected "
                                   f"{len(header)}")
    cells = list(zip(*body))
    times = []
    for i, cell in enumerate(cells[0], start=2):
        cell = cell.strip()
        if not _NUMBER_RE.match(cell):
            raise TraceFormatError(f"line {i}: bad time value {cell!r}")
        times.append(float(cell))
    columns = {}
    for name, column in zip(header[1:], cells[1:]):
        columns[name] = _infer_column(name, [c.strip() for c in column])
    return Trace(times, columns, timestep=timestep)


def _infer_column(name, cells):
    present = [c for c in cells if c != ""]
    if present and all(c in ("true", "false") for c in present):
        if len(present) != len(cells):
            raise TraceFormatError(f"column {name!r}: boolean cells may not be unavailable")
        return (BOOL, [c == "true" for c in cells])
    values = []
    for i, c in enumerate(cells, start=2):
        if c == "":
            values.append(None)
        elif _NUMBER_RE.match(c):
            values.append(float(c))
        else:
            raise TraceFormatError(f"line {i}: unknown token {c!r} in column {name!r}")
    return (NUMERIC, values)


def _fmt_num(x: float) -> str:
    if math.isnan(x):
        return ""
    return repr(float(x))


def trace_to_csv(trace: Trace) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    if trace.length == 1:
        out.write(f"{_TIMESTEP_LINE} {trace.timestep!r}\n")
    w.writerow([TIME] + trace.names)
    for t in range(trace.length):
        row = [repr(float(trace.times[t]))]
        for name in trace.names:
            kind, arr = trace._cols[name]
            row.append(("true" if arr[t] else "false") if kind == BOOL else _fmt_num(arr[t]))
        w.writerow(row)
    return out.getvalue()


# -- JSON ----------------------------------------------------------------------------


def _reject_constant(token):
    raise TraceFormatError(f"non-finite number {token!r} in trace JSON")


def _parse_json(text: str) -> Trace:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("columns"), list):
        raise TraceFormatError("trace JSON needs a 'columns' array")
    timestep = doc.get("timestep")
    if timestep is not None and (isinstance(timestep, bool) or not isinstance(timestep, (int, float))):
        raise TraceFormatError("'timestep' must be a number")
    cols = doc["columns"]
    if not cols or not isinstance(cols[0], dict) or cols[0].get("name") != TIME:
        raise TraceFormatError("first column must be 'time'")
    columns = {}
    times = None
    for col in cols:
        if not isinstance(col, dict) or not isinstance(col.get("values"), list):
            raise TraceFormatError("each column needs 'name', 'kind' and 'values'")
        name, kind, values = col.get("name"), col.get("kind", NUMERIC), col["values"]
        if not isinstance(name, str) or not name:
            raise TraceFormatError("column names must be non-empty strings")
        if name in columns or (name == TIME and times is not None):
            raise TraceFormatError(f"duplicate column {name!r}")
        if kind == BOOL:
            if not all(isinstance(v, bool) for v in values):
                raise TraceFormatError(f"column {name!r}: boolean values must be true/false")
        elif kind == NUMERIC:
            if not all(v is None or (isinstance(v, (int, float)) and not isinstance(v, bool))
                       for v in values):
                raise TraceFormatError(f"column {name!r}: numeric values must be numbers or null")
        else:
            raise TraceFormatError(f"column {name!r}: unknown kind {kind!r}")
        if name == TIME:
            if kind != NUMERIC or any(v is None for v in values):
                raise TraceFormatError("time values must be numbers")
            times = values
        else:
            columns[name] = (kind, values)
    n = len(times)
    for name, (_, values) in columns.items():
        if len(values) != n:
            raise TraceFormatError(f"column {name!r} has {len(values)} values, expected {n}")
    return Trace(times, columns, timestep=timestep if n == 1 else None)


def trace_to_json(trace: Trace) -> str:
    cols = [{"name": TIME, "kind": NUMERIC, "values": [float(t) for t in trace.times]}]
    for name in trace.names:
        kind, arr = trace._cols[name]
        if kind == BOOL:
            values = [bool(v) for v in arr]
        else:
            values = [None if math.isnan(v) else float(v) for v in arr]
        cols.append({"name": name, "kind": kind, "values": values})
    return json.dumps({"timestep": trace.timestep, "columns": cols}, indent=1) + "\n"


# -- public I/O ----------------------------------------------------------------------


def _guess_format(source, fmt):
    if fmt is not None:
        return fmt
    if isinstance(source, (str, Path)) and Path(str(source)).suffix.lower() == ".json":
        return "json"
    return "csv"


def load_trace(source: Union[str, Path, bytes], format: Optional[str] = None,
               timestep: Optional[float] = None) -> Trace:
    """Load a trace from a path, CSV/JSON text or bytes."""
    fmt = _guess_format(source, format)
    text = _read_text(source)
    if fmt == "csv":
        return _parse_csv(text, timestep)
    if fmt == "json":
        return _parse_json(text)
    raise TraceFormatError(f"unknown trace format {fmt!r}")


def dumps_trace(trace: Trace, format: str = "csv") -> str:
    if format == "csv":
        return trace_to_csv(trace)
    if format == "json":
        return trace_to_json(trace)
    raise TraceFormatError(f"unknown trace format {format!r}")


def write_trace(trace: Trace, path: Union[str, Path], format: Optional[str] = None) -> None:
    from .util import atomic_write

    atomic_write(path, dumps_trace(trace, _guess_format(path, format)))


# -- bindings ------------------------------------------------------------------------


@dataclass
class SignalMap:
    """Requirement-name bindings plus the parameter set they are checked with.

    `signals` optionally declares requirement-level names and their kinds,
    used by lint; `components` labels subsystems for documentation.
    """

    bindings: dict = field(default_factory=dict)
    params: ParameterSet = field(default_factory=ParameterSet)
    signals: dict = field(default_factory=dict)
    components: dict = field(default_factory=dict)

    def column_for(self, key: str) -> Optional[str]:
        return self.bindings.get(key)

    def declared_signals(self, trace: Optional[Trace] = None) -> dict:
        out = dict(self.signals)
        if trace is not None:
            kinds = trace.kinds()
            for key, col in self.bindings.items():
                if col in kinds:
                    out.setdefault(key, kinds[col])
                elif col == TIME:
                    out.setdefault(key, NUMERIC)
            for col, kind in kinds.items():
                out.setdefault(col, kind)
        return out

    def check_columns(self, trace: Trace, keys: Optional[Iterable[str]] = None) -> list:
        keys = self.bindings if keys is None else keys
        return [f"{k} -> {self.bindings[k]}" for k in keys
                if k in self.bindings and self.bindings[k] not in trace]

    def to_dict(self) -> dict:
        doc = {"map": dict(self.bindings), "params": self.params.to_dict()}
        if self.signals:
            doc["signals"] = dict(self.signals)
        if self.components:
            doc["components"] = dict(self.components)
        return doc

    @classmethod
    def from_dict(cls, doc) -> "SignalMap":
        if not isinstance(doc, dict):
            raise BindingError("signal map JSON must be an object")
        unknown = set(doc) - {"map", "params", "signals", "components"}
        if unknown:
            raise BindingError(f"unknown signal map keys: {sorted(unknown)}")
        bindings = doc.get("map", {})
        params = doc.get("params", {})
        signals = doc.get("signals", {})
        components = doc.get("components", {})
        for label, table in (("map", bindings), ("signals", signals), ("components", components)):
            if not isinstance(table, dict) or not all(
                    isinstance(k, str) and isinstance(v, str) for k, v in table.items()):
                raise BindingError(f"'{label}' must map names to strings")
        if not isinstance(params, dict) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in params.values()):
            raise BindingError("'params' must map names to numbers")
        for name, kind in signals.items():
            if kind not in (BOOL, NUMERIC):
                raise BindingError(f"signal {name!r}: kind must be 'bool' or 'numeric'")
        try:
            pset = ParameterSet(params)
        except ValueError as exc:
            raise BindingError(str(exc)) from None
        return cls(dict(bindings), pset, dict(signals), dict(components))


def load_bindings(source: Union[str, Path, dict]) -> SignalMap:
    if isinstance(source, dict):
        return SignalMap.from_dict(source)
    text = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BindingError(f"invalid JSON: {exc}") from None
    return SignalMap.from_dict(doc)


# -- grounding -----------------------------------------------------------------------

_CMP = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}
_ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul, "/": operator.truediv}


class _Grounder:
    def __init__(self, trace: Trace, smap: SignalMap, params: Optional[ParameterSet]):
        self.trace = trace
        self.smap = smap
        self.params = params if params is not None else smap.params
        self.n = trace.length

    def resolve(self, expr):
        """(kind, values) for a name-like expression."""
        key = signal_key(expr)
        if key is None:
            raise BindingError(f"cannot bind {expr!r}")
        col = self.smap.column_for(key)
        if col is not None:
            if col not in self.trace:
                raise BindingError(f"{key} is mapped to column {col!r}, which the trace lacks")
            kind = NUMERIC if col == TIME else self.trace.kind(col)
            return kind, self.trace.values(col)
        if isinstance(expr, Name):
            if key in self.params:
                return NUMERIC, np.full(self.n, self.params[key])
            if key in self.trace:
                kind = NUMERIC if key == TIME else self.trace.kind(key)
                return kind, self.trace.values(key)
        raise BindingError(f"unbound name '{key}'")

    def is_bool(self, expr) -> bool:
        expr = strip_groups(expr)
        if isinstance(expr, BoolLit):
            return True
        if isinstance(expr, Unary):
            return expr.op == "!"
        if isinstance(expr, Binary):
            return expr.op not in _ARITH
        if isinstance(expr, Name):
            return self.resolve(expr)[0] == BOOL
        return False

    def num(self, expr) -> np.ndarray:
        if isinstance(expr, Group):
            return self.num(expr.inner)
        if isinstance(expr, Number):
            return np.full(self.n, expr.value)
        if isinstance(expr, Name) or (isinstance(expr, Call) and expr.func == "sensorValue"):
            kind, values = self.resolve(expr)
            if kind != NUMERIC:
                raise BindingError(f"'{signal_key(expr)}' is boolean, expected a number")
            return values
        if isinstance(expr, Call) and expr.func == "diff":
            a, b = (self.num(x) for x in expr.args)
            return np.abs(a - b)
        if isinstance(expr, Unary) and expr.op == "-":
            return -self.num(expr.operand)
        if isinstance(expr, Binary) and expr.op in _ARITH:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                out = _ARITH[expr.op](self.num(expr.left), self.num(expr.right))
            # a non-finite result carries no usable value
            return np.where(np.isfinite(out), out, np.nan)
        raise BindingError(f"expected a numeric expression, got {expr!r}")

    def boolean(self, expr):
        """(values, unavailable-flags) over all steps."""
        if isinstance(expr, Group):
            return self.boolean(expr.inner)
        none = np.zeros(self.n, dtype=bool)
        if isinstance(expr, BoolLit):
            return np.full(self.n, expr.value), none
        if isinstance(expr, Name):
            kind, values = self.resolve(expr)
            if kind != BOOL:
                raise BindingError(f"'{expr.name}' is numeric, expected a boolean")
            return values, none
        if isinstance(expr, Unary) and expr.op == "!":
            v, f = self.boolean(expr.operand)
            return ~v, f
        if isinstance(expr, Binary) and expr.op in ("&", "|", "=>"):
            a, fa = self.boolean(expr.left)
            b, fb = self.boolean(expr.right)
            if expr.op == "&":
                v = a & b
            elif expr.op == "|":
                v = a | b
            else:
                v = ~a | b
            return v, fa | fb
        if isinstance(expr, Binary) and expr.op in ("=", "!="):
            left, right = strip_groups(expr.left), strip_groups(expr.right)
            if isinstance(left, Null) or isinstance(right, Null):
                other = expr.right if isinstance(left, Null) else expr.left
                missing = np.isnan(self.num(other))
                return (missing if expr.op == "=" else ~missing), none
            if self.is_bool(left) and self.is_bool(right):
                a, fa = self.boolean(expr.left)
                b, fb = self.boolean(expr.right)
                same = a == b
                return (same if expr.op == "=" else ~same), fa | fb
            a, b = self.num(expr.left), self.num(expr.right)
            bad = np.isnan(a) | np.isnan(b)
            with np.errstate(invalid="ignore"):
                close = np.abs(a - b) <= self.params.eq_tol
            v = close if expr.op == "=" else ~close
            return v & ~bad, bad
        if isinstance(expr, Binary) and expr.op in _CMP:
            a, b = self.num(expr.left), self.num(expr.right)
            bad = np.isnan(a) | np.isnan(b)
            with np.errstate(invalid="ignore"):
                v = _CMP[expr.op](a, b)
            return v & ~bad, bad
        raise BindingError(f"expected a boolean expression, got {expr!r}")


def ground_all(expr: Expr, trace: Trace, smap: SignalMap, params: Optional[ParameterSet] = None):
    """Truth values and unavailability flags of `expr` at every step."""
    v, f = _Grounder(trace, smap, params).boolean(expr)
    return np.asarray(v, dtype=bool), np.asarray(f, dtype=bool)


def ground(expr: Expr, trace: Trace, smap: SignalMap, params: Optional[ParameterSet] = None,
           t: int = 0) -> bool:
    if not 0 <= t < trace.length:
        raise IndexError(f"step {t} outside trace of length {trace.length}")
    v, _ = ground_all(expr, trace, smap, params)
    return bool(v[t])


def boolify(exprs: Iterable[Expr], trace: Trace, smap: SignalMap,
            params: Optional[ParameterSet] = None) -> BoolTrace:
    """BoolTrace valuating each expression at every step of `trace`."""
    g = _Grounder(trace, smap, params)
    columns, flags = {}, {}
    for expr in exprs:
        key = strip_groups(expr)
        if key in columns:
            continue
        v, f = g.boolean(key)
        columns[key] = v
        flags[key] = f
    return BoolTrace(columns, unavailable=flags, length=trace.length)
