"""Shared domain types: expressions, requirements, parameters, verdicts.

Everything here is an immutable dataclass. Source spans are carried on
nodes for diagnostics but never take part in equality, so two ASTs compare
equal when they have the same structure regardless of where they came from.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Union

FUNCTIONS = {"diff": 2, "sensorValue": 1}

BOOL = "bool"
NUMERIC = "numeric"

LOGICAL_OPS = ("&", "|", "=>")
COMPARISON_OPS = ("<", "<=", ">", ">=", "=", "!=")
ARITH_OPS = ("+", "-", "*", "/")


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    line: int = 1
    col: int = 1


def _span():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: Optional[Span] = None
    severity: str = "error"
    code: str = "error"
    file: Optional[str] = None

    def render(self, file: Optional[str] = None) -> str:
        where = file or self.file or "<input>"
        line, col = (self.span.line, self.span.col) if self.span else (1, 1)
        return f"{where}:{line}:{col}: {self.severity}: {self.message}"


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Name:
    """A signal or parameter reference; `sampled` records a `(i)` suffix."""

    name: str
    sampled: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Number:
    value: float
    text: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Null:
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "-"
    operand: "Expr"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Group:
    """Explicit parentheses from the source. Kept so printing is faithful."""

    inner: "Expr"
    span: Optional[Span] = _span()


Expr = Union[Name, Number, BoolLit, Null, Call, Unary, Binary, Group]


def strip_groups(expr: Expr) -> Expr:
    """Return `expr` with every Group node removed (and spans dropped)."""
    if isinstance(expr, Group):
        return strip_groups(expr.inner)
    if isinstance(expr, Unary):
        return Unary(expr.op, strip_groups(expr.operand))
    if isinstance(expr, Binary):
        return Binary(expr.op, strip_groups(expr.left), strip_groups(expr.right))
    if isinstance(expr, Call):
        return Call(expr.func, tuple(strip_groups(a) for a in expr.args))
    return expr


def walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, Group):
        yield from walk(expr.inner)
    elif isinstance(expr, Unary):
        yield from walk(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, Call):
        for a in expr.args:
            yield from walk(a)


def conjoin(*exprs: Expr) -> Expr:
    out = exprs[0]
    for e in exprs[1:]:
        out = Binary("&", out, e)
    return out


def signal_key(expr: Expr) -> Optional[str]:
    """Key under which a name-like expression is bound in a signal map."""
    if isinstance(expr, Name):
        return expr.name
    if isinstance(expr, Call) and expr.func == "sensorValue" and len(expr.args) == 1:
        arg = strip_groups(expr.args[0])
        if isinstance(arg, Name):
            return f"sensorValue({arg.name})"
    return None


def referenced_names(expr: Expr) -> set[str]:
    """Names a requirement expression needs bound (signals or parameters)."""
    names = set()

    def visit(e):
        if isinstance(e, Group):
            visit(e.inner)
        elif isinstance(e, Name):
            names.add(e.name)
        elif isinstance(e, Call):
            key = signal_key(e)
            if key is not None:
                names.add(key)
            else:
                for a in e.args:
                    visit(a)
        elif isinstance(e, Unary):
            visit(e.operand)
        elif isinstance(e, Binary):
            visit(e.left)
            visit(e.right)

    visit(expr)
    return names


# -- requirements ------------------------------------------------------------


class Timing(enum.Enum):
    DEFAULT = "default"
    ALWAYS = "always"
    NEVER = "never"
    EVENTUALLY = "eventually"
    UNTIL = "until"
    WITHIN = "within"
    FOR = "for"


@dataclass(frozen=True)
class TimingSpec:
    kind: Timing = Timing.DEFAULT
    stop: Optional[Expr] = None
    ticks: Optional[int] = None

    def __post_init__(self):
        if self.kind is Timing.UNTIL:
            if self.stop is None or self.ticks is not None:
                raise ValueError("until timing needs a stop condition and no tick bound")
        elif self.kind in (Timing.WITHIN, Timing.FOR):
            if self.ticks is None or self.ticks < 0 or self.stop is not None:
                raise ValueError(f"{self.kind.value} timing needs a non-negative tick bound")
        elif self.stop is not None or self.ticks is not None:
            raise ValueError(f"{self.kind.value} timing takes no arguments")


@dataclass(frozen=True)
class ScopeSpec:
    mode: str
    kind: str = "in"

    def __post_init__(self):
        if not self.mode:
            raise ValueError("mode scope needs a mode identifier")


@dataclass(frozen=True)
class ConditionClause:
    keyword: str  # "when" or "if"
    expr: Expr


@dataclass(frozen=True)
class Requirement:
    id: str
    component: str
    response: Expr
    conditions: tuple = ()
    timing: TimingSpec = TimingSpec()
    scope: Optional[ScopeSpec] = None
    parent_id: Optional[str] = None
    project: str = ""
    rationale: str = ""
    source_text: str = field(default="", compare=False)
    span: Optional[Span] = _span()

    def condition_expr(self) -> Optional[Expr]:
        if not self.conditions:
            return None
        return conjoin(*(c.expr for c in self.conditions))

    def expressions(self) -> Iterator[Expr]:
        for c in self.conditions:
            yield c.expr
        if self.timing.stop is not None:
            yield self.timing.stop
        yield self.response


def expr_to_dict(expr: Expr) -> dict:
    """Plain-data form of an expression (spans dropped), for golden files."""
    if isinstance(expr, Group):
        return {"group": expr_to_dict(expr.inner)}
    if isinstance(expr, Name):
        return {"name": expr.name, "sampled": expr.sampled}
    if isinstance(expr, Number):
        return {"number": expr.value}
    if isinstance(expr, BoolLit):
        return {"bool": expr.value}
    if isinstance(expr, Null):
        return {"null": True}
    if isinstance(expr, Call):
        return {"call": expr.func, "args": [expr_to_dict(a) for a in expr.args]}
    if isinstance(expr, Unary):
        return {"unary": expr.op, "operand": expr_to_dict(expr.operand)}
    if isinstance(expr, Binary):
        return {"binary": expr.op, "left": expr_to_dict(expr.left),
                "right": expr_to_dict(expr.right)}
    raise TypeError(f"not an expression: {expr!r}")


def requirement_to_dict(req: Requirement) -> dict:
    return {
        "id": req.id,
        "parent_id": req.parent_id,
        "project": req.project,
        "scope": None if req.scope is None else {"kind": req.scope.kind, "mode": req.scope.mode},
        "conditions": [{"keyword": c.keyword, "expr": expr_to_dict(c.expr)}
                       for c in req.conditions],
        "component": req.component,
        "timing": {
            "kind": req.timing.kind.value,
            "stop": None if req.timing.stop is None else expr_to_dict(req.timing.stop),
            "ticks": req.timing.ticks,
        },
        "response": expr_to_dict(req.response),
    }


# -- parameters and verdicts ---------------------------------------------------


class ParameterSet(Mapping[str, float]):
    """Scenario constants by name. `eq_tol` governs numeric `=`."""

    DEFAULT_EQ_TOL = 1e-6

    def __init__(self, values: Optional[Mapping[str, float]] = None):
        self._values = {k: float(v) for k, v in (values or {}).items()}
        if self.eq_tol <= 0:
            raise ValueError("eq_tol must be positive")

    @property
    def eq_tol(self) -> float:
        return self._values.get("eq_tol", self.DEFAULT_EQ_TOL)

    def __getitem__(self, key):
        return self._values[key]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return f"ParameterSet({self._values!r})"

    def __eq__(self, other):
        if isinstance(other, ParameterSet):
            return self._values == other._values
        return NotImplemented

    def __hash__(self):
        return hash(tuple(sorted(self._values.items())))

    def to_dict(self) -> dict:
        return dict(self._values)


class Status(enum.Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    VACUOUS = "Vacuous"


@dataclass(frozen=True)
class Violation:
    trigger_index: int
    failing_step: int
    response_value: bool


@dataclass(frozen=True)
class Verdict:
    status: Status
    trigger_indices: tuple = ()
    violation: Optional[Violation] = None
    truncated: bool = False

    def __post_init__(self):
        if self.status is Status.VIOLATED and self.violation is None:
            raise ValueError("a violated verdict needs violation evidence")
        if self.status is Status.VACUOUS and self.trigger_indices:
            raise ValueError("a vacuous verdict has no triggers")

    @property
    def holds(self) -> bool:
        return self.status is not Status.VIOLATED


# -- typechecking --------------------------------------------------------------


def typecheck(expr: Expr, declared_signals: Mapping[str, str],
              params: Mapping[str, float]) -> list[Diagnostic]:
    """Check that `expr` is boolean, well typed and fully resolvable.

    Signals take their kind from `declared_signals` (`"bool"` or
    `"numeric"`); parameters are numeric. Returns diagnostics, empty when
    the expression is fine.
    """
    diags: list[Diagnostic] = []
    kind = _infer(expr, declared_signals, params, diags)
    if kind == NUMERIC:
        diags.append(Diagnostic("expected a boolean expression, found a numeric one",
                                _span_of(expr), code="type-mismatch"))
    return diags


def _span_of(expr):
    return getattr(expr, "span", None)


def _infer(expr, signals, params, diags):
    if isinstance(expr, Group):
        return _infer(expr.inner, signals, params, diags)
    if isinstance(expr, Number):
        return NUMERIC
    if isinstance(expr, BoolLit):
        return BOOL
    if isinstance(expr, Null):
        diags.append(Diagnostic("'null' may only appear in an availability test (x = null)",
                                expr.span, code="type-mismatch"))
        return None
    if isinstance(expr, Name):
        if expr.name in signals:
            return signals[expr.name]
        if expr.name in params:
            return NUMERIC
        diags.append(Diagnostic(f"unbound name '{expr.name}': not a declared signal or parameter",
                                expr.span, code="unbound-name"))
        return None
    if isinstance(expr, Call):
        return _infer_call(expr, signals, params, diags)
    if isinstance(expr, Unary):
        want = BOOL if expr.op == "!" else NUMERIC
        _expect(expr.operand, want, signals, params, diags)
        return want
    if isinstance(expr, Binary):
        if expr.op in LOGICAL_OPS:
            _expect(expr.left, BOOL, signals, params, diags)
            _expect(expr.right, BOOL, signals, params, diags)
            return BOOL
        if expr.op in ARITH_OPS:
            _expect(expr.left, NUMERIC, signals, params, diags)
            _expect(expr.right, NUMERIC, signals, params, diags)
            return NUMERIC
        left, right = strip_groups(expr.left), strip_groups(expr.right)
        if expr.op in ("=", "!=") and (isinstance(left, Null) or isinstance(right, Null)):
            other = expr.right if isinstance(left, Null) else expr.left
            if isinstance(strip_groups(other), Null):
                diags.append(Diagnostic("availability test needs a signal operand",
                                        expr.span, code="type-mismatch"))
            else:
                _expect(other, NUMERIC, signals, params, diags)
            return BOOL
        _expect(expr.left, NUMERIC, signals, params, diags)
        _expect(expr.right, NUMERIC, signals, params, diags)
        return BOOL
    raise TypeError(f"not an expression: {expr!r}")


def _infer_call(expr, signals, params, diags):
    arity = FUNCTIONS.get(expr.func)
    if arity is None:
        diags.append(Diagnostic(f"unknown function '{expr.func}'", expr.span, code="unknown-function"))
        return None
    if len(expr.args) != arity:
        diags.append(Diagnostic(f"'{expr.func}' takes {arity} argument(s), got {len(expr.args)}",
                                expr.span, code="arity"))
        return NUMERIC
    if expr.func == "sensorValue":
        key = signal_key(expr)
        if key is None:
            diags.append(Diagnostic("sensorValue expects a sensor name", expr.span, code="type-mismatch"))
        elif key not in signals:
            diags.append(Diagnostic(f"unbound name '{key}': sensor is not mapped to a signal",
                                    expr.span, code="unbound-name"))
        elif signals[key] != NUMERIC:
            diags.append(Diagnostic(f"'{key}' must be bound to a numeric signal",
                                    expr.span, code="type-mismatch"))
        return NUMERIC
    for a in expr.args:
        _expect(a, NUMERIC, signals, params, diags)
    return NUMERIC


def _expect(expr, want, signals, params, diags):
    got = _infer(expr, signals, params, diags)
    if got is not None and got != want:
        what = "boolean" if want == BOOL else "numeric"
        found = "boolean" if got == BOOL else "numeric"
        diags.append(Diagnostic(f"type mismatch: expected {what} operand, found {found}",
                                _span_of(expr), code="type-mismatch"))
