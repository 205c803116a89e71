"""Per-timing templates turning a Requirement into temporal formulas.

Each requirement gets a past-time formula (checked at the last step of a
trace) and a future-time formula (checked at step 0). Both state the same
obligation as the reference semantics in `monitor`; the exhaustive tests
hold the three together.

Notation used below: C is the condition atom (conjoined with `mode = M`
under a mode scope), e = C & (Y !C | FTP) is its rising edge written with
past operators, r the response, s the stop condition and m the mode
predicate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from . import temporal as tl
from .model import Binary, Expr, Group, Name, Requirement, Timing, conjoin
from .temporal import (
    FTP, And, Atom, Const, Edge, Finally, Formula, Globally, Historically, Implies, Next, Not,
    Once, Or, Prev, SinceInclusive, Until, bounded_until,
)


class CompileUnsupported(ValueError):
    """Raised for a (scope, condition, timing) combination without a template."""


class NoConditionTrigger(ValueError):
    pass


SUPPORTED_TIMINGS = frozenset(Timing)


@dataclass(frozen=True)
class CompiledRequirement:
    req_id: str
    trigger: Formula
    past_formula: Formula
    future_formula: Formula
    contract_name: str

    def __post_init__(self):
        if self.contract_name != self.req_id:
            raise ValueError("contract name must equal the requirement id")
        if not tl.is_past(self.past_formula):
            raise ValueError("past formula contains future operators")
        if not tl.is_future(self.future_formula):
            raise ValueError("future formula contains past operators")


def mode_predicate(mode: str) -> Expr:
    return Binary("=", Name("mode"), Name(mode))


def condition_of(req: Requirement) -> Optional[Expr]:
    """The triggering condition, including the mode predicate when scoped."""
    cond = req.condition_expr()
    if req.scope is None:
        return cond
    if req.scope.kind != "in":
        raise CompileUnsupported(f"scope kind {req.scope.kind!r} has no template")
    m = mode_predicate(req.scope.mode)
    return m if cond is None else conjoin(cond, m)


def _edge(c: Formula) -> Formula:
    return And(c, Or(Prev(Not(c)), FTP()))


def trigger_of(req: Requirement) -> Formula:
    """c & (Y !c | FTP), true exactly at the rising edges of the condition."""
    cond = condition_of(req)
    if cond is None:
        raise NoConditionTrigger(f"{req.id} has no condition")
    return _edge(Atom(cond))


def _check_supported(req):
    if req.timing.kind not in SUPPORTED_TIMINGS:
        raise CompileUnsupported(f"timing {req.timing.kind!r} has no template")
    condition_of(req)


def _simplify(f: Formula) -> Formula:
    f = tl._map(f, _simplify)
    if isinstance(f, Once) and f.bounds is None and isinstance(f.arg, FTP):
        return Const(True)
    if isinstance(f, Implies) and f.left == Const(True):
        return f.right
    return f


def _kind(req):
    kind = req.timing.kind
    return Timing.EVENTUALLY if kind is Timing.DEFAULT else kind


def compile_past(req: Requirement) -> Formula:
    """Past-time formula whose value at the last step is the verdict."""
    _check_supported(req)
    kind = _kind(req)
    r = Atom(req.response)
    s = Atom(req.timing.stop) if req.timing.stop is not None else None
    k = req.timing.ticks
    cond = condition_of(req)

    if cond is None:
        # obligation starts at step 0
        if kind is Timing.EVENTUALLY:
            return Once(r)
        if kind is Timing.ALWAYS:
            return _simplify(Historically(Implies(Once(FTP()), r)))
        if kind is Timing.NEVER:
            return _simplify(Historically(Implies(Once(FTP()), Not(r))))
        if kind is Timing.UNTIL:
            return Historically(Implies(Historically(Not(s)), r))
        if kind is Timing.WITHIN:
            return And(Historically(Not(And(Once(FTP(), (k, k)), Historically(Not(r), (0, k))))),
                       Once(r))
        if kind is Timing.FOR:
            return Historically(Implies(Once(FTP(), (0, k)), r))
        raise CompileUnsupported(f"timing {kind.value} has no template")

    c = Atom(cond)
    e = _edge(c)
    pending = SinceInclusive(e, Not(r))
    if req.scope is None:
        if kind is Timing.EVENTUALLY:
            body = Not(pending)
        elif kind is Timing.ALWAYS:
            body = Historically(Implies(Once(e), r))
        elif kind is Timing.NEVER:
            body = Historically(Implies(Once(e), Not(r)))
        elif kind is Timing.UNTIL:
            body = Historically(Implies(SinceInclusive(e, Not(s)), r))
        elif kind is Timing.WITHIN:
            body = And(_within_complete(e, r, k), Not(pending))
        elif kind is Timing.FOR:
            body = Historically(Implies(Once(e, (0, k)), r))
        else:
            raise CompileUnsupported(f"timing {kind.value} has no template")
    else:
        m = Atom(mode_predicate(req.scope.mode))
        in_mode = SinceInclusive(e, m)
        # at the first step after a mode interval, no trigger of that interval is pending
        closed = Historically(Implies(And(Not(m), Prev(m)), Not(Prev(pending))))
        if kind is Timing.EVENTUALLY:
            body = And(closed, Not(pending))
        elif kind is Timing.ALWAYS:
            body = Historically(Implies(in_mode, r))
        elif kind is Timing.NEVER:
            body = Historically(Implies(in_mode, Not(r)))
        elif kind is Timing.UNTIL:
            body = Historically(Implies(SinceInclusive(e, And(m, Not(s))), r))
        elif kind is Timing.WITHIN:
            body = And(_within_complete(e, r, k), And(closed, Not(pending)))
        elif kind is Timing.FOR:
            body = Historically(Implies(And(Once(e, (0, k)), in_mode), r))
        else:
            raise CompileUnsupported(f"timing {kind.value} has no template")
    return Or(Historically(Not(c)), body)


def _within_complete(e, r, k):
    # no trigger exactly k steps back with r false over the whole window
    return Historically(Not(And(Once(e, (k, k)), Historically(Not(r), (0, k)))))


def compile_future(req: Requirement) -> Formula:
    """Future-time formula whose value at step 0 is the verdict."""
    _check_supported(req)
    kind = _kind(req)
    r = Atom(req.response)
    s = Atom(req.timing.stop) if req.timing.stop is not None else None
    k = req.timing.ticks
    cond = condition_of(req)

    if req.scope is None:
        if kind is Timing.EVENTUALLY:
            ob = Finally(r)
        elif kind is Timing.ALWAYS:
            ob = Globally(r)
        elif kind is Timing.NEVER:
            ob = Globally(Not(r))
        elif kind is Timing.UNTIL:
            ob = Or(Until(r, s), Globally(r))
        elif kind is Timing.WITHIN:
            ob = Finally(r, (0, k))
        elif kind is Timing.FOR:
            ob = Globally(r, (0, k))
        else:
            raise CompileUnsupported(f"timing {kind.value} has no template")
        if cond is None:
            return ob
    else:
        m = Atom(mode_predicate(req.scope.mode))
        if kind is Timing.EVENTUALLY:
            ob = Until(m, And(m, r))
        elif kind is Timing.ALWAYS:
            ob = Or(Until(r, Not(m)), Globally(r))
        elif kind is Timing.NEVER:
            ob = Or(Until(Not(r), Not(m)), Globally(Not(r)))
        elif kind is Timing.UNTIL:
            ob = Or(Until(r, Or(s, Not(m))), Globally(r))
        elif kind is Timing.WITHIN:
            ob = bounded_until(m, And(m, r), k)
        elif kind is Timing.FOR:
            ob = Not(bounded_until(m, And(m, Not(r)), k))
        else:
            raise CompileUnsupported(f"timing {kind.value} has no template")
    return Globally(Implies(Edge(cond), ob))


def compile_requirement(req: Requirement) -> CompiledRequirement:
    cond = condition_of(req)
    trigger = _edge(Atom(cond)) if cond is not None else FTP()
    return CompiledRequirement(
        req_id=req.id,
        trigger=trigger,
        past_formula=compile_past(req),
        future_formula=compile_future(req),
        contract_name=req.id,
    )


# -- emitters ------------------------------------------------------------------------


def emit_cocospec(creq: CompiledRequirement) -> str:
    """One `guarantee "<id>" (<body>);` line for a contract node."""
    body = tl.pretty_print(creq.past_formula, "cocospec")
    return f'guarantee "{creq.contract_name}" ({body});'


def smv_ident(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", text)


def emit_smv(creq: CompiledRequirement) -> str:
    """An LTLSPEC for the future formula, preceded by the definitions of any
    rising-edge predicates it refers to."""
    edges = [leaf for leaf in tl.leaves(creq.future_formula) if isinstance(leaf, Edge)]
    base = smv_ident(creq.req_id)
    names = {}
    lines = []
    for i, edge in enumerate(edges):
        name = f"edge_{base}" if i == 0 else f"edge_{base}_{i + 1}"
        names[tl._key(edge.expr)] = name
        cond = tl.smv_expr(edge.expr)
        prev = f"prev_{name[5:]}" if i == 0 else f"prev_{base}_{i + 1}"
        lines += [
            "VAR",
            f"  {prev} : boolean;",
            "ASSIGN",
            f"  init({prev}) := FALSE;",
            f"  next({prev}) := {cond};",
            "DEFINE",
            f"  {name} := {cond if isinstance(edge.expr, Group) else f'({cond})'} & !{prev};",
        ]
    lines.append("LTLSPEC " + tl.pretty_print(creq.future_formula, "smv", edge_names=names))
    return "\n".join(lines)


def emit(creq: CompiledRequirement, dialect: str) -> str:
    if dialect == "cocospec":
        return emit_cocospec(creq)
    if dialect == "smv":
        return emit_smv(creq)
    if dialect == "ptltl":
        return tl.pretty_print(creq.past_formula, "ptltl")
    if dialect == "ltl":
        return tl.pretty_print(creq.future_formula, "ltl")
    raise tl.DialectError(f"unknown dialect {dialect!r}")
