"""Temporal formulas over boolean atoms and their finite-trace semantics.

Formulas mix past-time operators (Y/pre, H, O, S, SI, FTP, metric H/O),
future-time operators (X, G, F, U, metric G/F) and boolean connectives.
Atoms wrap a requirement expression; `Edge` is a derived atom that is true
when its expression rises (true now, false at the previous step or at
step 0).

Evaluation computes the full truth table of each subformula over every step
at once, memoized per subformula, so a formula of size m over a trace of
length n costs O(n*m) (metric operators add a factor of their window
width). Tables are numpy boolean arrays whose last axis is time. Leading
axes are carried along untouched, which lets one call evaluate a whole
batch of equal-length traces.

Future operators use the finite-trace (LTLf) reading: X is strong, G and F
range over the remaining suffix, metric G is vacuous past the end and
metric F needs its witness inside the trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Union

import numpy as np

from . import parser as fp
from .model import BoolLit, Binary, Expr, Group, Name, Null, Unary, strip_groups

# -- formula ADT -------------------------------------------------------------------


def _bounds_ok(bounds):
    if bounds is None:
        return
    lo, hi = bounds
    if not (0 <= lo <= hi):
        raise ValueError(f"metric bounds must satisfy 0 <= a <= b, got [{lo},{hi}]")


@dataclass(frozen=True)
class Atom:
    expr: Expr

    def __post_init__(self):
        if isinstance(self.expr, str):
            object.__setattr__(self, "expr", Name(self.expr))


@dataclass(frozen=True)
class Edge:
    expr: Expr

    def __post_init__(self):
        if isinstance(self.expr, str):
            object.__setattr__(self, "expr", Name(self.expr))


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class FTP:
    pass


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Prev:
    arg: "Formula"


@dataclass(frozen=True)
class Historically:
    arg: "Formula"
    bounds: Optional[tuple] = None

    def __post_init__(self):
        _bounds_ok(self.bounds)


@dataclass(frozen=True)
class Once:
    arg: "Formula"
    bounds: Optional[tuple] = None

    def __post_init__(self):
        _bounds_ok(self.bounds)


@dataclass(frozen=True)
class Since:
    """`sustained` has held at every step after some step where `anchor` held."""

    anchor: "Formula"
    sustained: "Formula"


@dataclass(frozen=True)
class SinceInclusive:
    """`sustained` has held from some `anchor` step (inclusive) through now."""

    anchor: "Formula"
    sustained: "Formula"


@dataclass(frozen=True)
class Next:
    arg: "Formula"


@dataclass(frozen=True)
class Globally:
    arg: "Formula"
    bounds: Optional[tuple] = None

    def __post_init__(self):
        _bounds_ok(self.bounds)


@dataclass(frozen=True)
class Finally:
    arg: "Formula"
    bounds: Optional[tuple] = None

    def __post_init__(self):
        _bounds_ok(self.bounds)


@dataclass(frozen=True)
class Until:
    """`hold` holds at every step until a step where `goal` holds."""

    hold: "Formula"
    goal: "Formula"


Formula = Union[Atom, Edge, Const, FTP, Not, And, Or, Implies, Prev, Historically, Once,
                Since, SinceInclusive, Next, Globally, Finally, Until]

PAST_OPS = (FTP, Prev, Historically, Once, Since, SinceInclusive)
FUTURE_OPS = (Next, Globally, Finally, Until)
_UNARY = (Not, Prev, Historically, Once, Next, Globally, Finally)
_BINARY = (And, Or, Implies)

# short constructor aliases
Y, H, O, S, SI, X, G, F, U = Prev, Historically, Once, Since, SinceInclusive, Next, Globally, Finally, Until


class MalformedFormula(ValueError):
    pass


class DialectError(ValueError):
    pass


def children(f):
    if isinstance(f, _UNARY):
        return (f.arg,)
    if isinstance(f, _BINARY):
        return (f.left, f.right)
    if isinstance(f, (Since, SinceInclusive)):
        return (f.anchor, f.sustained)
    if isinstance(f, Until):
        return (f.hold, f.goal)
    return ()


def subformulas(f):
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(children(g))


def is_past(f) -> bool:
    return not any(isinstance(g, FUTURE_OPS) for g in subformulas(f))


def is_future(f) -> bool:
    return not any(isinstance(g, PAST_OPS) for g in subformulas(f))


def leaves(f) -> list:
    """Atom and Edge leaves, in first-occurrence order, without duplicates."""
    out = []
    for g in subformulas(f):
        if isinstance(g, (Atom, Edge)) and g not in out:
            out.append(g)
    return out


def size(f) -> int:
    return sum(1 for _ in subformulas(f))


# -- traces ------------------------------------------------------------------------


class BoolTrace:
    """Truth values of atom expressions over steps 0..n-1.

    `columns` maps an expression (or a plain name) to a boolean sequence;
    groups are ignored in keys. The arrays may carry leading batch axes.
    An atom whose expression is a boolean combination of stored columns is
    derived from them on demand.
    """

    def __init__(self, columns: Mapping, unavailable: Optional[Mapping] = None, length=None):
        self._cols = {}
        shape = None
        for key, values in columns.items():
            arr = np.asarray(values, dtype=bool)
            if shape is None:
                shape = arr.shape
            elif arr.shape != shape:
                raise ValueError("all atoms must be valuated over the same steps")
            self._cols[_key(key)] = arr
        if shape is None:
            if length is None:
                raise ValueError("a trace without atoms needs an explicit length")
            shape = (length,)
        if shape[-1] < 1:
            raise ValueError("a trace has at least one step")
        self.shape = shape
        self.unavailable = {_key(k): np.asarray(v, dtype=bool) for k, v in (unavailable or {}).items()}

    @property
    def length(self) -> int:
        return self.shape[-1]

    def atoms(self):
        return list(self._cols)

    def __contains__(self, key):
        return _key(key) in self._cols

    def column(self, key) -> np.ndarray:
        k = _key(key)
        if k in self._cols:
            return self._cols[k]
        if isinstance(k, BoolLit):
            return np.full(self.shape, k.value)
        if isinstance(k, Unary) and k.op == "!":
            return ~self.column(k.operand)
        if isinstance(k, Binary) and k.op in ("&", "|", "=>"):
            a, b = self.column(k.left), self.column(k.right)
            if k.op == "&":
                return a & b
            if k.op == "|":
                return a | b
            return ~a | b
        raise KeyError(f"atom {fp.format_expr(k)!r} is not valuated in this trace")


def _key(key):
    if isinstance(key, str):
        return Name(key)
    return strip_groups(key)


# -- evaluation ----------------------------------------------------------------------


def _shift_back(x, d, fill):
    """Value at t is x[t-d]; `fill` where t-d < 0."""
    if d == 0:
        return x
    out = np.full_like(x, fill)
    n = x.shape[-1]
    if d < n:
        out[..., d:] = x[..., : n - d]
    return out


def _shift_fwd(x, d, fill):
    """Value at t is x[t+d]; `fill` where t+d >= n."""
    if d == 0:
        return x
    out = np.full_like(x, fill)
    n = x.shape[-1]
    if d < n:
        out[..., : n - d] = x[..., d:]
    return out


def _last_index(mask):
    """Largest index <= t where mask holds, else -1."""
    n = mask.shape[-1]
    idx = np.where(mask, np.arange(n), -1)
    return np.maximum.accumulate(idx, axis=-1)


def _next_index(mask):
    """Smallest index >= t where mask holds, else n."""
    n = mask.shape[-1]
    idx = np.where(mask, np.arange(n), n)
    return np.minimum.accumulate(idx[..., ::-1], axis=-1)[..., ::-1]


def evaluate(f: Formula, trace: BoolTrace, memo: Optional[dict] = None) -> np.ndarray:
    """Truth table of `f` at every step of `trace` (last axis = time)."""
    if memo is None:
        memo = {}
    return _eval(f, trace, memo)


def _eval(f, tr, memo):
    hit = memo.get(f)
    if hit is not None:
        return hit
    out = _compute(f, tr, memo)
    memo[f] = out
    return out


def _compute(f, tr, memo):
    n = tr.length
    if isinstance(f, Atom):
        return tr.column(f.expr)
    if isinstance(f, Edge):
        key = ("edge", _key(f.expr))
        if key in tr._cols:
            return tr._cols[key]
        c = tr.column(f.expr)
        return c & ~_shift_back(c, 1, False)
    if isinstance(f, Const):
        return np.full(tr.shape, f.value)
    if isinstance(f, FTP):
        out = np.zeros(tr.shape, dtype=bool)
        out[..., 0] = True
        return out
    if isinstance(f, Not):
        return ~_eval(f.arg, tr, memo)
    if isinstance(f, And):
        return _eval(f.left, tr, memo) & _eval(f.right, tr, memo)
    if isinstance(f, Or):
        return _eval(f.left, tr, memo) | _eval(f.right, tr, memo)
    if isinstance(f, Implies):
        return ~_eval(f.left, tr, memo) | _eval(f.right, tr, memo)

    if isinstance(f, Prev):
        return _shift_back(_eval(f.arg, tr, memo), 1, False)
    if isinstance(f, Historically):
        x = _eval(f.arg, tr, memo)
        if f.bounds is None:
            return np.logical_and.accumulate(x, axis=-1)
        out = np.ones(tr.shape, dtype=bool)
        for d in range(f.bounds[0], min(f.bounds[1], n - 1) + 1):
            out &= _shift_back(x, d, True)
        return out
    if isinstance(f, Once):
        x = _eval(f.arg, tr, memo)
        if f.bounds is None:
            return np.logical_or.accumulate(x, axis=-1)
        out = np.zeros(tr.shape, dtype=bool)
        for d in range(f.bounds[0], min(f.bounds[1], n - 1) + 1):
            out |= _shift_back(x, d, False)
        return out
    if isinstance(f, (Since, SinceInclusive)):
        anchor = _last_index(_eval(f.anchor, tr, memo))
        broken = _last_index(~_eval(f.sustained, tr, memo))
        if isinstance(f, Since):
            return (anchor >= 0) & (anchor >= broken)
        return (anchor >= 0) & (anchor > broken)

    if isinstance(f, Next):
        return _shift_fwd(_eval(f.arg, tr, memo), 1, False)
    if isinstance(f, Globally):
        x = _eval(f.arg, tr, memo)
        if f.bounds is None:
            return np.logical_and.accumulate(x[..., ::-1], axis=-1)[..., ::-1]
        out = np.ones(tr.shape, dtype=bool)
        for d in range(f.bounds[0], min(f.bounds[1], n - 1) + 1):
            out &= _shift_fwd(x, d, True)
        return out
    if isinstance(f, Finally):
        x = _eval(f.arg, tr, memo)
        if f.bounds is None:
            return np.logical_or.accumulate(x[..., ::-1], axis=-1)[..., ::-1]
        out = np.zeros(tr.shape, dtype=bool)
        for d in range(f.bounds[0], min(f.bounds[1], n - 1) + 1):
            out |= _shift_fwd(x, d, False)
        return out
    if isinstance(f, Until):
        goal = _next_index(_eval(f.goal, tr, memo))
        broken = _next_index(~_eval(f.hold, tr, memo))
        return (goal < n) & (goal <= broken)
    raise MalformedFormula(f"not a temporal formula: {f!r}")


def _at(table, t, n):
    if not 0 <= t < n:
        raise IndexError(f"step {t} outside trace of length {n}")
    value = table[..., t]
    return bool(value) if np.ndim(value) == 0 else value


def eval_past(f: Formula, trace: BoolTrace, t: int):
    """Value of a past-time formula at step t."""
    if not is_past(f):
        raise MalformedFormula("future operator in a past-time formula")
    return _at(evaluate(f, trace), t, trace.length)


def eval_future(f: Formula, trace: BoolTrace, t: int):
    """Value of a future-time formula at step t (finite-trace semantics)."""
    if not is_future(f):
        raise MalformedFormula("past operator in a future-time formula")
    return _at(evaluate(f, trace), t, trace.length)


# -- rewriting -------------------------------------------------------------------------


def _map(f, fn):
    """Rebuild `f` with `fn` applied to each child."""
    if isinstance(f, (Historically, Once, Globally, Finally)):
        return type(f)(fn(f.arg), f.bounds)
    if isinstance(f, _UNARY):
        return type(f)(fn(f.arg))
    if isinstance(f, _BINARY):
        return type(f)(fn(f.left), fn(f.right))
    if isinstance(f, (Since, SinceInclusive)):
        return type(f)(fn(f.anchor), fn(f.sustained))
    if isinstance(f, Until):
        return Until(fn(f.hold), fn(f.goal))
    return f


def weak_next(f):
    return Not(Next(Not(f)))


def weak_prev(f):
    return Not(Prev(Not(f)))


def expand_bounded(f: Formula) -> Formula:
    """Rewrite metric operators as nested next/previous chains.

    F[a,b] g becomes X^a (g | X (g | ...)); G[a,b] uses weak next so the
    window is clipped at the trace end. Past operators mirror this with Y.
    """
    f = _map(f, expand_bounded)
    if isinstance(f, (Finally, Globally, Once, Historically)) and f.bounds is not None:
        lo, hi = f.bounds
        g = f.arg
        if isinstance(f, Finally):
            join, step = Or, Next
        elif isinstance(f, Globally):
            join, step = And, weak_next
        elif isinstance(f, Once):
            join, step = Or, Prev
        else:
            join, step = And, weak_prev
        chain = g
        for _ in range(hi - lo):
            chain = join(g, step(chain))
        for _ in range(lo):
            chain = step(chain)
        return chain
    return f


def bounded_until(hold: Formula, goal: Formula, k: int) -> Formula:
    """`goal` within k steps, with `hold` at every step before it."""
    out = goal
    for _ in range(k):
        out = Or(goal, And(hold, Next(out)))
    return out


def normalize(f: Formula) -> Formula:
    """Canonical form: boolean structure inside atoms lifted to formula level,
    groups dropped. Used to compare a formula with its re-parsed rendering."""
    if isinstance(f, Atom):
        e = strip_groups(f.expr)
        if isinstance(e, BoolLit):
            return Const(e.value)
        if isinstance(e, Unary) and e.op == "!":
            return Not(normalize(Atom(e.operand)))
        if isinstance(e, Binary) and e.op in ("&", "|", "=>"):
            cls = {"&": And, "|": Or, "=>": Implies}[e.op]
            return cls(normalize(Atom(e.left)), normalize(Atom(e.right)))
        return Atom(e)
    if isinstance(f, Edge):
        return Edge(strip_groups(f.expr))
    return _map(f, normalize)


# -- printing --------------------------------------------------------------------------

DIALECTS = ("ptltl", "ltl", "cocospec", "smv")

_LUSTRE_OPS = {"&": "and", "|": "or", "=>": "=>", "!=": "<>"}
_SMV_OPS = {"=>": "->"}


def _convert_expr(expr, ops, not_fn, smv=False):
    """Render a requirement expression with mapped operator spellings."""

    def name_of(e):
        key = e.name if isinstance(e, Name) else None
        if key is None:
            arg = strip_groups(e.args[0])
            key = f"{e.func}_{arg.name if isinstance(arg, Name) else 'x'}"
        return key

    def go(e, min_prec=0):
        if isinstance(e, Group):
            return f"({go(e.inner)})"
        if isinstance(e, Name):
            return e.name
        if isinstance(e, BoolLit):
            if smv:
                return "TRUE" if e.value else "FALSE"
            return "true" if e.value else "false"
        if isinstance(e, Null):
            return "null"
        if isinstance(e, fp.Call):
            if e.func == "diff":
                a, b = e.args
                return f"abs({go(a, 5)} - {go(b, 6)})" if smv else f"diff({go(a)}, {go(b)})"
            return name_of(e)
        if isinstance(e, Unary):
            if e.op == "!":
                return not_fn(go(e.operand, 7 if smv else 0))
            text = "-" + go(e.operand, 7)
            return text if min_prec <= 7 else f"({text})"
        if isinstance(e, Binary):
            left, right = strip_groups(e.left), strip_groups(e.right)
            if e.op in ("=", "!=") and (isinstance(left, Null) or isinstance(right, Null)):
                other = e.right if isinstance(left, Null) else e.left
                inner = strip_groups(other)
                label = name_of(inner) if isinstance(inner, (Name, fp.Call)) else "expr"
                text = f"{label}_unavailable" if smv else f"isnull({go(other)})"
                return text if e.op == "=" else not_fn(text)
            p = fp._PREC[e.op]
            lp, rp = (p + 1, p) if e.op == "=>" else (p, p + 1)
            if e.op in fp.COMPARISON_OPS:
                lp = rp = p + 1
            text = f"{go(e.left, lp)} {ops.get(e.op, e.op)} {go(e.right, rp)}"
            return text if p >= min_prec else f"({text})"
        return fp.format_expr(e, min_prec)

    return go(expr)


def lustre_expr(expr: Expr) -> str:
    return _convert_expr(expr, _LUSTRE_OPS, lambda s: f"not({s})")


def smv_expr(expr: Expr) -> str:
    return _convert_expr(expr, _SMV_OPS, lambda s: f"!{s}", smv=True)


def _atomic_expr(expr):
    return isinstance(expr, (Name, Group, BoolLit, Number := fp.Number)) or (
        isinstance(expr, fp.Call))


def pretty_print(f: Formula, dialect: str = "ltl",
                 edge_names: Optional[Mapping[Expr, str]] = None) -> str:
    """Render `f` in one of the dialects ptltl, ltl, cocospec, smv.

    Output is deterministic. Each dialect accepts only its operator set:
    ptltl and cocospec are past-only, ltl is future-only, smv takes both
    but needs `edge_names` to refer to Edge atoms by a defined name.
    """
    if dialect == "cocospec":
        _require(is_past(f), dialect, "future operators")
        return _cocospec(f)
    if dialect == "ptltl":
        _require(is_past(f), dialect, "future operators")
        return _infix(f, "ptltl", edge_names)
    if dialect == "ltl":
        _require(is_future(f), dialect, "past operators")
        return _infix(f, "ltl", edge_names)
    if dialect == "smv":
        return _infix(expand_bounded(f), "smv", edge_names)
    raise DialectError(f"unknown dialect {dialect!r}")


def _require(ok, dialect, what):
    if not ok:
        raise DialectError(f"{what} cannot be printed in the {dialect} dialect")


def _cocospec(f):
    if isinstance(f, Atom):
        return lustre_expr(f.expr)
    if isinstance(f, Edge):
        c = Atom(f.expr)
        return _cocospec(And(c, Or(Prev(Not(c)), FTP())))
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, FTP):
        return "FTP"
    if isinstance(f, Not):
        return f"not({_cocospec(f.arg)})"
    if isinstance(f, Prev):
        return f"pre({_cc_call_arg(f.arg)})"
    if isinstance(f, (Historically, Once)):
        op = "H" if isinstance(f, Historically) else "O"
        if f.bounds is None:
            return f"{op}({_cc_call_arg(f.arg)})"
        return f"{op}T({f.bounds[0]}, {f.bounds[1]}, {_cc_call_arg(f.arg)})"
    if isinstance(f, (Since, SinceInclusive)):
        op = "S" if isinstance(f, Since) else "SI"
        return f"{op}(({_cocospec(f.anchor)}), ({_cocospec(f.sustained)}))"
    if isinstance(f, _BINARY):
        op = {And: "and", Or: "or", Implies: "=>"}[type(f)]
        return f"{_cc_operand(f.left)} {op} {_cc_operand(f.right)}"
    raise DialectError(f"{type(f).__name__} cannot be printed in the cocospec dialect")


def _cc_call_arg(f):
    # the call parentheses already delimit a parenthesized bare atom
    if isinstance(f, Atom) and isinstance(f.expr, Group):
        return lustre_expr(f.expr.inner)
    return _cocospec(f)


def _cc_operand(f):
    if isinstance(f, (FTP, Const)):
        return _cocospec(f)
    return f"({_cocospec(f)})"


_INFIX_BINARY = {And: "&", Or: "|", Implies: "->"}
_INFIX_UNARY = {Prev: "Y", Historically: "H", Once: "O", Next: "X", Globally: "G", Finally: "F"}


def _infix(f, dialect, edge_names):
    smv = dialect == "smv"

    def primary(g):
        return isinstance(g, (Const, FTP, Edge)) or (
            isinstance(g, Atom) and _atomic_expr(g.expr)) or (
            isinstance(g, (Since, SinceInclusive)) and not smv)

    def operand(g):
        if isinstance(g, (Not,) + tuple(_INFIX_UNARY)) or primary(g):
            return go(g)
        return f"({go(g)})"

    def go(g):
        if isinstance(g, Atom):
            if smv:
                return smv_expr(g.expr)
            return fp.format_expr(g.expr)
        if isinstance(g, Edge):
            if edge_names is not None and _key(g.expr) in edge_names:
                return edge_names[_key(g.expr)]
            if smv:
                raise DialectError("edge atoms need a DEFINE name in the smv dialect")
            return f"rise({fp.format_expr(g.expr)})"
        if isinstance(g, Const):
            if smv:
                return "TRUE" if g.value else "FALSE"
            return "true" if g.value else "false"
        if isinstance(g, FTP):
            return "!(Y TRUE)" if smv else "FTP"
        if isinstance(g, Not):
            return "!" + operand(g.arg)
        if type(g) in _INFIX_UNARY:
            op = _INFIX_UNARY[type(g)]
            if getattr(g, "bounds", None) is not None:
                op += f"[{g.bounds[0]},{g.bounds[1]}]"
            return f"{op} {operand(g.arg)}"
        if isinstance(g, _BINARY):
            return f"{operand(g.left)} {_INFIX_BINARY[type(g)]} {operand(g.right)}"
        if isinstance(g, Until):
            return f"{operand(g.hold)} U {operand(g.goal)}"
        if isinstance(g, (Since, SinceInclusive)):
            if smv:
                anchor = g.anchor if isinstance(g, Since) else And(g.anchor, g.sustained)
                return f"{operand(g.sustained)} S {operand(anchor)}"
            op = "S" if isinstance(g, Since) else "SI"
            return f"{op}({go(g.anchor)}, {go(g.sustained)})"
        raise DialectError(f"cannot print {g!r}")

    return go(f)


# -- parsing -----------------------------------------------------------------------------

_KEYWORDS = {"X", "G", "F", "Y", "H", "O", "S", "SI", "U", "FTP", "rise", "true", "false",
             "TRUE", "FALSE"}


class _FormulaParser(fp.ExprParser):
    def formula(self):
        start = self.tok
        operands = [self.f_or()]
        while self.tok.kind == "op" and self.tok.text in ("->", "=>"):
            self.advance()
            operands.append(self.f_or())
        out = operands[-1]
        for left in reversed(operands[:-1]):
            out = Implies(left, out)
        del start
        return out

    def f_or(self):
        out = self.f_and()
        while self.at("|", "op"):
            self.advance()
            out = Or(out, self.f_and())
        return out

    def f_and(self):
        out = self.f_binary()
        while self.at("&", "op"):
            self.advance()
            out = And(out, self.f_binary())
        return out

    def f_binary(self):
        out = self.f_unary()
        while self.tok.kind == "id" and self.tok.text in ("U", "S"):
            op = self.advance().text
            right = self.f_unary()
            out = Until(out, right) if op == "U" else Since(right, out)
        return out

    def f_unary(self):
        tok = self.tok
        if tok.kind == "op" and tok.text == "!":
            self.advance()
            self.enter()
            out = Not(self.f_unary())
            self.leave()
            return out
        if tok.kind == "id" and tok.text in ("X", "G", "F", "Y", "H", "O") and not (
                self.peek().kind == "op" and self.peek().text in (",", ")")):
            self.advance()
            bounds = None
            if self.at("[", "op"):
                bounds = self.bounds()
            self.enter()
            arg = self.f_unary()
            self.leave()
            cls = {"X": Next, "G": Globally, "F": Finally, "Y": Prev, "H": Historically,
                   "O": Once}[tok.text]
            if bounds is not None:
                if cls in (Next, Prev):
                    self.fail(f"'{tok.text}' takes no bounds", tok)
                return cls(arg, bounds)
            return cls(arg)
        return self.f_primary()

    def bounds(self):
        self.advance()
        lo = self.tok
        if lo.kind != "num" or not lo.text.isdigit():
            self.fail("expected an integer lower bound")
        self.advance()
        self.expect_op(",")
        hi = self.tok
        if hi.kind != "num" or not hi.text.isdigit():
            self.fail("expected an integer upper bound")
        self.advance()
        self.expect_op("]")
        if int(lo.text) > int(hi.text):
            self.fail("metric bounds must satisfy a <= b", lo)
        return (int(lo.text), int(hi.text))

    def f_primary(self):
        tok = self.tok
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            self.enter()
            out = self.formula()
            self.leave()
            self.expect_op(")", "')'")
            return out
        if tok.kind == "id":
            word = tok.text
            if word in ("true", "TRUE", "false", "FALSE"):
                self.advance()
                return Const(word.lower() == "true")
            if word == "FTP":
                self.advance()
                return FTP()
            if word in ("S", "SI", "U") and self.peek().text == "(":
                self.advance()
                self.advance()
                a = self.formula()
                self.expect_op(",")
                b = self.formula()
                self.expect_op(")")
                return {"S": Since, "SI": SinceInclusive, "U": Until}[word](a, b)
            if word == "rise" and self.peek().text == "(":
                self.advance()
                self.advance()
                expr = fp.ExprParser.expression(self)
                self.expect_op(")")
                return Edge(expr)
            if word in _KEYWORDS:
                self.fail(f"unexpected operator '{word}'")
        if tok.kind in ("id", "num") or (tok.kind == "op" and tok.text == "-"):
            return Atom(self.comparison())
        self.fail(f"expected a formula, found {self.describe(tok)}")


def parse_formula(text: str) -> Formula:
    """Parse the ptltl/ltl infix syntax (also the smv operator subset)."""
    loc = fp._Locator(text)
    try:
        tokens = fp.tokenize(text, loc)
        fp._check_balance(tokens)
        p = _FormulaParser(tokens, loc)
        out = p.formula()
        if p.tok.kind != "eof":
            p.fail(f"unexpected {p.describe(p.tok)} after formula")
        return out
    except fp._Abort as abort:
        raise fp.ParseError([abort.diag]) from None


# -- convenience -------------------------------------------------------------------------


def atom(name: str) -> Atom:
    return Atom(Name(name))


def table(f: Formula, trace: BoolTrace) -> list[bool]:
    """Per-step values of f on a single (unbatched) trace, as plain bools."""
    return [bool(v) for v in evaluate(f, trace)]


def from_lists(**columns) -> BoolTrace:
    return BoolTrace({k: v for k, v in columns.items()})


def map_leaves(f: Formula, fn: Callable) -> Formula:
    if isinstance(f, (Atom, Edge)):
        return fn(f)
    return _map(f, lambda g: map_leaves(g, fn))
