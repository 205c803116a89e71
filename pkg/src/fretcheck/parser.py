"""FRETISH requirement parser, printer, project-file reader and linter.

Sentence grammar::

    [in <mode> mode] [when|if <expr>]* <component> shall <timing> satisfy <expr>

    timing := (empty) | always | never | eventually | until <expr>
            | within <n> ticks | for <n> ticks

Condition, stop and response expressions must open with a parenthesis.
Expression precedence, loosest first: ``=>`` (right associative), ``|``,
``&``, comparisons (non-associative), ``+ -``, ``* /``, prefix ``! -``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence, Union

from .model import (
    FUNCTIONS,
    COMPARISON_OPS,
    BoolLit,
    Binary,
    Call,
    ConditionClause,
    Diagnostic,
    Expr,
    Group,
    Name,
    Null,
    Number,
    Requirement,
    ScopeSpec,
    Span,
    Timing,
    TimingSpec,
    Unary,
    referenced_names,
    typecheck,
)

RESERVED = {
    "in", "when", "if", "shall", "satisfy", "always", "never", "eventually",
    "until", "within", "for", "ticks", "true", "false", "null",
}
TIMING_WORDS = {"always", "never", "eventually", "until", "within", "for"}
UNSUPPORTED_SCOPES = {"only", "before", "after", "during", "not", "unless"}
UNSUPPORTED_CONDITIONS = {"upon", "unless", "whenever", "where", "while"}
UNSUPPORTED_TIMINGS = {"immediately", "at", "before", "after", "upon", "unless",
                       "next", "finally", "initially"}
MAX_DEPTH = 200

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>=>|->|<=|>=|!=|[<>=!&|+\-*/\[\](),])
""", re.VERBOSE)


class ParseError(ValueError):
    """Raised when a requirement or project does not parse."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(d.render() for d in self.diagnostics))


class _Abort(Exception):
    def __init__(self, diag):
        self.diag = diag


@dataclass(frozen=True)
class Token:
    kind: str  # id, num, op, eof
    text: str
    span: Span


def _line_starts(text):
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


class _Locator:
    def __init__(self, text, first_line=1):
        self.text = text
        self.starts = _line_starts(text)
        self.first_line = first_line

    def span(self, start, end):
        start = max(0, min(start, len(self.text)))
        end = max(start, min(end, len(self.text)))
        lo, hi = 0, len(self.starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.starts[mid] <= start:
                lo = mid
            else:
                hi = mid - 1
        return Span(start, end, self.first_line + lo, start - self.starts[lo] + 1)


def tokenize(text: str, locator: Optional[_Locator] = None) -> list[Token]:
    loc = locator or _Locator(text)
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            ch = text[pos]
            raise _Abort(Diagnostic(f"unexpected character {ch!r}", loc.span(pos, pos + 1),
                                    code="syntax"))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), loc.span(m.start(), m.end())))
        pos = m.end()
    tokens.append(Token("eof", "", loc.span(len(text), len(text))))
    return tokens


def _check_balance(tokens):
    stack = []
    for tok in tokens:
        if tok.text == "(" and tok.kind == "op":
            stack.append(tok)
            if len(stack) > MAX_DEPTH:
                raise _Abort(Diagnostic("expression nested too deeply", tok.span, code="syntax"))
        elif tok.text == ")" and tok.kind == "op":
            if not stack:
                raise _Abort(Diagnostic("unbalanced parentheses: unmatched ')'", tok.span,
                                        code="unbalanced-parens"))
            stack.pop()
    if stack:
        tok = stack[-1]
        raise _Abort(Diagnostic("unbalanced parentheses: '(' is never closed", tok.span,
                                code="unbalanced-parens"))


class ExprParser:
    """Precedence-climbing parser over a token list. Subclassed for formulas."""

    def __init__(self, tokens: list[Token], locator: _Locator):
        self.tokens = tokens
        self.pos = 0
        self.loc = locator
        self.depth = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text, kind=None) -> bool:
        tok = self.tok
        if kind is not None and tok.kind != kind:
            return False
        return tok.text == text and tok.kind in ("op", "id")

    def at_word(self, word) -> bool:
        return self.tok.kind == "id" and self.tok.text == word

    def fail(self, message, tok=None, code="syntax"):
        tok = tok or self.tok
        raise _Abort(Diagnostic(message, tok.span, code=code))

    def expect_op(self, text, what=None):
        if self.tok.kind == "op" and self.tok.text == text:
            return self.advance()
        found = self.describe(self.tok)
        self.fail(f"expected {what or repr(text)}, found {found}")

    @staticmethod
    def describe(tok):
        if tok.kind == "eof":
            return "end of input"
        return repr(tok.text)

    def span_from(self, start_tok):
        prev = self.tokens[self.pos - 1] if self.pos > 0 else start_tok
        return self.loc.span(start_tok.span.start, max(prev.span.end, start_tok.span.end))

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.fail("expression nested too deeply")

    def leave(self):
        self.depth -= 1

    # grammar
    def expression(self) -> Expr:
        start = self.tok
        operands = [self.disjunction()]
        while self.at("=>", "op"):
            self.advance()
            operands.append(self.disjunction())
        out = operands[-1]
        for left in reversed(operands[:-1]):
            out = Binary("=>", left, out, span=self.span_from(start))
        return out

    def disjunction(self) -> Expr:
        start = self.tok
        out = self.conjunction()
        while self.at("|", "op"):
            self.advance()
            out = Binary("|", out, self.conjunction(), span=self.span_from(start))
        return out

    def conjunction(self) -> Expr:
        start = self.tok
        out = self.comparison()
        while self.at("&", "op"):
            self.advance()
            out = Binary("&", out, self.comparison(), span=self.span_from(start))
        return out

    def comparison(self) -> Expr:
        start = self.tok
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in COMPARISON_OPS:
            op = self.advance().text
            right = self.additive()
            if self.tok.kind == "op" and self.tok.text in COMPARISON_OPS:
                self.fail("chained comparison; parenthesize one side")
            return Binary(op, left, right, span=self.span_from(start))
        return left

    def additive(self) -> Expr:
        start = self.tok
        out = self.multiplicative()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.advance().text
            out = Binary(op, out, self.multiplicative(), span=self.span_from(start))
        return out

    def multiplicative(self) -> Expr:
        start = self.tok
        out = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.advance().text
            out = Binary(op, out, self.unary(), span=self.span_from(start))
        return out

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text in ("!", "-"):
            start = self.advance()
            self.enter()
            operand = self.unary()
            self.leave()
            return Unary(start.text, operand, span=self.span_from(start))
        return self.primary()

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Number(float(tok.text), tok.text, span=tok.span)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            self.enter()
            inner = self.expression()
            self.leave()
            self.expect_op(")", "')'")
            return Group(inner, span=self.span_from(tok))
        if tok.kind == "id":
            return self.identifier()
        self.fail(f"expected an expression, found {self.describe(tok)}")

    def identifier(self) -> Expr:
        tok = self.advance()
        word = tok.text
        if word == "true" or word == "false":
            return BoolLit(word == "true", span=tok.span)
        if word == "null":
            return Null(span=tok.span)
        if word in RESERVED:
            self.fail(f"unexpected keyword '{word}' in expression", tok)
        if not (self.tok.kind == "op" and self.tok.text == "("):
            return Name(word, span=tok.span)
        if word in FUNCTIONS:
            return self.call(tok)
        if self.peek().kind == "id" and self.peek().text == "i" and self.peek(2).text == ")":
            self.advance()
            self.advance()
            self.advance()
            return Name(word, sampled=True, span=self.span_from(tok))
        self.fail(f"unknown function '{word}'", tok, code="unknown-function")

    def call(self, name_tok) -> Expr:
        self.advance()  # (
        args = []
        if not self.at(")", "op"):
            self.enter()
            args.append(self.call_argument())
            while self.at(",", "op"):
                self.advance()
                args.append(self.call_argument())
            self.leave()
        self.expect_op(")", "')' to close the argument list")
        arity = FUNCTIONS[name_tok.text]
        if len(args) != arity:
            self.fail(f"'{name_tok.text}' takes {arity} argument(s), got {len(args)}", name_tok,
                      code="arity")
        return Call(name_tok.text, tuple(args), span=self.span_from(name_tok))

    def call_argument(self) -> Expr:
        return ExprParser.expression(self)


class _SentenceParser(ExprParser):
    def requirement(self, **meta) -> Requirement:
        start = self.tok
        scope = self.scope()
        conditions = []
        while self.at_word("when") or self.at_word("if"):
            kw = self.advance().text
            conditions.append(ConditionClause(kw, self.clause_expr(f"condition after '{kw}'")))
        if self.tok.kind == "id" and self.tok.text in UNSUPPORTED_CONDITIONS \
                and self.peek().text == "(":
            self.fail(f"unsupported FRETISH feature: '{self.tok.text}' conditions",
                      code="unsupported-feature")
        component = self.component()
        if not self.at_word("shall"):
            self.fail(f"missing 'shall' after component '{component}', found "
                      f"{self.describe(self.tok)}", code="missing-shall")
        self.advance()
        timing = self.timing()
        if self.tok.kind == "eof":
            self.fail("missing response: expected 'satisfy (<expr>)'", code="missing-response")
        if not self.at_word("satisfy"):
            self.fail(f"expected 'satisfy' before the response, found {self.describe(self.tok)}",
                      code="missing-response")
        self.advance()
        if self.tok.kind == "eof":
            self.fail("missing response after 'satisfy'", code="missing-response")
        response = self.clause_expr("response")
        if self.tok.kind != "eof":
            self.fail(f"unexpected {self.describe(self.tok)} after the response")
        return Requirement(component=component, response=response, conditions=tuple(conditions),
                           timing=timing, scope=scope, span=self.span_from(start), **meta)

    def scope(self):
        tok = self.tok
        if tok.kind == "id" and tok.text in UNSUPPORTED_SCOPES and self.peek().text != "shall":
            self.fail(f"unsupported FRETISH feature: '{tok.text}' scopes", code="unsupported-feature")
        if not self.at_word("in"):
            return None
        self.advance()
        if self.at_word("only"):
            self.fail("unsupported FRETISH feature: 'in only' scopes", code="unsupported-feature")
        mode = self.tok
        if mode.kind != "id" or mode.text in RESERVED:
            self.fail(f"expected a mode name after 'in', found {self.describe(mode)}")
        self.advance()
        if not self.at_word("mode"):
            self.fail(f"expected 'mode' after mode name '{mode.text}'")
        self.advance()
        return ScopeSpec(mode.text)

    def component(self):
        tok = self.tok
        if tok.kind == "id" and tok.text == "shall":
            self.fail("missing component before 'shall'", code="missing-component")
        if tok.kind != "id" or tok.text in RESERVED:
            self.fail(f"expected a component name, found {self.describe(tok)}",
                      code="missing-component")
        self.advance()
        return tok.text

    def timing(self) -> TimingSpec:
        tok = self.tok
        if tok.kind != "id" or tok.text == "satisfy":
            return TimingSpec()
        word = tok.text
        if word in UNSUPPORTED_TIMINGS:
            self.fail(f"unsupported FRETISH feature: '{word}' timing", code="unsupported-feature")
        if word not in TIMING_WORDS:
            self.fail(f"unknown timing keyword '{word}'", code="unknown-timing")
        self.advance()
        if word == "until":
            return TimingSpec(Timing.UNTIL, stop=self.clause_expr("stop condition after 'until'"))
        if word in ("within", "for"):
            num = self.tok
            if num.kind != "num" or not num.text.isdigit():
                self.fail(f"expected a non-negative integer tick count after '{word}'")
            self.advance()
            if not self.at_word("ticks"):
                self.fail(f"expected 'ticks' after '{word} {num.text}'")
            self.advance()
            kind = Timing.WITHIN if word == "within" else Timing.FOR
            return TimingSpec(kind, ticks=int(num.text))
        return TimingSpec(Timing(word))

    def clause_expr(self, what) -> Expr:
        if not self.at("(", "op"):
            self.fail(f"expected '(' to open the {what}, found {self.describe(self.tok)}")
        return self.expression()


def parse_requirement(source: Union[str, bytes], *, req_id: str = "REQ", parent_id=None,
                      project: str = "", rationale: str = "", file: Optional[str] = None,
                      first_line: int = 1) -> Requirement:
    """Parse one FRETISH sentence. Raises ParseError carrying diagnostics."""
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError([Diagnostic(f"input is not valid UTF-8 ({exc.reason})",
                                         Span(0, 0), code="encoding", file=file)]) from None
    loc = _Locator(source, first_line)
    meta = dict(id=req_id, parent_id=parent_id, project=project, rationale=rationale,
                source_text=source)
    try:
        tokens = tokenize(source, loc)
        _check_balance(tokens)
        return _SentenceParser(tokens, loc).requirement(**meta)
    except _Abort as abort:
        raise ParseError([replace(abort.diag, file=file)]) from None


def parse_expression(source: str) -> Expr:
    loc = _Locator(source)
    try:
        tokens = tokenize(source, loc)
        _check_balance(tokens)
        p = ExprParser(tokens, loc)
        expr = p.expression()
        if p.tok.kind != "eof":
            p.fail(f"unexpected {p.describe(p.tok)} after expression")
        return expr
    except _Abort as abort:
        raise ParseError([abort.diag]) from None


# -- printing -------------------------------------------------------------------

_PREC = {"=>": 1, "|": 2, "&": 3, "+": 5, "-": 5, "*": 6, "/": 6}
for _op in COMPARISON_OPS:
    _PREC[_op] = 4


def format_number(value: float, text: Optional[str] = None) -> str:
    if text is not None:
        return text
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def format_expr(expr: Expr, min_prec: int = 0) -> str:
    """Render an expression in FRETISH syntax, adding parentheses only when
    precedence demands it (source parentheses survive as Group nodes)."""
    if isinstance(expr, Group):
        return f"({format_expr(expr.inner)})"
    if isinstance(expr, Name):
        return expr.name + ("(i)" if expr.sampled else "")
    if isinstance(expr, Number):
        return format_number(expr.value, expr.text)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, Null):
        return "null"
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(format_expr(a) for a in expr.args)})"
    if isinstance(expr, Unary):
        text = expr.op + format_expr(expr.operand, 7)
        return text if min_prec <= 7 else f"({text})"
    if isinstance(expr, Binary):
        p = _PREC[expr.op]
        if expr.op == "=>":
            lp, rp = p + 1, p
        elif expr.op in COMPARISON_OPS:
            lp, rp = p + 1, p + 1
        else:
            lp, rp = p, p + 1
        text = f"{format_expr(expr.left, lp)} {expr.op} {format_expr(expr.right, rp)}"
        return text if p >= min_prec else f"({text})"
    raise TypeError(f"not an expression: {expr!r}")


def _clause(expr):
    text = format_expr(expr)
    return text if text.startswith("(") else f"({text})"


def format_requirement(req: Requirement) -> str:
    """Render a requirement as a FRETISH sentence that parses back to it."""
    parts = []
    if req.scope is not None:
        parts.append(f"in {req.scope.mode} mode")
    for cond in req.conditions:
        parts.append(f"{cond.keyword} {_clause(cond.expr)}")
    parts.append(f"{req.component} shall")
    t = req.timing
    if t.kind is Timing.UNTIL:
        parts.append(f"until {_clause(t.stop)}")
    elif t.kind in (Timing.WITHIN, Timing.FOR):
        parts.append(f"{t.kind.value} {t.ticks} ticks")
    elif t.kind is not Timing.DEFAULT:
        parts.append(t.kind.value)
    parts.append(f"satisfy {_clause(req.response)}")
    return " ".join(parts)


# -- requirement files ------------------------------------------------------------

_HEADER_RE = re.compile(r"^#\s*([A-Za-z_]+)\s*:\s?(.*)$")
HEADER_KEYS = ("id", "parent", "project", "rationale")


def parse_project(text: Union[str, bytes], file: Optional[str] = None) -> list[Requirement]:
    """Parse a requirements file into requirements, preserving order.

    Blocks are separated by blank lines. Each block holds ``# key: value``
    header lines followed by one sentence, which may span several lines.
    A block made only of key-less ``#`` lines is a comment. A block without
    ``# project:`` inherits the previous block's project.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError([Diagnostic(f"file is not valid UTF-8 ({exc.reason})", Span(0, 0),
                                         code="encoding", file=file)]) from None
    diags: list[Diagnostic] = []
    requirements: list[Requirement] = []
    seen: dict[str, Requirement] = {}
    project = ""
    loc = _Locator(text)
    for block in _blocks(text):
        req, project = _parse_block(block, project, file, loc, diags)
        if req is None:
            continue
        if req.id in seen:
            diags.append(Diagnostic(f"duplicate requirement id '{req.id}'", req.span,
                                    code="duplicate-id", file=file))
            continue
        seen[req.id] = req
        requirements.append(req)
    if diags:
        raise ParseError(diags)
    return requirements


def _blocks(text):
    """Yield blocks as lists of (line_number, start_offset, line_text)."""
    block = []
    pos = 0
    for number, raw in enumerate(text.split("\n"), start=1):
        line = raw[:-1] if raw.endswith("\r") else raw
        if line.strip():
            block.append((number, pos, line))
        elif block:
            yield block
            block = []
        pos += len(raw) + 1
    if block:
        yield block


def _is_comment_block(block):
    return all(line.lstrip().startswith("#") and _HEADER_RE.match(line.strip()) is None
               for _, _, line in block)


def _parse_block(block, project, file, loc, diags):
    if _is_comment_block(block):
        return None, project
    headers = {}
    sentence_lines = []
    first_span = loc.span(block[0][1], block[0][1] + len(block[0][2]))
    for number, start, line in block:
        span = loc.span(start, start + len(line))
        if line.lstrip().startswith("#"):
            if sentence_lines:
                diags.append(Diagnostic("header line after the requirement sentence", span,
                                        code="malformed-header", file=file))
                continue
            m = _HEADER_RE.match(line.strip())
            if m is None:
                diags.append(Diagnostic("malformed header: expected '# key: value'", span,
                                        code="malformed-header", file=file))
                continue
            key, value = m.group(1), m.group(2).strip()
            if key not in HEADER_KEYS:
                diags.append(Diagnostic(f"malformed header: unknown key '{key}'", span,
                                        code="malformed-header", file=file))
                continue
            if key == "rationale" and "rationale" in headers:
                headers[key] += " " + value
            elif key in headers:
                diags.append(Diagnostic(f"malformed header: repeated key '{key}'", span,
                                        code="malformed-header", file=file))
            else:
                headers[key] = value
        else:
            sentence_lines.append((number, start, line))
    project = headers.get("project", project)
    if not headers.get("id"):
        diags.append(Diagnostic("requirement block has no '# id:' header", first_span,
                                code="malformed-header", file=file))
        return None, project
    if not sentence_lines:
        diags.append(Diagnostic(f"requirement '{headers['id']}' has no sentence", first_span,
                                code="missing-sentence", file=file))
        return None, project
    first_line = sentence_lines[0][0]
    start = sentence_lines[0][1]
    last = sentence_lines[-1]
    sentence = loc.text[start:last[1] + len(last[2])]
    try:
        req = parse_requirement(sentence, req_id=headers["id"], parent_id=headers.get("parent") or None,
                                project=project, rationale=headers.get("rationale", ""),
                                file=file, first_line=first_line)
    except ParseError as err:
        diags.extend(err.diagnostics)
        return None, project
    return req, project


def format_project(requirements: Sequence[Requirement]) -> str:
    blocks = []
    for req in requirements:
        lines = [f"# id: {req.id}"]
        if req.parent_id:
            lines.append(f"# parent: {req.parent_id}")
        if req.project:
            lines.append(f"# project: {req.project}")
        if req.rationale:
            lines.append(f"# rationale: {req.rationale}")
        lines.append(req.source_text or format_requirement(req))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# -- lint --------------------------------------------------------------------------


def lint(project: Sequence[Requirement], signals: Optional[Mapping[str, str]] = None,
         params: Optional[Mapping[str, float]] = None,
         components: Optional[Mapping[str, str]] = None) -> list[Diagnostic]:
    """Mechanical traceability and binding checks over a parsed project.

    Structural checks (unique ids, parents exist) always run. Name binding and
    type checks run when a declared-signal table or parameter set is given;
    component mapping is checked when a component table is given.
    """
    diags = []
    ids = {}
    for req in project:
        if req.id in ids:
            diags.append(Diagnostic(f"duplicate requirement id '{req.id}'", req.span,
                                    code="duplicate-id"))
        ids.setdefault(req.id, req)
    for req in project:
        if req.parent_id is not None and req.parent_id not in ids:
            diags.append(Diagnostic(f"requirement '{req.id}' names parent '{req.parent_id}', "
                                    "which does not exist", req.span, code="dangling-parent"))
        if req.parent_id == req.id:
            diags.append(Diagnostic(f"requirement '{req.id}' is its own parent", req.span,
                                    code="dangling-parent"))
    if signals is not None or params is not None:
        signals = signals or {}
        params = params or {}
        for req in project:
            for expr in req.expressions():
                for d in typecheck(expr, signals, params):
                    diags.append(replace(d, message=f"{req.id}: {d.message}"))
            if req.scope is not None:
                if "mode" not in signals:
                    diags.append(Diagnostic(f"{req.id}: mode scope needs a 'mode' signal",
                                            req.span, code="unbound-name"))
                if req.scope.mode not in params:
                    diags.append(Diagnostic(f"{req.id}: unbound parameter '{req.scope.mode}' "
                                            "(mode id)", req.span, code="unbound-name"))
    if components is not None:
        for req in project:
            if req.component not in components:
                diags.append(Diagnostic(f"{req.id}: component '{req.component}' is never mapped",
                                        req.span, severity="warning", code="unmapped-component"))
    return diags


def required_names(req: Requirement) -> set[str]:
    names = set()
    for expr in req.expressions():
        names |= referenced_names(expr)
    return names
