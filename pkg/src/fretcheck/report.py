"""Traceability report linking each requirement to its formulas and verdicts."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

from . import temporal as tl
from .compiler import CompiledRequirement, compile_requirement, emit_cocospec
from .model import Diagnostic, Requirement
from .monitor import ERROR, CheckResult
from .parser import format_requirement

STATUSES = ("Satisfied", "Violated", "Vacuous")


class ReportError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))


def natural_key(text: str):
    return [(0, int(p), "") if p.isdigit() else (1, 0, p) for p in re.split(r"(\d+)", text) if p]


@dataclass
class TraceVerdict:
    trace_id: str
    status: str
    trigger_indices: list = field(default_factory=list)
    violation: Optional[dict] = None
    agreement: bool = True
    warnings: list = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class ReportNode:
    id: str
    parent_id: Optional[str]
    project: str
    rationale: str
    source_text: str
    fretish: str
    past_formula: str
    future_formula: str
    contract_name: str
    contract: str
    verdicts: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    children: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, d) -> "ReportNode":
        d = dict(d)
        d["verdicts"] = [TraceVerdict(**v) for v in d.get("verdicts", [])]
        d["children"] = [cls.from_dict(c) for c in d.get("children", [])]
        return cls(**d)


@dataclass
class ReportModel:
    nodes: list
    summary: dict
    trace_ids: list
    provenance: dict = field(default_factory=dict)

    def walk(self):
        stack = list(reversed(self.nodes))
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "ReportModel":
        return cls(nodes=[ReportNode.from_dict(n) for n in d["nodes"]], summary=dict(d["summary"]),
                   trace_ids=list(d["trace_ids"]), provenance=dict(d.get("provenance", {})))


def _safe(fn, *args):
    try:
        return fn(*args)
    except ValueError as exc:
        return f"<unavailable: {exc}>"


def build_report(reqs: Sequence[Requirement], compiled: Optional[Mapping[str, CompiledRequirement]],
                 results: Sequence[CheckResult], provenance: Optional[dict] = None) -> ReportModel:
    compiled = dict(compiled or {})
    ids = [r.id for r in reqs]
    known = set(ids)
    diags = []
    if len(known) != len(ids):
        diags.append(Diagnostic("duplicate requirement ids in report input", None,
                                code="duplicate-id"))
    for r in reqs:
        if r.parent_id is not None and r.parent_id not in known:
            diags.append(Diagnostic(f"{r.id}: parent '{r.parent_id}' does not exist", r.span,
                                    code="dangling-parent"))
    for row in results:
        if row.req_id not in known:
            diags.append(Diagnostic(f"result row names unknown requirement '{row.req_id}'", None,
                                    code="dangling-result"))
    if diags:
        raise ReportError(diags)

    by_req = {}
    for row in sorted(results, key=lambda r: (natural_key(r.req_id), natural_key(r.trace_id))):
        by_req.setdefault(row.req_id, []).append(row)
    trace_ids = sorted({row.trace_id for row in results}, key=natural_key)

    nodes = {}
    for r in reqs:
        creq = compiled.get(r.id)
        if creq is None:
            creq = _safe(compile_requirement, r)
        if isinstance(creq, CompiledRequirement):
            past = tl.pretty_print(creq.past_formula, "ptltl")
            future = tl.pretty_print(creq.future_formula, "ltl")
            contract = emit_cocospec(creq)
        else:
            past = future = contract = creq
        verdicts = [TraceVerdict(row.trace_id, row.status, list(row.trigger_indices), row.violation,
                                 row.agreement, list(row.warnings), row.error)
                    for row in by_req.get(r.id, [])]
        warnings = sorted({w for v in verdicts for w in v.warnings})
        nodes[r.id] = ReportNode(r.id, r.parent_id, r.project, r.rationale, r.source_text,
                                 format_requirement(r), past, future, r.id, contract, verdicts,
                                 warnings)
    roots = []
    for rid in sorted(nodes, key=natural_key):
        node = nodes[rid]
        if node.parent_id is None:
            roots.append(node)
        else:
            nodes[node.parent_id].children.append(node)
    # a parent cycle leaves nodes unreachable from any root
    reachable = set()
    stack = list(roots)
    while stack:
        n = stack.pop()
        reachable.add(n.id)
        stack.extend(n.children)
    if reachable != known:
        raise ReportError([Diagnostic(f"parent cycle through {sorted(known - reachable)}", None,
                                      code="parent-cycle")])

    summary = {"satisfied": 0, "violated": 0, "vacuous": 0, "error": 0, "unchecked": 0,
               "disagreements": 0}
    for row in results:
        key = row.status.lower() if row.status in STATUSES else "error"
        summary[key] += 1
        if not row.agreement and row.status != ERROR:
            summary["disagreements"] += 1
    summary["unchecked"] = sum(1 for rid in ids if rid not in by_req)
    return ReportModel(roots, summary, trace_ids, dict(provenance or {}))


# -- rendering -----------------------------------------------------------------------


def _cell(text) -> str:
    return str(text).replace("|", "\\|").replace("\n", " ")


def _verdict_text(v: TraceVerdict) -> str:
    text = v.status
    if v.violation:
        text += f" (trigger {v.violation['trigger_index']}, step {v.violation['failing_step']})"
    if not v.agreement and v.status != ERROR:
        text += " [disagreement]"
    return text


def render_markdown(model: ReportModel) -> str:
    out = ["# Requirements verification report", ""]
    s = model.summary
    out += ["## Summary", "", "| Satisfied | Violated | Vacuous | Unchecked | Error | Disagreements |",
            "|---|---|---|---|---|---|",
            f"| {s['satisfied']} | {s['violated']} | {s['vacuous']} | {s['unchecked']} | "
            f"{s['error']} | {s['disagreements']} |", ""]
    out += ["## Traceability", ""]
    header = ["ID", "Parent", "Contract"] + [_cell(t) for t in model.trace_ids]
    out.append("| " + " | ".join(header) + " |")
    out.append("|" + "---|" * len(header))
    for node in model.walk():
        verdicts = {v.trace_id: v for v in node.verdicts}
        cells = [node.id, node.parent_id or "-", node.contract_name]
        cells += [_verdict_text(verdicts[t]) if t in verdicts else "unchecked"
                  for t in model.trace_ids]
        out.append("| " + " | ".join(_cell(c) for c in cells) + " |")
    out += ["", "## Requirements", ""]

    def emit(node, depth):
        out.append(f"{'#' * min(3 + depth, 6)} {node.id}")
        out.append("")
        if node.parent_id:
            out.append(f"- Parent: {node.parent_id}")
        if node.project:
            out.append(f"- Project: {node.project}")
        if node.rationale:
            out.append(f"- Rationale: {node.rationale}")
        out.append(f"- FRETISH: `{node.fretish}`")
        out.append(f"- Past-time formula: `{node.past_formula}`")
        out.append(f"- Future-time formula: `{node.future_formula}`")
        out.append(f"- Contract: `{node.contract}`")
        if not node.verdicts:
            out.append("- Verdicts: unchecked")
        for v in node.verdicts:
            line = f"- Trace `{v.trace_id}`: {_verdict_text(v)}"
            if v.violation:
                line += (f"; response value at the failing step: "
                         f"{str(v.violation['response_value']).lower()}")
            if v.error:
                line += f"; error: {v.error}"
            out.append(line)
            for w in v.warnings:
                out.append(f"  - warning: {w}")
        out.append("")
        for child in node.children:
            emit(child, depth + 1)

    for root in model.nodes:
        emit(root, 0)
    if model.provenance:
        out += ["## Provenance", ""]
        for key in sorted(model.provenance):
            value = model.provenance[key]
            if isinstance(value, dict):
                for sub in sorted(value):
                    out.append(f"- {key} `{sub}`: {value[sub]}")
            else:
                out.append(f"- {key}: {value}")
        out.append("")
    return "\n".join(out)


def render_json(model: ReportModel) -> str:
    return json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n"


def render(model: ReportModel, format: str = "markdown") -> str:
    if format in ("markdown", "md"):
        return render_markdown(model)
    if format == "json":
        return render_json(model)
    raise ValueError(f"unknown report format {format!r}")


def load_report_json(text: str) -> ReportModel:
    return ReportModel.from_dict(json.loads(text))
