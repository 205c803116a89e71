"""Offline checking of requirements against traces.

Two independent routes produce a verdict. The oracle walks plain Python
lists of grounded atom values and applies the trigger/obligation semantics
directly. The formula route evaluates the compiled past-time formula at
the last step and the compiled future-time formula at step 0. A row's
agreement flag records whether the three coincide.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import temporal as tl
from .compiler import CompiledRequirement, CompileUnsupported, compile_requirement, condition_of
from .model import ParameterSet, Requirement, Status, Timing, Verdict, Violation
from .parser import format_expr
from .traces import SignalMap, Trace, boolify, ground_all

TRUNCATION = "trace-truncation"
SUPPORTED = frozenset(Timing)


# -- reference semantics -------------------------------------------------------------


def _edges(c):
    return [t for t in range(len(c)) if c[t] and (t == 0 or not c[t - 1])]


def _interval_ends(mode):
    """For each step inside a maximal mode interval, the interval's last step."""
    n = len(mode)
    ends = [None] * n
    t = n - 1
    last = None
    while t >= 0:
        if mode[t]:
            if last is None:
                last = t
            ends[t] = last
        else:
            last = None
        t -= 1
    return ends


def oracle_verdict(kind: Timing, resp: Sequence[bool], cond: Optional[Sequence[bool]] = None,
                   stop: Optional[Sequence[bool]] = None, ticks: Optional[int] = None,
                   mode: Optional[Sequence[bool]] = None) -> Verdict:
    """Verdict from the trigger/obligation definition over boolean lists.

    Each trigger opens an obligation that runs to the end of its mode
    interval (or the trace when unscoped). The first failing trigger is
    reported with the step at which its obligation was seen to fail.
    """
    if kind not in SUPPORTED:
        raise CompileUnsupported(f"timing {kind!r} has no reference semantics")
    resp = [bool(v) for v in resp]
    n = len(resp)
    if n == 0:
        raise ValueError("empty trace")
    if kind is Timing.DEFAULT:
        kind = Timing.EVENTUALLY
    if mode is not None:
        mode = [bool(v) for v in mode]
        c = mode if cond is None else [bool(a) and b for a, b in zip(cond, mode)]
        triggers = _edges(c)
        ends = _interval_ends(mode)
    else:
        triggers = [0] if cond is None else _edges([bool(v) for v in cond])
        ends = [n - 1] * n
    if not triggers:
        return Verdict(Status.VACUOUS)

    for t0 in triggers:
        end = ends[t0]
        fail = None
        cut = False
        if kind is Timing.EVENTUALLY:
            if not any(resp[t0:end + 1]):
                fail, cut = end, end == n - 1
        elif kind is Timing.ALWAYS:
            fail = next((t for t in range(t0, end + 1) if not resp[t]), None)
        elif kind is Timing.NEVER:
            fail = next((t for t in range(t0, end + 1) if resp[t]), None)
        elif kind is Timing.UNTIL:
            for t in range(t0, end + 1):
                if stop[t]:
                    break
                if not resp[t]:
                    fail = t
                    break
        elif kind is Timing.WITHIN:
            last = min(t0 + ticks, end)
            if not any(resp[t0:last + 1]):
                fail, cut = last, t0 + ticks > n - 1 and end == n - 1
        elif kind is Timing.FOR:
            last = min(t0 + ticks, end)
            fail = next((t for t in range(t0, last + 1) if not resp[t]), None)
        if fail is not None:
            return Verdict(Status.VIOLATED, tuple(triggers),
                           Violation(t0, fail, resp[fail]), truncated=cut)
    return Verdict(Status.SATISFIED, tuple(triggers))


@dataclass
class Grounded:
    resp: list
    cond: Optional[list]
    stop: Optional[list]
    mode: Optional[list]
    unavailable: dict = field(default_factory=dict)


def ground_requirement(req: Requirement, trace: Trace, smap: SignalMap,
                       params: Optional[ParameterSet] = None) -> Grounded:
    from .compiler import mode_predicate

    flags = {}

    def col(expr):
        v, f = ground_all(expr, trace, smap, params)
        if f.any():
            flags[format_expr(expr)] = [int(i) for i in np.flatnonzero(f)]
        return [bool(x) for x in v]

    cond_expr = req.condition_expr()
    return Grounded(
        resp=col(req.response),
        cond=col(cond_expr) if cond_expr is not None else None,
        stop=col(req.timing.stop) if req.timing.stop is not None else None,
        mode=col(mode_predicate(req.scope.mode)) if req.scope is not None else None,
        unavailable=flags,
    )


def oracle_check(req: Requirement, trace: Trace, smap: SignalMap,
                 params: Optional[ParameterSet] = None) -> Verdict:
    g = ground_requirement(req, trace, smap, params)
    return oracle_verdict(req.timing.kind, g.resp, g.cond, g.stop, req.timing.ticks, g.mode)


def formula_bool_trace(creq: CompiledRequirement, trace: Trace, smap: SignalMap,
                       params: Optional[ParameterSet] = None) -> tl.BoolTrace:
    exprs = [leaf.expr for f in (creq.past_formula, creq.future_formula)
             for leaf in tl.leaves(f)]
    return boolify(exprs, trace, smap, params)


def formula_check(creq: CompiledRequirement, trace: Trace, smap: SignalMap,
                  params: Optional[ParameterSet] = None) -> dict:
    bt = formula_bool_trace(creq, trace, smap, params)
    n = bt.length
    return {
        "past_verdict": tl.eval_past(creq.past_formula, bt, n - 1),
        "future_verdict": tl.eval_future(creq.future_formula, bt, 0),
    }


# -- project checks ------------------------------------------------------------------


@dataclass
class CheckResult:
    req_id: str
    trace_id: str
    status: str
    trigger_indices: list = field(default_factory=list)
    violation: Optional[dict] = None
    agreement: bool = True
    warnings: list = field(default_factory=list)
    past_verdict: Optional[bool] = None
    future_verdict: Optional[bool] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "req_id": self.req_id,
            "trace_id": self.trace_id,
            "status": self.status,
            "trigger_indices": list(self.trigger_indices),
            "violation": self.violation,
            "agreement": self.agreement,
            "warnings": list(self.warnings),
            "past_verdict": self.past_verdict,
            "future_verdict": self.future_verdict,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d) -> "CheckResult":
        return cls(
            req_id=d["req_id"], trace_id=d["trace_id"], status=d["status"],
            trigger_indices=list(d.get("trigger_indices", [])), violation=d.get("violation"),
            agreement=bool(d.get("agreement", True)), warnings=list(d.get("warnings", [])),
            past_verdict=d.get("past_verdict"), future_verdict=d.get("future_verdict"),
            error=d.get("error"),
        )


ERROR = "Error"


def _ranges(steps):
    out = []
    for s in steps:
        if out and s == out[-1][1] + 1:
            out[-1][1] = s
        else:
            out.append([s, s])
    return ", ".join(str(a) if a == b else f"{a}-{b}" for a, b in out)


def check_pair(req: Requirement, trace_id: str, trace: Trace, smap: SignalMap,
               params: Optional[ParameterSet] = None,
               creq: Optional[CompiledRequirement] = None) -> CheckResult:
    try:
        creq = creq if creq is not None else compile_requirement(req)
        g = ground_requirement(req, trace, smap, params)
        verdict = oracle_verdict(req.timing.kind, g.resp, g.cond, g.stop, req.timing.ticks, g.mode)
        fv = formula_check(creq, trace, smap, params)
    except (ValueError, KeyError) as exc:
        return CheckResult(req.id, trace_id, ERROR, agreement=False, error=str(exc))
    warnings = []
    if verdict.truncated:
        warnings.append(f"{TRUNCATION}: obligation of trigger {verdict.violation.trigger_index} "
                        f"reaches the end of the trace")
    for expr, steps in sorted(g.unavailable.items()):
        warnings.append(f"unavailable: {expr} has an unavailable operand at steps {_ranges(steps)}")
    agree = verdict.holds == fv["past_verdict"] == fv["future_verdict"]
    violation = None
    if verdict.violation is not None:
        v = verdict.violation
        violation = {"trigger_index": v.trigger_index, "failing_step": v.failing_step,
                     "response_value": v.response_value}
    return CheckResult(req.id, trace_id, verdict.status.value, list(verdict.trigger_indices),
                       violation, agree, warnings, fv["past_verdict"], fv["future_verdict"])


def check_project(reqs: Sequence[Requirement], traces, smap: SignalMap,
                  params: Optional[ParameterSet] = None, workers: Optional[int] = None,
                  compiled: Optional[Mapping[str, CompiledRequirement]] = None) -> list:
    """Check every requirement against every trace.

    `traces` is a mapping or a list of (trace_id, Trace) pairs. `compiled`
    overrides the compiled form of selected requirements. Rows come back
    sorted by (req_id, trace_id) whatever the worker count.
    """
    items = list(traces.items()) if isinstance(traces, Mapping) else list(traces)
    compiled = dict(compiled or {})
    jobs = [(req, tid, tr) for req in reqs for tid, tr in items]

    def run(job):
        req, tid, tr = job
        return check_pair(req, tid, tr, smap, params, compiled.get(req.id))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(j) for j in jobs]
    rows.sort(key=lambda r: (r.req_id, r.trace_id))
    return rows


def results_to_json(rows: Sequence[CheckResult]) -> str:
    return json.dumps([r.to_dict() for r in rows], indent=2, sort_keys=True) + "\n"


def results_from_json(text: str) -> list:
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise ValueError("results JSON must be an array of rows")
    return [CheckResult.from_dict(d) for d in doc]


def passed(rows: Sequence[CheckResult]) -> bool:
    return all(r.status != Status.VIOLATED.value and r.agreement and r.error is None for r in rows)


__all__ = [
    "oracle_verdict", "oracle_check", "formula_check", "check_pair", "check_project",
    "CheckResult", "results_to_json", "results_from_json", "condition_of", "TRUNCATION",
]
