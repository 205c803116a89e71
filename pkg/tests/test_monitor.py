from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fretcheck import temporal as tl
from fretcheck.compiler import compile_requirement
from fretcheck.model import ParameterSet, Status, Timing
from fretcheck.monitor import (
    ERROR, CheckResult, check_pair, check_project, formula_check, oracle_check, oracle_verdict,
    passed, results_from_json, results_to_json,
)
from fretcheck.parser import parse_project, parse_requirement
from fretcheck.traces import SignalMap, Trace

T, F = True, False
DATA = Path(__file__).resolve().parents[1] / "src" / "fretcheck" / "data"
UC5 = {r.id: r for r in parse_project((DATA / "uc5.req").read_text())}
SMAP = SignalMap()


def _trace(**cols):
    n = len(next(iter(cols.values())))
    return Trace(np.arange(n) * 0.01, {k: ("bool", v) for k, v in cols.items()})


def _uc5_trace(sf, tpc, co):
    return _trace(sensorfaults=sf, trackingPilotCommands=tpc, controlObjectives=co)


def test_oracle_examples():
    ok = oracle_verdict(Timing.DEFAULT, [F, F, T], [F, T, F])
    assert ok.status is Status.SATISFIED and ok.trigger_indices == (1,)
    bad = oracle_verdict(Timing.DEFAULT, [F] * 4, [F, T, F, F])
    assert bad.status is Status.VIOLATED and bad.violation.trigger_index == 1
    assert bad.violation.failing_step == 3 and bad.truncated
    vac = oracle_verdict(Timing.ALWAYS, [F, T, F], [F, F, F])
    assert vac.status is Status.VACUOUS and vac.trigger_indices == ()


def test_oracle_until_releases_at_stop():
    v = oracle_verdict(Timing.UNTIL, [F, T, T, F], [F, T, F, F], stop=[F, F, F, T])
    assert v.status is Status.SATISFIED
    v = oracle_verdict(Timing.UNTIL, [F, T, F, F], [F, T, F, F], stop=[F, F, F, T])
    assert v.violation.failing_step == 2 and not v.truncated


def test_oracle_mode_intervals_bound_obligations():
    # the obligation of the edge at 1 ends with the mode interval at 2
    v = oracle_verdict(Timing.EVENTUALLY, [F, F, F, T], None, mode=[F, T, T, F])
    assert v.status is Status.VIOLATED and v.violation.failing_step == 2 and not v.truncated


def test_formula_check_examples():
    creq = compile_requirement(UC5["UC5_R_1"])
    quiet = _uc5_trace([F, F, F], [T, T, T], [F, F, F])
    assert formula_check(creq, quiet, SMAP) == {"past_verdict": True, "future_verdict": True}
    missed = _uc5_trace([F, T, T], [T, T, T], [F, F, F])
    assert formula_check(creq, missed, SMAP) == {"past_verdict": False, "future_verdict": False}
    assert oracle_check(UC5["UC5_R_1"], missed, SMAP).status is Status.VIOLATED


def test_formula_check_until_example():
    req = parse_requirement("when (c) C shall until (stop) satisfy (r)")
    tr = _trace(c=[F, T, F, F], r=[F, T, T, F], stop=[F, F, F, T])
    assert formula_check(compile_requirement(req), tr, SMAP) == {
        "past_verdict": True, "future_verdict": True}


def test_check_project_cross_product():
    reqs = [UC5["UC5_R_1"], UC5["UC5_R_2"]]
    traces = {"t2": _uc5_trace([F, T], [T, T], [T, T]), "t1": _uc5_trace([F, F], [F, F], [F, F])}
    rows = check_project(reqs, traces, SMAP)
    assert [(r.req_id, r.trace_id) for r in rows] == [
        ("UC5_R_1", "t1"), ("UC5_R_1", "t2"), ("UC5_R_2", "t1"), ("UC5_R_2", "t2")]
    assert [r.status for r in rows] == ["Vacuous", "Satisfied", "Vacuous", "Vacuous"]
    assert all(r.agreement for r in rows) and passed(rows)


def test_miscompiled_formula_is_flagged():
    req = UC5["UC5_R_1"]
    good = compile_requirement(req)
    broken = replace(good, past_formula=tl.Const(True))
    tr = _uc5_trace([F, T, T], [T, T, T], [F, F, F])
    (row,) = check_project([req], {"t": tr}, SMAP, compiled={req.id: broken})
    assert row.status == "Violated" and row.agreement is False
    assert not passed([row])


def test_vacuous_implies_no_triggers_and_true_formulas():
    row = check_pair(UC5["UC5_R_1"], "t", _uc5_trace([F, F], [T, T], [F, F]), SMAP)
    assert row.status == "Vacuous" and row.trigger_indices == []
    assert row.past_verdict is True and row.future_verdict is True


def test_truncation_warning():
    row = check_pair(UC5["UC5_R_1"], "t", _uc5_trace([F, T], [T, T], [F, F]), SMAP)
    assert row.status == "Violated"
    assert any(w.startswith("trace-truncation") for w in row.warnings)


def test_unavailable_warning():
    req = parse_requirement("when (c) C shall always satisfy (y > 1)", req_id="U")
    tr = Trace([0, 1, 2, 3], {"c": ("bool", [T, T, T, T]), "y": ("numeric", [2, None, None, 3])})
    row = check_pair(req, "t", tr, SMAP)
    assert row.status == "Violated" and row.violation["failing_step"] == 1
    assert "unavailable: (y > 1) has an unavailable operand at steps 1-2" in row.warnings


def test_pair_errors_become_rows():
    req = parse_requirement("when (missing) C shall satisfy (r)", req_id="E")
    (row,) = check_project([req], {"t": _trace(r=[T])}, SMAP)
    assert row.status == ERROR and row.error and not row.agreement


def test_results_json_round_trip():
    rows = check_project(list(UC5.values())[:2], {"t": _uc5_trace([F, T], [T, T], [T, T])}, SMAP)
    assert results_from_json(results_to_json(rows)) == rows
    assert set(CheckResult("a", "b", "Vacuous").to_dict()) >= {
        "req_id", "trace_id", "status", "trigger_indices", "violation", "agreement", "warnings"}


bools = st.lists(st.booleans(), min_size=1, max_size=30)


@settings(max_examples=300, deadline=None)
@given(st.data(), st.integers(0, 6), st.integers(0, 6))
def test_within_monotone(data, k, extra):
    n = data.draw(st.integers(1, 30))
    c = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    r = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    if oracle_verdict(Timing.WITHIN, r, c, ticks=k).holds:
        assert oracle_verdict(Timing.WITHIN, r, c, ticks=k + extra).holds


def test_deterministic_across_workers():
    rng = np.random.default_rng(3)
    traces = {f"t{i}": _uc5_trace(*(rng.random((3, 40)) < 0.5).tolist()) for i in range(6)}
    reqs = [UC5["UC5_R_1"], UC5["UC5_R_2"]]
    serial = check_project(reqs, traces, SMAP)
    assert check_project(reqs, traces, SMAP, workers=4) == serial
    assert check_project(list(reversed(reqs)), dict(reversed(list(traces.items()))), SMAP) == serial


def test_params_override():
    req = parse_requirement("when (c) C shall always satisfy (y > V)", req_id="P")
    tr = Trace([0, 1], {"c": ("bool", [T, T]), "y": ("numeric", [2.0, 2.0])})
    smap = SignalMap(params=ParameterSet({"V": 1.0}))
    assert check_pair(req, "t", tr, smap).status == "Satisfied"
    assert check_pair(req, "t", tr, smap, ParameterSet({"V": 5.0})).status == "Violated"
