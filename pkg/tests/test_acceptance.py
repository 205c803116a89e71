"""Acceptance criteria, one test per criterion. Each prints a PASS/FAIL line in the
pytest summary section "acceptance criteria"."""

import json
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from fretcheck import temporal as tl
from fretcheck.cli import main
from fretcheck.model import Timing, requirement_to_dict
from fretcheck.monitor import check_project
from fretcheck.parser import ParseError, lint, parse_project, parse_requirement
from fretcheck.sim import Scenario, injection_steps, load_scenario, simulate
from fretcheck.traces import Trace, dumps_trace, load_bindings, load_trace

from constants import UC5_R_1_CONTRACT, squash
from triangle import TIMINGS, all_traces, disagreements, random_traces, requirement

DATA = Path(__file__).resolve().parents[1] / "src" / "fretcheck" / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.mark.acceptance("1 contract reproduction")
def test_contract_reproduction(tmp_path, note):
    start = time.perf_counter()
    code = main(["compile", str(DATA / "uc5.req"), "--emit", "cocospec", "-o", str(tmp_path)])
    elapsed = time.perf_counter() - start
    text = (tmp_path / "UC5_R_1.lus").read_text()
    note(f"compile in {elapsed:.3f}s")
    assert code == 0
    assert squash(text) == squash(UC5_R_1_CONTRACT)
    assert elapsed < 1.0


@pytest.mark.acceptance("2 corpus parsing")
def test_corpus_parsing(note):
    reqs = {r.id: r for r in parse_project((DATA / "uc5.req").read_text())}
    for rid in ("UC5_R_1", "UC5_R_2", "UC5_R_1.1"):
        golden = json.loads((GOLDEN / f"{rid}.json").read_text())
        assert requirement_to_dict(reqs[rid]) == golden, rid
    smap = load_bindings(DATA / "uc5_map.json")
    analogues = parse_project((DATA / "analogues.req").read_text())
    diags = lint(analogues, smap.declared_signals(), smap.params, smap.components)
    kinds = {r.timing.kind for r in analogues}
    note(f"{len(analogues)} analogues, timing kinds {len(kinds)}/{len(Timing)}")
    assert diags == []
    assert len(analogues) >= 10
    assert kinds == set(Timing)




@pytest.mark.acceptance("3 triangle equivalence")
def test_triangle_equivalence(note):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    checked = 0
    bad = {}
    for timing in TIMINGS:
        req = requirement(timing)
        for n in range(1, 6):
            cols = all_traces(n, ["c", "r", "stop"])
            bad[timing] = bad.get(timing, 0) + len(disagreements(req, cols))
            checked += len(cols["c"])
        for batch in random_traces(rng, 10_000, 50, ["c", "r", "stop"]):
            bad[timing] += len(disagreements(req, batch))
            checked += len(batch["c"])
    elapsed = time.perf_counter() - start
    total = sum(bad.values())
    note(f"{checked} traces over {len(TIMINGS)} templates, {total} disagreements, {elapsed:.1f}s")
    assert total == 0, {k: v for k, v in bad.items() if v}
    assert elapsed < 60.0


@pytest.mark.acceptance("4 pLTL recursion laws")
def test_recursion_laws(note):
    start = time.perf_counter()
    a, b = tl.atom("a"), tl.atom("b")
    checked = 0
    for n in range(1, 7):
        cols = all_traces(n, ["a", "b"])
        tr = tl.BoolTrace(cols)
        si, s = tl.SI(a, b), tl.S(a, b)
        assert (tl.evaluate(si, tr) == tl.evaluate(tl.And(b, tl.Or(a, tl.Y(si))), tr)).all()
        assert (tl.evaluate(s, tr) == tl.evaluate(tl.Or(a, tl.And(b, tl.Y(s))), tr)).all()
        checked += len(cols["a"])
    elapsed = time.perf_counter() - start
    note(f"{checked} traces, {elapsed:.2f}s")
    assert elapsed < 10.0


@pytest.mark.acceptance("5 simulator oracle")
def test_simulator_oracle(note):
    start = time.perf_counter()

    def settle(dt):
        scn = Scenario(duration_seconds=4.0, timestep_seconds=dt, tau=0.5, controller="direct",
                       pilot_schedule=[(0.0, 1.0)])
        (m,) = simulate(scn).metrics
        return m

    coarse, fine = settle(0.01), settle(0.005)
    elapsed = time.perf_counter() - start
    closed = 0.5 * math.log(50)
    note(f"settlingTime {coarse.settlingTime:.3f}s vs {closed:.3f}s, "
         f"halved-dt shift {abs(coarse.settlingTime - fine.settlingTime):.3f}s")
    assert abs(coarse.settlingTime - closed) <= 0.02
    assert coarse.overshoot == 0.0
    assert abs(coarse.settlingTime - fine.settlingTime) < 0.02
    assert elapsed < 1.0


@pytest.mark.acceptance("6 end-to-end scenario discrimination")
def test_scenario_discrimination(note):
    start = time.perf_counter()
    reqs = parse_project((DATA / "uc5.req").read_text())
    smap = load_bindings(DATA / "uc5_map.json")
    runs = {name: simulate(load_scenario(DATA / f"{name}.json"))
            for name in ("nominal", "degraded", "dropout")}
    rows = {(r.req_id, r.trace_id): r
            for r in check_project(reqs, {k: v.trace for k, v in runs.items()}, smap)}
    elapsed = time.perf_counter() - start

    failures = []
    nominal_faults = load_scenario(DATA / "nominal.json").faults
    r1 = rows[("UC5_R_1", "nominal")]
    if not (r1.status == "Satisfied" and r1.trigger_indices):
        failures.append(f"nominal UC5_R_1 {r1.status}")
    r11 = rows[("UC5_R_1.1", "nominal")]
    # Vacuous is acceptable only when the fixture injects no fault
    allowed = {"Satisfied"} if nominal_faults else {"Satisfied", "Vacuous"}
    if r11.status not in allowed:
        failures.append(f"nominal UC5_R_1.1 {r11.status}")
    deg = rows[("UC5_R_1.1", "degraded")]
    if not (deg.status == "Violated" and deg.violation
            and deg.violation["trigger_index"] is not None
            and deg.violation["failing_step"] is not None):
        failures.append(f"degraded UC5_R_1.1 {deg.status}")
    drop = runs["dropout"]
    (fault,) = load_scenario(DATA / "dropout.json").faults
    injected = list(injection_steps(fault, drop.trace.timestep))
    flagged = np.flatnonzero(drop.trace.values("sensorfaults")).tolist()
    if flagged != injected:
        failures.append(f"dropout sensorfaults on {flagged[:3]}.. not {injected[:3]}..")
    if not all(r.agreement for r in rows.values()):
        failures.append("oracle/formula disagreement")
    note("; ".join(failures) if failures else
         f"UC5_R_1 nominal trigger {r1.trigger_indices[0]}, UC5_R_1.1 degraded trigger "
         f"{deg.violation['trigger_index']} step {deg.violation['failing_step']}, "
         f"dropout steps {injected[0]}..{injected[-1]}, {elapsed:.2f}s")
    assert failures == []
    assert elapsed < 5.0


VOCAB = ["when", "if", "in", "mode", "shall", "satisfy", "always", "never", "eventually",
         "until", "within", "for", "ticks", "upon", "only", "(", ")", "&", "|", "!", "=>", "<",
         "<=", "=", "!=", ">", "+", "-", "*", "/", "diff", "null", "true", "false", "x", "C",
         "3", "1.5e", ",", "#", "# id:", "# parent:", "\n", "\n\n", "r(i)", "sensorValue(S)"]


def _fuzz_input(rng, i):
    kind = i % 3
    if kind == 0:
        return bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 60)))
    if kind == 1:
        return "".join(chr(rng.randint(32, 126)) for _ in range(rng.randint(0, 60))).encode()
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(0, 25))).encode()


def _random_trace(rng, i):
    n = int(rng.integers(1, 40))
    dt = float(rng.choice([0.001, 0.01, 0.02, 0.1, 0.5, 1.0]))
    cols = {}
    for j in range(int(rng.integers(0, 6))):
        if rng.random() < 0.4:
            cols[f"b{j}"] = ("bool", (rng.random(n) < 0.5).tolist())
        else:
            vals = rng.normal(0, 10.0 ** rng.integers(-8, 9), n)
            vals = [None if rng.random() < 0.1 else float(v) for v in vals]
            cols[f"x{j}"] = ("numeric", vals)
    t0 = float(rng.choice([0.0, 1.0, 12.5]))
    return Trace(t0 + np.arange(n) * dt, cols, timestep=dt)


@pytest.mark.acceptance("7 robustness")
def test_robustness(note):
    rng = random.Random(7)
    parsed = diagnosed = 0
    for i in range(100_000):
        data = _fuzz_input(rng, i)
        for fn in (parse_requirement, parse_project):
            try:
                fn(data)
                parsed += 1
            except ParseError as err:
                assert err.diagnostics and all(d.message for d in err.diagnostics)
                diagnosed += 1
    nrng = np.random.default_rng(7)
    for fmt in ("csv", "json"):
        for i in range(1000):
            trace = _random_trace(nrng, i)
            back = load_trace(dumps_trace(trace, fmt), format=fmt)
            assert back.equals(trace, rtol=1e-12), (fmt, i)
    note(f"100000 fuzz inputs: {diagnosed} diagnostics, {parsed} parses, no crash; "
         f"1000 round trips per format")
