import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from fretcheck import parser as fp
from fretcheck.model import (
    NUMERIC, Binary, Group, Name, Timing, Unary, requirement_to_dict, strip_groups,
)
from fretcheck.parser import ParseError, lint, parse_project, parse_requirement

DATA = Path(__file__).resolve().parents[1] / "src" / "fretcheck" / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"

UC5_R_1 = "if ((sensorfaults) & (trackingPilotCommands)) Controller shall satisfy (controlObjectives)"
UC5_R_2 = "if ((sensorfaults) & (!trackingPilotCommands)) Controller shall satisfy (controlObjectives)"


def test_uc5_r_1_shape():
    req = parse_requirement(UC5_R_1)
    assert req.component == "Controller"
    assert req.timing.kind is Timing.DEFAULT
    (cond,) = req.conditions
    assert cond.keyword == "if"
    assert strip_groups(cond.expr) == Binary("&", Name("sensorfaults"), Name("trackingPilotCommands"))
    assert strip_groups(req.response) == Name("controlObjectives")
    assert req.source_text == UC5_R_1


def test_uc5_r_2_negated_conjunct():
    req = parse_requirement(UC5_R_2)
    right = strip_groups(req.conditions[0].expr).right
    assert right == Unary("!", Name("trackingPilotCommands"))


def test_uc5_r_1_1_two_clauses_and_until():
    (_, _, child) = parse_project((DATA / "uc5.req").read_text())
    assert [c.keyword for c in child.conditions] == ["when", "if"]
    assert child.timing.kind is Timing.UNTIL
    assert fp.format_expr(child.timing.stop) == "(diff(r(i), y(i)) < e)"
    assert child.parent_id == "UC5_R_1"


def test_minimal_requirement():
    req = parse_requirement("Controller shall satisfy (true)")
    assert req.conditions == () and req.scope is None and req.timing.kind is Timing.DEFAULT


@pytest.mark.parametrize("rid", ["UC5_R_1", "UC5_R_2", "UC5_R_1.1"])
def test_corpus_matches_golden(rid):
    reqs = {r.id: r for r in parse_project((DATA / "uc5.req").read_text())}
    golden = json.loads((GOLDEN / f"{rid}.json").read_text())
    assert requirement_to_dict(reqs[rid]) == golden


def test_timing_kinds_parse():
    cases = {
        "always": Timing.ALWAYS, "never": Timing.NEVER, "eventually": Timing.EVENTUALLY,
        "until (s)": Timing.UNTIL, "within 3 ticks": Timing.WITHIN, "for 2 ticks": Timing.FOR,
    }
    for text, kind in cases.items():
        req = parse_requirement(f"when (c) C shall {text} satisfy (r)")
        assert req.timing.kind is kind


def test_mode_scope():
    req = parse_requirement("in cruise mode when (c) C shall always satisfy (r)")
    assert req.scope.mode == "cruise"


def _diag(text):
    with pytest.raises(ParseError) as err:
        parse_requirement(text)
    return err.value.diagnostics[0]


@pytest.mark.parametrize("text,code,col", [
    ("if (a Controller shall satisfy (r)", "unbalanced-parens", 4),
    ("if (a) Controller satisfy (r)", "missing-shall", 19),
    ("Controller shall always", "missing-response", None),
    ("Controller shall soon satisfy (r)", "unknown-timing", 18),
    ("upon (a) Controller shall satisfy (r)", "unsupported-feature", 1),
    ("Controller shall before (b) satisfy (r)", "unsupported-feature", 18),
    ("only in m mode C shall satisfy (r)", "unsupported-feature", 1),
])
def test_diagnostics(text, code, col):
    d = _diag(text)
    assert d.code == code
    assert d.span.line == 1
    if col is not None:
        assert d.span.col == col


def test_diagnostic_rendering():
    d = _diag("if (a) Controller satisfy (r)")
    assert d.render("reqs.txt").startswith("reqs.txt:1:19: error: ")


def test_deep_nesting_is_a_diagnostic():
    d = _diag("C shall satisfy (" + "(" * 500 + "x" + ")" * 500 + ")")
    assert d.code in ("syntax", "too-deep")


def test_multiline_spans_use_file_lines():
    text = "# id: A\nwhen (c)\n  C shal satisfy (r)\n"
    with pytest.raises(ParseError) as err:
        parse_project(text)
    assert err.value.diagnostics[0].span.line == 3


def test_project_parent_and_order():
    reqs = parse_project((DATA / "uc5.req").read_text())
    assert [r.id for r in reqs] == ["UC5_R_1", "UC5_R_2", "UC5_R_1.1"]
    assert reqs[2].parent_id == "UC5_R_1"
    assert {r.project for r in reqs} == {"UC5"}


def test_empty_project():
    assert parse_project("") == []


def test_duplicate_ids():
    text = "# id: A\nC shall satisfy (r)\n\n# id: A\nC shall satisfy (q)\n"
    with pytest.raises(ParseError) as err:
        parse_project(text)
    assert [d.code for d in err.value.diagnostics] == ["duplicate-id"]


def test_malformed_header():
    with pytest.raises(ParseError) as err:
        parse_project("# id: A\n# owner: me\nC shall satisfy (r)\n")
    assert err.value.diagnostics[0].code == "malformed-header"


def test_lint_dangling_parent():
    reqs = parse_project("# id: A\n# parent: UC5_R_9\nC shall satisfy (r)\n")
    assert [d.code for d in lint(reqs)] == ["dangling-parent"]


def test_lint_unbound_parameter():
    reqs = parse_project("# id: A\nC shall satisfy (settlingTime <= settlingTimeMax)\n")
    diags = lint(reqs, {"settlingTime": NUMERIC}, {})
    assert [d.code for d in diags] == ["unbound-name"]
    assert "settlingTimeMax" in diags[0].message


def test_lint_clean_corpus():
    from fretcheck.traces import load_bindings

    smap = load_bindings(DATA / "uc5_map.json")
    for name in ("uc5.req", "analogues.req"):
        reqs = parse_project((DATA / name).read_text())
        assert lint(reqs, smap.declared_signals(), smap.params, smap.components) == []


def test_lint_unmapped_component_warning():
    reqs = parse_project("# id: A\nPump shall satisfy (true)\n")
    (d,) = lint(reqs, components={"Controller": "x"})
    assert d.severity == "warning" and d.code == "unmapped-component"


# -- round trip over generated sentences -----------------------------------------------

names = st.sampled_from(["a", "b", "sensorfaults", "x", "y", "E", "e"])
numbers = st.one_of(st.integers(0, 999).map(str), st.sampled_from(["0.5", "1e3", "2.25"]))


def _num_expr():
    leaf = st.one_of(names, numbers, st.builds(lambda a, b: f"diff({a}, {b})", names, names),
                     names.map(lambda n: n + "(i)"), st.just("sensorValue(S)"))
    return st.recursive(leaf, lambda inner: st.one_of(
        st.builds(lambda a, op, b: f"{a} {op} {b}", inner, st.sampled_from("+-*/"), inner),
        inner.map(lambda a: f"({a})"),
        inner.map(lambda a: f"-{a}"),
    ), max_leaves=4)


def _bool_expr():
    cmp = st.builds(lambda a, op, b: f"{a} {op} {b}", _num_expr(),
                    st.sampled_from(["<", "<=", ">", ">=", "=", "!="]), _num_expr())
    leaf = st.one_of(names, cmp, st.sampled_from(["true", "false", "y = null"]))
    return st.recursive(leaf, lambda inner: st.one_of(
        st.builds(lambda a, op, b: f"{a} {op} {b}", inner, st.sampled_from(["&", "|", "=>"]), inner),
        inner.map(lambda a: f"!{a}"),
        inner.map(lambda a: f"({a})"),
    ), max_leaves=6)


paren = _bool_expr().map(lambda s: f"({s})")
timings = st.one_of(st.sampled_from(["", "always ", "never ", "eventually "]),
                    paren.map(lambda s: f"until {s} "),
                    st.builds(lambda k, w: f"{w} {k} ticks ", st.integers(0, 50),
                              st.sampled_from(["within", "for"])))
sentences = st.builds(
    lambda scope, conds, comp, timing, resp: f"{scope}{conds}{comp} shall {timing}satisfy {resp}",
    st.sampled_from(["", "in cruise mode ", "in M2 mode "]),
    st.lists(st.builds(lambda k, e: f"{k} {e} ", st.sampled_from(["when", "if"]), paren),
             max_size=3).map("".join),
    st.sampled_from(["Controller", "Pump_2"]),
    timings,
    paren,
)


@settings(max_examples=300)
@given(sentences)
def test_round_trip(sentence):
    req = parse_requirement(sentence)
    printed = fp.format_requirement(req)
    again = parse_requirement(printed)
    assert again == req
    assert fp.format_requirement(again) == printed


@settings(max_examples=300)
@given(st.text(max_size=80))
def test_spans_within_input(text):
    try:
        parse_requirement(text)
    except ParseError as err:
        for d in err.diagnostics:
            assert d.span is not None
            assert 0 <= d.span.start <= d.span.end <= len(text)


def test_format_keeps_groups():
    req = parse_requirement(UC5_R_1)
    assert isinstance(req.response, Group)
    assert fp.format_requirement(req) == UC5_R_1


def test_project_round_trip():
    text = (DATA / "analogues.req").read_text()
    reqs = parse_project(text)
    assert parse_project(fp.format_project(reqs)) == reqs
