import re

import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from tmkit.core import Model, validate_static
from tmkit.errors import ModelError, ParseError
from tmkit.lang import SourceText, export_dot, parse, parse_flow_string, serialize

from strategies import models

CORPUS_MODELS = ("y10x", "bridge_m0", "bridge_m1", "bridge_m2")


def test_qualified_flow_example():
    m = parse(SourceText("thimac m { flow m.create.m.release.m.transfer.output }"))
    assert len(m.stages) == 3
    assert len(m.flows) == 2


def test_empty_source():
    m = parse("")
    assert not m.thimacs and not m.stages
    assert serialize(m).text == ""


def test_bare_trigger_introduces_thimacs():
    m = parse("trigger calc.process --> y.create")
    assert [(t.src, t.dst) for t in m.triggers] == [("calc.process", "y.create")]


def test_one_trigger_serializes_one_arrow():
    text = serialize(parse("trigger calc.process --> y.create")).text
    assert text.count("-->") == 1


def test_keywords_are_case_insensitive_in_bare_flows():
    m = parse_flow_string("Flow.Transfer.input.receive.arrive.accept.process.release.transfer.output")
    kinds = {m.stages[s].kind.value for s in m.stages}
    assert kinds == {"transfer_in", "arrive", "accept", "process", "release", "transfer_out"}
    assert len(m.flows) == 5
    assert validate_static(m).ok


def test_guard_and_update_syntax():
    m = parse("""
    var x = 0
    light ml = green
    thimac t {
      flow transfer.input.receive.process
      guard process : x != 0 and ml = green ? other.process : _
      update process : x := x + 1
      consume process
    }
    thimac other { }
    """)
    st = m.stages["t.process"]
    assert st.guard.on_true == "other.process" and st.guard.on_false is None
    assert [v for v, _ in st.updates] == ["x"]
    assert st.consuming
    assert m.lights == {"ml"}
    assert [t.label for t in m.triggers] == ["on_true"]


def test_event_declaration_with_description():
    m = parse('thimac t { flow create.release }\nevent A "made" = { t.create, t.release }')
    ev = m.declared_events[0]
    assert (ev.id, ev.name, sorted(ev.region.stages)) == ("A", "made", ["t.create", "t.release"])
    assert len(ev.region.arcs) == 1


@pytest.mark.parametrize("text,line,col", [
    ("thimac m {\n  flow create.\n}", 3, 1),
    ("thimac m { flow create }", 1, 24),
    ("var x = = 3", 1, 9),
    ("thimac m {\n  guard process : x > ? _ : _\n}", 2, 23),
    ("thimac 1 { }", 1, 8),
    ("thimac m { flow transfer.create }", 1, 26),
    ("flow nosuch.create.release\nthimac nosuch { }\nthimac x { flow ghost.create.release }", 3, 17),
])
def test_parse_error_positions(text, line, col):
    with pytest.raises(ParseError) as info:
        parse(text)
    err = info.value
    assert (err.line, err.column) == (line, col)
    lines = text.split("\n")
    assert 1 <= err.line <= len(lines)
    assert 1 <= err.column <= len(lines[err.line - 1]) + 1


@given(st.text(alphabet="thimac flow{}.:?_-=>#\n abcxyz012", max_size=40))
@settings(max_examples=300)
def test_parse_errors_point_into_source(text):
    try:
        parse(text)
    except ParseError as err:
        lines = text.split("\n")
        assert 1 <= err.line <= len(lines)
        assert 1 <= err.column <= len(lines[err.line - 1]) + 1


def test_serialize_requires_valid_model():
    m = parse("thimac m { flow transfer.input.create }")
    with pytest.raises(ModelError) as info:
        serialize(m)
    assert info.value.code == "INVALID_MODEL"


@pytest.mark.parametrize("name", CORPUS_MODELS)
def test_corpus_round_trip_fixed_point(case, name):
    m = case(name).model
    once = serialize(m).text
    again = parse(once)
    assert again.signature() == m.signature()
    assert serialize(again).text == once


@given(models())
@settings(max_examples=150, suppress_health_check=[HealthCheck.too_slow])
def test_round_trip_on_generated_models(m):
    assume(validate_static(m).ok)
    text = serialize(m).text
    again = parse(text)
    assert again.signature() == m.signature()
    assert serialize(again).text == text


def test_dot_empty_model():
    text = export_dot(Model()).text
    assert "->" not in text and "[label=" not in text


def test_dot_y10x_has_dashed_edge_into_y_create(case):
    m = case("y10x").model
    text = export_dot(m).text
    assert re.search(r'-> "y10x\.y\.create" \[style=dashed\]', text)
    assert '"y10x.y.create" [label="y.create"]' in text


def test_dot_m2_one_cluster_per_thimac(case):
    m = case("bridge_m2").model
    text = export_dot(m).text
    assert text.count("subgraph ") == len(m.thimacs)
    assert text.count("style=dashed") == len(m.triggers)
    assert len(re.findall(r'^\s*"[^"]+" -> "[^"]+";$', text, re.M)) == len(m.flows)
