from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmkit.errors import ExprTypeError, MachineError, ParseError
from tmkit.eventb import (
    SKIP, EBState, check_deadlock, check_invariants, check_refinement, enabled, explore,
    exploration_summary, fire, initial_state, parse_machine, refinement_spec,
)
from tmkit.expr import parse_expr

from oracles import bfs, m0_next, m1_next, m2_next
from strategies import machines, oracle_apply


ORACLES = {
    "bridge_m0": (lambda d: 0, m0_next, lambda s: s["n"]),
    "bridge_m1": (lambda d: (0, 0, 0), m1_next, lambda s: (s["a"], s["b"], s["c"])),
    "bridge_m2": (
        lambda d: (0, 0, 0, "green", "red"), m2_next,
        lambda s: (s["a"], s["b"], s["c"], s["ml"], s["il"]),
    ),
}


@pytest.mark.parametrize("name", sorted(ORACLES))
@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_explore_matches_oracle(case, name, d):
    init, succ, key = ORACLES[name]
    states, edges = bfs(init(d), succ(d))
    g = explore(case(name).machine, {"d": d})
    assert {key(s) for s in g.states} == states
    assert len(g.edges) == edges
    assert not g.truncated


def test_frozen_state_counts(case):
    counts = {d: len(explore(case("bridge_m2").machine, {"d": d}).states) for d in (1, 2, 3)}
    assert counts == {1: 9, 2: 20, 3: 35}
    assert len(explore(case("bridge_m0").machine, {"d": 5}).states) == 6


@pytest.mark.parametrize("d", [1, 2, 3])
def test_m1_reaches_every_admissible_triple(case, d):
    triples = {
        (a, b, c) for a, b, c in product(range(d + 1), repeat=3) if a + b + c <= d and (a == 0 or c == 0)
    }
    g = explore(case("bridge_m1").machine, {"d": d})
    assert {(s["a"], s["b"], s["c"]) for s in g.states} == triples
    if d == 1:
        assert len(triples) == 4


def test_trafficlight(case):
    m = case("trafficlight").machine
    off = EBState.of(m, {"trafflight": "Off"})
    assert enabled(m, off) == ["TurnOn"]
    assert fire(m, off, "TurnOn")["trafflight"] == "On"
    g = explore(m)
    assert len(g.states) == 2 and len(g.edges) == 2
    assert check_deadlock(g).ok


def test_fire_m0(case):
    m = case("bridge_m0").machine
    s = initial_state(m, {"d": 2})
    s = fire(m, fire(m, s, "ML_in", {"d": 2}), "ML_in", {"d": 2})
    assert s.format() == "n=2"
    assert enabled(m, s, {"d": 2}) == ["ML_out"]
    with pytest.raises(MachineError) as info:
        fire(m, s, "ML_in", {"d": 2})
    assert info.value.code == "NOT_ENABLED"
    with pytest.raises(MachineError) as info:
        fire(m, s, "Nope", {"d": 2})
    assert info.value.code == "UNKNOWN_EVENT"


def test_partial_state(case):
    with pytest.raises(MachineError) as info:
        EBState.of(case("bridge_m1").machine, {"a": 0})
    assert info.value.code == "PARTIAL_STATE"


def test_unbound_constant_and_axiom(case):
    m = case("bridge_m2").machine
    with pytest.raises(MachineError) as info:
        explore(m)
    assert info.value.code == "UNBOUND_CONSTANT"
    with pytest.raises(MachineError) as info:
        explore(m, {"d": 0})
    assert info.value.code == "AXIOM_VIOLATED"


def test_invariant_counterexample_at_init(case):
    m = case("bridge_m0").machine
    m.invariants = m.invariants + [("neg", parse_expr("n < 0"))]
    try:
        g = explore(m, {"d": 2})
        fail = check_invariants(g).first_failure()
        assert (fail.name, fail.state.format(), fail.path) == ("neg", "n=0", [])
    finally:
        m.invariants = m.invariants[:-1]


def test_invariant_counterexample_is_shortest(case):
    m = case("bridge_m1").machine
    g = explore(m, {"d": 3})
    m2 = parse_machine(
        "MACHINE probe\nVARIABLES\n n\nINVARIANTS\n small: n < 2\nINIT\n n := 0\n"
        "EVENT up\nWHEN\n g: n < 5\nTHEN\n n := n + 1\nEND\n"
    )
    fail = check_invariants(explore(m2)).first_failure()
    assert fail.path == ["up", "up"]
    assert check_invariants(g).ok


def test_summary_line(case):
    g = explore(case("bridge_m0").machine, {"d": 2})
    line = exploration_summary(g, check_invariants(g), check_deadlock(g))
    assert line == "states=3 transitions=4 invariants=pass deadlocks=0"


def test_deadlocks(case):
    g = explore(case("bridge_m0").machine, {"d": 0})
    report = check_deadlock(g)
    assert [(s.format(), p) for s, p in report.states] == [("n=0", [])]
    quiet = parse_machine("MACHINE q\nVARIABLES\n x\nINIT\n x := 1\n")
    assert len(check_deadlock(explore(quiet)).states) == 1


def test_truncated_graph(case):
    g = explore(case("bridge_m2").machine, {"d": 3}, max_states=5)
    assert g.truncated and len(g.states) == 5
    assert exploration_summary(g, check_invariants(g), None).endswith("deadlocks=n/a TRUNCATED")
    with pytest.raises(MachineError) as info:
        check_deadlock(g)
    assert info.value.code == "TRUNCATED_GRAPH"


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("pair", [("bridge_m0", "bridge_m1"), ("bridge_m1", "bridge_m2")])
def test_bundled_refinements_hold(case, pair, d):
    report = check_refinement(refinement_spec(case(pair[0]).machine, case(pair[1]).machine), {"d": d})
    assert report.ok, report.message
    assert report.checked_transitions == len(explore(case(pair[1]).machine, {"d": d}).edges)


def test_default_event_map(case):
    spec = refinement_spec(case("bridge_m1").machine, case("bridge_m2").machine)
    assert spec.event_map == {
        "ML_in": "ML_in", "ML_green": SKIP, "IL_in": "IL_in",
        "IL_green": SKIP, "IL_out": "IL_out", "ML_out": "ML_out",
    }


def test_identity_refinement(case):
    m0 = case("bridge_m0").machine
    spec = refinement_spec(m0, m0, gluing=parse_expr("n = abs_n"))
    assert check_refinement(spec, {"d": 3}).ok


def test_broken_gluing_has_witness(case):
    spec = refinement_spec(case("bridge_m0").machine, case("bridge_m1").machine, gluing=parse_expr("n = a + b"))
    report = check_refinement(spec, {"d": 2})
    assert not report.ok and report.code == "SIMULATION"
    assert report.path == ["ML_in", "IL_in", "IL_out"]
    assert report.event == "IL_out"


def test_refinement_errors(case):
    m0, m1 = case("bridge_m0").machine, case("bridge_m1").machine
    with pytest.raises(MachineError) as info:
        refinement_spec(m1, m0)
    assert info.value.code == "NO_GLUING"
    with pytest.raises(MachineError) as info:
        refinement_spec(m0, m1, event_map={"ML_in": "ML_in"})
    assert info.value.code == "PARTIAL_EVENT_MAP"
    report = check_refinement(refinement_spec(m0, m1, gluing=parse_expr("n = a + b + c + 1")), {"d": 2})
    assert report.code == "UNGLUED_STATE"


BASE = "MACHINE m\nVARIABLES\n x\nINIT\n x := 0\n"


@pytest.mark.parametrize("text, error, code", [
    (BASE + "EVENT e\nANY y\nWHERE\n g: y > 0\nTHEN\n x := y\nEND\n", ParseError, "PARSE_ERROR"),
    (BASE + "EVENT e\nWHEN\n g: x + 1\nTHEN\n x := x\nEND\n", ExprTypeError, "TYPE_ERROR"),
    (BASE + "EVENT e\nTHEN\n x := x = 1\nEND\n", ExprTypeError, "TYPE_ERROR"),
    (BASE + "EVENT e\nTHEN\n x := x +\nEND\n", ParseError, "PARSE_ERROR"),
    ("MACHINE m\nVARIABLES\n x\n y\nINIT\n x := 0\n", MachineError, "UNINITIALIZED_VARIABLE"),
    (BASE + " x := 1\n", MachineError, "DUPLICATE_ASSIGNMENT"),
    ("CONTEXT c\nSETS\n S = {a, b}\n T = {b}\n" + BASE, MachineError, "PARTITION"),
    ("BOGUS\n", ParseError, "PARSE_ERROR"),
])
def test_parse_errors(text, error, code):
    with pytest.raises(error) as info:
        parse_machine(text)
    assert info.value.code == code


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_machine(BASE + "EVENT e\nTHEN\n x := x +\nEND\n")
    assert str(info.value).startswith("<memory>:8:")


def test_simultaneous_swap():
    m = parse_machine(
        "MACHINE s\nVARIABLES\n x\n y\nINIT\n x := 1\n y := 2\n"
        "EVENT swap\nTHEN\n x := y\n y := x\nEND\n"
    )
    assert fire(m, initial_state(m), "swap").format() == "x=2,y=1"


@given(machines(), st.integers(1, 3))
@settings(max_examples=150)
def test_frame_and_simultaneity(spec, rounds):
    text, init, actions = spec
    m = parse_machine(text)
    s = initial_state(m)
    expected = dict(init)
    for _ in range(rounds):
        before = s.valuation
        s = fire(m, s, "e")
        expected = oracle_apply(expected, actions)
        assert s.valuation == expected
        assigned = {t for t, *_ in actions}
        assert all(s[v] == before[v] for v in m.variables if v not in assigned)
