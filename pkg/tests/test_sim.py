import re

import pytest

from tmkit.dynamics import extract_events
from tmkit.errors import SimulationError
from tmkit.lang import parse
from tmkit.sim import (
    REJECTED, SIGNAL, Scenario, SimState, parse_monitors, parse_scenario, run, step,
)

UPDATE = re.compile(r"^(\w+) (\S+)->(\S+)$")


def simulate(bundle, scenario, signal_mode=False, monitors=()):
    sc = bundle.scenarios[scenario]
    sc = Scenario(sc.injections, sc.init_vars, signal_mode, sc.max_ticks)
    return run(bundle.model, extract_events(bundle.model), sc, monitors)


def test_y10x_divides(case):
    res = simulate(case("y10x"), "five")
    assert res.variables["y"] == 2
    assert res.trace.events()[-1] == "C"
    assert res.trace.records[-1].detail == "created token=3 payload=2 at=y10x.y.create"


def test_y10x_zero_takes_constraint_branch(case):
    res = simulate(case("y10x"), "zero")
    events = res.trace.events()
    assert events[-1] == "E"
    assert "C" not in events and "B" not in events
    assert res.variables["y"] == 0
    assert [t.payload for t in res.dropped] == [0]


def test_m0_capacity(case):
    b = case("bridge_m0")
    sc = parse_scenario("var d = 2\n" + "".join(
        f"at {t} inject bridge.mainland.gate.transfer.input {t}\n" for t in (1, 2, 3)))
    res = run(b.model, extract_events(b.model), sc, b.monitors)
    assert [snap["n"] for _, snap in res.trace.snapshots] == [0, 1, 2, 2]
    assert res.trace.events().count(REJECTED) == 1
    assert res.report.ok


def test_fill_holds_back_excess(case):
    res = simulate(case("bridge_m0"), "fill", monitors=case("bridge_m0").monitors)
    assert res.trace.events().count(REJECTED) == 2
    assert res.variables["n"] == 1
    assert len(res.dropped) == 2
    assert res.report.ok


@pytest.mark.parametrize("name", ["y10x", "bridge_m0", "bridge_m1", "bridge_m2"])
@pytest.mark.parametrize("signal_mode", [False, True])
def test_runs_are_deterministic(case, name, signal_mode):
    b = case(name)
    for key in b.scenarios:
        first = simulate(b, key, signal_mode).trace.format()
        assert simulate(b, key, signal_mode).trace.format() == first


def test_signal_mode_inserts_signal_before_update(case):
    events = simulate(case("bridge_m0"), "basic", signal_mode=True).trace.events()
    assert events.count(SIGNAL) == 3
    for i, ev in enumerate(events):
        if ev in ("E3", "E6"):
            assert events[i - 1] == SIGNAL
    inline = simulate(case("bridge_m0"), "basic").trace.events()
    assert [e for e in events if e != SIGNAL] == inline


def test_false_monitor_fails_at_first_quiescent_point(case):
    res = simulate(case("bridge_m0"), "basic", monitors=parse_monitors("never: false"))
    (result,) = res.report.results
    assert not result.ok
    assert result.tick == 0
    assert result.format() == "monitor never FAIL t=0 d=2 n=0"


def test_monitor_on_unknown_name_reports_error(case):
    res = simulate(case("bridge_m0"), "basic", monitors=parse_monitors("bad: zz > 0"))
    assert not res.report.ok
    assert res.report.results[0].error


def micro_steps(bundle, key, signal_mode):
    sc = bundle.scenarios[key]
    sc = Scenario(sc.injections, sc.init_vars, signal_mode, sc.max_ticks)
    state = SimState(bundle.model, extract_events(bundle.model), sc)
    state.begin_tick(0)
    while True:
        before_vars = dict(state.vars)
        before_tokens = set(state.tokens)
        try:
            records = step(state)
        except SimulationError as exc:
            assert exc.code == "QUIESCENT"
            return
        yield state, before_vars, before_tokens, records


@pytest.mark.parametrize("name", ["y10x", "bridge_m0", "bridge_m1", "bridge_m2"])
@pytest.mark.parametrize("signal_mode", [False, True])
def test_step_invariants(case, name, signal_mode):
    b = case(name)
    stages = set(b.model.stages)
    for key in b.scenarios:
        issued = set()
        for state, before_vars, before_tokens, records in micro_steps(b, key, signal_mode):
            # tokens sit on stages, and ids are never reused
            for tok in state.tokens.values():
                assert tok.location == "infosys" if tok.signal else tok.location in stages
            fresh = set(state.tokens) - before_tokens
            assert not fresh & issued
            issued |= fresh
            # frame: only variables named in an update record change
            parts = [p for r in records for p in r.detail.split("; ")]
            updated = {m.group(1): m for m in map(UPDATE.match, parts) if m}
            for var, value in state.vars.items():
                if var not in updated:
                    assert value == before_vars[var]
                else:
                    assert str(before_vars[var]) == updated[var].group(2)
                    assert str(value) == updated[var].group(3)


def test_updates_follow_their_trigger(case):
    b = case("bridge_m0")
    for key in b.scenarios:
        events = [e for e in simulate(b, key).trace.events() if e != SIGNAL]
        for i, ev in enumerate(events):
            if ev == "E3":
                assert events[i - 1] == "E2"
            if ev == "E6":
                assert events[i - 1] == "E5"


def test_uninitialized_variable():
    m = parse("var q\nthimac t { flow transfer.input.receive.process }\nevent A = { t.transfer.input, t.receive, t.process }")
    with pytest.raises(SimulationError) as info:
        run(m, extract_events(m), Scenario())
    assert info.value.code == "UNINITIALIZED_VARIABLE"
    res = run(m, extract_events(m), Scenario(init_vars={"q": 3}))
    assert res.variables == {"q": 3}


def test_injection_port_must_be_boundary(case):
    b = case("y10x")
    for port in ["y10x.calc.process", "y10x.calc.check.transfer.input", "y10x.nowhere.transfer.input"]:
        with pytest.raises(SimulationError) as info:
            run(b.model, extract_events(b.model), parse_scenario(f"at 1 inject {port} 1"))
        assert info.value.code == "PORT_NOT_BOUNDARY"


@pytest.mark.parametrize("text", [
    "at x inject p 1",
    "at -1 inject p 1",
    "at 2 inject p 1\nat 2 inject p 2",
    "option signal_mode maybe",
    "option max_ticks 0",
    "launch now",
])
def test_bad_scenario(text):
    with pytest.raises(SimulationError) as info:
        parse_scenario(text)
    assert info.value.code == "BAD_SCENARIO"


def test_scenario_options():
    sc = parse_scenario("option signal_mode on\noption max_ticks 7\nvar d = 3\nat 2 inject p red")
    assert (sc.signal_mode, sc.max_ticks, sc.init_vars) == (True, 7, {"d": 3})
    assert sc.injections == [(2, "p", "red")]


def test_max_ticks_cuts_off_later_injections(case):
    b = case("bridge_m0")
    sc = parse_scenario("var d = 2\noption max_ticks 1\nat 1 inject bridge.mainland.gate.transfer.input 1\n"
                        "at 2 inject bridge.mainland.gate.transfer.input 2")
    res = run(b.model, extract_events(b.model), sc)
    assert res.variables["n"] == 1
