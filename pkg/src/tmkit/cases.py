"""Bundled case models and TM-to-Event-B-lite conformance.

A case directory holds any of ``model.tm``, ``machine.ebl``,
``scenario-<name>.txt``, ``monitors.txt`` and ``conformance.map``.
``TMKIT_CASES`` points at an alternative directory of cases.
"""

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import CaseError, MachineError
from .eventb import fire, initial_state, load_machine
from .expr import check_bool, free_names
from .lang import parse_file
from .sim import PSEUDO_EVENTS, parse_monitors, parse_scenario

IGNORE = "IGNORE"


def cases_root():
    env = os.environ.get("TMKIT_CASES")
    if env:
        return Path(env)
    return Path(str(resources.files("tmkit") / "cases"))


def list_cases():
    root = cases_root()
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir() if p.is_dir() and not p.name.startswith(("_", ".")))


@dataclass
class ConformanceMap:
    mapping: dict  # TM event id -> Event-B event name or IGNORE

    def target(self, event):
        try:
            return self.mapping[event]
        except KeyError:
            raise CaseError(f"TM event {event} has no conformance mapping", "UNMAPPED_EVENT") from None


def parse_conformance_map(text, origin="<memory>"):
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        src, arrow, dst = (part.strip() for part in line.partition("->"))
        if not arrow or not src or not dst or " " in src or " " in dst:
            raise CaseError(f"{origin}:{lineno}: expected 'EVENT -> TARGET'", "BAD_MAP")
        if src in mapping:
            raise CaseError(f"{origin}:{lineno}: {src} mapped twice", "BAD_MAP")
        mapping[src] = IGNORE if dst.upper() == IGNORE else dst
    return ConformanceMap(mapping)


@dataclass
class CaseBundle:
    name: str
    path: Path
    model: object = None
    machine: object = None
    abstract: object = None  # machine refined by ``machine``, if it is bundled
    scenarios: dict = field(default_factory=dict)  # name -> Scenario
    monitors: list = field(default_factory=list)
    conformance: ConformanceMap | None = None


def _find_machine(name):
    for case in list_cases():
        path = cases_root() / case / "machine.ebl"
        if path.is_file():
            m = load_machine(path)
            if m.name == name:
                return m
    return None


def load_case(name):
    path = cases_root() / name
    if not path.is_dir():
        raise CaseError(f"unknown case {name!r}; known: {', '.join(list_cases())}", "UNKNOWN_CASE")
    bundle = CaseBundle(name, path)
    if (path / "model.tm").is_file():
        bundle.model = parse_file(path / "model.tm")
    if (path / "machine.ebl").is_file():
        bundle.machine = load_machine(path / "machine.ebl")
        if bundle.machine.refines:
            bundle.abstract = _find_machine(bundle.machine.refines)
    for sc in sorted(path.glob("scenario-*.txt")):
        key = sc.stem[len("scenario-"):]
        bundle.scenarios[key] = parse_scenario(sc.read_text(encoding="utf-8"), str(sc))
    if (path / "monitors.txt").is_file():
        mon = path / "monitors.txt"
        bundle.monitors = parse_monitors(mon.read_text(encoding="utf-8"), str(mon))
    if (path / "conformance.map").is_file():
        cm = path / "conformance.map"
        bundle.conformance = parse_conformance_map(cm.read_text(encoding="utf-8"), str(cm))
    _cross_check(bundle)
    return bundle


def _cross_check(bundle):
    where = bundle.path
    if bundle.model is not None:
        from .core import require_valid

        require_valid(bundle.model)
        declared = set(bundle.model.variables)
        for mon in bundle.monitors:
            extra = free_names(mon.predicate) - declared - {"green", "red"}
            if extra:
                raise CaseError(f"{where}: monitor {mon.name} uses undeclared {sorted(extra)}", "BAD_MONITOR")
    if bundle.conformance is not None:
        if bundle.model is None or bundle.machine is None:
            raise CaseError(f"{where}: a conformance map needs both model.tm and machine.ebl", "BAD_MAP")
        events = {e.id for e in bundle.model.declared_events}
        missing = sorted(events - set(bundle.conformance.mapping))
        unknown = sorted(set(bundle.conformance.mapping) - events)
        if missing or unknown:
            raise CaseError(f"{where}: map misses {missing}, names unknown {unknown}", "BAD_MAP")
        targets = {e.name for e in bundle.machine.events}
        for tm, eb in bundle.conformance.mapping.items():
            if eb != IGNORE and eb not in targets:
                raise CaseError(f"{where}: {tm} maps to unknown event {eb}", "BAD_MAP")


# -- conformance ------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectedStep:
    time: int
    tm_event: str
    eb_event: str


def project_trace(trace, cmap):
    """Map a simulation trace onto Event-B-lite event names.

    Consecutive records of one TM event within a tick form one occurrence;
    pseudo-events in between do not split it. Pseudo-events and IGNOREd
    events are dropped.
    """
    steps = []
    prev = None
    for rec in trace.records:
        if rec.event in PSEUDO_EVENTS:
            continue
        target = cmap.target(rec.event)
        same = prev is not None and prev.event == rec.event and prev.time == rec.time
        prev = rec
        if target == IGNORE or same:
            continue
        steps.append(ProjectedStep(rec.time, rec.event, target))
    return steps


@dataclass
class ConformanceReport:
    ok: bool
    steps: list
    code: str = "PASS"
    failed_at: int | None = None  # index into steps
    state: object = None
    message: str = ""

    def format(self):
        if self.ok:
            return f"conformance=pass steps={len(self.steps)}"
        if self.failed_at is None:
            return f"conformance=FAIL({self.code}) step=0 state={self.state.format()}"
        step = self.steps[self.failed_at]
        return (
            f"conformance=FAIL({self.code}) step={self.failed_at + 1} t={step.time} "
            f"tm={step.tm_event} eb={step.eb_event} state={self.state.format()}"
        )


def conformance_check(trace, cmap, machine, constants):
    """Replay the projected trace through ``machine``; every step must be enabled
    and every visited state must satisfy the invariants."""
    constants = {k: constants[k] for k in machine.context.constants if k in constants}
    missing = [k for k in machine.context.constants if k not in constants]
    if missing:
        raise MachineError(f"constants {missing} are not TM variables of the scenario", "UNBOUND_CONSTANT")
    known = {e.name for e in machine.events}
    for tm, eb in cmap.mapping.items():
        if eb != IGNORE and eb not in known:
            raise CaseError(f"{tm} maps to unknown event {eb}", "UNKNOWN_EVENT")
    steps = project_trace(trace, cmap)
    state = initial_state(machine, constants)

    def broken(s):
        env = dict(constants)
        env.update(s.valuation)
        return next((label for label, inv in machine.invariants if not check_bool(inv, env, machine.sets)), None)

    bad = broken(state)
    if bad:
        return ConformanceReport(False, steps, "INVARIANT_BROKEN", None, state, f"invariant {bad} fails initially")
    for i, st in enumerate(steps):
        try:
            nxt = fire(machine, state, st.eb_event, constants)
        except MachineError as exc:
            return ConformanceReport(False, steps, "REPLAY_FAILED", i, state, exc.message)
        bad = broken(nxt)
        if bad:
            return ConformanceReport(False, steps, "INVARIANT_BROKEN", i, state, f"invariant {bad} fails after {st.eb_event}")
        state = nxt
    return ConformanceReport(True, steps, state=state)
