"""Event-B-lite: guarded events with simultaneous assignment.

Machines are loaded from a sectioned text format (``.ebl``)::

    CONTEXT bridge_ctx
    SETS
      COLOR = {green, red}
    CONSTANTS
      d
    AXIOMS
      axm1: d in NAT
    MACHINE bridge_m1
    REFINES bridge_m0
    SEES bridge_ctx
    VARIABLES
      a
    INVARIANTS
      inv1: a in NAT
    GLUING
      n = a + b + c
    INIT
      a := 0
    EVENT ML_in
    REFINES ML_in
    WHEN
      grd1: a + b + c < d
    THEN
      a := a + 1
    END

Exploration is a plain breadth-first search from the initial state with
constants bound to concrete values.
"""

import re
from collections import deque
from dataclasses import dataclass, field

from .errors import EvalError, ExprTypeError, MachineError, ParseError
from .expr import BOOL, INT, check_bool, evaluate, infer_type, parse_expr

SKIP = "SKIP"


@dataclass
class EBContext:
    name: str
    sets: dict = field(default_factory=dict)  # set name -> tuple of elements
    constants: dict = field(default_factory=dict)  # name -> type
    axioms: list = field(default_factory=list)  # (label, expr)


@dataclass
class EBEvent:
    name: str
    guards: list = field(default_factory=list)  # (label, expr)
    actions: list = field(default_factory=list)  # (variable, expr)
    refines: str | None = None  # abstract event name, SKIP, or None for "same name"


@dataclass
class EBMachine:
    name: str
    context: EBContext
    variables: dict = field(default_factory=dict)  # name -> type
    invariants: list = field(default_factory=list)
    init: list = field(default_factory=list)
    events: list = field(default_factory=list)
    refines: str | None = None
    gluing: object = None

    def event(self, name):
        for ev in self.events:
            if ev.name == name:
                return ev
        raise MachineError(f"unknown event {name!r} in {self.name}", "UNKNOWN_EVENT")

    @property
    def sets(self):
        return self.context.sets


@dataclass(frozen=True)
class EBState:
    values: tuple  # ((name, value), ...) in declaration order

    @classmethod
    def of(cls, machine, valuation):
        missing = [v for v in machine.variables if v not in valuation]
        if missing:
            raise MachineError(f"state misses variables {missing}", "PARTIAL_STATE")
        return cls(tuple((v, valuation[v]) for v in machine.variables))

    @property
    def valuation(self):
        return dict(self.values)

    def __getitem__(self, name):
        return self.valuation[name]

    def format(self):
        return ",".join(f"{k}={v}" for k, v in self.values)


@dataclass
class StateGraph:
    machine: EBMachine
    constants: dict
    states: list  # EBState in BFS order; index 0 is the initial state
    edges: list  # (src index, event name, dst index)
    parent: dict  # index -> (parent index, event name)
    truncated: bool = False
    expanded: int = 0  # states whose successors were computed

    def path_to(self, idx):
        path = []
        while idx in self.parent:
            idx, ev = self.parent[idx]
            path.append(ev)
        return list(reversed(path))

    def out_edges(self, idx):
        return [e for e in self.edges if e[0] == idx]


@dataclass
class InvariantResult:
    name: str
    ok: bool
    state: EBState | None = None
    path: list = field(default_factory=list)


@dataclass
class InvariantReport:
    results: list

    @property
    def ok(self):
        return all(r.ok for r in self.results)

    def first_failure(self):
        return next((r for r in self.results if not r.ok), None)


@dataclass
class DeadlockReport:
    states: list  # (EBState, path)

    @property
    def ok(self):
        return not self.states


@dataclass
class RefinementSpec:
    abstract: EBMachine
    concrete: EBMachine
    gluing: object
    event_map: dict  # concrete event -> abstract event or SKIP


@dataclass
class RefinementReport:
    ok: bool
    code: str = "PASS"
    message: str = ""
    concrete_state: EBState | None = None
    event: str | None = None
    concrete_next: EBState | None = None
    path: list = field(default_factory=list)
    checked_transitions: int = 0


# -- parsing -------------------------------------------------------------------

_SECTIONS = {
    "CONTEXT", "SETS", "CONSTANTS", "AXIOMS", "MACHINE", "REFINES", "SEES", "VARIABLES",
    "INVARIANTS", "GLUING", "INIT", "INITIALISATION", "INITIALIZATION", "EVENT", "STATUS",
    "WHEN", "THEN", "BEGIN", "END", "EVENTS", "ANY", "WHERE",
}
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_LABELLED = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*:(?!=)\s*(.*)$")


class _EblParser:
    def __init__(self, text, origin):
        self.text = text
        self.origin = origin
        self.ctx = EBContext("anonymous")
        self.machine = None
        self.event = None
        self.section = None
        self.lineno = 0
        self.counter = 0

    def fail(self, message, col=1, expected=()):
        raise ParseError(message, self.lineno, col, expected, self.origin)

    def expr(self, text, col):
        try:
            return parse_expr(text, self.origin)
        except ParseError as exc:
            raise ParseError(exc.message, self.lineno, col + exc.column - 1, exc.expected, self.origin) from None

    def run(self):
        for self.lineno, raw in enumerate(self.text.splitlines(), start=1):
            body = raw.split("#", 1)[0].split("//", 1)[0]
            stripped = body.strip()
            if not stripped:
                continue
            col = len(body) - len(body.lstrip()) + 1
            head, _, rest = stripped.partition(" ")
            rest = rest.strip()
            if head.upper() in _SECTIONS and head.isupper():
                self.header(head.upper(), rest, col)
            else:
                self.clause(stripped, col)
        if self.machine is None:
            self.lineno = max(1, self.lineno)
            self.fail("no MACHINE section", 1, ["MACHINE"])
        return self.machine

    def header(self, word, rest, col):
        if word == "CONTEXT":
            if not _IDENT.match(rest):
                self.fail("CONTEXT needs a name", col, ["context name"])
            self.ctx.name = rest
            self.section = None
        elif word == "MACHINE":
            if not _IDENT.match(rest):
                self.fail("MACHINE needs a name", col, ["machine name"])
            self.machine = EBMachine(rest, self.ctx)
            self.section = None
        elif word == "SEES":
            self.need_machine(col)
            if rest != self.ctx.name:
                self.fail(f"machine sees unknown context {rest!r}", col, [repr(self.ctx.name)])
        elif word == "REFINES":
            if not _IDENT.match(rest):
                self.fail("REFINES needs a name", col, ["name"])
            if self.event is not None:
                self.event.refines = SKIP if rest.lower() == "skip" else rest
            else:
                self.need_machine(col)
                self.machine.refines = rest
        elif word == "EVENT":
            self.need_machine(col)
            if not _IDENT.match(rest):
                self.fail("EVENT needs a name", col, ["event name"])
            if any(e.name == rest for e in self.machine.events):
                self.fail(f"event {rest!r} declared twice", col)
            self.event = EBEvent(rest)
            self.machine.events.append(self.event)
            self.section = None
        elif word == "STATUS":
            self.section = "STATUS"
            if rest:
                self.check_status(rest, col)
        elif word in ("EVENTS", "END"):
            self.event = None if word == "END" else self.event
            self.section = None
        elif word in ("ANY", "WHERE"):
            self.fail("event parameters are not supported", col)
        else:
            if word in ("INITIALISATION", "INITIALIZATION"):
                word = "INIT"
            if word in ("BEGIN",):
                word = "THEN"
            if word in ("VARIABLES", "INVARIANTS", "GLUING", "INIT"):
                self.need_machine(col)
                self.event = None
            if word in ("WHEN", "THEN") and self.event is None:
                self.fail(f"{word} outside an EVENT", col, ["EVENT"])
            self.section = word
            if rest:
                self.clause(rest, col + len(word) + 1)

    def check_status(self, word, col):
        if word not in ("ordinary", "convergent", "anticipated"):
            self.fail(f"unknown status {word!r}", col, ["'ordinary'"])

    def need_machine(self, col):
        if self.machine is None:
            self.fail("section requires a preceding MACHINE", col, ["MACHINE"])

    def labelled(self, text, col, prefix):
        m = _LABELLED.match(text)
        if m:
            return m.group(1), self.expr(m.group(2), col + m.start(2))
        self.counter += 1
        return f"{prefix}{self.counter}", self.expr(text, col)

    def clause(self, text, col):
        sec = self.section
        if sec is None:
            self.fail(f"clause outside any section: {text!r}", col)
        if sec == "SETS":
            name, eq, elems = text.partition("=")
            name = name.strip()
            elems = elems.strip()
            if not eq or not _IDENT.match(name) or not (elems.startswith("{") and elems.endswith("}")):
                self.fail("expected NAME = {a, b, ...}", col, ["set declaration"])
            items = [e.strip() for e in elems[1:-1].split(",") if e.strip()]
            if not items or len(set(items)) != len(items) or not all(_IDENT.match(e) for e in items):
                self.fail(f"set {name} needs distinct element names", col)
            self.ctx.sets[name] = tuple(items)
        elif sec == "CONSTANTS":
            for name, typ in self.typed_names(text, col):
                self.ctx.constants[name] = typ or INT
        elif sec == "AXIOMS":
            self.ctx.axioms.append(self.labelled(text, col, "axm"))
        elif sec == "VARIABLES":
            for name, typ in self.typed_names(text, col):
                if name in self.machine.variables:
                    self.fail(f"variable {name!r} declared twice", col)
                self.machine.variables[name] = typ
        elif sec == "INVARIANTS":
            self.machine.invariants.append(self.labelled(text, col, "inv"))
        elif sec == "GLUING":
            if self.machine.gluing is not None:
                self.fail("GLUING takes a single predicate", col)
            self.machine.gluing = self.expr(text, col)
        elif sec == "INIT":
            self.machine.init.append(self.assignment(text, col))
        elif sec == "WHEN":
            self.event.guards.append(self.labelled(text, col, "grd"))
        elif sec == "THEN":
            self.event.actions.append(self.assignment(text, col))
        elif sec == "STATUS":
            self.check_status(text, col)

    def typed_names(self, text, col):
        out = []
        for chunk in text.split(","):
            name, colon, typ = chunk.partition(":")
            name, typ = name.strip(), typ.strip()
            if not _IDENT.match(name):
                self.fail(f"bad name {name!r}", col, ["identifier"])
            out.append((name, typ or None))
        return out

    def assignment(self, text, col):
        m = _LABELLED.match(text)
        if m and ":=" not in m.group(1) and m.group(2).find(":=") > 0:
            text = m.group(2)
            col += m.start(2)
        lhs, sep, rhs = text.partition(":=")
        lhs = lhs.strip()
        if not sep or not _IDENT.match(lhs):
            if ":∈" in text or ":|" in text:
                self.fail("nondeterministic assignment is not supported", col)
            self.fail("expected 'variable := expression'", col, ["':='"])
        return lhs, self.expr(rhs, col + text.index(":=") + 2)


def _type_name(typ):
    return {"INT": INT, "NAT": INT, "NAT1": INT, "ℕ": INT, "BOOL": BOOL, "int": INT, "bool": BOOL}.get(typ, typ)


def _finish(machine):
    """Resolve declared/inferred types and type-check every expression."""
    ctx = machine.context
    for name, typ in list(ctx.constants.items()):
        ctx.constants[name] = _type_name(typ)
    element_owner = {}
    for set_name, elems in ctx.sets.items():
        for e in elems:
            if e in element_owner:
                raise MachineError(f"element {e!r} belongs to {element_owner[e]} and {set_name}", "PARTITION")
            element_owner[e] = set_name
    clash = (set(machine.variables) | set(ctx.constants)) & set(element_owner)
    if clash:
        raise MachineError(f"names used both as elements and identifiers: {sorted(clash)}", "PARTITION")
    types = dict(ctx.constants)
    init_map = {}
    for var, e in machine.init:
        if var not in machine.variables:
            raise MachineError(f"INIT assigns undeclared variable {var!r}", "UNKNOWN_VARIABLE")
        if var in init_map:
            raise MachineError(f"INIT assigns {var!r} twice", "DUPLICATE_ASSIGNMENT")
        init_map[var] = e
    for var in machine.variables:
        if var not in init_map:
            raise MachineError(f"variable {var!r} has no INIT value", "UNINITIALIZED_VARIABLE")
    for var, declared in machine.variables.items():
        inferred = infer_type(init_map[var], types, ctx.sets)
        declared = _type_name(declared) if declared else inferred
        if declared != inferred:
            raise ExprTypeError(f"INIT of {var} has type {inferred}, declared {declared}")
        machine.variables[var] = declared
    types.update(machine.variables)
    for label, e in ctx.axioms:
        _expect_bool(e, dict(ctx.constants), ctx.sets, f"axiom {label}")
    for label, e in machine.invariants:
        _expect_bool(e, types, ctx.sets, f"invariant {label}")
    for ev in machine.events:
        for label, e in ev.guards:
            _expect_bool(e, types, ctx.sets, f"guard {ev.name}.{label}")
        seen = set()
        for var, e in ev.actions:
            if var not in machine.variables:
                raise MachineError(f"event {ev.name} assigns undeclared {var!r}", "UNKNOWN_VARIABLE")
            if var in seen:
                raise MachineError(f"event {ev.name} assigns {var!r} twice", "DUPLICATE_ASSIGNMENT")
            seen.add(var)
            t = infer_type(e, types, ctx.sets)
            if t != machine.variables[var]:
                raise ExprTypeError(f"event {ev.name}: {var} := expression of type {t}")
    return machine


def _expect_bool(e, types, sets, what):
    t = infer_type(e, types, sets)
    if t != BOOL:
        raise ExprTypeError(f"{what} is not a predicate (type {t})")


def parse_machine(text, origin="<memory>"):
    return _finish(_EblParser(text, origin).run())


def load_machine(path):
    with open(path, encoding="utf-8") as fh:
        return parse_machine(fh.read(), str(path))


# -- semantics ------------------------------------------------------------------

def _env(m, s, constants):
    env = dict(constants or {})
    env.update(s.valuation)
    return env


def _bound_constants(m, constants):
    constants = dict(constants or {})
    missing = [c for c in m.context.constants if c not in constants]
    if missing:
        raise MachineError(f"unbound constants {missing}", "UNBOUND_CONSTANT")
    return constants


def initial_state(m, constants=None):
    env = dict(constants or {})
    try:
        values = {var: evaluate(e, env, m.sets) for var, e in m.init}
    except EvalError as exc:
        raise MachineError(f"INIT fault: {exc.message}", "ACTION_FAULT") from None
    return EBState.of(m, values)


def is_enabled(m, s, ev, constants=None):
    env = _env(m, s, constants)
    for label, g in ev.guards:
        try:
            if not check_bool(g, env, m.sets):
                return False
        except EvalError as exc:
            raise MachineError(f"guard {ev.name}.{label} faulted in state {s.format()}: {exc.message}", "GUARD_FAULT") from None
    return True


def enabled(m, s, constants=None):
    return [ev.name for ev in m.events if is_enabled(m, s, ev, constants)]


def fire(m, s, ev_name, constants=None):
    ev = m.event(ev_name)
    if not is_enabled(m, s, ev, constants):
        raise MachineError(f"event {ev_name} is not enabled in {s.format()}", "NOT_ENABLED")
    return apply_actions(m, s, ev, constants)


def apply_actions(m, s, ev, constants=None):
    env = _env(m, s, constants)
    try:
        updates = {var: evaluate(e, env, m.sets) for var, e in ev.actions}
    except EvalError as exc:
        raise MachineError(f"action of {ev.name} faulted in state {s.format()}: {exc.message}", "ACTION_FAULT") from None
    values = s.valuation
    values.update(updates)
    return EBState.of(m, values)


def check_axioms(m, constants):
    for label, ax in m.context.axioms:
        if not check_bool(ax, dict(constants), m.sets):
            raise MachineError(f"axiom {label} fails for {constants}", "AXIOM_VIOLATED")


def explore(m, bounds=None, max_states=100_000):
    constants = _bound_constants(m, bounds)
    check_axioms(m, constants)
    init = initial_state(m, constants)
    states = [init]
    index = {init: 0}
    edges = []
    parent = {}
    queue = deque([0])
    truncated = False
    expanded = 0
    while queue:
        i = queue.popleft()
        s = states[i]
        for ev in m.events:
            if not is_enabled(m, s, ev, constants):
                continue
            nxt = apply_actions(m, s, ev, constants)
            j = index.get(nxt)
            if j is None:
                if len(states) >= max_states:
                    truncated = True
                    continue
                j = len(states)
                states.append(nxt)
                index[nxt] = j
                parent[j] = (i, ev.name)
                queue.append(j)
            edges.append((i, ev.name, j))
        expanded += 1
        if truncated:
            break
    return StateGraph(m, constants, states, edges, parent, truncated, expanded)


def check_invariants(g, m=None):
    m = m or g.machine
    results = []
    for label, inv in m.invariants:
        result = InvariantResult(label, True)
        for i, s in enumerate(g.states):
            if not check_bool(inv, _env(m, s, g.constants), m.sets):
                result = InvariantResult(label, False, s, g.path_to(i))
                break
        results.append(result)
    return InvariantReport(results)


def check_deadlock(g):
    if g.truncated:
        raise MachineError("state graph was truncated", "TRUNCATED_GRAPH")
    sources = {e[0] for e in g.edges}
    return DeadlockReport([(s, g.path_to(i)) for i, s in enumerate(g.states) if i not in sources])


def exploration_summary(g, inv_report, dead_report):
    """``states=.. transitions=.. invariants=.. deadlocks=..`` line."""
    fail = inv_report.first_failure()
    inv = "pass" if fail is None else f"FAIL({fail.name}@{fail.state.format()})"
    dead = "n/a" if dead_report is None else str(len(dead_report.states))
    line = f"states={len(g.states)} transitions={len(g.edges)} invariants={inv} deadlocks={dead}"
    if g.truncated:
        line += " TRUNCATED"
    return line


# -- refinement -------------------------------------------------------------------

def refinement_spec(abstract, concrete, gluing=None, event_map=None):
    """Build a RefinementSpec, defaulting from the concrete machine's clauses."""
    gluing = gluing if gluing is not None else concrete.gluing
    if gluing is None:
        raise MachineError(f"{concrete.name} declares no GLUING predicate", "NO_GLUING")
    if event_map is None:
        event_map = {}
        abstract_names = {e.name for e in abstract.events}
        for ev in concrete.events:
            if ev.refines is not None:
                event_map[ev.name] = ev.refines
            else:
                event_map[ev.name] = ev.name if ev.name in abstract_names else SKIP
    for cname in (e.name for e in concrete.events):
        target = event_map.get(cname)
        if target is None:
            raise MachineError(f"event map misses concrete event {cname}", "PARTIAL_EVENT_MAP")
        if target != SKIP:
            abstract.event(target)
    return RefinementSpec(abstract, concrete, gluing, dict(event_map))


def _glue_env(spec, s, S, constants):
    env = {f"abs_{k}": v for k, v in S.values}
    env.update({k: v for k, v in S.values})
    env.update(constants)
    env.update(s.valuation)
    return env


def check_refinement(spec, bounds=None, max_states=100_000):
    a, c = spec.abstract, spec.concrete
    cg = explore(c, bounds, max_states)
    ag = explore(a, {k: v for k, v in (bounds or {}).items() if k in a.context.constants}, max_states)
    if cg.truncated or ag.truncated:
        raise MachineError("state graph was truncated", "TRUNCATED_GRAPH")
    constants = dict(cg.constants)
    sets = dict(a.sets)
    sets.update(c.sets)
    abstract_states = ag.states

    glued_cache = {}

    def glued(s):
        if s not in glued_cache:
            glued_cache[s] = [S for S in abstract_states if check_bool(spec.gluing, _glue_env(spec, s, S, constants), sets)]
        return glued_cache[s]

    for i, s in enumerate(cg.states):
        if not glued(s):
            return RefinementReport(False, "UNGLUED_STATE", f"no abstract state glues to {s.format()}", s, path=cg.path_to(i))
    if ag.states[0] not in glued(cg.states[0]):
        return RefinementReport(False, "INIT", "concrete initial state does not glue to the abstract initial state", cg.states[0])
    checked = 0
    for i, ev, j in cg.edges:
        s, s2 = cg.states[i], cg.states[j]
        target = spec.event_map[ev]
        checked += 1
        ok = False
        for S in glued(s):
            if target == SKIP:
                ok = S in glued(s2)
            else:
                aev = a.event(target)
                ok = is_enabled(a, S, aev, ag.constants) and apply_actions(a, S, aev, ag.constants) in glued(s2)
            if ok:
                break
        if not ok:
            how = "stutter" if target == SKIP else f"abstract {target}"
            return RefinementReport(
                False, "SIMULATION", f"{ev} from {s.format()} to {s2.format()} is not matched by {how}",
                s, ev, s2, cg.path_to(i) + [ev], checked,
            )
    return RefinementReport(True, checked_transitions=checked)
