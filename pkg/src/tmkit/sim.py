"""Deterministic token-flow execution of TM models.

Work is held in one FIFO activation queue. Each :func:`step` pops a single
activation: an injection, a token move along a flow arc, a trigger firing
(or, in signal mode, a signal send/delivery), a guard evaluation or a
variable update. Time is an integer tick shared by every micro-step of that
tick; the tick advances when the queue drains, which is also where variable
snapshots are taken for the monitors.
"""

import logging
from collections import deque
from dataclasses import dataclass, field

from .core import StageKind, resolve_path, require_valid
from .dynamics import stage_event_map
from .errors import EvalError, ExprTypeError, ModelError, SimulationError, TmkitError
from .expr import check_bool, evaluate, parse_expr

log = logging.getLogger(__name__)

REJECTED = "REJECTED"
SIGNAL = "SIGNAL"
PSEUDO_EVENTS = (REJECTED, SIGNAL)
LIGHT_SETS = {"COLOR": ("green", "red")}


@dataclass
class Token:
    id: int
    payload: object
    location: str
    origin: str | None = None
    signal: bool = False


@dataclass
class Scenario:
    injections: list = field(default_factory=list)  # (tick, port path, payload)
    init_vars: dict = field(default_factory=dict)
    signal_mode: bool = False
    max_ticks: int = 1000


@dataclass(frozen=True)
class TraceRecord:
    time: int
    event: str
    detail: str

    def format(self):
        return f"t={self.time} event={self.event} detail={self.detail}"


@dataclass
class Trace:
    records: list = field(default_factory=list)
    # (tick, variable valuation) at each quiescent point
    snapshots: list = field(default_factory=list)

    def events(self):
        return [r.event for r in self.records]

    def format(self):
        return "".join(r.format() + "\n" for r in self.records)

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class Monitor:
    name: str
    predicate: object
    kind: str = "safety"


@dataclass(frozen=True)
class LightState:
    light: str
    color: str


@dataclass
class MonitorResult:
    name: str
    ok: bool
    tick: int | None = None
    snapshot: dict | None = None
    error: str | None = None

    def format(self):
        if self.ok:
            return f"monitor {self.name} pass"
        snap = " ".join(f"{k}={v}" for k, v in sorted((self.snapshot or {}).items()))
        extra = f" error={self.error}" if self.error else ""
        return f"monitor {self.name} FAIL t={self.tick} {snap}{extra}".rstrip()


@dataclass
class MonitorReport:
    results: list

    @property
    def ok(self):
        return all(r.ok for r in self.results)


@dataclass
class SimResult:
    trace: Trace
    report: MonitorReport
    variables: dict
    tokens: dict  # live tokens at the end
    dropped: list  # rejected tokens dropped at scenario end


# -- text formats -------------------------------------------------------------

def _scalar(text):
    try:
        return int(text)
    except ValueError:
        return text


def parse_scenario(text, origin="<memory>"):
    """Parse ``at <t> inject <port> <payload>`` / ``var`` / ``option`` lines."""
    sc = Scenario()
    last = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "at" and len(parts) == 5 and parts[2] == "inject":
                tick = int(parts[1])
                port = parts[3]
                if tick < 0:
                    raise ValueError("negative tick")
                if port in last and tick <= last[port]:
                    raise ValueError(f"injection times for {port} must strictly increase")
                last[port] = tick
                sc.injections.append((tick, port, _scalar(parts[4])))
            elif parts[0] == "var" and len(parts) == 4 and parts[2] == "=":
                sc.init_vars[parts[1]] = _scalar(parts[3])
            elif parts[0] == "option" and len(parts) == 3 and parts[1] == "signal_mode":
                if parts[2] not in ("on", "off"):
                    raise ValueError("signal_mode takes on|off")
                sc.signal_mode = parts[2] == "on"
            elif parts[0] == "option" and len(parts) == 3 and parts[1] == "max_ticks":
                sc.max_ticks = int(parts[2])
                if sc.max_ticks < 1:
                    raise ValueError("max_ticks must be >= 1")
            else:
                raise ValueError(f"cannot read scenario line {line!r}")
        except ValueError as exc:
            raise SimulationError(f"{origin}:{lineno}: {exc}", "BAD_SCENARIO") from None
    sc.injections.sort(key=lambda inj: inj[0])
    return sc


def parse_monitors(text, origin="<memory>"):
    """``name: predicate`` per line."""
    monitors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, pred = line.partition(":")
        if not sep or not name.strip():
            raise SimulationError(f"{origin}:{lineno}: expected 'name: predicate'", "BAD_MONITOR")
        monitors.append(Monitor(name.strip(), parse_expr(pred, origin)))
    return monitors


def light_states(variables, lights):
    return [LightState(name, variables[name]) for name in sorted(lights)]


# -- state and micro-steps ------------------------------------------------------

class SimState:
    def __init__(self, model, events, scenario, max_steps_per_tick=100_000):
        require_valid(model)
        self.model = model
        self.owner = stage_event_map(events)
        self.signal_mode = scenario.signal_mode
        self.max_ticks = scenario.max_ticks
        self.max_steps_per_tick = max_steps_per_tick
        self.vars = {}
        for name, default in model.variables.items():
            value = scenario.init_vars.get(name, default)
            if value is None:
                raise SimulationError(f"variable {name!r} is not initialized", "UNINITIALIZED_VARIABLE")
            self.vars[name] = value
        for name in scenario.init_vars:
            if name not in model.variables:
                raise SimulationError(f"scenario sets undeclared variable {name!r}", "UNKNOWN_VARIABLE")
        ports = set(model.boundary_ports())
        self.pending = []
        for seq, (tick, port, payload) in enumerate(scenario.injections):
            try:
                sid = resolve_path(model, port)
            except ModelError as exc:
                raise SimulationError(f"injection port {port!r}: {exc.message}", "PORT_NOT_BOUNDARY") from None
            if sid not in ports:
                raise SimulationError(f"{port!r} is not a boundary transfer-in port", "PORT_NOT_BOUNDARY")
            self.pending.append((tick, sid, seq, payload))
        self.pending.sort()
        self.tokens = {}
        self.dropped = []
        self.held = {}
        self.next_token = 1
        self.queue = deque()
        self.tick = 0
        self.steps_this_tick = 0
        self.trace = Trace()

    # -- helpers --

    def new_token(self, payload, location, origin=None, signal=False):
        tok = Token(self.next_token, payload, location, origin, signal)
        self.next_token += 1
        self.tokens[tok.id] = tok
        return tok

    def record(self, sid, detail, event=None):
        event = event or self.owner.get(sid)
        if event is None:
            return None
        rec = TraceRecord(self.tick, event, detail)
        self.trace.records.append(rec)
        return rec

    def env(self, tok):
        env = dict(self.vars)
        if tok is not None:
            env["payload"] = tok.payload
        return env

    def fmt(self, name, value):
        return str(value)

    def begin_tick(self, tick):
        self.tick = tick
        self.steps_this_tick = 0
        due = [p for p in self.pending if p[0] == tick]
        self.pending = [p for p in self.pending if p[0] != tick]
        for _, sid, _, payload in sorted(due, key=lambda p: (p[1], p[2])):
            tok = self.new_token(payload, sid, origin=sid)
            self.queue.append(("inject", tok.id))

    def quiesce(self):
        self.trace.snapshots.append((self.tick, dict(self.vars)))

    # -- stage semantics --

    def execute(self, sid, tok):
        st = self.model.stages[sid]
        if tok is None and st.kind is StageKind.CREATE:
            name = self.model.thimacs[st.owner].name
            tok = self.new_token(self.vars.get(name), sid)
            detail = f"created token={tok.id} payload={tok.payload} at={sid}"
        elif tok is None:
            detail = f"triggered at={sid}"
        else:
            tok.location = sid
            detail = f"token={tok.id} payload={tok.payload} at={sid}"
        tid = tok.id if tok is not None else None
        if st.updates:
            self.queue.append(("update", sid, tid))
            return
        self.record(sid, detail)
        if st.guard is not None:
            self.queue.append(("guard", sid, tid))
        else:
            self.proceed(sid, tok)

    def proceed(self, sid, tok):
        st = self.model.stages[sid]
        if tok is not None:
            flows = sorted(self.model.outgoing_flows(sid), key=lambda f: f.dst)
            if st.consuming:
                del self.tokens[tok.id]
            elif flows:
                for i, arc in enumerate(flows):
                    carrier = tok if i == 0 else self.new_token(tok.payload, sid, tok.origin)
                    self.queue.append(("move", carrier.id, arc.dst))
            elif st.kind is StageKind.TRANSFER_OUT:
                del self.tokens[tok.id]  # leaves the modeled system
        for arc in sorted(self.model.outgoing_triggers(sid), key=lambda t: t.dst):
            self.queue.append(("fire", sid, arc.dst))

    def fire(self, src, dst):
        if self.signal_mode:
            sig = self.new_token(f"{src}->{dst}", "infosys", signal=True)
            self.trace.records.append(
                TraceRecord(self.tick, SIGNAL, f"token={sig.id} from={src} to={dst}")
            )
            self.queue.append(("deliver", sig.id, dst))
        else:
            self.execute(dst, None)

    def run_guard(self, sid, tok):
        st = self.model.stages[sid]
        try:
            ok = check_bool(st.guard.predicate, self.env(tok), LIGHT_SETS)
        except (EvalError, ExprTypeError) as exc:
            raise SimulationError(f"guard fault at {sid} (t={self.tick}, vars={self.vars}): {exc.message}", "GUARD_FAULT") from None
        if ok:
            if st.guard.on_true:
                self.queue.append(("fire", sid, st.guard.on_true))
            self.proceed(sid, tok)
            return
        if tok is not None:
            held = tok.origin or sid
            self.trace.records.append(TraceRecord(
                self.tick, REJECTED, f"token={tok.id} payload={tok.payload} at={sid} held={held}"
            ))
            tok.location = held
            self.held[tok.id] = tok
        if st.guard.on_false:
            self.queue.append(("fire", sid, st.guard.on_false))

    def run_update(self, sid, tok):
        st = self.model.stages[sid]
        env = self.env(tok)
        try:
            new = [(var, evaluate(e, env, LIGHT_SETS)) for var, e in st.updates]
        except (EvalError, ExprTypeError) as exc:
            raise SimulationError(f"update fault at {sid} (t={self.tick}, vars={self.vars}): {exc.message}", "UPDATE_FAULT") from None
        changes = []
        for var, value in new:
            changes.append(f"{var} {self.vars[var]}->{value}")
        for var, value in new:
            self.vars[var] = value
        self.record(sid, "; ".join(changes))
        if st.guard is not None:
            self.queue.append(("guard", sid, tok.id if tok is not None else None))
        else:
            self.proceed(sid, tok)


def step(state):
    """Execute one micro-step; returns the TraceRecords it emitted."""
    if not state.queue:
        future = [p[0] for p in state.pending if p[0] <= state.max_ticks]
        if not future:
            state.pending = []
            raise SimulationError("nothing to do", "QUIESCENT")
        state.quiesce()
        state.begin_tick(min(future))
    state.steps_this_tick += 1
    if state.steps_this_tick > state.max_steps_per_tick:
        raise SimulationError(f"tick {state.tick} exceeded {state.max_steps_per_tick} micro-steps", "STEP_LIMIT")
    before = len(state.trace.records)
    act = state.queue.popleft()
    tag = act[0]
    if tag == "inject":
        tok = state.tokens[act[1]]
        state.execute(tok.location, tok)
    elif tag == "move":
        state.execute(act[2], state.tokens[act[1]])
    elif tag == "fire":
        state.fire(act[1], act[2])
    elif tag == "deliver":
        del state.tokens[act[1]]
        state.execute(act[2], None)
    elif tag == "guard":
        state.run_guard(act[1], state.tokens.get(act[2]) if act[2] is not None else None)
    elif tag == "update":
        state.run_update(act[1], state.tokens.get(act[2]) if act[2] is not None else None)
    else:  # pragma: no cover
        raise SimulationError(f"unknown activation {tag!r}")
    return state.trace.records[before:]


def check_monitors(trace, monitors):
    results = []
    for mon in monitors:
        result = MonitorResult(mon.name, True)
        for tick, snap in trace.snapshots:
            try:
                ok = check_bool(mon.predicate, snap, LIGHT_SETS)
                error = None
            except TmkitError as exc:
                ok, error = False, exc.message
            if not ok:
                result = MonitorResult(mon.name, False, tick, dict(snap), error)
                break
        results.append(result)
    return MonitorReport(results)


def run(model, events, scenario, monitors=()):
    state = SimState(model, events, scenario)
    state.begin_tick(0)
    while True:
        try:
            step(state)
        except SimulationError as exc:
            if exc.code != "QUIESCENT":
                raise
            break
    state.quiesce()
    for tid in sorted(state.held):
        if tid in state.tokens:
            state.dropped.append(state.tokens.pop(tid))
    report = check_monitors(state.trace, monitors)
    return SimResult(state.trace, report, dict(state.vars), dict(state.tokens), state.dropped)
