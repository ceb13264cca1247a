"""Static TM model: thimacs, stages, flow and trigger arcs, and well-formedness."""

from dataclasses import dataclass, field
from enum import Enum

from .errors import ModelError


class StageKind(str, Enum):
    CREATE = "create"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER_IN = "transfer_in"
    TRANSFER_OUT = "transfer_out"
    ARRIVE = "arrive"
    ACCEPT = "accept"
    RECEIVE = "receive"

    def __str__(self):
        return self.value


# Canonical declaration order; used for deterministic traversal.
KIND_ORDER = [
    StageKind.TRANSFER_IN, StageKind.RECEIVE, StageKind.ARRIVE, StageKind.ACCEPT,
    StageKind.CREATE, StageKind.PROCESS, StageKind.RELEASE, StageKind.TRANSFER_OUT,
]

_K = StageKind
LEGAL_PAIRS = frozenset({
    (_K.CREATE, _K.RELEASE),
    (_K.CREATE, _K.PROCESS),
    (_K.PROCESS, _K.RELEASE),
    (_K.RELEASE, _K.TRANSFER_OUT),
    (_K.TRANSFER_IN, _K.ARRIVE),
    (_K.ARRIVE, _K.ACCEPT),
    (_K.ARRIVE, _K.RELEASE),
    (_K.ACCEPT, _K.RELEASE),
    (_K.ACCEPT, _K.PROCESS),
    (_K.TRANSFER_IN, _K.RECEIVE),
    (_K.RECEIVE, _K.PROCESS),
    (_K.RECEIVE, _K.RELEASE),
    (_K.TRANSFER_OUT, _K.TRANSFER_IN),
})


def adjacency_legal(src, dst):
    return (StageKind(src), StageKind(dst)) in LEGAL_PAIRS


@dataclass(frozen=True)
class GuardSpec:
    predicate: object  # expr AST
    on_true: str | None = None
    on_false: str | None = None


@dataclass
class Stage:
    id: str
    kind: StageKind
    owner: str
    guard: GuardSpec | None = None
    # Simultaneous assignments executed when the stage runs (process stages).
    updates: tuple = ()
    consuming: bool = False


@dataclass
class Thimac:
    id: str
    name: str
    parent: str | None = None
    stages: dict = field(default_factory=dict)  # kind -> stage id
    children: list = field(default_factory=list)


@dataclass(frozen=True)
class FlowArc:
    src: str
    dst: str

    @property
    def arc_id(self):
        return f"flow:{self.src}->{self.dst}"


@dataclass(frozen=True)
class TriggerArc:
    src: str
    dst: str
    label: str | None = None

    @property
    def arc_id(self):
        return f"trigger:{self.src}->{self.dst}"

    @property
    def from_guard(self):
        return self.label in ("on_true", "on_false")


@dataclass(frozen=True)
class Finding:
    rule: str
    message: str
    ids: tuple = ()

    def __str__(self):
        return f"{self.rule}: {self.message}"


@dataclass
class ValidationReport:
    findings: list

    @property
    def ok(self):
        return not self.findings

    def __len__(self):
        return len(self.findings)


@dataclass
class Model:
    thimacs: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)
    flows: list = field(default_factory=list)
    triggers: list = field(default_factory=list)
    # name -> default int/symbol, or None when it must be supplied by a scenario
    variables: dict = field(default_factory=dict)
    lights: set = field(default_factory=set)
    declared_events: list = field(default_factory=list)

    # -- construction helpers -------------------------------------------

    def add_thimac(self, name, parent=None):
        tid = name if parent is None else f"{parent}.{name}"
        if tid in self.thimacs:
            return self.thimacs[tid]
        th = Thimac(tid, name, parent)
        self.thimacs[tid] = th
        if parent is not None:
            self.thimacs[parent].children.append(tid)
        return th

    def add_stage(self, thimac_id, kind):
        kind = StageKind(kind)
        th = self.thimacs[thimac_id]
        if kind in th.stages:
            return self.stages[th.stages[kind]]
        sid = f"{thimac_id}.{kind.value}"
        st = Stage(sid, kind, thimac_id)
        self.stages[sid] = st
        th.stages[kind] = sid
        return st

    def add_flow(self, src, dst):
        arc = FlowArc(src, dst)
        if arc not in self.flows:
            self.flows.append(arc)
        return arc

    def add_trigger(self, src, dst, label=None):
        arc = TriggerArc(src, dst, label)
        if arc not in self.triggers:
            self.triggers.append(arc)
        return arc

    # -- queries ----------------------------------------------------------

    def roots(self):
        return sorted(t.id for t in self.thimacs.values() if t.parent is None)

    def stage_label(self, sid):
        st = self.stages[sid]
        return f"{self.thimacs[st.owner].name}.{st.kind.value}"

    def outgoing_flows(self, sid):
        return [f for f in self.flows if f.src == sid]

    def incoming_flows(self, sid):
        return [f for f in self.flows if f.dst == sid]

    def outgoing_triggers(self, sid):
        return [t for t in self.triggers if t.src == sid and not t.from_guard]

    def boundary_ports(self):
        targets = {f.dst for f in self.flows}
        return sorted(
            s.id for s in self.stages.values()
            if s.kind is StageKind.TRANSFER_IN and s.id not in targets
        )

    def ordered_stage_ids(self):
        """Stages in depth-first thimac order (children by name), kinds in KIND_ORDER."""
        out = []

        def visit(tid):
            th = self.thimacs[tid]
            for kind in KIND_ORDER:
                if kind in th.stages:
                    out.append(th.stages[kind])
            for child in sorted(th.children, key=lambda c: self.thimacs[c].name):
                visit(child)

        for root in self.roots():
            visit(root)
        return out

    def signature(self):
        """Id-free structural summary used for isomorphism comparisons."""
        from .expr import to_text

        def guard_sig(st):
            if st.guard is None:
                return None
            return (to_text(st.guard.predicate), st.guard.on_true, st.guard.on_false)

        return (
            sorted((t.id, t.parent or "") for t in self.thimacs.values()),
            sorted(
                (s.id, s.kind.value, s.owner, guard_sig(s),
                 tuple((v, to_text(e)) for v, e in s.updates), s.consuming)
                for s in self.stages.values()
            ),
            sorted((f.src, f.dst) for f in self.flows),
            sorted((t.src, t.dst, t.label or "") for t in self.triggers),
            sorted((k, str(v)) for k, v in self.variables.items()),
            sorted(self.lights),
            [(e.id, e.name, tuple(sorted(e.region.stages))) for e in self.declared_events],
        )


# -- path resolution ------------------------------------------------------------

_KIND_WORDS = {
    "create": StageKind.CREATE,
    "process": StageKind.PROCESS,
    "release": StageKind.RELEASE,
    "arrive": StageKind.ARRIVE,
    "accept": StageKind.ACCEPT,
    "receive": StageKind.RECEIVE,
}
_TRANSFER_WORDS = {"input": StageKind.TRANSFER_IN, "output": StageKind.TRANSFER_OUT}
RESERVED = set(_KIND_WORDS) | {"transfer"}


def kind_to_segments(kind):
    kind = StageKind(kind)
    if kind is StageKind.TRANSFER_IN:
        return ["transfer", "input"]
    if kind is StageKind.TRANSFER_OUT:
        return ["transfer", "output"]
    return [kind.value]


def split_kind(segments):
    """Split trailing stage-kind words off a segment list -> (names, kind)."""
    if len(segments) >= 2 and segments[-2] == "transfer" and segments[-1] in _TRANSFER_WORDS:
        return segments[:-2], _TRANSFER_WORDS[segments[-1]]
    if segments and segments[-1] in _KIND_WORDS:
        return segments[:-1], _KIND_WORDS[segments[-1]]
    return segments, None


def find_thimac(m, names, scope=None):
    """Resolve a list of thimac names.

    The first name is looked up in ``scope``'s children, then outward through
    enclosing thimacs to the roots, and finally as a unique descendant name
    anywhere in the model.
    """
    if not names:
        if scope is None:
            raise ModelError("path names no thimac", "UNKNOWN_SEGMENT")
        return scope
    first, rest = names[0], names[1:]
    current = None
    level = scope
    while True:
        children = (
            [c for c in m.thimacs[level].children] if level is not None else m.roots()
        )
        hits = [c for c in children if m.thimacs[c].name == first]
        if len(hits) > 1:
            raise ModelError(f"ambiguous name {first!r}", "AMBIGUOUS")
        if hits:
            current = hits[0]
            break
        if level is None:
            break
        level = m.thimacs[level].parent
    if current is None:
        hits = [t.id for t in m.thimacs.values() if t.name == first]
        if len(hits) > 1:
            raise ModelError(f"ambiguous name {first!r}", "AMBIGUOUS")
        if not hits:
            raise ModelError(f"unknown segment {first!r}", "UNKNOWN_SEGMENT")
        current = hits[0]
    for name in rest:
        hits = [c for c in m.thimacs[current].children if m.thimacs[c].name == name]
        if len(hits) > 1:
            raise ModelError(f"ambiguous name {name!r}", "AMBIGUOUS")
        if not hits:
            raise ModelError(f"unknown segment {name!r} under {current!r}", "UNKNOWN_SEGMENT")
        current = hits[0]
    return current


def resolve_path(m, dotted, scope=None):
    """Stage id named by a dotted path such as ``"calc.process"``."""
    if not dotted or not dotted.strip():
        raise ModelError("empty path", "UNKNOWN_SEGMENT")
    segments = dotted.strip().split(".")
    names, kind = split_kind(segments)
    if kind is None:
        raise ModelError(f"path {dotted!r} does not end in a stage kind", "UNKNOWN_SEGMENT")
    tid = find_thimac(m, names, scope)
    sid = m.thimacs[tid].stages.get(kind)
    if sid is None:
        raise ModelError(f"thimac {tid!r} has no {kind.value} stage", "UNKNOWN_SEGMENT")
    return sid


def stage_path(m, sid):
    st = m.stages[sid]
    return ".".join(st.owner.split(".") + kind_to_segments(st.kind))


# -- validation -------------------------------------------------------------

def validate_static(m):
    findings = []
    for f in m.flows:
        if f.src not in m.stages or f.dst not in m.stages:
            findings.append(Finding("DANGLING_ARC", f"flow {f.src} -> {f.dst} has an unknown endpoint", (f.arc_id,)))
    for t in m.triggers:
        if t.src not in m.stages or t.dst not in m.stages:
            findings.append(Finding("DANGLING_ARC", f"trigger {t.src} --> {t.dst} has an unknown endpoint", (t.arc_id,)))
        elif t.src == t.dst:
            findings.append(Finding("SELF_TRIGGER", f"trigger {t.src} targets itself", (t.arc_id,)))

    # containment forest
    for tid in sorted(m.thimacs):
        seen = set()
        cur = tid
        while cur is not None:
            if cur in seen:
                findings.append(Finding("CONTAINMENT_CYCLE", f"thimac {tid} is inside a containment cycle", (tid,)))
                break
            seen.add(cur)
            parent = m.thimacs[cur].parent
            if parent is not None and parent not in m.thimacs:
                findings.append(Finding("DANGLING_PARENT", f"thimac {cur} has unknown parent {parent}", (cur,)))
                break
            cur = parent

    for f in m.flows:
        if f.src not in m.stages or f.dst not in m.stages:
            continue
        a, b = m.stages[f.src], m.stages[f.dst]
        if not adjacency_legal(a.kind, b.kind):
            findings.append(Finding(
                "ILLEGAL_ADJACENCY", f"flow {a.kind.value} -> {b.kind.value} ({f.src} -> {f.dst})",
                (f.src, f.dst),
            ))
            continue
        cross = (a.kind, b.kind) == (StageKind.TRANSFER_OUT, StageKind.TRANSFER_IN)
        if cross and a.owner == b.owner:
            findings.append(Finding("TRANSFER_SAME_THIMAC", f"transfer arc {f.src} -> {f.dst} stays inside {a.owner}", (f.src, f.dst)))
        if not cross and a.owner != b.owner:
            findings.append(Finding("CROSS_THIMAC_FLOW", f"flow {f.src} -> {f.dst} crosses thimacs outside transfer", (f.src, f.dst)))

    for sid in sorted(m.stages):
        st = m.stages[sid]
        if st.owner not in m.thimacs or m.thimacs[st.owner].stages.get(st.kind) != sid:
            findings.append(Finding("STAGE_OWNER", f"stage {sid} is not owned by exactly one thimac", (sid,)))
        if st.guard is not None:
            if st.kind is not StageKind.PROCESS:
                findings.append(Finding("GUARD_NOT_PROCESS", f"guard on {st.kind.value} stage {sid}", (sid,)))
            for target in (st.guard.on_true, st.guard.on_false):
                if target is not None and target not in m.stages:
                    findings.append(Finding("DANGLING_ARC", f"guard target {target} of {sid} is unknown", (sid,)))
        if st.consuming and st.kind is not StageKind.PROCESS:
            findings.append(Finding("CONSUME_NOT_PROCESS", f"consumption on {st.kind.value} stage {sid}", (sid,)))
        if st.updates and st.kind is not StageKind.PROCESS:
            findings.append(Finding("UPDATE_NOT_PROCESS", f"variable update on {st.kind.value} stage {sid}", (sid,)))
        for var, _ in st.updates:
            if var not in m.variables:
                findings.append(Finding("UNKNOWN_VARIABLE", f"stage {sid} assigns undeclared variable {var}", (sid,)))

    for tid in sorted(m.thimacs):
        kinds = set(m.thimacs[tid].stages)
        if StageKind.RECEIVE in kinds and kinds & {StageKind.ARRIVE, StageKind.ACCEPT}:
            findings.append(Finding("RECEIVE_EXCLUSIVE", f"thimac {tid} mixes receive with arrive/accept", (tid,)))
    return ValidationReport(findings)


def require_valid(m):
    report = validate_static(m)
    if not report.ok:
        raise ModelError(
            "invalid model: " + "; ".join(str(f) for f in report.findings[:5]), "INVALID_MODEL"
        )
