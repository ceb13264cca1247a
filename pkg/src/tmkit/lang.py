"""Textual TM language: parser, canonical serializer and Graphviz export.

Grammar::

    file    := item*
    item    := thimac | flow | trigger | var | light | guard | update | consume | stage | event
    thimac  := "thimac" NAME "{" item* "}"
    flow    := "flow" path ("." path)*
    trigger := "trigger" path "-->" path
    var     := "var" NAME ("=" ["-"] INT)?
    light   := "light" NAME "=" ("green" | "red")
    guard   := "guard" path ":" expr "?" target ":" target     target := path | "_"
    update  := "update" path ":" NAME ":=" expr ("," NAME ":=" expr)*
    consume := "consume" path
    stage   := "stage" path                      a stage with no arcs
    event   := "event" NAME [STRING] "=" "{" path ("," path)* "}"

A path is ``thimac.thimac...kind`` where kind is one of create, process,
release, arrive, accept, receive, transfer.input, transfer.output.  Inside a
flow chain a bare kind continues in the previous path's thimac, and inside a
``thimac`` block a bare kind names a stage of that block.
"""

import logging
from dataclasses import dataclass

from .core import (
    Model,
    GuardSpec,
    StageKind,
    RESERVED,
    find_thimac,
    kind_to_segments,
    require_valid,
    split_kind,
    stage_path,
)
from .dynamics import EventDef, make_region
from .errors import ModelError, ParseError
from .expr import ExprParser, to_text
from .lexer import TokenStream, tokenize

log = logging.getLogger(__name__)

ITEM_KEYWORDS = ("thimac", "flow", "trigger", "var", "light", "guard", "update", "consume", "stage", "event")
LIGHT_COLORS = ("green", "red")


@dataclass(frozen=True)
class SourceText:
    text: str
    origin: str = "<memory>"


@dataclass
class _PathRef:
    names: list
    kind: StageKind
    tok: object  # first token, for error positions
    inherited: bool = False  # continues the previous path's thimac


def _is_kind_word(word):
    return word in RESERVED


class _Parser:
    def __init__(self, src):
        self.origin = src.origin
        self.s = TokenStream(tokenize(src.text, src.origin), src.origin)
        self.model = Model()
        self.pending = []  # (scope, item tuple) resolved after all thimacs are known

    # -- syntax ----------------------------------------------------------

    def parse_file(self):
        while self.s.current.kind != "EOF":
            self.item(None)
        for scope, item in self.pending:
            self.resolve_item(scope, item)
        return self.model

    def item(self, scope):
        tok = self.s.current
        word = tok.value.lower() if tok.kind == "NAME" else None
        if word not in ITEM_KEYWORDS:
            raise self.s.error(f"unexpected {tok.describe()}", list(ITEM_KEYWORDS))
        self.s.advance()
        getattr(self, f"item_{word}")(scope, tok)

    def item_thimac(self, scope, tok):
        name_tok = self.s.expect_kind("NAME", "thimac name")
        if _is_kind_word(name_tok.value) or name_tok.value in ITEM_KEYWORDS:
            raise self.s.error(f"reserved word {name_tok.value!r} cannot name a thimac", ["thimac name"], name_tok)
        th = self.model.add_thimac(name_tok.value, scope)
        self.s.expect("{")
        while not self.s.at("}"):
            if self.s.current.kind == "EOF":
                raise self.s.error("unexpected end of input", ["'}'"])
            self.item(th.id)
        self.s.expect("}")

    def read_segments(self):
        first = self.s.expect_kind("NAME", "path")
        segs = [(first.value, first)]
        while self.s.at("."):
            self.s.advance()
            t = self.s.expect_kind("NAME", "path segment")
            segs.append((t.value, t))
        return segs

    def path(self):
        segs = self.read_segments()
        names, kind = split_kind([w for w, _ in segs])
        if kind is None:
            raise self.s.error("path must end in a stage kind", ["stage kind"], segs[-1][1])
        return _PathRef(names, kind, segs[0][1])

    def target(self):
        if self.s.accept("_"):
            return None
        return self.path()

    def item_flow(self, scope, tok):
        segs = self.read_segments()
        paths = []
        names = []
        first_tok = None
        i = 0
        while i < len(segs):
            word, wtok = segs[i]
            first_tok = first_tok or wtok
            if word == "transfer":
                if i + 1 >= len(segs) or segs[i + 1][0] not in ("input", "output"):
                    bad = segs[i + 1][1] if i + 1 < len(segs) else self.s.current
                    raise self.s.error("'transfer' must be followed by input or output", ["'input'", "'output'"], bad)
                kind = StageKind.TRANSFER_IN if segs[i + 1][0] == "input" else StageKind.TRANSFER_OUT
                i += 2
            elif _is_kind_word(word):
                kind = StageKind(word)
                i += 1
            else:
                names.append(word)
                i += 1
                continue
            if not names and paths:
                prev = paths[-1]
                # "receive.arrive": the arrive stage contained in the combined receive
                if prev.kind is StageKind.RECEIVE and kind in (StageKind.ARRIVE, StageKind.ACCEPT):
                    paths.pop()
                    paths.append(_PathRef(prev.names, kind, prev.tok, prev.inherited))
                else:
                    paths.append(_PathRef(prev.names, kind, first_tok, True))
            else:
                paths.append(_PathRef(names, kind, first_tok))
            names = []
            first_tok = None
        if names:
            raise self.s.error("flow path must end in a stage kind", ["stage kind"], segs[-1][1])
        if len(paths) < 2:
            raise self.s.error("flow needs at least two stages", ["'.'"])
        self.pending.append((scope, ("flow", paths)))

    def item_trigger(self, scope, tok):
        src = self.path()
        self.s.expect("-->")
        dst = self.path()
        self.pending.append((scope, ("trigger", src, dst)))

    def item_var(self, scope, tok):
        name = self.s.expect_kind("NAME", "variable name")
        value = None
        if self.s.accept("="):
            neg = bool(self.s.accept("-"))
            value = int(self.s.expect_kind("INT", "integer").value)
            value = -value if neg else value
        self._declare(name, value)

    def item_light(self, scope, tok):
        name = self.s.expect_kind("NAME", "light name")
        self.s.expect("=")
        color = self.s.expect_kind("NAME", "green or red")
        if color.value not in LIGHT_COLORS:
            raise self.s.error(f"unknown light color {color.value!r}", ["'green'", "'red'"], color)
        self._declare(name, color.value)
        self.model.lights.add(name.value)

    def _declare(self, name_tok, value):
        if name_tok.value in self.model.variables:
            raise self.s.error(f"variable {name_tok.value!r} declared twice", [], name_tok)
        self.model.variables[name_tok.value] = value

    def item_guard(self, scope, tok):
        where = self.path()
        self.s.expect(":")
        pred = ExprParser(self.s).parse()
        self.s.expect("?")
        on_true = self.target()
        self.s.expect(":")
        on_false = self.target()
        self.pending.append((scope, ("guard", where, pred, on_true, on_false)))

    def item_update(self, scope, tok):
        where = self.path()
        self.s.expect(":")
        assigns = [self._assignment()]
        while self.s.accept(","):
            assigns.append(self._assignment())
        self.pending.append((scope, ("update", where, assigns)))

    def _assignment(self):
        var = self.s.expect_kind("NAME", "variable name")
        self.s.expect(":=")
        return var, ExprParser(self.s).parse()

    def item_consume(self, scope, tok):
        self.pending.append((scope, ("consume", self.path())))

    def item_stage(self, scope, tok):
        self.pending.append((scope, ("stage", self.path())))

    def item_event(self, scope, tok):
        eid = self.s.expect_kind("NAME", "event id")
        desc = ""
        if self.s.current.kind == "STRING":
            desc = self.s.advance().value
        self.s.expect("=")
        self.s.expect("{")
        paths = [self.path()]
        while self.s.accept(","):
            paths.append(self.path())
        self.s.expect("}")
        self.pending.append((scope, ("event", eid, desc, paths)))

    # -- resolution ----------------------------------------------------------

    def stage(self, scope, ref):
        try:
            tid = find_thimac(self.model, ref.names, scope)
        except ModelError as exc:
            if scope is None and ref.names and not any(t.name == ref.names[0] for t in self.model.thimacs.values()):
                # top-level items may introduce root thimacs without a block
                tid = None
                for name in ref.names:
                    tid = self.model.add_thimac(name, tid).id
                return self.model.add_stage(tid, ref.kind).id
            raise ParseError(exc.message, ref.tok.line, ref.tok.column, ["declared thimac"], self.origin) from None
        return self.model.add_stage(tid, ref.kind).id

    def resolve_item(self, scope, item):
        m = self.model
        tag = item[0]
        if tag == "flow":
            ids = []
            for ref in item[1]:
                if getattr(ref, "inherited", False):
                    owner = m.stages[ids[-1]].owner if ids else scope
                    ids.append(m.add_stage(owner, ref.kind).id)
                else:
                    ids.append(self.stage(scope, ref))
            for a, b in zip(ids, ids[1:]):
                m.add_flow(a, b)
        elif tag == "trigger":
            m.add_trigger(self.stage(scope, item[1]), self.stage(scope, item[2]))
        elif tag == "guard":
            _, where, pred, t_ref, f_ref = item
            sid = self.stage(scope, where)
            on_true = self.stage(scope, t_ref) if t_ref else None
            on_false = self.stage(scope, f_ref) if f_ref else None
            st = m.stages[sid]
            if st.guard is not None:
                raise ParseError(f"stage {sid} already has a guard", where.tok.line, where.tok.column, [], self.origin)
            st.guard = GuardSpec(pred, on_true, on_false)
            if on_true:
                m.add_trigger(sid, on_true, "on_true")
            if on_false:
                m.add_trigger(sid, on_false, "on_false")
        elif tag == "update":
            _, where, assigns = item
            sid = self.stage(scope, where)
            st = m.stages[sid]
            names = [v.value for v, _ in assigns] + [v for v, _ in st.updates]
            if len(set(names)) != len(names):
                raise ParseError("a stage may assign each variable once", where.tok.line, where.tok.column, [], self.origin)
            st.updates = st.updates + tuple((v.value, e) for v, e in assigns)
        elif tag == "stage":
            self.stage(scope, item[1])
        elif tag == "consume":
            m.stages[self.stage(scope, item[1])].consuming = True
        elif tag == "event":
            _, eid, desc, refs = item
            if any(e.id == eid.value for e in m.declared_events):
                raise ParseError(f"event {eid.value!r} declared twice", eid.line, eid.column, [], self.origin)
            stages = [self.stage(scope, r) for r in refs]
            m.declared_events.append(EventDef(eid.value, desc, make_region(m, stages)))


def parse(src):
    """Parse TM text (``SourceText`` or ``str``) into an unvalidated Model."""
    if isinstance(src, str):
        src = SourceText(src)
    model = _Parser(src).parse_file()
    for ev in model.declared_events:
        # arcs may have been declared after the event; recompute
        ev.region = make_region(model, ev.region.stages)
    return model


def parse_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse(SourceText(fh.read(), str(path)))


def parse_flow_string(text, thimac="m"):
    """Parse a bare flow line such as ``Flow.Create.release.transfer.output``.

    Keywords are case-insensitive; the stages are placed in one thimac.
    """
    words = [w.strip().lower() for w in text.strip().split(".")]
    if words and words[0] == "flow":
        words = words[1:]
    return parse(f"thimac {thimac} {{ flow {'.'.join(words)} }}")


# -- serialization ----------------------------------------------------------

def _flow_chains(m):
    order = {sid: i for i, sid in enumerate(m.ordered_stage_ids())}
    key = lambda arc: (order.get(arc.src, -1), order.get(arc.dst, -1), arc.src, arc.dst)
    arcs = sorted(m.flows, key=key)
    out = {}
    indeg = {}
    for a in arcs:
        out.setdefault(a.src, []).append(a)
        indeg[a.dst] = indeg.get(a.dst, 0) + 1

    def interior(sid):
        if indeg.get(sid, 0) != 1:
            return False
        pred = next(a for a in arcs if a.dst == sid)
        return len(out.get(pred.src, [])) == 1

    used = set()
    chains = []

    def grow(arc):
        chain = [arc.src, arc.dst]
        used.add(arc)
        cur = arc.dst
        while indeg.get(cur, 0) == 1 and len(out.get(cur, [])) == 1 and out[cur][0] not in used:
            nxt = out[cur][0]
            used.add(nxt)
            chain.append(nxt.dst)
            cur = nxt.dst
        chains.append(chain)

    for arc in arcs:
        if arc not in used and not interior(arc.src):
            grow(arc)
    for arc in arcs:
        if arc not in used:
            grow(arc)
    return chains


def _chain_text(m, chain):
    parts = [stage_path(m, chain[0])]
    for prev, cur in zip(chain, chain[1:]):
        a, b = m.stages[prev], m.stages[cur]
        if a.owner == b.owner:
            parts.append(".".join(kind_to_segments(b.kind)))
        else:
            parts.append(stage_path(m, cur))
    return ".".join(parts)


def _target_text(m, sid):
    return "_" if sid is None else stage_path(m, sid)


def serialize(m):
    """Canonical, deterministic text for a valid model."""
    require_valid(m)
    lines = []
    for name in sorted(m.variables):
        value = m.variables[name]
        if name in m.lights:
            lines.append(f"light {name} = {value}")
        elif value is None:
            lines.append(f"var {name}")
        else:
            lines.append(f"var {name} = {value}")
    if lines:
        lines.append("")

    def emit(tid, depth):
        th = m.thimacs[tid]
        pad = "  " * depth
        kids = sorted(th.children, key=lambda c: m.thimacs[c].name)
        if not kids:
            lines.append(f"{pad}thimac {th.name} {{ }}")
            return
        lines.append(f"{pad}thimac {th.name} {{")
        for child in kids:
            emit(child, depth + 1)
        lines.append(f"{pad}}}")

    roots = m.roots()
    for root in roots:
        emit(root, 0)
    if roots:
        lines.append("")

    body = []
    for chain in _flow_chains(m):
        body.append(f"flow {_chain_text(m, chain)}")
    order = {sid: i for i, sid in enumerate(m.ordered_stage_ids())}
    skey = lambda sid: (order.get(sid, -1), sid)
    for t in sorted((t for t in m.triggers if not t.from_guard), key=lambda t: (skey(t.src), skey(t.dst))):
        body.append(f"trigger {stage_path(m, t.src)} --> {stage_path(m, t.dst)}")
    staged = sorted(m.stages, key=skey)
    for sid in staged:
        g = m.stages[sid].guard
        if g is not None:
            body.append(
                f"guard {stage_path(m, sid)} : {to_text(g.predicate)} ? "
                f"{_target_text(m, g.on_true)} : {_target_text(m, g.on_false)}"
            )
    for sid in staged:
        st = m.stages[sid]
        if st.updates:
            assigns = ", ".join(f"{v} := {to_text(e)}" for v, e in st.updates)
            body.append(f"update {stage_path(m, sid)} : {assigns}")
    for sid in staged:
        if m.stages[sid].consuming:
            body.append(f"consume {stage_path(m, sid)}")
    linked = {a.src for a in m.flows} | {a.dst for a in m.flows}
    linked |= {t.src for t in m.triggers} | {t.dst for t in m.triggers}
    for sid in staged:
        st = m.stages[sid]
        if sid not in linked and st.guard is None and not st.updates and not st.consuming:
            body.append(f"stage {stage_path(m, sid)}")
    for ev in m.declared_events:
        desc = f' "{ev.name}"' if ev.name else ""
        paths = ", ".join(stage_path(m, s) for s in sorted(ev.region.stages, key=skey))
        body.append(f"event {ev.id}{desc} = {{ {paths} }}")
    lines.extend(body)
    while lines and lines[-1] == "":
        lines.pop()
    return SourceText("\n".join(lines) + ("\n" if lines else ""))


# -- DOT export ---------------------------------------------------------------

def _q(text):
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(m, opts=None):
    """Directed graph: clusters per thimac, solid flows, dashed triggers."""
    opts = opts or {}
    require_valid(m)
    name = opts.get("name", "tm")
    lines = [f"digraph {_q(name)} {{", "  compound=true;", "  node [shape=box];"]

    def emit(tid, depth):
        th = m.thimacs[tid]
        pad = "  " * (depth + 1)
        lines.append(f"{pad}subgraph {_q('cluster_' + tid)} {{")
        lines.append(f"{pad}  label={_q(th.name)};")
        for kind in sorted(th.stages, key=lambda k: k.value):
            sid = th.stages[kind]
            lines.append(f"{pad}  {_q(sid)} [label={_q(m.stage_label(sid))}];")
        for child in sorted(th.children, key=lambda c: m.thimacs[c].name):
            emit(child, depth + 1)
        lines.append(f"{pad}}}")

    for root in m.roots():
        emit(root, 0)
    for f in sorted(m.flows, key=lambda a: (a.src, a.dst)):
        lines.append(f"  {_q(f.src)} -> {_q(f.dst)};")
    for t in sorted(m.triggers, key=lambda a: (a.src, a.dst, a.label or "")):
        attrs = "style=dashed"
        if t.from_guard:
            attrs += f", label={_q('true' if t.label == 'on_true' else 'false')}"
        lines.append(f"  {_q(t.src)} -> {_q(t.dst)} [{attrs}];")
    lines.append("}")
    return SourceText("\n".join(lines) + "\n")
