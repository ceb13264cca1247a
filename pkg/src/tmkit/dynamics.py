"""Dynamic model (events over regions) and behavioral model (event chronology)."""

import re
from dataclasses import dataclass, field

from .errors import DynamicsError


@dataclass(frozen=True)
class Region:
    stages: frozenset
    arcs: frozenset = frozenset()


@dataclass
class EventDef:
    id: str
    name: str
    region: Region


@dataclass
class BehaviorGraph:
    nodes: list
    edges: list = field(default_factory=list)  # (pred, succ, cause) with cause in {"flow", "trigger"}

    def successors(self, node):
        seen = []
        for a, b, _ in self.edges:
            if a == node and b not in seen:
                seen.append(b)
        return sorted(seen, key=natural_key)

    def has_edge(self, a, b, cause=None):
        return any(x == a and y == b and (cause is None or c == cause) for x, y, c in self.edges)


def natural_key(text):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", str(text))]


def _all_arcs(m):
    return [(f.arc_id, f.src, f.dst) for f in m.flows] + [(t.arc_id, t.src, t.dst) for t in m.triggers]


def make_region(m, stage_ids):
    stages = frozenset(stage_ids)
    arcs = frozenset(aid for aid, a, b in _all_arcs(m) if a in stages and b in stages)
    return Region(stages, arcs)


def region_connected(m, region):
    stages = set(region.stages)
    if not stages:
        return False
    adj = {s: set() for s in stages}
    for _, a, b in _all_arcs(m):
        if a in stages and b in stages:
            adj[a].add(b)
            adj[b].add(a)
    start = min(stages)
    seen = {start}
    todo = [start]
    while todo:
        for nxt in adj[todo.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen == stages


def extract_events(m, granularity="declared"):
    if granularity == "fine":
        events = []
        for i, sid in enumerate(m.ordered_stage_ids(), start=1):
            events.append(EventDef(f"S{i}", m.stage_label(sid), make_region(m, [sid])))
        return events
    if granularity != "declared":
        raise DynamicsError(f"unknown granularity {granularity!r}", "BAD_GRANULARITY")
    if not m.declared_events:
        raise DynamicsError("model declares no events", "EMPTY_DECLARATIONS")
    for ev in m.declared_events:
        if not region_connected(m, ev.region):
            raise DynamicsError(f"event {ev.id} covers a disconnected region", "DISCONNECTED_REGION")
    return [EventDef(e.id, e.name, e.region) for e in m.declared_events]


def uncovered_stages(m, events):
    covered = set()
    for ev in events:
        covered |= ev.region.stages
    return [s for s in m.ordered_stage_ids() if s not in covered]


def stage_event_map(events):
    owner = {}
    for ev in events:
        for sid in ev.region.stages:
            if sid in owner:
                raise DynamicsError(
                    f"stage {sid} lies in events {owner[sid]} and {ev.id}", "OVERLAPPING_REGIONS"
                )
            owner[sid] = ev.id
    return owner


def behavior_graph(m, events):
    owner = stage_event_map(events)
    edges = []
    arcs = [(f.src, f.dst, "flow") for f in m.flows] + [(t.src, t.dst, "trigger") for t in m.triggers]
    for a, b, cause in arcs:
        x, y = owner.get(a), owner.get(b)
        if x is None or y is None or x == y:
            continue
        edge = (x, y, cause)
        if edge not in edges:
            edges.append(edge)
    edges.sort(key=lambda e: (natural_key(e[0]), natural_key(e[1]), e[2]))
    return BehaviorGraph([e.id for e in events], edges)


def _has_cycle(g):
    state = {}

    def visit(n):
        state[n] = 1
        for s in g.successors(n):
            if state.get(s) == 1:
                return True
            if s not in state and visit(s):
                return True
        state[n] = 2
        return False

    return any(n not in state and visit(n) for n in g.nodes)


def maximal_chains(g, start=None):
    """All maximal simple paths, from sources or from ``start``."""
    if not g.nodes:
        return []
    if start is None:
        if _has_cycle(g):
            raise DynamicsError("behavior graph is cyclic; give a start event", "CYCLIC_WITHOUT_START")
        targets = {b for _, b, _ in g.edges}
        starts = [n for n in g.nodes if n not in targets]
    else:
        if start not in g.nodes:
            raise DynamicsError(f"unknown event {start!r}", "UNKNOWN_EVENT")
        starts = [start]
    chains = []

    def walk(path):
        nxt = [s for s in g.successors(path[-1]) if s not in path]
        if not nxt:
            chains.append(list(path))
            return
        for s in nxt:
            path.append(s)
            walk(path)
            path.pop()

    for s in starts:
        walk([s])
    chains.sort(key=lambda c: [natural_key(x) for x in c])
    return chains
