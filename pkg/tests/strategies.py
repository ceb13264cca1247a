"""Hypothesis strategies shared by the test modules."""

from hypothesis import strategies as st

from tmkit.core import LEGAL_PAIRS, GuardSpec, Model, StageKind
from tmkit.expr import parse_expr


@st.composite
def models(draw):
    m = Model()
    n = draw(st.integers(1, 4))
    ids = []
    for i in range(n):
        parent = draw(st.sampled_from([None] + ids)) if ids else None
        ids.append(m.add_thimac(f"t{i}", parent).id)
    succ = {}
    for a, b in LEGAL_PAIRS:
        if (a, b) != (StageKind.TRANSFER_OUT, StageKind.TRANSFER_IN):
            succ.setdefault(a, []).append(b)
    for tid in ids:
        kind = draw(st.sampled_from([StageKind.CREATE, StageKind.TRANSFER_IN]))
        chain = [kind]
        while kind in succ and draw(st.booleans()):
            kind = draw(st.sampled_from(sorted(succ[kind])))
            if kind in chain:
                break
            chain.append(kind)
        sids = [m.add_stage(tid, k).id for k in chain]
        for a, b in zip(sids, sids[1:]):
            m.add_flow(a, b)
    outs = [s for s in m.stages.values() if s.kind is StageKind.TRANSFER_OUT]
    ins = [s for s in m.stages.values() if s.kind is StageKind.TRANSFER_IN]
    for o in outs:
        targets = [i for i in ins if i.owner != o.owner]
        if targets and draw(st.booleans()):
            m.add_flow(o.id, draw(st.sampled_from(targets)).id)
    stages = sorted(m.stages)
    for _ in range(draw(st.integers(0, 3))):
        a, b = draw(st.sampled_from(stages)), draw(st.sampled_from(stages))
        if a != b:
            m.add_trigger(a, b)
    m.variables["v"] = draw(st.one_of(st.none(), st.integers(-3, 3)))
    for s in m.stages.values():
        if s.kind is StageKind.PROCESS and draw(st.booleans()):
            target = draw(st.one_of(st.none(), st.sampled_from(stages)))
            s.guard = GuardSpec(parse_expr("v >= 0"), target, None)
            if target:
                m.add_trigger(s.id, target, "on_true")
    return m


@st.composite
def machines(draw):
    n = draw(st.integers(1, 4))
    names = [f"v{i}" for i in range(n)]
    init = {v: draw(st.integers(-5, 5)) for v in names}
    targets = draw(st.lists(st.sampled_from(names), unique=True, min_size=1))
    actions = []
    for t in targets:
        src = draw(st.sampled_from(names))
        k = draw(st.integers(-3, 3))
        op = draw(st.sampled_from(["+", "-", "*"]))
        actions.append((t, src, op, k))
    text = "MACHINE g\nVARIABLES\n" + "".join(f" {v}\n" for v in names)
    text += "INIT\n" + "".join(f" {v} := {init[v]}\n" for v in names)
    text += "EVENT e\nTHEN\n" + "".join(f" {t} := {s} {op} {k}\n" for t, s, op, k in actions) + "END\n"
    return text, init, actions


def oracle_apply(values, actions):
    ops = {"+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b}
    out = dict(values)
    for t, s, op, k in actions:
        out[t] = ops[op](values[s], k)
    return out
