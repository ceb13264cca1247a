"""``tmkit`` command line.

Every subcommand builds one result dict; plain output is rendered from it
and ``--json`` prints it as is, so both forms carry the same fields.
Exit codes: 0 ok, 1 findings or failed check, 2 usage or input error.
"""

import argparse
import dataclasses
import json
import sys

from . import cases as casemod
from .core import stage_path, validate_static
from .dynamics import behavior_graph, extract_events, maximal_chains, uncovered_stages
from .errors import TmkitError
from .eventb import (
    check_deadlock,
    check_invariants,
    check_refinement,
    explore,
    exploration_summary,
    load_machine,
    refinement_spec,
)
from .lang import export_dot, parse_file
from .sim import parse_monitors, parse_scenario, run


class InputError(Exception):
    """Unreadable or malformed input; maps to exit code 2."""


def _load(fn, path):
    try:
        return fn(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except TmkitError as exc:
        raise InputError(f"{path}: [{exc.code}] {exc}") from None


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _model(path):
    return _load(parse_file, path)


def _machine(path):
    return _load(load_machine, path)


def _scenario(path, signal_mode):
    sc = _load(lambda p: parse_scenario(_read(p), p), path)
    if signal_mode:
        sc = dataclasses.replace(sc, signal_mode=True)
    return sc


def _bounds(pairs):
    out = {}
    for pair in pairs or ():
        name, eq, value = pair.partition("=")
        try:
            out[name.strip()] = int(value)
        except ValueError:
            raise InputError(f"--bound expects name=<int>, got {pair!r}") from None
        if not eq or not name.strip():
            raise InputError(f"--bound expects name=<int>, got {pair!r}")
    return out


def _events(m, granularity):
    try:
        return extract_events(m, granularity)
    except TmkitError as exc:
        raise InputError(f"[{exc.code}] {exc}") from None


# -- subcommands ------------------------------------------------------------------

def cmd_parse(args):
    m = _model(args.file)
    result = {
        "file": args.file,
        "thimacs": len(m.thimacs),
        "stages": len(m.stages),
        "flows": len(m.flows),
        "triggers": len(m.triggers),
        "variables": len(m.variables),
        "events": len(m.declared_events),
    }
    text = " ".join(f"{k}={v}" for k, v in result.items() if k != "file")
    return result, [text], 0


def cmd_check(args):
    m = _model(args.file)
    report = validate_static(m)
    findings = [{"rule": f.rule, "ids": list(f.ids), "message": f.message} for f in report.findings]
    lines = [f"{f['rule']}\t{','.join(f['ids'])}\t{f['message']}" for f in findings]
    lines.append(f"{len(findings)} findings")
    return {"file": args.file, "findings": findings}, lines, 0 if report.ok else 1


def _valid_model(path):
    m = _model(path)
    report = validate_static(m)
    if not report.ok:
        first = report.findings[0]
        raise InputError(f"{path}: model has {len(report.findings)} findings, first {first.rule}: {first.message}")
    return m


def cmd_events(args):
    m = _valid_model(args.file)
    events = _events(m, args.granularity)
    rows = []
    for ev in events:
        stages = sorted(ev.region.stages, key=m.ordered_stage_ids().index)
        rows.append({"id": ev.id, "name": ev.name, "stages": [stage_path(m, s) for s in stages]})
    uncovered = [stage_path(m, s) for s in uncovered_stages(m, events)]
    lines = [f"{r['id']}\t{r['name']}\t{','.join(r['stages'])}" for r in rows]
    if uncovered:
        lines.append(f"uncovered\t{','.join(uncovered)}")
    return {"file": args.file, "granularity": args.granularity, "events": rows, "uncovered": uncovered}, lines, 0


def cmd_behavior(args):
    m = _valid_model(args.file)
    g = behavior_graph(m, _events(m, args.granularity))
    if args.chains or args.start:
        try:
            chains = maximal_chains(g, args.start)
        except TmkitError as exc:
            raise InputError(f"[{exc.code}] {exc}") from None
        return {"file": args.file, "chains": chains}, [" ".join(c) for c in chains], 0
    edges = [{"pred": a, "cause": c, "succ": b} for a, b, c in g.edges]
    lines = [f"{e['pred']}\t{e['cause']}\t{e['succ']}" for e in edges]
    return {"file": args.file, "edges": edges}, lines, 0


def _monitors(path):
    if not path:
        return []
    return _load(lambda p: parse_monitors(_read(p), p), path)


def _simulate(args):
    m = _valid_model(args.file)
    events = _events(m, args.granularity)
    sc = _scenario(args.scenario, args.signal_mode)
    return m, sc, run(m, events, sc, _monitors(args.monitors))


def _monitor_rows(report):
    return [
        {"name": r.name, "ok": r.ok, "tick": r.tick, "snapshot": r.snapshot, "error": r.error}
        for r in report.results
    ]


def cmd_simulate(args):
    _, _, res = _simulate(args)
    records = [{"t": r.time, "event": r.event, "detail": r.detail} for r in res.trace.records]
    monitors = _monitor_rows(res.report)
    lines = [f"t={r['t']} event={r['event']} detail={r['detail']}" for r in records]
    lines += [r.format() for r in res.report.results]
    lines.append("final " + " ".join(f"{k}={v}" for k, v in res.variables.items()))
    result = {"trace": records, "monitors": monitors, "final": res.variables, "dropped": len(res.dropped)}
    if res.dropped:
        lines.append(f"dropped {len(res.dropped)}")
    return result, lines, 0 if res.report.ok else 1


def _explore_result(m, bounds, max_states):
    g = explore(m, bounds, max_states)
    inv = check_invariants(g)
    dead = None if g.truncated else check_deadlock(g)
    fail = inv.first_failure()
    result = {
        "machine": m.name,
        "bounds": bounds,
        "states": len(g.states),
        "transitions": len(g.edges),
        "truncated": g.truncated,
        "invariants": "pass" if fail is None else {"name": fail.name, "state": fail.state.format(), "path": fail.path},
        "deadlocks": None if dead is None else [{"state": s.format(), "path": p} for s, p in dead.states],
    }
    ok = fail is None and dead is not None and dead.ok
    return result, exploration_summary(g, inv, dead), ok


def cmd_explore(args):
    m = _machine(args.machine)
    result, line, ok = _wrap(lambda: _explore_result(m, _bounds(args.bound), args.max_states))
    lines = [line]
    if isinstance(result["invariants"], dict):
        lines.append("counterexample " + " ".join(result["invariants"]["path"]))
    for d in result["deadlocks"] or ():
        lines.append(f"deadlock {d['state']} after {' '.join(d['path']) or '<init>'}")
    return result, lines, 0 if ok else 1


def _wrap(fn):
    try:
        return fn()
    except TmkitError as exc:
        if exc.code in ("UNBOUND_CONSTANT", "AXIOM_VIOLATED"):
            raise InputError(f"[{exc.code}] {exc}") from None
        raise


def _refine_result(abstract, concrete, bounds, max_states):
    spec = refinement_spec(abstract, concrete)
    rep = check_refinement(spec, bounds, max_states)
    result = {
        "abstract": abstract.name,
        "concrete": concrete.name,
        "bounds": bounds,
        "ok": rep.ok,
        "code": rep.code,
        "transitions": rep.checked_transitions,
        "message": rep.message,
        "path": rep.path,
    }
    if rep.ok:
        line = f"refinement=pass transitions={rep.checked_transitions}"
    else:
        line = f"refinement=FAIL({rep.code}) {rep.message}"
        if rep.path:
            line += " path=" + " ".join(rep.path)
    return result, line


def cmd_refine(args):
    abstract, concrete = _machine(args.abstract), _machine(args.concrete)
    result, line = _wrap(lambda: _refine_result(abstract, concrete, _bounds(args.bound), args.max_states))
    return result, [line], 0 if result["ok"] else 1


def _conform_result(m, sc, res, cmap, machine):
    init = {k: sc.init_vars.get(k, v) for k, v in m.variables.items()}
    rep = casemod.conformance_check(res.trace, cmap, machine, init)
    return {
        "ok": rep.ok,
        "code": rep.code,
        "projection": [s.eb_event for s in rep.steps],
        "failed_step": None if rep.failed_at is None else rep.failed_at + 1,
        "message": rep.message,
    }, rep.format()


def cmd_conform(args):
    m, sc, res = _simulate(args)
    machine = _machine(args.machine)
    cmap = _load(lambda p: casemod.parse_conformance_map(_read(p), p), args.map)
    result, line = _wrap(lambda: _conform_result(m, sc, res, cmap, machine))
    lines = ["projection " + " ".join(result["projection"]), line]
    return result, lines, 0 if result["ok"] else 1


def cmd_export_dot(args):
    m = _valid_model(args.file)
    text = export_dot(m).text
    return {"file": args.file, "dot": text}, text.rstrip("\n").split("\n"), 0


def cmd_case(args):
    if not args.name:
        names = casemod.list_cases()
        return {"cases": names}, names, 0
    try:
        bundle = casemod.load_case(args.name)
    except TmkitError as exc:
        raise InputError(f"[{exc.code}] {exc}") from None
    bounds = _bounds(args.bound)
    checks = []

    def add(name, ok, detail):
        checks.append({"check": name, "ok": ok, "detail": detail})

    if bundle.model is not None:
        add("model", True, f"{len(bundle.model.declared_events)} events, 0 findings")
    if bundle.machine is not None:
        need = set(bundle.machine.context.constants)
        sizes = [dict(bounds)] if need <= set(bounds) else [{**bounds, "d": d} for d in (1, 2, 3)]
        for b in sizes:
            result, line, ok = _wrap(lambda: _explore_result(bundle.machine, b, args.max_states))
            add(f"explore {_bound_text(b)}".rstrip(), ok, line)
            if bundle.abstract is not None:
                result, line = _wrap(lambda: _refine_result(bundle.abstract, bundle.machine, b, args.max_states))
                add(f"refine {bundle.abstract.name} {_bound_text(b)}", result["ok"], line)
    if bundle.model is not None:
        events = extract_events(bundle.model)
        for key, sc in bundle.scenarios.items():
            for signal in (False, True):
                mode = "signal" if signal else "inline"
                res = run(bundle.model, events, dataclasses.replace(sc, signal_mode=signal), bundle.monitors)
                bad = [r.name for r in res.report.results if not r.ok]
                add(f"simulate {key} {mode}", not bad, f"records={len(res.trace)} monitors={'pass' if not bad else 'FAIL(' + ','.join(bad) + ')'}")
                if bundle.conformance is not None:
                    result, line = _conform_result(bundle.model, sc, res, bundle.conformance, bundle.machine)
                    add(f"conform {key} {mode}", result["ok"], line)
    lines = [f"{'PASS' if c['ok'] else 'FAIL'}\t{c['check']}\t{c['detail']}" for c in checks]
    ok = all(c["ok"] for c in checks)
    return {"case": bundle.name, "checks": checks, "ok": ok}, lines, 0 if ok else 1


def _bound_text(b):
    return " ".join(f"{k}={v}" for k, v in sorted(b.items()))


# -- wiring -----------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="tmkit", description="Thinging Machine models and Event-B-lite machines.")
    p.add_argument("--json", action="store_true", help="structured output")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="structured output")

    def tm(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("file")
        sp.set_defaults(fn=fn)
        common(sp)
        return sp

    def granular(sp):
        sp.add_argument("--granularity", choices=("fine", "declared"), default="declared")

    def simulating(sp):
        granular(sp)
        sp.add_argument("--scenario", required=True)
        sp.add_argument("--signal-mode", action="store_true")
        sp.add_argument("--monitors")

    def bounded(sp):
        sp.add_argument("--bound", action="append", metavar="NAME=INT")
        sp.add_argument("--max-states", type=int, default=100_000)

    tm("parse", cmd_parse, "parse a .tm file and summarize it")
    tm("check", cmd_check, "static validation")
    granular(tm("events", cmd_events, "list events"))
    sp = tm("behavior", cmd_behavior, "behavior graph or chains")
    granular(sp)
    sp.add_argument("--chains", action="store_true")
    sp.add_argument("--start")
    simulating(tm("simulate", cmd_simulate, "run a scenario"))
    tm("export-dot", cmd_export_dot, "Graphviz output")

    sp = sub.add_parser("explore", help="explore an Event-B-lite machine")
    sp.add_argument("machine")
    bounded(sp)
    common(sp)
    sp.set_defaults(fn=cmd_explore)

    sp = sub.add_parser("refine", help="check that CONCRETE refines ABSTRACT")
    sp.add_argument("abstract")
    sp.add_argument("concrete")
    bounded(sp)
    common(sp)
    sp.set_defaults(fn=cmd_refine)

    sp = sub.add_parser("conform", help="replay a simulated trace through a machine")
    sp.add_argument("file")
    sp.add_argument("machine")
    sp.add_argument("--map", required=True)
    simulating(sp)
    common(sp)
    sp.set_defaults(fn=cmd_conform)

    sp = sub.add_parser("case", help="list bundled cases or check one")
    sp.add_argument("name", nargs="?")
    bounded(sp)
    common(sp)
    sp.set_defaults(fn=cmd_case)
    return p


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        result, lines, code = args.fn(args)
    except InputError as exc:
        print(f"tmkit: error: {exc}", file=err)
        return 2
    except TmkitError as exc:
        print(f"tmkit: [{exc.code}] {exc}", file=err)
        return 1
    if args.json:
        out.write(json.dumps(result, indent=2, sort_keys=True, default=str) + "\n")
    else:
        out.write("".join(line + "\n" for line in lines))
    return code


def entry():
    sys.exit(main())
