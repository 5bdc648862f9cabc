"""``tmkit`` command-line interface.

Exit codes: 0 success, 1 model or constraint violation, 2 usage error,
3 I/O or runtime failure.  Artifacts go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .core import InvalidModel, validate_static
from .dot import behavior_to_dot, model_to_dot
from .dsl import ParseError, TMFile, model_to_json, parse_tm, serialize_tm
from .er import FDSyntaxError, SchemaError, parse_er, parse_fd_expr, translate_er
from .events import (
    BehaviorGraph, check_conformance, derive_chronology, events_from_json, validate_events,
)
from .simulator import KernelArity, NonTermination, Stuck, run
from .store import (
    DuplicateKey, MalformedStore, UnknownAttribute, UnknownPartition, UnknownRelation, check_fd,
    dump_store, load_store, store_from_json,
)

OK, VIOLATION, USAGE, FAILURE = 0, 1, 2, 3


class _Exit(Exception):
    def __init__(self, code: int, lines: Sequence[str] = ()):
        self.code = code
        self.lines = list(lines)


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as exc:
        raise _Exit(FAILURE, [f"{path}: {exc.strerror or exc}"]) from None


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as exc:
        raise _Exit(FAILURE, [f"{path}: {exc.strerror or exc}"]) from None


def _json(path: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise _Exit(FAILURE, [f"{path}: not JSON: {exc}"]) from None


def _load_tm(path: str, check: bool = True) -> TMFile:
    try:
        tm = parse_tm(_read(path))
    except ParseError as exc:
        raise _Exit(VIOLATION, [d.format(path) for d in exc.diagnostics]) from None
    if check:
        diags = validate_static(tm.model) + validate_events(tm.model, tm.events, tm.chronology)
        _report(path, diags)
    return tm


def _report(path: str, diags) -> None:
    """Print warnings; stop with exit 1 if any diagnostic is an error."""
    for d in diags:
        if not d.is_error:
            print(d.format(path), file=sys.stderr)
    errors = [d.format(path) for d in diags if d.is_error]
    if errors:
        raise _Exit(VIOLATION, errors)


def _events(args, tm: TMFile):
    if getattr(args, "events", None):
        data = _json(args.events)
        try:
            evs = events_from_json(data)
        except (KeyError, TypeError) as exc:
            raise _Exit(FAILURE, [f"{args.events}: malformed events: {exc}"]) from None
        _report(args.events, validate_events(tm.model, evs))
        return evs
    return tm.events


# -- commands ---------------------------------------------------------------------

def cmd_parse(args) -> int:
    tm = _load_tm(args.model)
    if args.json:
        _write(None, json.dumps(model_to_json(tm.model), indent=2) + "\n")
    else:
        _write(None, _serialize(tm))
    return OK


def _serialize(tm: TMFile) -> str:
    try:
        return serialize_tm(tm.model, tm.events, tm.chronology)
    except InvalidModel as exc:
        raise _Exit(VIOLATION, [f"{d.code}: {d.message}" for d in exc.diagnostics]) from None


def cmd_validate(args) -> int:
    _load_tm(args.model)
    print(f"{args.model}: ok", file=sys.stderr)
    return OK


def cmd_translate_er(args) -> int:
    try:
        schema = parse_er(_read(args.schema))
    except SchemaError as exc:
        raise _Exit(VIOLATION, [d.format(args.schema) for d in exc.diagnostics]) from None
    _write(args.output, _serialize(TMFile(translate_er(schema))))
    return OK


def cmd_events(args) -> int:
    tm = _load_tm(args.model)
    evs = _events(args, tm)
    data = [{"name": e.name, "region": sorted(e.region), "time": e.time_label} for e in evs]
    _write(None, json.dumps(data, indent=2) + "\n")
    return OK


def cmd_behavior(args) -> int:
    tm = _load_tm(args.model)
    evs = _events(args, tm)
    graph = derive_chronology(tm.model, evs)
    if args.check is None:
        _write(None, graph.dumps())
        return OK
    data = _json(args.check)
    trace = data.get("events", []) if isinstance(data, dict) else data
    try:
        bad = check_conformance(graph, trace)
    except (KeyError, TypeError, ValueError) as exc:
        raise _Exit(FAILURE, [f"{args.check}: malformed trace: {exc}"]) from None
    if bad is not None:
        raise _Exit(VIOLATION, [f"{args.check}: {bad}"])
    print(f"{args.check}: conforms", file=sys.stderr)
    return OK


def cmd_simulate(args) -> int:
    tm = _load_tm(args.model)
    evs = _events(args, tm)
    try:
        store = load_store(_read(args.store))
    except MalformedStore as exc:
        raise _Exit(FAILURE, [f"{args.store}: {exc}"]) from None
    request = _json(args.request)
    if not isinstance(request, dict) or not all(isinstance(v, str) for v in request.values()):
        raise _Exit(FAILURE, [f"{args.request}: request must be a flat map of strings"])
    try:
        new, trace = run(tm.model, store, request, evs, entry=args.entry, budget=args.budget)
    except (Stuck, NonTermination, KernelArity) as exc:
        if exc.trace is not None:
            _write(args.trace_out, exc.trace.dumps())
        raise _Exit(FAILURE, [f"{args.model}: {type(exc).__name__}: {exc}"]) from None
    except (UnknownRelation, UnknownPartition, UnknownAttribute) as exc:
        raise _Exit(VIOLATION, [f"{args.model}: {type(exc).__name__}: {exc}"]) from None
    except ValueError as exc:
        raise _Exit(FAILURE, [f"{args.model}: {exc}"]) from None
    _write(args.trace_out, trace.dumps())
    if args.store_out:
        _write(args.store_out, dump_store(new))
    if trace.error is not None:
        last = trace.events[-1][0] if trace.events else "-"
        raise _Exit(VIOLATION, [f"{args.model}: {trace.error} at event {last}"])
    return OK


def cmd_check_fd(args) -> int:
    try:
        fd = parse_fd_expr(args.fd)
    except FDSyntaxError as exc:
        raise _Exit(USAGE, [f"--fd: {exc}"]) from None
    data = _json(args.relation)
    try:
        if isinstance(data, list):
            records = data
        elif isinstance(data, dict) and "key" in data:
            records = store_from_json({"r": data})["r"].records
        else:
            raise MalformedStore("expected a list of records or a relation object")
        pairs = check_fd(records, fd)
    except (MalformedStore, DuplicateKey, TypeError, AttributeError) as exc:
        raise _Exit(FAILURE, [f"{args.relation}: {exc}"]) from None
    except UnknownAttribute as exc:
        raise _Exit(VIOLATION, [f"{args.relation}: unknown attribute: {exc.args[0]}"]) from None
    if not pairs:
        print("holds")
        return OK
    for i, j in pairs:
        print(f"({i},{j})")
    return VIOLATION


def cmd_export_dot(args) -> int:
    tm = _load_tm(args.model)
    text = model_to_dot(tm.model)
    if args.behavior:
        data = _json(args.behavior)
        try:
            if isinstance(data, dict) and "edges" in data:
                graph = BehaviorGraph.from_json(data)
            else:
                evs = events_from_json(data)
                _report(args.behavior, validate_events(tm.model, evs))
                graph = derive_chronology(tm.model, evs)
        except (KeyError, TypeError) as exc:
            raise _Exit(FAILURE, [f"{args.behavior}: malformed: {exc}"]) from None
        text += behavior_to_dot(graph)
    _write(None, text)
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tmkit", description="Thinging-machine modeling toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("parse", help="parse a .tm file and print its canonical form")
    s.add_argument("model")
    s.add_argument("--json", action="store_true", help="print the model as JSON")
    s.set_defaults(fn=cmd_parse)

    s = sub.add_parser("validate", help="check a .tm file")
    s.add_argument("model")
    s.set_defaults(fn=cmd_validate)

    s = sub.add_parser("translate-er", help="translate an .ers schema into a .tm model")
    s.add_argument("schema")
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(fn=cmd_translate_er)

    s = sub.add_parser("events", help="list a model's events as JSON")
    s.add_argument("model")
    s.add_argument("--events", help="events JSON overriding those in the model")
    s.set_defaults(fn=cmd_events)

    s = sub.add_parser("behavior", help="derive the behavior graph, or check a trace against it")
    s.add_argument("model")
    s.add_argument("--events", help="events JSON overriding those in the model")
    s.add_argument("--check", metavar="TRACE", help="trace JSON to check for conformance")
    s.set_defaults(fn=cmd_behavior)

    s = sub.add_parser("simulate", help="run a request through a model")
    s.add_argument("model")
    s.add_argument("--store", required=True)
    s.add_argument("--request", required=True)
    s.add_argument("--events", help="events JSON overriding those in the model")
    s.add_argument("--trace-out", default="-")
    s.add_argument("--store-out", default=None)
    s.add_argument("--entry", default=None, help="path of the stage where the request enters")
    s.add_argument("--budget", type=int, default=10_000)
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("check-fd", help="check a functional dependency on a relation")
    s.add_argument("relation")
    s.add_argument("--fd", required=True)
    s.set_defaults(fn=cmd_check_fd)

    s = sub.add_parser("export-dot", help="render a model as Graphviz DOT")
    s.add_argument("model")
    s.add_argument("--behavior", help="events or behavior JSON to render as a second graph")
    s.set_defaults(fn=cmd_export_dot)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.fn(args)
    except _Exit as e:
        for line in e.lines:
            print(line, file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
