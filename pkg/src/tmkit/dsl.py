"""Reader and canonical writer for the ``.tm`` text format.

::

    thimac Customer { release; transfer out; }
    thimac Product { transfer in; receive; process kernel=extract("ID"); }
    flow Customer.release -> Customer.transfer_out;
    flow Customer.transfer_out -> Product.transfer_in;
    trigger Product.process -> Customer.release guard="equal";
    event E1 { region = [Customer.release, Customer.transfer_out]; time = "t1"; }
    chronology E1 -> E2;

The parser resynchronises at ``;`` and ``}`` so one pass reports every
syntax error.  Structural rules are checked separately by validate_static.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import (
    STAGE_ORDER, Diagnostic, InvalidModel, Kind, Kernel, ModelBuilder, StageKind, StageRef, StaticModel,
    errors_only, validate_static,
)
from .events import ChronologyDecl, Event
from .lexer import SyntaxProblem, Token, TokenStream, quote, tokenize

STAGE_WORDS = ("create", "process", "release", "receive")
KEYWORDS = frozenset(
    {"thimac", "kind", "kernel", "flow", "trigger", "guard", "event", "region", "time",
     "chronology", "transfer", "in", "out", "transfer_in", "transfer_out",
     "plain", "set", "individual", "relationship", "attribute", *STAGE_WORDS}
)
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ParseError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(d.format() for d in diagnostics))


@dataclass
class TMFile:
    model: StaticModel
    events: list[Event] = field(default_factory=list)
    chronology: list[ChronologyDecl] = field(default_factory=list)

    def __iter__(self):
        return iter((self.model, self.events, self.chronology))


class _Parser:
    def __init__(self, text: str):
        tokens, self.diags = tokenize(text)
        self.ts = TokenStream(tokens, KEYWORDS)
        self.b = ModelBuilder()
        self.events: list[Event] = []
        self.chrono: list[ChronologyDecl] = []

    def error(self, tok: Token, message: str) -> None:
        self.diags.append(Diagnostic("error", "SYNTAX", message, span=tok.span))

    def parse(self) -> TMFile:
        ts = self.ts
        while ts.peek.kind != "eof":
            tok = ts.peek
            try:
                if tok.is_("thimac"):
                    self.thimac(None)
                elif tok.is_("flow") or tok.is_("trigger"):
                    self.edge()
                elif tok.is_("event"):
                    self.event()
                elif tok.is_("chronology"):
                    self.chronology()
                else:
                    raise SyntaxProblem(tok, f"expected a declaration, found {_describe(tok)}")
            except SyntaxProblem as p:
                self.error(p.token, p.message)
                ts.resync()
        if self.diags:
            raise ParseError(sorted(self.diags, key=lambda d: (d.span.line, d.span.col)))
        return TMFile(self.b.build(), self.events, self.chrono)

    def thimac(self, parent: Optional[str]) -> None:
        ts = self.ts
        start = ts.expect("thimac")
        name = ts.ident("thimac name")
        kind = Kind.PLAIN
        if ts.accept("kind"):
            ts.expect("=")
            k = ts.next()
            try:
                kind = Kind(k.text)
            except ValueError:
                raise SyntaxProblem(k, f"unknown kind {k.text!r}") from None
        ts.expect("{")
        tid = self.b.thimac(name.text, kind, parent, span=start.span)
        while True:
            tok = ts.peek
            if tok.is_("}"):
                ts.next()
                return
            if tok.kind == "eof":
                raise SyntaxProblem(tok, f"unclosed thimac {name.text!r}")
            try:
                if tok.is_("thimac"):
                    self.thimac(tid)
                else:
                    self.stage(tid)
            except SyntaxProblem as p:
                self.error(p.token, p.message)
                if ts.resync().is_("}"):
                    return

    def stage(self, owner: str) -> None:
        ts = self.ts
        tok = ts.next()
        if tok.text in STAGE_WORDS and tok.kind == "ident":
            kind = StageKind(tok.text)
        elif tok.is_("transfer"):
            d = ts.next()
            if d.is_("in"):
                kind = StageKind.TRANSFER_IN
            elif d.is_("out"):
                kind = StageKind.TRANSFER_OUT
            else:
                raise SyntaxProblem(d, f"expected 'in' or 'out', found {_describe(d)}")
        else:
            raise SyntaxProblem(tok, f"expected a stage or thimac, found {_describe(tok)}")
        kernel = None
        if ts.accept("kernel"):
            ts.expect("=")
            kname = ts.ident("kernel name")
            args = []
            if ts.accept("("):
                args.append(ts.string().text)
                while ts.accept(","):
                    args.append(ts.string().text)
                ts.expect(")")
            kernel = Kernel(kname.text, tuple(args))
        ts.expect(";")
        self.b.stage(owner, kind, kernel, span=tok.span)

    def path(self, stage_required: bool = False) -> tuple[str, Token]:
        ts = self.ts
        first = ts.ident("path")
        parts = [first.text]
        while ts.accept("."):
            tok = ts.peek
            if tok.kind == "ident" and tok.text in {k.value for k in StageKind}:
                ts.next()
                parts.append(tok.text)
                return ".".join(parts), first
            parts.append(ts.ident("path segment").text)
        if stage_required:
            raise SyntaxProblem(first, f"{'.'.join(parts)!r} does not end in a stage")
        return ".".join(parts), first

    def edge(self) -> None:
        ts = self.ts
        kw = ts.next()
        src, tok = self.path(stage_required=True)
        if ts.peek.kind != "arrow":
            raise SyntaxProblem(ts.peek, f"expected '->', found {_describe(ts.peek)}")
        ts.next()
        dst, _ = self.path(stage_required=True)
        guard = None
        if kw.is_("trigger") and ts.accept("guard"):
            ts.expect("=")
            guard = ts.string().text
        ts.expect(";")
        s, d = _split(src), _split(dst)
        if kw.is_("flow"):
            self.b.flow(s, d, span=kw.span)
        else:
            self.b.trigger(s, d, guard, span=kw.span)

    def event(self) -> None:
        ts = self.ts
        kw = ts.expect("event")
        name = ts.ident("event name")
        ts.expect("{")
        ts.expect("region")
        ts.expect("=")
        ts.expect("[")
        region = [self.path()[0]]
        while ts.accept(","):
            region.append(self.path()[0])
        ts.expect("]")
        ts.expect(";")
        time = None
        if ts.accept("time"):
            ts.expect("=")
            time = ts.string().text
            ts.expect(";")
        ts.expect("}")
        self.events.append(Event(name.text, region, time, span=kw.span))

    def chronology(self) -> None:
        ts = self.ts
        kw = ts.expect("chronology")
        a = ts.ident("event name")
        if ts.peek.kind != "arrow":
            raise SyntaxProblem(ts.peek, f"expected '->', found {_describe(ts.peek)}")
        ts.next()
        b = ts.ident("event name")
        guard = None
        if ts.accept("guard"):
            ts.expect("=")
            guard = ts.string().text
        ts.expect(";")
        self.chrono.append(ChronologyDecl(a.text, b.text, guard, span=kw.span))


def _describe(tok: Token) -> str:
    from .lexer import describe
    return describe(tok)


def _split(path: str) -> StageRef:
    owner, _, kind = path.rpartition(".")
    return StageRef(owner, StageKind(kind))


def parse_tm(text: str) -> TMFile:
    """Parse ``.tm`` text; raises ParseError carrying every diagnostic."""
    return _Parser(text).parse()


# -- canonical serialization --------------------------------------------------

def natural_key(name: str):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name)]


def _check_names(model: StaticModel) -> list[Diagnostic]:
    bad = []
    for t in model.thimacs.values():
        if not _IDENT_RE.match(t.name) or t.name in KEYWORDS:
            bad.append(Diagnostic("error", "BAD_NAME", f"{t.name!r} is not a .tm identifier", t.id))
    return bad


def serialize_tm(model: StaticModel, events: Sequence[Event] = (),
                 chrono: Sequence[ChronologyDecl] = ()) -> str:
    """Canonical text: sorted declarations, 2-space indent, one per line."""
    problems = errors_only(validate_static(model)) + _check_names(model)
    if problems:
        raise InvalidModel(problems)
    paths: dict[str, str] = {}

    def assign(tid: str, prefix: str) -> None:
        paths[tid] = prefix + model.thimacs[tid].name
        for c in model.thimacs[tid].children:
            assign(c, paths[tid] + ".")

    for r in model.roots:
        assign(r, "")
    out: list[str] = []

    def ref(r: StageRef) -> str:
        return f"{paths[r.owner]}.{r.kind.value}"

    def block(tid: str, depth: int) -> None:
        t = model.thimacs[tid]
        pad = "  " * depth
        head = f"{pad}thimac {t.name}" + ("" if t.kind == Kind.PLAIN else f" kind={t.kind.value}")
        kids = sorted(t.children, key=lambda c: model.thimacs[c].name)
        if not t.stages and not kids:
            out.append(head + " {}")
            return
        out.append(head + " {")
        for kind in STAGE_ORDER:
            st = t.stage(kind)
            if st is None:
                continue
            word = kind.value.replace("_", " ")
            out.append(f"{pad}  {word}{_kernel_text(st.kernel)};")
        for c in kids:
            block(c, depth + 1)
        out.append(pad + "}")

    for r in sorted(model.roots, key=lambda r: model.thimacs[r].name):
        block(r, 0)
    for e in sorted(model.flows, key=lambda e: (ref(e.src), ref(e.dst))):
        out.append(f"flow {ref(e.src)} -> {ref(e.dst)};")
    for e in sorted(model.triggers, key=lambda e: (ref(e.src), ref(e.dst), e.guard or "")):
        g = "" if e.guard is None else f" guard={quote(e.guard)}"
        out.append(f"trigger {ref(e.src)} -> {ref(e.dst)}{g};")
    for ev in sorted(events, key=lambda ev: natural_key(ev.name)):
        out.append(f"event {ev.name} {{")
        out.append("  region = [%s];" % ", ".join(sorted(ev.region)))
        if ev.time_label is not None:
            out.append(f"  time = {quote(ev.time_label)};")
        out.append("}")
    for c in sorted(chrono, key=lambda c: (natural_key(c.src), natural_key(c.dst), c.guard or "")):
        g = "" if c.guard is None else f" guard={quote(c.guard)}"
        out.append(f"chronology {c.src} -> {c.dst}{g};")
    return "".join(line + "\n" for line in out)


def _kernel_text(k: Optional[Kernel]) -> str:
    if k is None:
        return ""
    if not k.args:
        return f" kernel={k.name}"
    return " kernel=%s(%s)" % (k.name, ", ".join(quote(a) for a in k.args))


def model_to_json(model: StaticModel) -> dict:
    """Plain-data view of a model (the ``parse --json`` output)."""

    def thimac(tid):
        t = model.thimacs[tid]
        return {
            "name": t.name,
            "kind": t.kind.value,
            "stages": [
                {"kind": s.kind.value, **({"kernel": {"name": s.kernel.name, "args": list(s.kernel.args)}}
                                          if s.kernel else {})}
                for s in sorted(t.stages, key=lambda s: STAGE_ORDER.index(s.kind))
            ],
            "children": [thimac(c) for c in sorted(t.children, key=lambda c: model.thimacs[c].name)],
        }

    return {
        "thimacs": [thimac(r) for r in sorted(model.roots, key=lambda r: model.thimacs[r].name)],
        "flows": sorted([[e.src.path, e.dst.path] for e in model.flows]),
        "triggers": sorted([{"from": e.src.path, "to": e.dst.path, "guard": e.guard}
                            for e in model.triggers], key=lambda d: (d["from"], d["to"], d["guard"] or "")),
    }
