"""Deterministic token-flow execution of TM static models.

Firing rules
------------
* A stage that has incoming flows needs a data token; a stage that has
  incoming triggers also needs an activation (it is *gated*).  The entry
  transfer_in receives the request as its data token.
* A stage with a kernel hands its data token to the kernel; the kernel may
  return an output payload (sent along the outgoing flows) and an outcome
  label.  A stage without a kernel passes its token on unchanged.
* After a stage fires, every unguarded outgoing trigger fires, plus every
  trigger whose guard equals the outcome.  Each trigger delivers a fresh
  activation token to its target.
* A fork along several flows copies the token; targets are visited in path
  order so declaration order never matters.
* Scheduling: among enabled stages, fire the one holding the oldest token.
  Tokens are ordered by (injection, birth): a kernel's output keeps the age of
  the token it consumed, fork copies are born later, and a trigger activation
  counts as a new injection.  This advances one lineage depth-first before
  the next.
* A token with nowhere to go is an error (Stuck) unless it sits in a create
  stage, where things may simply remain created.

Kernels share a small run context: values extracted from the request are
bound by field name, and ``iterate`` keeps a cursor per relation which
``replace_record`` uses to find the current record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

from .core import (
    InvalidModel, StageKind, StageRef, StaticModel, errors_only, resolve_path, validate_static,
)
from .events import Event, region_stages
from .store import DuplicateKey, Store

DEFAULT_BUDGET = 10_000


# -- payloads -----------------------------------------------------------------

@dataclass(frozen=True)
class Request:
    fields: Mapping[str, str]

    def __str__(self):
        return "Request(%s)" % _fmt(self.fields)


@dataclass(frozen=True)
class FieldValue:
    name: str
    value: str

    def __str__(self):
        return f"FieldValue({self.name}={self.value})"


@dataclass(frozen=True)
class Record:
    fields: Mapping[str, str]

    def __str__(self):
        return "Record(%s)" % _fmt(self.fields)


@dataclass(frozen=True)
class File:
    records: tuple

    def __str__(self):
        return f"File({len(self.records)} records)"


@dataclass(frozen=True)
class Outcome:
    label: str

    def __str__(self):
        return f"Outcome({self.label})"


Payload = Union[Request, FieldValue, Record, File, Outcome]


def _fmt(fields: Mapping[str, str]) -> str:
    return ",".join(f"{k}={v}" for k, v in sorted(fields.items()))


@dataclass
class Token:
    payload: Payload
    at: StageRef
    root: int
    birth: int
    via: Optional[str] = None  # guard of the trigger that delivered it

    @property
    def age(self) -> tuple[int, int]:
        return (self.root, self.birth)


# -- errors -------------------------------------------------------------------

class SimulationError(RuntimeError):
    def __init__(self, message: str, trace: "Trace" = None):
        super().__init__(message)
        self.trace = trace


class Stuck(SimulationError):
    def __init__(self, stage: StageRef, trace=None):
        super().__init__(f"token stuck at {stage.path}", trace)
        self.stage = stage


class KernelArity(SimulationError):
    pass


class NonTermination(SimulationError):
    pass


class _Halt(Exception):
    def __init__(self, code: str):
        self.code = code


# -- trace --------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    i: int
    stage: str
    outcome: str
    token: str
    embedded: bool = False
    guard: Optional[str] = None

    def to_json(self) -> dict:
        d = {"i": self.i, "stage": self.stage, "outcome": self.outcome, "token": self.token}
        if self.embedded:
            d["embedded"] = True
        return d


@dataclass
class Trace:
    steps: list[Step] = field(default_factory=list)
    events: list[tuple[str, Optional[str]]] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def event_names(self) -> list[str]:
        return [e for e, _ in self.events]

    def to_json(self) -> dict:
        d = {
            "steps": [s.to_json() for s in self.steps],
            "events": [{"event": e, "guard": g} for e, g in self.events],
        }
        if self.error is not None:
            d["error"] = self.error
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"


class _Projector:
    """Maps fired stages onto events, collapsing consecutive repeats."""

    def __init__(self, model: StaticModel, events: Sequence[Event]):
        self.names = [ev.name for ev in events]
        self.regions = [region_stages(model, ev) for ev in events]
        self.current: Optional[int] = None

    def see(self, stage: StageRef, guard: Optional[str], out: list) -> None:
        hits = [i for i, r in enumerate(self.regions) if stage in r]
        if not hits or self.current in hits:
            return
        self.current = hits[0]
        out.append((self.names[hits[0]], guard))


# -- kernels ------------------------------------------------------------------

@dataclass
class Context:
    store: Store
    bindings: dict[str, str] = field(default_factory=dict)
    cursor: dict[str, int] = field(default_factory=dict)


KernelResult = tuple[Optional[Payload], Optional[str], list[Payload]]


def _fields_of(payload, where: str) -> Mapping[str, str]:
    if isinstance(payload, (Request, Record)):
        return payload.fields
    raise KernelArity(f"{where}: expected a request or record, got {payload}")


def _need(fields: Mapping[str, str], names, where: str) -> dict[str, str]:
    missing = [n for n in names if n not in fields]
    if missing:
        raise KernelArity(f"{where}: token lacks {missing}")
    return {n: fields[n] for n in names}


def k_extract(ctx: Context, payload, args, where) -> KernelResult:
    if not args:
        raise KernelArity(f"{where}: extract needs field names")
    vals = _need(_fields_of(payload, where), args, where)
    embedded: list[Payload] = []
    if isinstance(payload, Request):
        ctx.bindings.update(vals)
        embedded = [FieldValue(k, v) for k, v in vals.items()]
    if len(args) == 1:
        return FieldValue(args[0], vals[args[0]]), None, embedded
    return Record(vals), None, embedded


def _compare(ctx: Context, payload, args, where) -> bool:
    if isinstance(payload, FieldValue):
        names = args or (payload.name,)
        if payload.name not in names:
            raise KernelArity(f"{where}: compares {list(names)}, got {payload}")
        have = {payload.name: payload.value}
    else:
        if not args:
            raise KernelArity(f"{where}: needs field names to compare a record")
        have = _need(_fields_of(payload, where), args, where)
    unbound = [k for k in have if k not in ctx.bindings]
    if unbound:
        raise KernelArity(f"{where}: nothing bound for {unbound}")
    return all(ctx.bindings[k] == v for k, v in have.items())


def k_compare_eq(ctx, payload, args, where) -> KernelResult:
    return None, "equal" if _compare(ctx, payload, args, where) else "not-equal", []


def k_assert_eq(ctx, payload, args, where) -> KernelResult:
    if not _compare(ctx, payload, args, where):
        raise _Halt("FD_VIOLATION")
    return None, "equal", []


def k_iterate(ctx, payload, args, where) -> KernelResult:
    if len(args) != 1:
        raise KernelArity(f"{where}: iterate takes one relation name")
    name = args[0]
    records = ctx.store[name].records
    idx = ctx.cursor.get(name, -1) + 1
    ctx.cursor[name] = idx
    if idx < len(records):
        return Record(dict(records[idx])), "next", []
    return None, "EOF", []


def k_construct(ctx, payload, args, where) -> KernelResult:
    fields = _fields_of(payload, where)
    return Record(_need(fields, args, where) if args else dict(fields)), None, []


def k_replace_record(ctx, payload, args, where) -> KernelResult:
    if not args:
        raise KernelArity(f"{where}: replace_record needs a relation name")
    name, names = args[0], args[1:]
    if isinstance(payload, FieldValue):
        updates = {payload.name: payload.value}
    elif isinstance(payload, Record):
        updates = dict(payload.fields)
    else:
        unbound = [n for n in names if n not in ctx.bindings]
        if unbound or not names:
            raise KernelArity(f"{where}: no new value for {list(names) or 'any field'}")
        updates = {n: ctx.bindings[n] for n in names}
    rel = ctx.store[name]
    idx = ctx.cursor.get(name, -1)
    if not 0 <= idx < len(rel.records):
        raise KernelArity(f"{where}: no current record in {name!r}")
    new = {**rel.records[idx], **updates}
    rel = rel.replace_at(idx, new)
    ctx.store = ctx.store.with_relation(name, rel)
    return File(rel.records), None, []


def k_append_record(ctx, payload, args, where) -> KernelResult:
    if len(args) != 1:
        raise KernelArity(f"{where}: append_record takes one relation name")
    if not isinstance(payload, Record):
        raise KernelArity(f"{where}: expected a record, got {payload}")
    name = args[0]
    rel = ctx.store[name]
    part = None
    if rel.partition is not None:
        part = ctx.bindings.get(rel.partition, payload.fields.get(rel.partition))
    try:
        rel = rel.append(payload.fields, part)
    except DuplicateKey:
        raise _Halt("DUPLICATE_KEY") from None
    ctx.store = ctx.store.with_relation(name, rel)
    return File(rel.records), None, []


def k_emit_error(ctx, payload, args, where) -> KernelResult:
    raise _Halt(args[0] if args else "ERROR")


KERNELS: dict[str, Callable[..., KernelResult]] = {
    "extract": k_extract,
    "compare_eq": k_compare_eq,
    "assert_eq": k_assert_eq,
    "iterate": k_iterate,
    "construct": k_construct,
    "replace_record": k_replace_record,
    "append_record": k_append_record,
    "emit_error": k_emit_error,
}


# -- the machine ----------------------------------------------------------------

def find_entry(model: StaticModel, entry: Optional[str] = None) -> StageRef:
    """The stage where requests enter: ``entry`` if given, else the unique
    root-level transfer_in that nothing flows or triggers into."""
    if entry is not None:
        ref = resolve_path(model, entry)
        if not isinstance(ref, StageRef):
            raise ValueError(f"entry {entry!r} is not a stage")
        return ref
    targets = {e.dst for e in model.edges()}
    cands = []
    for r in model.roots:
        st = model.thimacs[r].stage(StageKind.TRANSFER_IN)
        if st is not None and st.ref not in targets:
            cands.append(st.ref)
    if len(cands) != 1:
        raise ValueError(f"expected one entry transfer_in, found {[c.path for c in cands]}")
    return cands[0]


class Machine:
    def __init__(self, model: StaticModel, events: Sequence[Event] = (), entry: Optional[str] = None,
                 budget: int = DEFAULT_BUDGET):
        problems = errors_only(validate_static(model))
        if problems:
            raise InvalidModel(problems)
        self.model = model
        self.entry = find_entry(model, entry)
        self.events = list(events)
        self.budget = budget
        self.out_flows: dict[StageRef, list[StageRef]] = {}
        self.out_triggers: dict[StageRef, list] = {}
        self.fed: set[StageRef] = {self.entry}
        self.gated: set[StageRef] = set()
        for e in model.flows:
            self.out_flows.setdefault(e.src, []).append(e.dst)
            self.fed.add(e.dst)
        for e in model.triggers:
            self.out_triggers.setdefault(e.src, []).append(e)
            self.gated.add(e.dst)
        for v in self.out_flows.values():
            v.sort()
        for v in self.out_triggers.values():
            v.sort(key=lambda e: (e.dst, e.guard or ""))

    def run(self, store: Store, request) -> tuple[Store, Trace]:
        if isinstance(request, Mapping):
            request = Request(dict(request))
        ctx = Context(store)
        trace = Trace()
        proj = _Projector(self.model, self.events)
        data: dict[StageRef, list[Token]] = {}
        acts: dict[StageRef, list[Token]] = {}
        counter = [0]

        def fresh() -> int:
            counter[0] += 1
            return counter[0]

        def put(box, tok):
            box.setdefault(tok.at, []).append(tok)

        put(data, Token(request, self.entry, 0, 0))

        def enabled(ref) -> Optional[tuple]:
            ages = []
            if ref in self.fed:
                if not data.get(ref):
                    return None
                ages.append(min(t.age for t in data[ref]))
            if ref in self.gated:
                if not acts.get(ref):
                    return None
                ages.append(min(t.age for t in acts[ref]))
            return min(ages) if ages else None

        def take(box, ref) -> Token:
            toks = box[ref]
            tok = min(toks, key=lambda t: t.age)
            toks.remove(tok)
            return tok

        def record(ref, outcome, token, embedded=False, guard=None):
            if len(trace.steps) >= self.budget:
                raise NonTermination(f"step budget {self.budget} exhausted", trace)
            trace.steps.append(Step(len(trace.steps), ref.path, outcome or "-", str(token), embedded, guard))
            proj.see(ref, guard, trace.events)

        while True:
            ready = [(age, ref) for ref in set(data) | set(acts) if (age := enabled(ref)) is not None]
            if not ready:
                break
            _, ref = min(ready)
            d = take(data, ref) if ref in self.fed else None
            a = take(acts, ref) if ref in self.gated else None
            lead = min((t for t in (d, a) if t is not None), key=lambda t: t.age)
            guard = a.via if a is not None else None
            stage = self.model.stage(ref)
            payload = d.payload if d is not None else a.payload
            outcome = None
            if stage.kernel is not None:
                fn = KERNELS.get(stage.kernel.name)
                if fn is None:
                    raise KernelArity(f"{ref.path}: no kernel named {stage.kernel.name!r}", trace)
                try:
                    out, outcome, embedded = fn(ctx, payload, stage.kernel.args, ref.path)
                except _Halt as h:
                    record(ref, h.code, payload, guard=guard)
                    trace.error = h.code
                    return ctx.store, trace
                except SimulationError as exc:
                    exc.trace = trace
                    raise
                record(ref, outcome, payload, guard=guard)
                for sub in embedded:
                    record(ref, None, sub, embedded=True)
            else:
                out = payload
                record(ref, None, payload, guard=guard)

            targets = self.out_flows.get(ref, [])
            triggers = self.out_triggers.get(ref, [])
            if out is not None and targets:
                put(data, Token(out, targets[0], lead.root, lead.birth))
                for dst in targets[1:]:
                    put(data, Token(out, dst, lead.root, fresh()))
            elif stage.kernel is None and not triggers and ref.kind != StageKind.CREATE:
                raise Stuck(ref, trace)
            for t in triggers:
                if t.guard is None or t.guard == outcome:
                    put(acts, Token(Outcome(outcome or "-"), t.dst, fresh(), 0, t.guard))
        return ctx.store, trace


def run(model: StaticModel, store: Store, request, events: Sequence[Event] = (),
        entry: Optional[str] = None, budget: int = DEFAULT_BUDGET) -> tuple[Store, Trace]:
    """Execute ``request`` against ``store``; returns the new store and trace.

    A kernel that signals a constraint failure (``emit_error``, a failed
    ``assert_eq``, a duplicate key on append) stops the run and sets
    ``trace.error``.  Stuck, KernelArity and NonTermination are raised.
    """
    return Machine(model, events, entry, budget).run(store, request)
