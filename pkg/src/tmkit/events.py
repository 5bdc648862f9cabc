"""Events (regions of a static model bound to time) and behavior graphs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .core import Diagnostic, NotFound, Ambiguous, Span, StageRef, StaticModel, expand


@dataclass(frozen=True)
class Event:
    name: str
    region: frozenset[str]
    time_label: Optional[str] = None
    span: Optional[Span] = field(default=None, compare=False)

    def __init__(self, name, region=(), time_label=None, span=None):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "region", frozenset(region))
        object.__setattr__(self, "time_label", time_label)
        object.__setattr__(self, "span", span)


@dataclass(frozen=True)
class ChronologyDecl:
    src: str
    dst: str
    guard: Optional[str] = None
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True, order=True)
class BehaviorEdge:
    src: str
    dst: str
    guard: Optional[str] = None

    def accepts(self, guard: Optional[str]) -> bool:
        return self.guard is None or self.guard == guard


@dataclass(frozen=True)
class BehaviorGraph:
    nodes: tuple[str, ...] = ()
    edges: tuple[BehaviorEdge, ...] = ()

    def successors(self, name: str) -> list[BehaviorEdge]:
        return [e for e in self.edges if e.src == name]

    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [{"from": e.src, "to": e.dst, "guard": e.guard} for e in self.edges],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BehaviorGraph":
        return cls(
            tuple(data.get("nodes", [])),
            tuple(BehaviorEdge(e["from"], e["to"], e.get("guard")) for e in data.get("edges", [])),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


@dataclass(frozen=True)
class Violation:
    index: int
    src: Optional[str]
    dst: str
    guard: Optional[str] = None

    def __str__(self):
        g = f" [{self.guard}]" if self.guard else ""
        return f"step {self.index}: no behavior edge {self.src} -> {self.dst}{g}"


def region_stages(model: StaticModel, event: Event) -> set[StageRef]:
    return expand(model, event.region)


def validate_events(model: StaticModel, events: Sequence[Event],
                    chronology: Iterable[ChronologyDecl] = ()) -> list[Diagnostic]:
    """Resolution and connectivity checks; overlapping regions are allowed."""
    diags: list[Diagnostic] = []
    seen: set[str] = set()
    for ev in events:
        if ev.name in seen:
            diags.append(Diagnostic("error", "DUPLICATE_EVENT", f"event {ev.name!r} declared twice",
                                    ev.name, ev.span))
        seen.add(ev.name)
        if not ev.region:
            diags.append(Diagnostic("error", "EMPTY_REGION", f"event {ev.name!r} has an empty region",
                                    ev.name, ev.span))
            continue
        stages: set[StageRef] = set()
        bad = False
        for ref in sorted(ev.region):
            try:
                stages |= expand(model, [ref])
            except (NotFound, Ambiguous) as exc:
                bad = True
                diags.append(Diagnostic("error", "UNRESOLVED_REF", f"event {ev.name!r}: {exc}",
                                        ev.name, ev.span))
        if bad:
            continue
        if not stages:
            diags.append(Diagnostic("error", "EMPTY_REGION", f"event {ev.name!r} covers no stage",
                                    ev.name, ev.span))
        elif _components(model, stages) > 1:
            diags.append(Diagnostic("warning", "DISCONNECTED_REGION",
                                    f"event {ev.name!r} spans {_components(model, stages)} fragments",
                                    ev.name, ev.span))
    for c in chronology:
        for end in (c.src, c.dst):
            if end not in seen:
                diags.append(Diagnostic("error", "UNKNOWN_EVENT",
                                        f"chronology {c.src} -> {c.dst}: no event {end!r}", end, c.span))
    return diags


def _components(model: StaticModel, stages: set[StageRef]) -> int:
    parent = {s: s for s in stages}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in model.edges():
        if e.src in parent and e.dst in parent:
            parent[find(e.src)] = find(e.dst)
    return len({find(s) for s in stages})


def derive_chronology(model: StaticModel, events: Sequence[Event]) -> BehaviorGraph:
    """One behavior edge A->B per direct flow or trigger from A's region into
    B's region; trigger guards are carried over, self-loops dropped."""
    regions = [region_stages(model, ev) for ev in events]
    edges: list[BehaviorEdge] = []
    seen = set()
    for i, a in enumerate(events):
        for j, b in enumerate(events):
            if i == j:
                continue
            found = []
            for e in model.edges():
                if e.src in regions[i] and e.dst in regions[j]:
                    found.append(getattr(e, "guard", None))
            for g in sorted(set(found), key=lambda g: (g is not None, g or "")):
                key = (a.name, b.name, g)
                if key not in seen:
                    seen.add(key)
                    edges.append(BehaviorEdge(a.name, b.name, g))
    return BehaviorGraph(tuple(ev.name for ev in events), tuple(edges))


def declared_behavior(events: Sequence[Event], chronology: Iterable[ChronologyDecl]) -> BehaviorGraph:
    return BehaviorGraph(tuple(ev.name for ev in events),
                         tuple(BehaviorEdge(c.src, c.dst, c.guard) for c in chronology))


def check_conformance(behavior: BehaviorGraph, trace: Sequence) -> Optional[Violation]:
    """None if the trace is a legal walk, else the first illegal step.

    Trace items are ``(event, guard)`` pairs, ``{"event", "guard"}`` dicts or
    bare event names.
    """
    items = [_item(t) for t in trace]
    nodes = set(behavior.nodes)
    for i, (name, guard) in enumerate(items):
        if name not in nodes:
            return Violation(i, items[i - 1][0] if i else None, name, guard)
        if i == 0:
            continue
        prev = items[i - 1][0]
        if not any(e.dst == name and e.accepts(guard) for e in behavior.successors(prev)):
            return Violation(i, prev, name, guard)
    return None


def _item(t) -> tuple[str, Optional[str]]:
    if isinstance(t, str):
        return t, None
    if isinstance(t, dict):
        return t["event"], t.get("guard")
    name, guard = t
    return name, guard


def events_from_json(data: list) -> list[Event]:
    return [Event(d["name"], d.get("region", []), d.get("time")) for d in data]
