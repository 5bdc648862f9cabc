"""Static thinging-machine models: thimacs, stages, flows, triggers.

A model is a forest of thimacs.  Each thimac owns at most one stage of each
kind; flows (solid arrows) move things between stages and triggers (dashed
arrows) start a flow elsewhere.  Thimac ids are their dotted paths from the
root, so ``Customers.Customer`` names the individual inside the set.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Union


class Kind(str, enum.Enum):
    PLAIN = "plain"
    SET = "set"
    INDIVIDUAL = "individual"
    RELATIONSHIP = "relationship"
    ATTRIBUTE = "attribute"


class StageKind(str, enum.Enum):
    CREATE = "create"
    PROCESS = "process"
    RELEASE = "release"
    RECEIVE = "receive"
    TRANSFER_IN = "transfer_in"
    TRANSFER_OUT = "transfer_out"

    @property
    def is_port(self) -> bool:
        return self in (StageKind.TRANSFER_IN, StageKind.TRANSFER_OUT)


# canonical order of stages inside a thimac block
STAGE_ORDER = (
    StageKind.CREATE,
    StageKind.TRANSFER_IN,
    StageKind.RECEIVE,
    StageKind.PROCESS,
    StageKind.RELEASE,
    StageKind.TRANSFER_OUT,
)

# legal flows between two stages of the same thimac
ADJACENCY = frozenset(
    {
        (StageKind.TRANSFER_IN, StageKind.RECEIVE),
        (StageKind.RECEIVE, StageKind.PROCESS),
        (StageKind.RECEIVE, StageKind.RELEASE),
        (StageKind.CREATE, StageKind.PROCESS),
        (StageKind.CREATE, StageKind.RELEASE),
        (StageKind.PROCESS, StageKind.RELEASE),
        (StageKind.RELEASE, StageKind.TRANSFER_OUT),
    }
)

KERNEL_NAMES = frozenset(
    {
        "extract",
        "compare_eq",
        "iterate",
        "construct",
        "replace_record",
        "append_record",
        "assert_eq",
        "emit_error",
    }
)

OUTCOMES = frozenset({"equal", "not-equal", "next", "EOF"})


class NotFound(LookupError):
    pass


class InvalidModel(ValueError):
    def __init__(self, diagnostics: list):
        self.diagnostics = diagnostics
        super().__init__("; ".join(f"{d.code}: {d.message}" for d in diagnostics))


class Ambiguous(LookupError):
    pass


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    path: Optional[str] = None
    span: Optional[Span] = None

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def format(self, filename: str = "<input>") -> str:
        where = f"{filename}:{self.span.line}:{self.span.col}" if self.span else filename
        return f"{where}: {self.severity}[{self.code}]: {self.message}"


@dataclass(frozen=True, order=True)
class Kernel:
    name: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return "%s(%s)" % (self.name, ", ".join(self.args))


@dataclass(frozen=True, order=True)
class StageRef:
    owner: str
    kind: StageKind

    @property
    def path(self) -> str:
        return f"{self.owner}.{self.kind.value}"

    def __str__(self) -> str:
        return self.path


@dataclass(frozen=True)
class Stage:
    owner: str
    kind: StageKind
    kernel: Optional[Kernel] = None

    @property
    def ref(self) -> StageRef:
        return StageRef(self.owner, self.kind)


@dataclass(frozen=True)
class Thimac:
    id: str
    name: str
    kind: Kind = Kind.PLAIN
    children: tuple[str, ...] = ()
    stages: tuple[Stage, ...] = ()

    def stage(self, kind: StageKind) -> Optional[Stage]:
        for s in self.stages:
            if s.kind == kind:
                return s
        return None


@dataclass(frozen=True, order=True)
class FlowEdge:
    src: StageRef
    dst: StageRef


@dataclass(frozen=True, order=True)
class TriggerEdge:
    src: StageRef
    dst: StageRef
    guard: Optional[str] = None

    def _key(self):
        return (self.src, self.dst, self.guard or "")


Edge = Union[FlowEdge, TriggerEdge]
Element = Union[Thimac, StageRef]


@dataclass(frozen=True, eq=False)
class StaticModel:
    """Immutable TM static model.

    Equality is structural: declaration order of roots, children and edges
    and any recorded source spans are ignored.
    """

    roots: tuple[str, ...] = ()
    thimacs: Mapping[str, Thimac] = field(default_factory=dict)
    flows: tuple[FlowEdge, ...] = ()
    triggers: tuple[TriggerEdge, ...] = ()
    spans: Mapping[object, Span] = field(default_factory=dict)

    def _key(self):
        thimacs = sorted(
            (t.id, t.name, t.kind.value, tuple(sorted(t.children)),
             tuple(sorted((s.kind.value, s.kernel or Kernel("")) for s in t.stages)))
            for t in self.thimacs.values()
        )
        return (
            tuple(sorted(self.roots)),
            tuple(thimacs),
            tuple(sorted(self.flows)),
            tuple(sorted(self.triggers, key=TriggerEdge._key)),
        )

    def __eq__(self, other):
        if not isinstance(other, StaticModel):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return "StaticModel(%d thimacs, %d flows, %d triggers)" % (
            len(self.thimacs), len(self.flows), len(self.triggers))

    # -- navigation -------------------------------------------------------

    def walk(self) -> Iterator[Thimac]:
        """Thimacs in depth-first declaration order."""
        seen = set()

        def visit(tid):
            if tid in seen or tid not in self.thimacs:
                return
            seen.add(tid)
            t = self.thimacs[tid]
            yield t
            for c in t.children:
                yield from visit(c)

        for r in self.roots:
            yield from visit(r)

    def stages(self) -> Iterator[Stage]:
        for t in self.walk():
            yield from t.stages

    def stage(self, ref: StageRef) -> Optional[Stage]:
        t = self.thimacs.get(ref.owner)
        return t.stage(ref.kind) if t else None

    def has_stage(self, ref: StageRef) -> bool:
        return self.stage(ref) is not None

    def parent_of(self) -> dict[str, str]:
        parents = {}
        for t in self.thimacs.values():
            for c in t.children:
                parents.setdefault(c, t.id)
        return parents

    def descendants(self, tid: str) -> list[str]:
        out, stack = [], [tid]
        while stack:
            cur = stack.pop()
            if cur in out or cur not in self.thimacs:
                continue
            out.append(cur)
            stack.extend(reversed(self.thimacs[cur].children))
        return out

    def edges(self) -> Iterator[Edge]:
        yield from self.flows
        yield from self.triggers

    @property
    def stage_count(self) -> int:
        return sum(len(t.stages) for t in self.thimacs.values())

    def span_of(self, key) -> Optional[Span]:
        return self.spans.get(key)


class ModelBuilder:
    """Mutable helper that assembles a StaticModel with path ids."""

    def __init__(self):
        self._thimacs: dict[str, dict] = {}
        self._roots: list[str] = []
        self._flows: list[FlowEdge] = []
        self._triggers: list[TriggerEdge] = []
        self._spans: dict = {}

    def thimac(self, name: str, kind: Kind | str = Kind.PLAIN, parent: Optional[str] = None,
               span: Optional[Span] = None) -> str:
        base = f"{parent}.{name}" if parent else name
        tid, n = base, 1
        while tid in self._thimacs:
            n += 1
            tid = f"{base}#{n}"
        self._thimacs[tid] = {"name": name, "kind": Kind(kind), "children": [], "stages": []}
        if parent is None:
            self._roots.append(tid)
        else:
            self._thimacs[parent]["children"].append(tid)
        if span:
            self._spans[tid] = span
        return tid

    def stage(self, owner: str, kind: StageKind | str, kernel: Optional[Kernel] = None,
              span: Optional[Span] = None) -> StageRef:
        st = Stage(owner, StageKind(kind), kernel)
        self._thimacs[owner]["stages"].append(st)
        if span:
            self._spans.setdefault(st.ref, span)
        return st.ref

    def stages(self, owner: str, *kinds) -> None:
        for k in kinds:
            self.stage(owner, k)

    def flow(self, src: StageRef | str, dst: StageRef | str, span: Optional[Span] = None) -> None:
        e = FlowEdge(_ref(src), _ref(dst))
        self._flows.append(e)
        if span:
            self._spans[("flow", len(self._flows) - 1)] = span

    def chain(self, *refs) -> None:
        for a, b in zip(refs, refs[1:]):
            self.flow(a, b)

    def trigger(self, src: StageRef | str, dst: StageRef | str, guard: Optional[str] = None,
                span: Optional[Span] = None) -> None:
        e = TriggerEdge(_ref(src), _ref(dst), guard)
        self._triggers.append(e)
        if span:
            self._spans[("trigger", len(self._triggers) - 1)] = span

    def build(self) -> StaticModel:
        thimacs = {
            tid: Thimac(tid, d["name"], d["kind"], tuple(d["children"]), tuple(d["stages"]))
            for tid, d in self._thimacs.items()
        }
        return StaticModel(tuple(self._roots), thimacs, tuple(self._flows),
                           tuple(self._triggers), dict(self._spans))


def stage_ref(path: str) -> StageRef:
    """Split ``A.B.process`` into a StageRef without consulting a model."""
    owner, _, kind = path.rpartition(".")
    if not owner:
        raise NotFound(f"not a stage path: {path!r}")
    try:
        return StageRef(owner, StageKind(kind))
    except ValueError:
        raise NotFound(f"not a stage path: {path!r}") from None


def _ref(x) -> StageRef:
    return x if isinstance(x, StageRef) else stage_ref(x)


# -- validation -------------------------------------------------------------

def validate_static(model: StaticModel) -> list[Diagnostic]:
    """Check every well-formedness rule; never raises.

    Diagnostics are sorted so the result does not depend on declaration order.
    A thimac without a create stage is fine: its presence implies creation.
    """
    diags: list[Diagnostic] = []

    def err(code, msg, path=None, key=None, severity="error"):
        diags.append(Diagnostic(severity, code, msg, path, model.span_of(key if key is not None else path)))

    # structure: ids, roots, children, cycles
    for tid, t in model.thimacs.items():
        if t.id != tid:
            err("ID_MISMATCH", f"thimac stored under {tid!r} has id {t.id!r}", tid)
        if not t.name:
            err("EMPTY_NAME", "thimac name is empty", tid)
    parent_count: Counter = Counter()
    for t in model.thimacs.values():
        for c in t.children:
            parent_count[c] += 1
            if c not in model.thimacs:
                err("DANGLING_REF", f"child {c!r} of {t.id!r} does not exist", t.id)
    for r in model.roots:
        if r not in model.thimacs:
            err("DANGLING_REF", f"root {r!r} does not exist", r)
        elif parent_count[r]:
            err("NOT_A_FOREST", f"root {r!r} is also a child", r)
    for c, n in parent_count.items():
        if n > 1:
            err("NOT_A_FOREST", f"thimac {c!r} has {n} parents", c)
    reachable = {t.id for t in model.walk()}
    for tid in model.thimacs:
        if tid not in reachable:
            if _on_cycle(model, tid):
                err("CYCLE", f"thimac {tid!r} is its own ancestor", tid)
            else:
                err("UNREACHABLE", f"thimac {tid!r} is not under any root", tid)

    # sibling names
    def check_siblings(ids, where):
        names = Counter(model.thimacs[i].name for i in ids if i in model.thimacs)
        for name, n in sorted(names.items()):
            if n > 1:
                err("DUPLICATE_NAME", f"{n} siblings named {name!r} in {where}", where)

    check_siblings(model.roots, "<root>")
    for t in model.thimacs.values():
        check_siblings(t.children, t.id)

    # kinds and stages
    for t in model.thimacs.values():
        kids = [model.thimacs[c] for c in t.children if c in model.thimacs]
        if t.kind == Kind.SET and not any(k.kind in (Kind.INDIVIDUAL, Kind.SET) for k in kids):
            err("SET_WITHOUT_MEMBER", f"set {t.id!r} has no individual or subset child", t.id)
        if t.kind == Kind.ATTRIBUTE:
            for k in kids:
                if k.kind in (Kind.SET, Kind.RELATIONSHIP):
                    err("ATTRIBUTE_CHILD", f"attribute {t.id!r} contains {k.kind.value} {k.name!r}", t.id)
        counts = Counter(s.kind for s in t.stages)
        for k, n in counts.items():
            if n > 1:
                err("DUPLICATE_STAGE", f"{t.id!r} declares {k.value} {n} times", t.id)
        for s in t.stages:
            if s.owner != t.id:
                err("ID_MISMATCH", f"stage {s.kind.value} of {t.id!r} names owner {s.owner!r}", t.id)
            if s.kernel is None:
                continue
            if s.kind not in (StageKind.PROCESS, StageKind.CREATE):
                err("KERNEL_PLACEMENT", f"kernel on {s.ref.path}; only process and create run kernels",
                    s.ref.path, s.ref)
            if s.kernel.name not in KERNEL_NAMES:
                err("UNKNOWN_KERNEL", f"unknown kernel {s.kernel.name!r} on {s.ref.path}",
                    s.ref.path, s.ref, severity="warning")

    # edges
    for i, e in enumerate(model.flows):
        key = ("flow", i)
        label = f"flow {e.src} -> {e.dst}"
        if not _check_ends(model, e, label, key, err):
            continue
        if e.src.owner == e.dst.owner:
            if (e.src.kind, e.dst.kind) not in ADJACENCY:
                err("FLOW_ADJACENCY", f"{label}: {e.src.kind.value} cannot flow to {e.dst.kind.value}",
                    label, key)
        elif not (e.src.kind == StageKind.TRANSFER_OUT and e.dst.kind == StageKind.TRANSFER_IN):
            err("FLOW_BOUNDARY", f"{label}: flows between thimacs go transfer_out -> transfer_in",
                label, key)
    for i, e in enumerate(model.triggers):
        key = ("trigger", i)
        label = f"trigger {e.src} -> {e.dst}"
        if not _check_ends(model, e, label, key, err):
            continue
        if e.src == e.dst:
            err("TRIGGER_SELF", f"{label}: trigger loops onto its own stage", label, key)
        if e.guard is not None and e.guard not in OUTCOMES:
            err("UNKNOWN_GUARD", f"{label}: guard {e.guard!r} is not a kernel outcome",
                label, key, severity="warning")

    return sorted(diags, key=lambda d: (d.code, d.path or "", d.message, d.severity))


def _check_ends(model, e, label, key, err) -> bool:
    ok = True
    for end in (e.src, e.dst):
        if not model.has_stage(end):
            err("DANGLING_REF", f"{label}: no stage {end.path}", label, key)
            ok = False
    return ok


def _on_cycle(model: StaticModel, start: str) -> bool:
    stack, seen = list(model.thimacs[start].children), set()
    while stack:
        cur = stack.pop()
        if cur == start:
            return True
        if cur in seen or cur not in model.thimacs:
            continue
        seen.add(cur)
        stack.extend(model.thimacs[cur].children)
    return False


def errors_only(diags: Iterable[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.is_error]


# -- paths and fragments ----------------------------------------------------

def resolve_path(model: StaticModel, dotted_path: str) -> Element:
    """Find the thimac or stage named by ``Name.Name...[.stage]``."""
    if not dotted_path:
        raise NotFound("empty path")
    parts = dotted_path.split(".")
    stage_kind = None
    if len(parts) > 1:
        try:
            stage_kind = StageKind(parts[-1])
            parts = parts[:-1]
        except ValueError:
            pass
    candidates = list(model.roots)
    current = None
    for i, name in enumerate(parts):
        hits = [c for c in candidates if c in model.thimacs and model.thimacs[c].name == name]
        if not hits:
            raise NotFound(f"no thimac {'.'.join(parts[:i + 1])!r}")
        if len(hits) > 1:
            raise Ambiguous(f"{len(hits)} thimacs named {'.'.join(parts[:i + 1])!r}")
        current = model.thimacs[hits[0]]
        candidates = list(current.children)
    if stage_kind is None:
        return current
    st = current.stage(stage_kind)
    if st is None:
        raise NotFound(f"{current.id!r} has no {stage_kind.value} stage")
    return st.ref


def expand(model: StaticModel, elements: Iterable) -> set[StageRef]:
    """Stages denoted by refs; a thimac stands for all stages beneath it."""
    out: set[StageRef] = set()
    for el in elements:
        if isinstance(el, str):
            el = resolve_path(model, el)
        if isinstance(el, StageRef):
            if not model.has_stage(el):
                raise NotFound(f"no stage {el.path}")
            out.add(el)
        elif isinstance(el, Thimac):
            if el.id not in model.thimacs:
                raise NotFound(f"no thimac {el.id!r}")
            for tid in model.descendants(el.id):
                out.update(s.ref for s in model.thimacs[tid].stages)
        else:
            raise TypeError(f"cannot resolve {el!r}")
    return out


def subdiagram(model: StaticModel, element_refs: Iterable) -> StaticModel:
    """Induced fragment: the chosen stages, their owners' ancestry, and every
    edge with both ends chosen."""
    chosen = expand(model, element_refs)
    parents = model.parent_of()
    keep: set[str] = set()
    for ref in chosen:
        tid = ref.owner
        while tid is not None and tid not in keep:
            keep.add(tid)
            tid = parents.get(tid)
    thimacs = {}
    for tid in keep:
        t = model.thimacs[tid]
        thimacs[tid] = Thimac(
            t.id, t.name, t.kind,
            tuple(c for c in t.children if c in keep),
            tuple(s for s in t.stages if s.ref in chosen),
        )
    flows = tuple(e for e in model.flows if e.src in chosen and e.dst in chosen)
    triggers = tuple(e for e in model.triggers if e.src in chosen and e.dst in chosen)
    roots = tuple(r for r in model.roots if r in keep)
    return StaticModel(roots, thimacs, flows, triggers)
