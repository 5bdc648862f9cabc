"""ER schemas with functional dependencies, the ``.ers`` reader, and the
translation of schemas and FDs into TM static models.

``.ers`` syntax::

    entity EMPLOYEE {
      attr Ssn key;
      attr Name;
      fd Ssn->Name;
    }
    rel WORKS_FOR (EMPLOYEE:many, DEPARTMENT:one);
    role EMP_DEPT (EMPLOYEE:one, DEPARTMENT:one);
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .core import Diagnostic, Kind, Kernel, ModelBuilder, StageKind, StaticModel
from .lexer import SyntaxProblem, Token, TokenStream, describe, tokenize

S = StageKind
ERS_KEYWORDS = frozenset({"entity", "attr", "key", "fd", "rel", "role", "one", "many"})


class SchemaError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(d.format() for d in diagnostics))


class FDSyntaxError(ValueError):
    pass


class EmptySide(FDSyntaxError):
    pass


@dataclass(frozen=True)
class FD:
    lhs: frozenset[str]
    rhs: frozenset[str]

    def __init__(self, lhs, rhs):
        object.__setattr__(self, "lhs", frozenset(lhs))
        object.__setattr__(self, "rhs", frozenset(rhs))
        if not self.lhs or not self.rhs:
            raise EmptySide(f"functional dependency needs both sides: {self}")
        if self.lhs & self.rhs:
            raise FDSyntaxError(f"attributes on both sides of {self}: {sorted(self.lhs & self.rhs)}")

    def __str__(self):
        return "%s->%s" % (",".join(sorted(self.lhs)), ",".join(sorted(self.rhs)))

    @property
    def attributes(self) -> frozenset[str]:
        return self.lhs | self.rhs


def parse_fd_expr(text: str) -> FD:
    """``"A, B -> C"`` to FD({A, B}, {C}); the arrow may also be ``→``."""
    norm = text.replace("→", "->")
    if norm.count("->") != 1:
        raise FDSyntaxError(f"expected exactly one '->' in {text!r}")
    left, right = norm.split("->")

    def side(s):
        names = [a.strip() for a in s.split(",")]
        if names == [""]:
            return []
        for n in names:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_\-]*", n):
                raise FDSyntaxError(f"bad attribute name {n!r} in {text!r}")
        return names

    lhs, rhs = side(left), side(right)
    if not lhs or not rhs:
        raise EmptySide(f"empty side in {text!r}")
    return FD(lhs, rhs)


@dataclass(frozen=True)
class Attribute:
    name: str
    is_key: bool = False


@dataclass(frozen=True)
class EntityType:
    name: str
    attributes: tuple[Attribute, ...]
    fds: tuple[FD, ...] = ()

    @property
    def key(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes if a.is_key)

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)


@dataclass(frozen=True)
class RelationshipType:
    name: str
    endpoints: tuple[tuple[str, str], ...]  # (entity, "one" | "many")
    is_role: bool = False

    @property
    def pattern(self) -> str:
        a, b = (c for _, c in self.endpoints)
        return {("one", "one"): "1-1", ("one", "many"): "1-n",
                ("many", "one"): "n-1", ("many", "many"): "m-n"}[(a, b)]


@dataclass(frozen=True)
class ERSchema:
    entities: tuple[EntityType, ...] = ()
    relationships: tuple[RelationshipType, ...] = ()
    roles: tuple[RelationshipType, ...] = ()

    def entity(self, name: str) -> EntityType:
        for e in self.entities:
            if e.name == name:
                return e
        raise KeyError(name)


def set_name(entity: str) -> str:
    return entity if entity.upper().endswith("S") else entity + "S"


# -- .ers reader --------------------------------------------------------------

def parse_er(text: str) -> ERSchema:
    """Parse ``.ers`` text and check every schema invariant.

    Raises SchemaError listing all problems found.
    """
    tokens, diags = tokenize(text)
    ts = TokenStream(tokens, ERS_KEYWORDS)
    entities: list[tuple[EntityType, Token]] = []
    rels: list[tuple[RelationshipType, Token]] = []

    def error(tok, code, msg):
        diags.append(Diagnostic("error", code, msg, span=tok.span))

    while ts.peek.kind != "eof":
        tok = ts.peek
        try:
            if tok.is_("entity"):
                entities.append(_entity(ts, error))
            elif tok.is_("rel") or tok.is_("role"):
                rels.append(_relationship(ts, error))
            else:
                raise SyntaxProblem(tok, f"expected 'entity', 'rel' or 'role', found {describe(tok)}")
        except SyntaxProblem as p:
            error(p.token, "SYNTAX", p.message)
            ts.resync()

    names: dict[str, Token] = {}
    for ent, tok in entities:
        for n in {ent.name, set_name(ent.name)}:
            if n in names:
                error(tok, "DUPLICATE_NAME", f"name {n!r} is already used")
            names[n] = tok
    declared = {e.name for e, _ in entities}
    for rel, tok in rels:
        if rel.name in names:
            error(tok, "DUPLICATE_NAME", f"name {rel.name!r} is already used")
        names[rel.name] = tok
        for ent, _ in rel.endpoints:
            if ent not in declared:
                error(tok, "UNKNOWN_ENTITY", f"{rel.name}: entity {ent!r} is not declared")
    if diags:
        raise SchemaError(sorted(diags, key=lambda d: (d.span.line, d.span.col)))
    return ERSchema(
        tuple(e for e, _ in entities),
        tuple(r for r, _ in rels if not r.is_role),
        tuple(r for r, _ in rels if r.is_role),
    )


def _entity(ts: TokenStream, error) -> tuple[EntityType, Token]:
    kw = ts.expect("entity")
    name = ts.ident("entity name")
    ts.expect("{")
    attrs: list[Attribute] = []
    fds: list[tuple[list[Token], list[Token]]] = []
    while not ts.accept("}"):
        tok = ts.peek
        if tok.kind == "eof":
            raise SyntaxProblem(tok, f"unclosed entity {name.text!r}")
        try:
            if ts.accept("attr"):
                a = ts.ident("attribute name")
                is_key = ts.accept("key")
                ts.expect(";")
                if any(x.name == a.text for x in attrs):
                    error(a, "DUPLICATE_ATTRIBUTE", f"{name.text}.{a.text} declared twice")
                attrs.append(Attribute(a.text, is_key))
            elif ts.accept("fd"):
                lhs = [ts.ident("attribute name")]
                while ts.accept(","):
                    lhs.append(ts.ident("attribute name"))
                if ts.peek.kind != "arrow":
                    raise SyntaxProblem(ts.peek, f"expected '->', found {describe(ts.peek)}")
                ts.next()
                rhs = [ts.ident("attribute name")]
                while ts.accept(","):
                    rhs.append(ts.ident("attribute name"))
                ts.expect(";")
                fds.append((lhs, rhs))
            else:
                raise SyntaxProblem(tok, f"expected 'attr' or 'fd', found {describe(tok)}")
        except SyntaxProblem as p:
            error(p.token, "SYNTAX", p.message)
            if ts.resync().is_("}"):
                break
    if not attrs:
        error(name, "NO_ATTRIBUTES", f"entity {name.text!r} has no attributes")
    known = {a.name for a in attrs}
    good_fds = []
    for lhs, rhs in fds:
        missing = [t for t in lhs + rhs if t.text not in known]
        for t in missing:
            error(t, "UNKNOWN_ATTRIBUTE", f"fd names {t.text!r}, not an attribute of {name.text}")
        try:
            fd = FD([t.text for t in lhs], [t.text for t in rhs])
        except FDSyntaxError as exc:
            error(lhs[0], "BAD_FD", str(exc))
            continue
        if not missing:
            good_fds.append(fd)
    return EntityType(name.text, tuple(attrs), tuple(good_fds)), kw


def _relationship(ts: TokenStream, error) -> tuple[RelationshipType, Token]:
    kw = ts.next()
    name = ts.ident("relationship name")
    ts.expect("(")
    ends = []
    while True:
        ent = ts.ident("entity name")
        ts.expect(":")
        card = ts.next()
        if not (card.is_("one") or card.is_("many")):
            raise SyntaxProblem(card, f"expected 'one' or 'many', found {describe(card)}")
        ends.append((ent.text, card.text))
        if not ts.accept(","):
            break
    ts.expect(")")
    ts.expect(";")
    if len(ends) != 2:
        error(name, "UNSUPPORTED_ARITY", f"{name.text} has {len(ends)} endpoints; only binary is supported")
        ends = (ends + ends)[:2] if ends else [("?", "one")] * 2
    return RelationshipType(name.text, tuple(ends), kw.text == "role"), kw


def format_er(schema: ERSchema) -> str:
    out = []
    for e in schema.entities:
        out.append(f"entity {e.name} {{")
        for a in e.attributes:
            out.append(f"  attr {a.name}{' key' if a.is_key else ''};")
        for fd in e.fds:
            out.append(f"  fd {', '.join(sorted(fd.lhs))} -> {', '.join(sorted(fd.rhs))};")
        out.append("}")
    for r in schema.relationships + schema.roles:
        ends = ", ".join(f"{n}:{c}" for n, c in r.endpoints)
        out.append(f"{'role' if r.is_role else 'rel'} {r.name} ({ends});")
    return "".join(line + "\n" for line in out)


# -- translation --------------------------------------------------------------

def translate_er(schema: ERSchema) -> StaticModel:
    """Map a schema onto a TM static model.

    Each entity becomes a set holding one individual that holds its
    attributes.  Each relationship or role becomes a relationship thimac with
    one participant per endpoint, fed from the entity's individual.  A `many`
    end facing a `one` end gives its entity set a subset thimac, and the
    `one` participant of that pairing carries a ``uniqueness`` attribute.
    """
    b = ModelBuilder()
    individual: dict[str, str] = {}
    subset_needed: dict[str, bool] = {e.name: False for e in schema.entities}
    links = schema.relationships + schema.roles
    for r in links:
        (a, ca), (c, cc) = r.endpoints
        if ca == "many":
            subset_needed[a] = True
        if cc == "many":
            subset_needed[c] = True

    for e in schema.entities:
        sname = set_name(e.name)
        s = b.thimac(sname, Kind.SET)
        b.stage(s, S.CREATE)
        ind = b.thimac(e.name, Kind.INDIVIDUAL, parent=s)
        b.stages(ind, S.CREATE, S.RELEASE, S.TRANSFER_OUT)
        b.chain(f"{ind}.create", f"{ind}.release", f"{ind}.transfer_out")
        for attr in e.attributes:
            at = b.thimac(attr.name, Kind.ATTRIBUTE, parent=ind)
            b.stage(at, S.CREATE)
        if subset_needed[e.name]:
            sub = b.thimac("Sub" + sname, Kind.SET, parent=s)
            b.stage(sub, S.CREATE)
            member = b.thimac(e.name, Kind.INDIVIDUAL, parent=sub)
            b.stage(member, S.CREATE)
        individual[e.name] = ind

    for r in links:
        rt = b.thimac(r.name, Kind.RELATIONSHIP)
        b.stage(rt, S.CREATE)
        cards = [c for _, c in r.endpoints]
        used: set[str] = set()
        for (ent, card), other in zip(r.endpoints, reversed(cards)):
            pname = ent if card == "one" else set_name(ent)
            base, n = pname, 1
            while pname in used:
                n += 1
                pname = f"{base}_{n}"
            used.add(pname)
            p = b.thimac(pname, Kind.INDIVIDUAL if card == "one" else Kind.SET, parent=rt)
            b.stages(p, S.TRANSFER_IN, S.RECEIVE)
            b.flow(f"{p}.transfer_in", f"{p}.receive")
            if card == "many":
                m = b.thimac(ent, Kind.INDIVIDUAL, parent=p)
                b.stage(m, S.CREATE)
            elif other == "many":
                u = b.thimac("uniqueness", Kind.ATTRIBUTE, parent=p)
                b.stage(u, S.CREATE)
            b.flow(f"{individual[ent]}.transfer_out", f"{p}.transfer_in")
    return b.build()


def fd_to_tm(fd: FD, name: Optional[str] = None) -> StaticModel:
    """The two-tuple machine of an FD.

    Two tuples flow into a comparator over the left-hand attributes; an
    ``equal`` outcome triggers an assertion over the right-hand attributes.
    """
    lhs, rhs = sorted(fd.lhs), sorted(fd.rhs)
    b = ModelBuilder()
    root = b.thimac(name or "FD:%s→%s" % (",".join(lhs), ",".join(rhs)), Kind.RELATIONSHIP)
    cmp_ = b.thimac("Compare", parent=root)
    b.stages(cmp_, S.TRANSFER_IN, S.RECEIVE)
    b.stage(cmp_, S.PROCESS, Kernel("compare_eq", tuple(lhs)))
    b.chain(f"{cmp_}.transfer_in", f"{cmp_}.receive", f"{cmp_}.process")
    for tname in ("Tuple1", "Tuple2"):
        t = b.thimac(tname, Kind.INDIVIDUAL, parent=root)
        b.stages(t, S.CREATE, S.RELEASE, S.TRANSFER_OUT)
        b.chain(f"{t}.create", f"{t}.release", f"{t}.transfer_out", f"{cmp_}.transfer_in")
        for a in sorted(fd.attributes):
            at = b.thimac(a, Kind.ATTRIBUTE, parent=t)
            b.stage(at, S.CREATE)
    check = b.thimac("Assert", parent=root)
    b.stage(check, S.PROCESS, Kernel("assert_eq", tuple(rhs)))
    b.trigger(f"{cmp_}.process", f"{check}.process", "equal")
    return b.build()
