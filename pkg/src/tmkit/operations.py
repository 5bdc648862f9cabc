"""Ready-made TM models for common database operations, plus runners.

Each builder returns a ``TMFile`` (model, events, no chronology) whose
events are numbered in the order the operation unfolds.  The models are
written in ``.tm`` text so they double as readable examples.
"""

from __future__ import annotations

import re
from functools import lru_cache
from string import Template
from typing import Mapping, Optional, Sequence

from .dsl import KEYWORDS, TMFile, parse_tm
from .er import FD, ERSchema, set_name
from .lexer import quote
from .simulator import Trace, run
from .store import Store, UnknownAttribute

_FIXED = {"Request", "Compare", "Mismatch", "Match", "NoMatch", "NewValue", "Rebuild", "NewRecord",
          "Append", "Error", "NotEqual", "Continue", "Department", "Insert", "Rewrite", "Done", "Key"}


class RIError(Exception):
    """An insert rejected by a referential-integrity or key check."""

    def __init__(self, code: str, trace: Trace, store: Store):
        super().__init__(code)
        self.code = code
        self.trace = trace
        self.store = store


def _label(relation: str) -> str:
    parts = [p for p in re.split(r"[^A-Za-z0-9]+", relation) if p]
    name = "".join(p[:1].upper() + p[1:] for p in parts) or "File"
    if name[0].isdigit():
        name = "R" + name
    if name in _FIXED or name in KEYWORDS:
        name += "File"
    return name


def _member(label: str) -> str:
    if len(label) > 1 and label.endswith("s"):
        return label[:-1]
    return label + "Item"


def _args(names: Sequence[str]) -> str:
    return ", ".join(quote(n) for n in names)


def _fill(template: str, relation: str, **kw) -> TMFile:
    tm = _parsed(template, relation, tuple(sorted(kw.items())))
    return TMFile(tm.model, list(tm.events), list(tm.chronology))


@lru_cache(maxsize=64)
def _parsed(template: str, relation: str, kw: tuple) -> TMFile:
    file = _label(relation)
    text = Template(template).substitute(File=file, Item=_member(file), rel=quote(relation), **dict(kw))
    return parse_tm(text)


# -- insert or update an address --------------------------------------------------

INSERT_ADDRESS = """\
thimac Request {
  transfer in;
  receive;
  process kernel=extract($key);
  release;
  transfer out;
}
thimac $File kind=set {
  create;
  process kernel=iterate($rel);
  release;
  transfer out;
  thimac $Item kind=individual {
    transfer in;
    receive;
    process kernel=compare_eq($key);
  }
}
thimac Mismatch { create; }
thimac Match { create; }
thimac NoMatch { create; }
thimac NewValue {
  transfer in;
  receive;
  process kernel=extract($field);
  release;
  transfer out;
}
thimac Rebuild {
  transfer in;
  receive;
  process kernel=replace_record($rel, $field);
}
thimac NewRecord {
  transfer in;
  receive;
  process kernel=construct($key, $field);
  release;
  transfer out;
}
thimac Append {
  transfer in;
  receive;
  process kernel=append_record($rel);
}
flow Request.transfer_in -> Request.receive;
flow Request.receive -> Request.process;
flow Request.receive -> Request.release;
flow Request.release -> Request.transfer_out;
flow Request.transfer_out -> NewValue.transfer_in;
flow Request.transfer_out -> NewRecord.transfer_in;
flow NewValue.transfer_in -> NewValue.receive;
flow NewValue.receive -> NewValue.process;
flow NewRecord.transfer_in -> NewRecord.receive;
flow NewRecord.receive -> NewRecord.process;
trigger Request.process -> $File.process;
flow $File.process -> $File.release;
flow $File.release -> $File.transfer_out;
flow $File.transfer_out -> $File.$Item.transfer_in;
flow $File.$Item.transfer_in -> $File.$Item.receive;
flow $File.$Item.receive -> $File.$Item.process;
trigger $File.$Item.process -> Mismatch.create guard="not-equal";
trigger Mismatch.create -> $File.process;
trigger $File.$Item.process -> Match.create guard="equal";
trigger Match.create -> NewValue.process;
flow NewValue.process -> NewValue.release;
flow NewValue.release -> NewValue.transfer_out;
flow NewValue.transfer_out -> Rebuild.transfer_in;
flow Rebuild.transfer_in -> Rebuild.receive;
flow Rebuild.receive -> Rebuild.process;
trigger Rebuild.process -> $File.create;
trigger $File.process -> NoMatch.create guard="EOF";
trigger NoMatch.create -> NewRecord.process;
flow NewRecord.process -> NewRecord.release;
flow NewRecord.release -> NewRecord.transfer_out;
flow NewRecord.transfer_out -> Append.transfer_in;
flow Append.transfer_in -> Append.receive;
flow Append.receive -> Append.process;
event E1 { region = [Request.transfer_in, Request.receive]; }
event E2 { region = [Request.process]; }
event E3 { region = [$File.process, $File.release, $File.transfer_out]; }
event E4 { region = [$File.$Item]; }
event E5 { region = [Mismatch]; }
event E6 { region = [Match]; }
event E7 { region = [NewValue.process, NewValue.release, NewValue.transfer_out]; }
event E8 { region = [Rebuild]; }
event E9 { region = [$File.create]; }
event E10 { region = [NoMatch]; }
event E11 { region = [NewRecord.process, NewRecord.release, NewRecord.transfer_out]; }
event E12 { region = [Append]; }
"""


def insert_address_model(relation: str = "customers", key: str = "ID", field: str = "Address") -> TMFile:
    """Find the record whose ``key`` matches the request and overwrite its
    ``field``; append a new record when none matches."""
    return _fill(INSERT_ADDRESS, relation, key=quote(key), field=quote(field))


def insert_address(store: Store, request: Mapping[str, str], relation: str = "customers",
                   key: str = "ID", field: str = "Address") -> tuple[Store, Trace]:
    model, events, _ = insert_address_model(relation, key, field)
    return run(model, store, request, events)


# -- insert with key and partition checks ----------------------------------------------

INSERT_CHECKED = """\
thimac Request {
  transfer in;
  receive;
  process kernel=extract($key);
  release;
  transfer out;
  thimac Key kind=attribute { create; }
}
thimac $File kind=set {
  create;
  process kernel=iterate($rel);
  release;
  transfer out;
  thimac $Item kind=individual {
    transfer in;
    receive;
    process kernel=extract($key);
    release;
    transfer out;
  }
}
thimac Compare {
  transfer in;
  receive;
  process kernel=compare_eq($key);
}
thimac Error { create kernel=emit_error("DUPLICATE_KEY"); }
thimac NotEqual { create; }
thimac Continue { create; }
thimac NewRecord {
  transfer in;
  receive;
  process kernel=construct($fields);
  release;
  transfer out;
}
thimac Department {
  transfer in;
  receive;
  process kernel=extract($part);
}
thimac Insert {
  transfer in;
  receive;
  process kernel=append_record($rel);
}
flow Request.transfer_in -> Request.receive;
flow Request.receive -> Request.process;
flow Request.receive -> Request.release;
flow Request.release -> Request.transfer_out;
flow Request.transfer_out -> NewRecord.transfer_in;
flow Request.transfer_out -> Department.transfer_in;
flow NewRecord.transfer_in -> NewRecord.receive;
flow NewRecord.receive -> NewRecord.process;
flow Department.transfer_in -> Department.receive;
flow Department.receive -> Department.process;
trigger Request.process -> Request.Key.create;
trigger Request.Key.create -> $File.process;
flow $File.process -> $File.release;
flow $File.release -> $File.transfer_out;
flow $File.transfer_out -> $File.$Item.transfer_in;
flow $File.$Item.transfer_in -> $File.$Item.receive;
flow $File.$Item.receive -> $File.$Item.process;
flow $File.$Item.process -> $File.$Item.release;
flow $File.$Item.release -> $File.$Item.transfer_out;
flow $File.$Item.transfer_out -> Compare.transfer_in;
flow Compare.transfer_in -> Compare.receive;
flow Compare.receive -> Compare.process;
trigger Compare.process -> Error.create guard="equal";
trigger Compare.process -> NotEqual.create guard="not-equal";
trigger NotEqual.create -> $File.process;
trigger $File.process -> Continue.create guard="EOF";
trigger Continue.create -> NewRecord.process;
flow NewRecord.process -> NewRecord.release;
trigger NewRecord.process -> Department.process;
trigger Department.process -> NewRecord.release;
flow NewRecord.release -> NewRecord.transfer_out;
flow NewRecord.transfer_out -> Insert.transfer_in;
flow Insert.transfer_in -> Insert.receive;
flow Insert.receive -> Insert.process;
trigger Insert.process -> $File.create;
event E1 { region = [Request.transfer_in, Request.receive, Request.process]; }
event E2 { region = [Request.Key]; }
event E3 { region = [$File.process]; }
event E4 { region = [$File.release, $File.transfer_out, $File.$Item.transfer_in, $File.$Item.receive]; }
event E5 { region = [$File.$Item.process, $File.$Item.release, $File.$Item.transfer_out]; }
event E6 { region = [Compare]; }
event E7 { region = [Error]; }
event E8 { region = [NotEqual]; }
event E9 { region = [Continue]; }
event E10 { region = [NewRecord.process]; }
event E11 { region = [Department.process]; }
event E12 { region = [NewRecord.release, NewRecord.transfer_out, Insert.transfer_in, Insert.receive]; }
event E13 { region = [Insert.process]; }
event E14 { region = [$File.create]; }
"""


def insert_checked_model(relation: str, key: Sequence[str], partition: str,
                         fields: Sequence[str]) -> TMFile:
    """Reject the insert when the key already exists; otherwise file the new
    record under the partition named in the request."""
    return _fill(INSERT_CHECKED, relation, key=_args(key), part=quote(partition), fields=_args(fields))


def _entity_for(schema: ERSchema, relation: str):
    low = relation.lower()
    for e in schema.entities:
        if e.name.lower() == low or set_name(e.name).lower() == low:
            return e
    raise KeyError(f"no entity type for relation {relation!r}")


def insert_with_ri(store: Store, schema: ERSchema, relation: str, record: Mapping[str, str],
                   partition_value: str) -> tuple[Store, Trace]:
    """Insert ``record`` into a partitioned relation, checking its key first.

    Raises RIError (``code == "DUPLICATE_KEY"``) when a record with the same
    key exists anywhere in the relation; UnknownPartition when
    ``partition_value`` names no partition.
    """
    rel = store[relation]
    if rel.partition is None:
        raise ValueError(f"relation {relation!r} is not partitioned")
    key = _entity_for(schema, relation).key or rel.key
    request = {**record, rel.partition: partition_value}
    fields = list(dict.fromkeys([*record, rel.partition]))
    model, events, _ = insert_checked_model(relation, key, rel.partition, fields)
    new, trace = run(model, store, request, events)
    if trace.error is not None:
        raise RIError(trace.error, trace, new)
    return new, trace


# -- update under a functional dependency ---------------------------------------------

FD_UPDATE = """\
thimac Request {
  transfer in;
  receive;
  process kernel=extract($match, $set);
}
thimac $File kind=set {
  create;
  process kernel=iterate($rel);
  release;
  transfer out;
  thimac $Item kind=individual {
    transfer in;
    receive;
    process kernel=extract($match);
    release;
    transfer out;
  }
}
thimac Compare {
  transfer in;
  receive;
  process kernel=compare_eq($match);
}
thimac NotEqual { create; }
thimac Rewrite { process kernel=replace_record($rel, $set); }
thimac Done { create; }
flow Request.transfer_in -> Request.receive;
flow Request.receive -> Request.process;
trigger Request.process -> $File.process;
flow $File.process -> $File.release;
flow $File.release -> $File.transfer_out;
flow $File.transfer_out -> $File.$Item.transfer_in;
flow $File.$Item.transfer_in -> $File.$Item.receive;
flow $File.$Item.receive -> $File.$Item.process;
flow $File.$Item.process -> $File.$Item.release;
flow $File.$Item.release -> $File.$Item.transfer_out;
flow $File.$Item.transfer_out -> Compare.transfer_in;
flow Compare.transfer_in -> Compare.receive;
flow Compare.receive -> Compare.process;
trigger Compare.process -> NotEqual.create guard="not-equal";
trigger NotEqual.create -> $File.process;
trigger Compare.process -> Rewrite.process guard="equal";
trigger Rewrite.process -> $File.create;
trigger $File.create -> $File.process;
trigger $File.process -> Done.create guard="EOF";
event E1 { region = [Request]; }
event E2 { region = [$File.process]; }
event E3 { region = [$File.release, $File.transfer_out, $File.$Item]; }
event E4 { region = [Compare]; }
event E5 { region = [NotEqual]; }
event E6 { region = [Rewrite]; }
event E7 { region = [$File.create]; }
event E8 { region = [Done]; }
"""


def fd_update_model(relation: str, match_attr: str, set_attr: str) -> TMFile:
    """Set ``set_attr`` on every record whose ``match_attr`` equals the
    request's, so records agreeing on the determinant stay consistent."""
    return _fill(FD_UPDATE, relation, match=quote(match_attr), set=quote(set_attr))


def update_with_fd(store: Store, relation: str, fd: FD, match_attr: str, match_value: str,
                   set_attr: str, new_value: str) -> tuple[Store, Trace]:
    """Rewrite ``set_attr`` to ``new_value`` in every record of ``relation``
    with ``match_attr == match_value``."""
    rel = store[relation]
    if match_attr not in fd.lhs or set_attr not in fd.rhs:
        raise ValueError(f"{match_attr} -> {set_attr} is not covered by {fd}")
    if rel.records:
        have = rel.attributes()
        for a in (match_attr, set_attr):
            if a not in have:
                raise UnknownAttribute(a)
    model, events, _ = fd_update_model(relation, match_attr, set_attr)
    return run(model, store, {match_attr: match_value, set_attr: new_value}, events)

