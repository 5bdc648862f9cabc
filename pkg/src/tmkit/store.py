"""In-memory relational store used by the simulator.

A relation is a keyed list of string-valued records.  A partitioned relation
keeps one file per partition value (EMPLOYEES per department); iterating the
relation walks the partitions in declared order.  Every update returns a new
Store, the old one is never touched.

JSON layout::

    {"customers": {"key": ["ID"], "records": [{"ID": "1", "Address": "a"}]},
     "employees": {"key": ["Ssn"], "partition": "Dno",
                   "partitions": {"D1": [{"Ssn": "123", "Dno": "D1"}], "D2": []}}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence

Record = Mapping[str, str]


class MalformedStore(ValueError):
    pass


class UnknownRelation(KeyError):
    pass


class UnknownAttribute(KeyError):
    pass


class UnknownPartition(KeyError):
    pass


class DuplicateKey(ValueError):
    pass


@dataclass(frozen=True)
class Relation:
    key: tuple[str, ...]
    files: tuple[tuple[str, tuple[Record, ...]], ...] = (("", ()),)
    partition: Optional[str] = None

    @classmethod
    def flat(cls, key: Sequence[str], records: Iterable[Record] = ()) -> "Relation":
        return cls(tuple(key), (("", tuple(dict(r) for r in records)),))

    @classmethod
    def partitioned(cls, key: Sequence[str], attribute: str,
                    parts: Mapping[str, Iterable[Record]]) -> "Relation":
        return cls(tuple(key), tuple((p, tuple(dict(r) for r in recs)) for p, recs in parts.items()),
                   attribute)

    @property
    def records(self) -> tuple[Record, ...]:
        return tuple(r for _, recs in self.files for r in recs)

    @property
    def partitions(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.files)

    def file(self, partition: str) -> tuple[Record, ...]:
        for p, recs in self.files:
            if p == partition:
                return recs
        raise UnknownPartition(partition)

    def key_of(self, record: Record) -> tuple[str, ...]:
        return tuple(record.get(k, "") for k in self.key)

    def attributes(self) -> set[str]:
        out = set(self.key)
        if self.partition:
            out.add(self.partition)
        for r in self.records:
            out.update(r)
        return out

    def append(self, record: Record, partition: Optional[str] = None) -> "Relation":
        """New relation with ``record`` added to the end of its file."""
        k = self.key_of(record)
        if any(self.key_of(r) == k for r in self.records):
            raise DuplicateKey(f"key {dict(zip(self.key, k))} already present")
        target = "" if self.partition is None else partition
        if target is None:
            target = record.get(self.partition)
        if target not in self.partitions:
            raise UnknownPartition(target)
        rec = dict(record)
        if self.partition is not None:
            rec[self.partition] = target
        files = tuple((p, recs + (rec,)) if p == target else (p, recs) for p, recs in self.files)
        return replace(self, files=files)

    def replace_at(self, index: int, record: Record) -> "Relation":
        """New relation with the ``index``-th record (iteration order) swapped."""
        files, seen = [], 0
        for p, recs in self.files:
            if seen <= index < seen + len(recs):
                recs = recs[: index - seen] + (dict(record),) + recs[index - seen + 1:]
            seen += len(recs)
            files.append((p, recs))
        if index >= seen or index < 0:
            raise IndexError(index)
        return replace(self, files=tuple(files))

    def check(self, name: str = "") -> None:
        """Raise MalformedStore unless keys are unique and partitions coherent."""
        seen = set()
        for p, recs in self.files:
            for r in recs:
                k = self.key_of(r)
                if k in seen:
                    raise MalformedStore(f"{name}: duplicate key {k}")
                seen.add(k)
                if self.partition is not None and r.get(self.partition, p) != p:
                    raise MalformedStore(f"{name}: record {k} filed under {p!r} "
                                         f"but has {self.partition}={r.get(self.partition)!r}")
        if len(set(self.partitions)) != len(self.partitions):
            raise MalformedStore(f"{name}: repeated partition")


@dataclass(frozen=True)
class Store:
    relations: Mapping[str, Relation] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise UnknownRelation(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    def with_relation(self, name: str, rel: Relation) -> "Store":
        rels = dict(self.relations)
        rels[name] = rel
        return Store(rels)


def load_store(text: str) -> Store:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedStore(f"not JSON: {exc}") from None
    return store_from_json(data)


def store_from_json(data) -> Store:
    if not isinstance(data, dict):
        raise MalformedStore("store must be a JSON object")
    rels = {}
    for name, spec in data.items():
        if not isinstance(spec, dict) or "key" not in spec:
            raise MalformedStore(f"{name}: expected an object with 'key'")
        key = spec["key"]
        if isinstance(key, str):
            key = [key]
        if not key or not all(isinstance(k, str) for k in key):
            raise MalformedStore(f"{name}: key must be a nonempty list of names")
        part = spec.get("partition")
        if part is None:
            if "partitions" in spec:
                raise MalformedStore(f"{name}: 'partitions' without 'partition' attribute")
            rel = Relation.flat(key, _records(name, spec.get("records", [])))
        else:
            if "partitions" in spec:
                parts = {p: _records(name, recs) for p, recs in spec["partitions"].items()}
            else:
                parts = {}
                for r in _records(name, spec.get("records", [])):
                    if part not in r:
                        raise MalformedStore(f"{name}: record without partition attribute {part!r}")
                    parts.setdefault(r[part], []).append(r)
            rel = Relation.partitioned(key, part, parts)
        rel.check(name)
        rels[name] = rel
    return Store(rels)


def _records(name, recs) -> list[dict]:
    if not isinstance(recs, list):
        raise MalformedStore(f"{name}: records must be a list")
    out = []
    for r in recs:
        if not isinstance(r, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in r.items()):
            raise MalformedStore(f"{name}: records are flat string maps, got {r!r}")
        out.append(dict(r))
    return out


def store_to_json(store: Store) -> dict:
    out = {}
    for name in sorted(store.relations):
        rel = store.relations[name]
        spec: dict = {"key": list(rel.key)}
        if rel.partition is None:
            spec["records"] = [dict(sorted(r.items())) for r in rel.records]
        else:
            spec["partition"] = rel.partition
            spec["partitions"] = {p: [dict(sorted(r.items())) for r in recs] for p, recs in rel.files}
        out[name] = spec
    return out


def dump_store(store: Store) -> str:
    return json.dumps(store_to_json(store), indent=2, ensure_ascii=False) + "\n"


# -- functional dependencies ----------------------------------------------------

def check_fd(relation, fd) -> list[tuple[int, int]]:
    """Pairs of record indices that agree on ``fd.lhs`` but not on ``fd.rhs``.

    An empty list means the dependency holds.  ``relation`` is a Relation or
    a sequence of records.
    """
    records = relation.records if isinstance(relation, Relation) else tuple(relation)
    attrs = set(fd.lhs) | set(fd.rhs)
    for i, r in enumerate(records):
        missing = attrs - set(r)
        if missing:
            raise UnknownAttribute(f"record {i} lacks {sorted(missing)}")
    lhs, rhs = sorted(fd.lhs), sorted(fd.rhs)
    groups: dict[tuple, list[int]] = {}
    for i, r in enumerate(records):
        groups.setdefault(tuple(r[a] for a in lhs), []).append(i)
    bad = []
    for members in groups.values():
        for i, j in combinations(members, 2):
            if any(records[i][a] != records[j][a] for a in rhs):
                bad.append((i, j))
    return sorted(bad)
