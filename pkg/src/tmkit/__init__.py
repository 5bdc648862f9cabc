"""Thinging-machine (TM) modeling toolkit.

Static models of thimacs and stages, a ``.tm`` text format, translation of
ER schemas and functional dependencies, events and behavior graphs, and a
deterministic token-flow simulator over an in-memory relational store.
"""

from .core import (
    Ambiguous, Diagnostic, FlowEdge, InvalidModel, Kernel, Kind, ModelBuilder, NotFound, Stage,
    StageKind, StageRef, StaticModel, Thimac, TriggerEdge, errors_only, expand, resolve_path,
    subdiagram, validate_static,
)
from .dot import behavior_to_dot, model_to_dot
from .dsl import ParseError, TMFile, parse_tm, serialize_tm
from .er import (
    FD, ERSchema, EntityType, RelationshipType, SchemaError, fd_to_tm, format_er, parse_er,
    parse_fd_expr, translate_er,
)
from .events import (
    BehaviorEdge, BehaviorGraph, ChronologyDecl, Event, Violation, check_conformance,
    declared_behavior, derive_chronology, validate_events,
)
from .operations import (
    RIError, fd_update_model, insert_address, insert_address_model, insert_checked_model,
    insert_with_ri, update_with_fd,
)
from .simulator import KernelArity, NonTermination, Stuck, Trace, run
from .store import (
    DuplicateKey, MalformedStore, Relation, Store, UnknownAttribute, UnknownPartition,
    UnknownRelation, check_fd, dump_store, load_store,
)

__version__ = "0.1.0"
