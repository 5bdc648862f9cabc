import random

import pytest
from hypothesis import given, settings

from strategies import models
from tmkit.core import (
    ADJACENCY, Ambiguous, FlowEdge, Kernel, Kind, ModelBuilder, NotFound, StageKind, StageRef,
    StaticModel, Thimac, errors_only, expand, resolve_path, subdiagram, validate_static,
)

S = StageKind


def order_model() -> StaticModel:
    b = ModelBuilder()
    c = b.thimac("Customer")
    b.stages(c, S.RELEASE, S.TRANSFER_OUT)
    p = b.thimac("Product")
    b.stages(p, S.TRANSFER_IN, S.RECEIVE, S.PROCESS)
    b.chain("Customer.release", "Customer.transfer_out", "Product.transfer_in", "Product.receive",
            "Product.process")
    return b.build()


def codes(model):
    return [d.code for d in validate_static(model)]


def test_order_model_is_clean():
    m = order_model()
    assert validate_static(m) == []
    assert m.stage_count == 5
    assert len(m.flows) == 4


def test_empty_model_is_valid():
    assert validate_static(ModelBuilder().build()) == []


# every ordered pair of stage kinds inside one thimac, against the adjacency table
@pytest.mark.parametrize("src", list(S))
@pytest.mark.parametrize("dst", list(S))
def test_intra_thimac_adjacency(src, dst):
    if src == dst:
        return
    b = ModelBuilder()
    t = b.thimac("T")
    b.stages(t, src, dst)
    b.flow(StageRef(t, src), StageRef(t, dst))
    expected = [] if (src, dst) in ADJACENCY else ["FLOW_ADJACENCY"]
    assert codes(b.build()) == expected


@pytest.mark.parametrize("src", list(S))
@pytest.mark.parametrize("dst", list(S))
def test_inter_thimac_flows_only_out_to_in(src, dst):
    b = ModelBuilder()
    a, c = b.thimac("A"), b.thimac("C")
    b.stage(a, src)
    b.stage(c, dst)
    b.flow(StageRef(a, src), StageRef(c, dst))
    ok = src == S.TRANSFER_OUT and dst == S.TRANSFER_IN
    assert codes(b.build()) == ([] if ok else ["FLOW_BOUNDARY"])


def test_process_to_receive_is_rejected():
    b = ModelBuilder()
    t = b.thimac("T")
    b.stages(t, S.RECEIVE, S.PROCESS)
    b.flow("T.process", "T.receive")
    (d,) = validate_static(b.build())
    assert d.code == "FLOW_ADJACENCY" and d.is_error


def test_trigger_may_join_any_two_distinct_stages():
    b = ModelBuilder()
    a, c = b.thimac("A"), b.thimac("C")
    b.stage(a, S.PROCESS)
    b.stage(c, S.RELEASE)
    b.trigger("A.process", "C.release", "equal")
    b.trigger("C.release", "A.process")
    assert codes(b.build()) == []


def test_trigger_onto_itself():
    b = ModelBuilder()
    b.stage(b.thimac("A"), S.PROCESS)
    b.trigger("A.process", "A.process")
    assert codes(b.build()) == ["TRIGGER_SELF"]


def test_unknown_guard_and_kernel_are_warnings():
    b = ModelBuilder()
    a = b.thimac("A")
    b.stage(a, S.PROCESS, Kernel("frobnicate"))
    b.stage(b.thimac("C"), S.CREATE)
    b.trigger("A.process", "C.create", "maybe")
    diags = validate_static(b.build())
    assert sorted(d.code for d in diags) == ["UNKNOWN_GUARD", "UNKNOWN_KERNEL"]
    assert errors_only(diags) == []


@pytest.mark.parametrize("kind", [S.RELEASE, S.RECEIVE, S.TRANSFER_IN, S.TRANSFER_OUT])
def test_kernels_only_on_process_and_create(kind):
    b = ModelBuilder()
    b.stage(b.thimac("A"), kind, Kernel("extract", ("x",)))
    assert codes(b.build()) == ["KERNEL_PLACEMENT"]


def test_dangling_edge_end():
    b = ModelBuilder()
    b.stage(b.thimac("A"), S.RELEASE)
    b.flow("A.release", "A.transfer_out")
    assert codes(b.build()) == ["DANGLING_REF"]


def test_duplicate_stage_and_sibling_name():
    b = ModelBuilder()
    a = b.thimac("A")
    b.stages(a, S.CREATE, S.CREATE)
    b.thimac("A")
    assert codes(b.build()) == ["DUPLICATE_NAME", "DUPLICATE_STAGE"]


def test_set_needs_member_and_attribute_cannot_hold_set():
    b = ModelBuilder()
    b.thimac("Empty", Kind.SET)
    at = b.thimac("Colour", Kind.ATTRIBUTE)
    s = b.thimac("Shades", Kind.SET, parent=at)
    b.thimac("Shade", Kind.INDIVIDUAL, parent=s)
    assert codes(b.build()) == ["ATTRIBUTE_CHILD", "SET_WITHOUT_MEMBER"]


def test_containment_cycle_and_stray_thimac():
    a = Thimac("A", "A", children=("B",))
    b = Thimac("B", "B", children=("A",))
    stray = Thimac("Z", "Z")
    m = StaticModel((), {"A": a, "B": b, "Z": stray}, (), ())
    assert codes(m) == ["CYCLE", "CYCLE", "UNREACHABLE"]


def test_two_parents_is_not_a_forest():
    a = Thimac("A", "A", children=("C",))
    b = Thimac("B", "B", children=("C",))
    c = Thimac("C", "C")
    m = StaticModel(("A", "B"), {"A": a, "B": b, "C": c}, (), ())
    assert "NOT_A_FOREST" in codes(m)


def test_span_carried_on_diagnostic():
    from tmkit.core import Span

    b = ModelBuilder()
    t = b.thimac("T")
    b.stages(t, S.RECEIVE, S.PROCESS)
    b.flow("T.process", "T.receive", span=Span(4, 1, 4, 5))
    (d,) = validate_static(b.build())
    assert d.format("m.tm").startswith("m.tm:4:1: error[FLOW_ADJACENCY]: ")


@settings(max_examples=60, deadline=None)
@given(models())
def test_generated_models_validate(m):
    assert errors_only(validate_static(m)) == []


@settings(max_examples=60, deadline=None)
@given(models())
def test_validation_ignores_declaration_order(m):
    rng = random.Random(0)
    roots = list(m.roots)
    flows, triggers = list(m.flows), list(m.triggers)
    for seq in (roots, flows, triggers):
        rng.shuffle(seq)
    shuffled = StaticModel(tuple(roots), dict(reversed(list(m.thimacs.items()))), tuple(flows), tuple(triggers))
    assert shuffled == m
    assert validate_static(shuffled) == validate_static(m)


def test_resolve_path():
    m = order_model()
    assert resolve_path(m, "Customer").name == "Customer"
    assert resolve_path(m, "Product.receive") == StageRef("Product", S.RECEIVE)
    with pytest.raises(NotFound):
        resolve_path(m, "")
    with pytest.raises(NotFound):
        resolve_path(m, "Product.release")
    with pytest.raises(NotFound):
        resolve_path(m, "Nobody")


def test_resolve_ambiguous_siblings():
    b = ModelBuilder()
    b.thimac("A")
    b.thimac("A")
    with pytest.raises(Ambiguous):
        resolve_path(b.build(), "A")


def test_expand_thimac_covers_descendants():
    b = ModelBuilder()
    s = b.thimac("Balls", Kind.SET)
    b.stage(s, S.CREATE)
    i = b.thimac("Ball", Kind.INDIVIDUAL, parent=s)
    b.stages(i, S.CREATE, S.RELEASE)
    m = b.build()
    assert expand(m, ["Balls"]) == {StageRef("Balls", S.CREATE), StageRef("Balls.Ball", S.CREATE),
                                    StageRef("Balls.Ball", S.RELEASE)}
    assert expand(m, ["Balls.Ball.release"]) == {StageRef("Balls.Ball", S.RELEASE)}


def test_subdiagram_keeps_internal_edges_and_ancestry():
    m = order_model()
    frag = subdiagram(m, ["Product.receive", "Product.process", "Customer.transfer_out"])
    assert set(frag.thimacs) == {"Customer", "Product"}
    assert frag.flows == (FlowEdge(StageRef("Product", S.RECEIVE), StageRef("Product", S.PROCESS)),)
    assert validate_static(frag) == []


@settings(max_examples=40, deadline=None)
@given(models())
def test_subdiagram_of_everything_is_the_model(m):
    refs = [s.ref for s in m.stages()]
    frag = subdiagram(m, refs)
    assert {e for e in frag.edges()} == set(m.edges())
    assert {s.ref for s in frag.stages()} == set(refs)
