import pytest

from tmkit.dsl import parse_tm
from tmkit.events import check_conformance, derive_chronology
from tmkit.simulator import KernelArity, NonTermination, Stuck, find_entry, run
from tmkit.store import Relation, Store, UnknownPartition


def store(*records, name="r", key=("ID",)):
    return Store({name: Relation.flat(key, records)})


def steps(trace):
    return [(s.stage, s.outcome) for s in trace.steps if not s.embedded]


def test_plain_flow_passes_the_request_along():
    tm = parse_tm("""
    thimac A { transfer in; receive; process; release; transfer out; }
    thimac B { transfer in; receive; }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.process;
    flow A.process -> A.release;
    flow A.release -> A.transfer_out;
    flow A.transfer_out -> B.transfer_in;
    flow B.transfer_in -> B.receive;
    """)
    with pytest.raises(Stuck) as exc:
        run(tm.model, store(), {"ID": "1"})
    assert exc.value.stage.path == "B.receive"
    assert [s.stage for s in exc.value.trace.steps][-1] == "B.receive"


def test_token_may_rest_in_a_create_stage():
    tm = parse_tm("""
    thimac A { transfer in; receive; process kernel=extract("ID"); }
    thimac B { create; }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.process;
    trigger A.process -> B.create;
    """)
    _, trace = run(tm.model, store(), {"ID": "7"})
    assert steps(trace) == [("A.transfer_in", "-"), ("A.receive", "-"), ("A.process", "-"), ("B.create", "-")]
    embedded = [s for s in trace.steps if s.embedded]
    assert [(s.stage, s.token) for s in embedded] == [("A.process", "FieldValue(ID=7)")]


def test_guard_dispatch_and_iteration():
    tm = parse_tm("""
    thimac Q { transfer in; receive; process kernel=extract("ID"); }
    thimac F kind=set {
      process kernel=iterate("r");
      release;
      transfer out;
      thimac T kind=individual { transfer in; receive; process kernel=compare_eq("ID"); }
    }
    thimac Hit { create; }
    thimac Miss { create; }
    thimac End { create; }
    flow Q.transfer_in -> Q.receive;
    flow Q.receive -> Q.process;
    trigger Q.process -> F.process;
    flow F.process -> F.release;
    flow F.release -> F.transfer_out;
    flow F.transfer_out -> F.T.transfer_in;
    flow F.T.transfer_in -> F.T.receive;
    flow F.T.receive -> F.T.process;
    trigger F.T.process -> Hit.create guard="equal";
    trigger F.T.process -> Miss.create guard="not-equal";
    trigger Miss.create -> F.process;
    trigger F.process -> End.create guard="EOF";
    """)
    s = store({"ID": "1"}, {"ID": "2"})
    _, trace = run(tm.model, s, {"ID": "2"})
    outcomes = [o for st, o in steps(trace) if o != "-"]
    assert outcomes == ["next", "not-equal", "next", "equal"]
    assert steps(trace)[-1] == ("Hit.create", "-")
    _, trace = run(tm.model, s, {"ID": "3"})
    assert [o for _, o in steps(trace) if o != "-"] == ["next", "not-equal", "next", "not-equal", "EOF"]
    assert steps(trace)[-1] == ("End.create", "-")


def test_gated_stage_waits_for_both_tokens():
    tm = parse_tm("""
    thimac A { transfer in; receive; process kernel=extract("ID"); release; transfer out; }
    thimac B { transfer in; receive; process kernel=construct("ID"); }
    thimac Go { create; }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.process;
    flow A.receive -> A.release;
    flow A.release -> A.transfer_out;
    flow A.transfer_out -> B.transfer_in;
    flow B.transfer_in -> B.receive;
    flow B.receive -> B.process;
    trigger A.process -> Go.create;
    trigger Go.create -> B.process;
    """)
    _, trace = run(tm.model, store(), {"ID": "1"})
    order = [s for s, _ in steps(trace)]
    # the copy reaches B.receive first; B.process fires only after Go
    assert order.index("B.receive") < order.index("Go.create") < order.index("B.process")
    assert order[-1] == "B.process"


def test_lineage_order_is_depth_first():
    tm = parse_tm("""
    thimac A { transfer in; receive; release; transfer out; }
    thimac B { transfer in; receive; process kernel=construct; }
    thimac C { transfer in; receive; process kernel=construct; }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.release;
    flow A.release -> A.transfer_out;
    flow A.transfer_out -> B.transfer_in;
    flow A.transfer_out -> C.transfer_in;
    flow B.transfer_in -> B.receive;
    flow B.receive -> B.process;
    flow C.transfer_in -> C.receive;
    flow C.receive -> C.process;
    """)
    _, trace = run(tm.model, store(), {"ID": "1"})
    assert [s for s, _ in steps(trace)][4:] == ["B.transfer_in", "B.receive", "B.process",
                                                "C.transfer_in", "C.receive", "C.process"]


def test_kernel_arity_errors():
    tm = parse_tm("""
    thimac A { transfer in; receive; process kernel=extract("Missing"); }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.process;
    """)
    with pytest.raises(KernelArity):
        run(tm.model, store(), {"ID": "1"})


def test_replace_without_cursor_is_kernel_arity():
    tm = parse_tm("""
    thimac A { transfer in; receive; process kernel=replace_record("r", "ID"); }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.process;
    """)
    with pytest.raises(KernelArity):
        run(tm.model, store({"ID": "1"}), {"ID": "1"})


def test_step_budget():
    tm = parse_tm("""
    thimac A { transfer in; receive; process kernel=extract("ID"); }
    thimac B { create; }
    thimac C { create; }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.process;
    trigger A.process -> B.create;
    trigger B.create -> C.create;
    trigger C.create -> B.create;
    """)
    with pytest.raises(NonTermination) as exc:
        run(tm.model, store(), {"ID": "1"}, budget=50)
    assert len(exc.value.trace.steps) == 50


def test_emit_error_stops_the_run():
    tm = parse_tm("""
    thimac A { transfer in; receive; process kernel=extract("ID"); }
    thimac Bad { create kernel=emit_error("NOPE"); }
    thimac Never { create; }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.process;
    trigger A.process -> Bad.create;
    trigger Bad.create -> Never.create;
    """)
    _, trace = run(tm.model, store(), {"ID": "1"})
    assert trace.error == "NOPE"
    assert trace.steps[-1].stage == "Bad.create" and trace.steps[-1].outcome == "NOPE"
    assert trace.to_json()["error"] == "NOPE"


def test_append_to_unknown_partition_raises():
    tm = parse_tm("""
    thimac A { transfer in; receive; process kernel=construct("Ssn", "Dno"); release; transfer out; }
    thimac Ins { transfer in; receive; process kernel=append_record("e"); }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.process;
    flow A.process -> A.release;
    flow A.release -> A.transfer_out;
    flow A.transfer_out -> Ins.transfer_in;
    flow Ins.transfer_in -> Ins.receive;
    flow Ins.receive -> Ins.process;
    """)
    s = Store({"e": Relation.partitioned(["Ssn"], "Dno", {"D1": []})})
    new, _ = run(tm.model, s, {"Ssn": "1", "Dno": "D1"})
    assert new["e"].file("D1") == ({"Ssn": "1", "Dno": "D1"},)
    with pytest.raises(UnknownPartition):
        run(tm.model, s, {"Ssn": "1", "Dno": "D7"})


def test_entry_must_be_unique_or_named():
    tm = parse_tm("thimac A { transfer in; receive; } thimac B { transfer in; receive; }"
                  "flow A.transfer_in -> A.receive; flow B.transfer_in -> B.receive;")
    with pytest.raises(ValueError):
        find_entry(tm.model)
    assert find_entry(tm.model, "B.transfer_in").path == "B.transfer_in"
    with pytest.raises(ValueError):
        find_entry(tm.model, "B")


def test_invalid_model_is_refused():
    from tmkit.core import InvalidModel

    tm = parse_tm("thimac A { transfer in; receive; process; } flow A.process -> A.receive;")
    with pytest.raises(InvalidModel):
        run(tm.model, store(), {})


def test_projection_collapses_repeats():
    tm = parse_tm("""
    thimac A { transfer in; receive; process kernel=extract("ID"); }
    thimac B { create; }
    flow A.transfer_in -> A.receive;
    flow A.receive -> A.process;
    trigger A.process -> B.create guard="equal";
    trigger A.process -> B.create;
    event E1 { region = [A]; }
    event E2 { region = [B]; }
    """)
    _, trace = run(tm.model, store(), {"ID": "1"}, tm.events)
    # four steps in E1 (one embedded), one in E2; the guarded trigger stays quiet
    assert len(trace.steps) == 5
    assert trace.events == [("E1", None), ("E2", None)]
    assert check_conformance(derive_chronology(tm.model, tm.events), trace.events) is None


def test_trace_json_shape():
    tm = parse_tm("thimac A { transfer in; receive; process kernel=extract(\"ID\"); }"
                  "flow A.transfer_in -> A.receive; flow A.receive -> A.process;")
    _, trace = run(tm.model, store(), {"ID": "1"})
    data = trace.to_json()
    assert set(data) == {"steps", "events"}
    assert data["steps"][0] == {"i": 0, "stage": "A.transfer_in", "outcome": "-", "token": "Request(ID=1)"}
    assert data["steps"][-1]["embedded"] is True
    assert trace.dumps() == run(tm.model, store(), {"ID": "1"})[1].dumps()
