import re
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmkit.dsl import parse_tm, serialize_tm
from tmkit.er import FD, parse_er
from tmkit.events import check_conformance, derive_chronology
from tmkit.operations import (
    RIError, fd_update_model, insert_address, insert_address_model, insert_checked_model,
    insert_with_ri, update_with_fd,
)
from tmkit.store import Relation, Store, UnknownAttribute, UnknownPartition, UnknownRelation, load_store

FIXTURES = Path(__file__).parent / "fixtures"
MATCH = re.compile(r"E1 E2 (E3 E4 E5 )*E3 E4 E6 E7 E8 E9")
ABSENT = re.compile(r"E1 E2 (E3 E4 E5 )*E3 E10 E11 E12")
EMPLOYEE = parse_er("entity EMPLOYEE { attr Ssn key; attr Name; attr Dno; }")


def customers(*pairs):
    return Store({"customers": Relation.flat(["ID"], [{"ID": i, "Address": a} for i, a in pairs])})


def names(trace):
    return " ".join(trace.event_names)


def guards(trace):
    return [g for _, g in trace.events if g is not None]


def test_fixtures_match_the_builders():
    for fn, tm in [("insert_address.tm", insert_address_model()),
                   ("employee_insert.tm", insert_checked_model("employees", ["Ssn"], "Dno",
                                                               ["Ssn", "Name", "Dno"])),
                   ("fd_update.tm", fd_update_model("staff", "Employee_Name", "Address"))]:
        text = (FIXTURES / fn).read_text()
        assert text == serialize_tm(tm.model, tm.events)
        assert parse_tm(text).model == tm.model


def test_address_update_on_second_record():
    new, trace = insert_address(customers(("1", "a"), ("2", "b")), {"ID": "2", "Address": "z"})
    assert new["customers"].records == ({"ID": "1", "Address": "a"}, {"ID": "2", "Address": "z"})
    assert trace.event_names[:2] == ["E1", "E2"]
    assert guards(trace) == ["not-equal", "equal"]
    assert MATCH.fullmatch(names(trace))


def test_address_update_on_first_record():
    _, trace = insert_address(customers(("1", "a")), {"ID": "1", "Address": "z"})
    assert trace.event_names == ["E1", "E2", "E3", "E4", "E6", "E7", "E8", "E9"]


def test_insert_into_empty_file():
    new, trace = insert_address(customers(), {"ID": "9", "Address": "q"})
    assert trace.event_names == ["E1", "E2", "E3", "E10", "E11", "E12"]
    assert trace.events[3] == ("E10", "EOF")
    assert new["customers"].records == ({"ID": "9", "Address": "q"},)


def test_absent_id_appends():
    new, trace = insert_address(customers(("1", "a"), ("2", "b"), ("3", "c")), {"ID": "9", "Address": "q"})
    assert ABSENT.fullmatch(names(trace))
    assert new["customers"].records[-1] == {"ID": "9", "Address": "q"}
    assert len(new["customers"].records) == 4


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from("abc"), max_size=8), st.integers(0, 9), st.sampled_from("xyz"))
def test_insert_address_properties(addrs, target, value):
    store = customers(*[(str(i), a) for i, a in enumerate(addrs)])
    model, events, _ = insert_address_model()
    graph = derive_chronology(model, events)
    new, trace = insert_address(store, {"ID": str(target), "Address": value})
    assert check_conformance(graph, trace.events) is None
    assert len(trace.steps) <= 32 * max(len(addrs), 1)
    old = store["customers"].records
    if target < len(addrs):
        assert MATCH.fullmatch(names(trace))
        assert trace.event_names.count("E5") == target
        expected = list(old)
        expected[target] = {"ID": str(target), "Address": value}
        assert list(new["customers"].records) == expected
    else:
        assert ABSENT.fullmatch(names(trace))
        assert new["customers"].records == old + ({"ID": str(target), "Address": value},)


def company():
    return load_store((FIXTURES / "company_store.json").read_text())


def test_duplicate_ssn_is_rejected():
    with pytest.raises(RIError) as exc:
        insert_with_ri(company(), EMPLOYEE, "employees", {"Ssn": "123", "Name": "Borg"}, "D2")
    assert exc.value.code == "DUPLICATE_KEY"
    assert exc.value.trace.event_names[-1] == "E7"
    assert exc.value.trace.events[-1] == ("E7", "equal")


def test_duplicate_in_another_department_is_rejected():
    with pytest.raises(RIError):
        insert_with_ri(company(), EMPLOYEE, "employees", {"Ssn": "456", "Name": "Wong"}, "D1")


def test_fresh_ssn_lands_in_one_partition():
    new, trace = insert_with_ri(company(), EMPLOYEE, "employees", {"Ssn": "789", "Name": "Zelaya"}, "D1")
    assert trace.event_names[-6:] == ["E9", "E10", "E11", "E12", "E13", "E14"]
    homes = [p for p, recs in new["employees"].files if any(r["Ssn"] == "789" for r in recs)]
    assert homes == ["D1"]
    assert new["employees"].file("D1")[-1] == {"Ssn": "789", "Name": "Zelaya", "Dno": "D1"}


def test_insert_into_empty_store():
    store = Store({"employees": Relation.partitioned(["Ssn"], "Dno", {"D1": []})})
    new, trace = insert_with_ri(store, EMPLOYEE, "employees", {"Ssn": "1", "Name": "A"}, "D1")
    assert trace.event_names == ["E1", "E2", "E3", "E9", "E10", "E11", "E12", "E13", "E14"]
    assert len(new["employees"].file("D1")) == 1


def test_insert_errors():
    with pytest.raises(UnknownPartition):
        insert_with_ri(company(), EMPLOYEE, "employees", {"Ssn": "789", "Name": "Z"}, "D9")
    with pytest.raises(UnknownRelation):
        insert_with_ri(company(), EMPLOYEE, "staff", {"Ssn": "789"}, "D1")
    with pytest.raises(ValueError):
        insert_with_ri(company(), EMPLOYEE, "departments", {"Dnumber": "D3"}, "D1")


def test_employee_traces_conform():
    model, events, _ = insert_checked_model("employees", ["Ssn"], "Dno", ["Ssn", "Name", "Dno"])
    graph = derive_chronology(model, events)
    for ssn in ("123", "456", "789"):
        try:
            _, trace = insert_with_ri(company(), EMPLOYEE, "employees", {"Ssn": ssn, "Name": "x"}, "D1")
        except RIError as exc:
            trace = exc.trace
        assert check_conformance(graph, trace.events) is None


def staff():
    return load_store((FIXTURES / "staff_store.json").read_text())


NAME_TO_ADDRESS = FD(["Employee_Name"], ["Address"])


def test_fd_update_rewrites_matching_tuples_only():
    before = staff()["staff"].records
    new, trace = update_with_fd(staff(), "staff", NAME_TO_ADDRESS, "Employee_Name", "Ann", "Address", "West")
    after = new["staff"].records
    for old, cur in zip(before, after):
        if old["Employee_Name"] == "Ann":
            assert cur == {**old, "Address": "West"}
        else:
            assert cur == old
    assert trace.event_names[-1] == "E8"
    assert trace.event_names.count("E6") == 2


def test_fd_update_absent_value_changes_nothing():
    new, trace = update_with_fd(staff(), "staff", NAME_TO_ADDRESS, "Employee_Name", "Zed", "Address", "W")
    assert new == staff()
    assert "E6" not in trace.event_names


def test_fd_update_errors():
    with pytest.raises(UnknownRelation):
        update_with_fd(staff(), "nobody", NAME_TO_ADDRESS, "Employee_Name", "A", "Address", "x")
    with pytest.raises(UnknownAttribute):
        update_with_fd(staff(), "staff", FD(["Employee_Name"], ["Colour"]), "Employee_Name", "A",
                       "Colour", "x")
    with pytest.raises(ValueError):
        update_with_fd(staff(), "staff", NAME_TO_ADDRESS, "Address", "A", "Employee_Name", "x")


def test_fd_update_traces_conform():
    model, events, _ = fd_update_model("staff", "Employee_Name", "Address")
    graph = derive_chronology(model, events)
    for who in ("Ann", "Bob", "Nobody"):
        _, trace = update_with_fd(staff(), "staff", NAME_TO_ADDRESS, "Employee_Name", who, "Address", "N")
        assert check_conformance(graph, trace.events) is None


def test_relation_names_become_thimac_names():
    tm = insert_address_model("client-list", "ID", "Address")
    assert "ClientList" in tm.model.roots
    assert "RequestFile" in insert_address_model("request").model.roots
