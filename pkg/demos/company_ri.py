"""Translate the COMPANY schema, then insert employees with key checks."""

from pathlib import Path

from tmkit import RIError, errors_only, insert_with_ri, load_store, parse_er, translate_er, validate_static

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

schema = parse_er((FIXTURES / "company.ers").read_text())
model = translate_er(schema)
print("top thimacs:", ", ".join(f"{model.thimacs[r].name} ({model.thimacs[r].kind.value})" for r in model.roots))
print("validation errors:", len(errors_only(validate_static(model))))

store = load_store((FIXTURES / "company_store.json").read_text())
for ssn, dept in (("123", "D2"), ("789", "D1")):
    try:
        store, trace = insert_with_ri(store, schema, "employees", {"Ssn": ssn, "Name": "Zelaya"}, dept)
        print(f"inserted {ssn} into {dept}: {' '.join(trace.event_names)}")
    except RIError as exc:
        print(f"rejected {ssn}: {exc.code} at {exc.trace.events[-1]}")

for part, records in store["employees"].files:
    print(part, [r["Ssn"] for r in records])
