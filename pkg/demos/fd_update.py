"""Check a functional dependency, then change an address everywhere it must change."""

from pathlib import Path

from tmkit import check_fd, fd_to_tm, load_store, parse_fd_expr, update_with_fd

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

fd = parse_fd_expr("Employee_Name->Address")
store = load_store((FIXTURES / "staff_store.json").read_text())
print("violations before:", check_fd(store["staff"], fd))

machine = fd_to_tm(fd)
print("FD machine roots:", [machine.thimacs[r].name for r in machine.roots])

new, trace = update_with_fd(store, "staff", fd,
                            "Employee_Name", "Ann", "Address", "42 Harbor Way")
print("events:", " ".join(trace.event_names))
for record in new["staff"].records:
    print("  ", record)
print("violations after:", check_fd(new["staff"], fd))
