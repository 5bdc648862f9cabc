"""Two small static models and the behavior graphs their events imply.

Run with ``python demos/order_and_red_ball.py``.
"""

from pathlib import Path

from tmkit import derive_chronology, errors_only, model_to_dot, parse_tm, validate_static

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

for name in ("order.tm", "red_ball.tm"):
    tm = parse_tm((FIXTURES / name).read_text())
    problems = errors_only(validate_static(tm.model))
    print(f"== {name}: {len(tm.model.thimacs)} thimacs, {tm.model.stage_count} stages, "
          f"{len(problems)} errors")
    graph = derive_chronology(tm.model, tm.events)
    for edge in graph.edges:
        print(f"  {edge.src} -> {edge.dst}" + (f"  [{edge.guard}]" if edge.guard else ""))

# Graphviz text for the order model; pipe it through `dot -Tsvg` to draw it.
print(model_to_dot(parse_tm((FIXTURES / "order.tm").read_text()).model))
