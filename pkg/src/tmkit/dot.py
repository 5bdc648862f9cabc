"""Graphviz DOT rendering of static models and behavior graphs."""

from __future__ import annotations

from .core import STAGE_ORDER, StaticModel
from .events import BehaviorGraph


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def model_to_dot(model: StaticModel, name: str = "tm") -> str:
    """One node per stage inside nested clusters; flows solid, triggers dashed."""
    if not model.thimacs:
        return f"digraph {name} {{}}\n"
    out = [f"digraph {name} {{", "  compound=true;", "  node [shape=box];"]
    cluster_ids = {tid: f"cluster_{i}" for i, tid in enumerate(sorted(model.thimacs))}

    def block(tid: str, depth: int) -> None:
        t = model.thimacs[tid]
        pad = "  " * depth
        out.append(f"{pad}subgraph {cluster_ids[tid]} {{")
        out.append(f"{pad}  label={_q(t.name if t.kind.value == 'plain' else f'{t.name} ({t.kind.value})')};")
        for kind in STAGE_ORDER:
            st = t.stage(kind)
            if st is None:
                continue
            label = f"{t.name}.{kind.value}"
            if st.kernel is not None:
                label += f"\\n{st.kernel.name}"
            out.append(f"{pad}  {_q(st.ref.path)} [label={_q(label)}];")
        for c in sorted(t.children):
            block(c, depth + 1)
        out.append(pad + "}")

    for r in sorted(model.roots):
        block(r, 1)
    for e in sorted(model.flows, key=lambda e: (e.src, e.dst)):
        out.append(f"  {_q(e.src.path)} -> {_q(e.dst.path)};")
    for e in sorted(model.triggers, key=lambda e: (e.src, e.dst, e.guard or "")):
        attrs = "style=dashed"
        if e.guard is not None:
            attrs += f", label={_q(e.guard)}"
        out.append(f"  {_q(e.src.path)} -> {_q(e.dst.path)} [{attrs}];")
    out.append("}")
    return "\n".join(out) + "\n"


def behavior_to_dot(graph: BehaviorGraph, name: str = "behavior") -> str:
    if not graph.nodes:
        return f"digraph {name} {{}}\n"
    out = [f"digraph {name} {{", "  node [shape=ellipse];"]
    for n in graph.nodes:
        out.append(f"  {_q(n)};")
    for e in graph.edges:
        label = "" if e.guard is None else f" [label={_q(e.guard)}]"
        out.append(f"  {_q(e.src)} -> {_q(e.dst)}{label};")
    out.append("}")
    return "\n".join(out) + "\n"
