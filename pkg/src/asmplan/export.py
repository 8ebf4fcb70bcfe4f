"""Graphviz DOT export of assembly graphs.

Transfer edges are drawn red, tool exchanges blue, transits and handoffs
grey. Node shapes encode the node kind.
"""
from __future__ import annotations

from .asmgraph import AssemblyGraph, Circle, EdgeKind, NodeKind

SHAPES = {NodeKind.BASE: "box", NodeKind.ASSEMBLY: "doublecircle",
          NodeKind.ESCAPE: "ellipse", NodeKind.INITIAL: "diamond"}
COLORS = {EdgeKind.TRANSFER: "red", EdgeKind.TOOL_EXCHANGE: "blue",
          EdgeKind.TRANSIT: "gray", EdgeKind.HANDOFF: "gray"}


def _q(s: str) -> str:
    return '"' + s.replace('"', r'\"') + '"'


def simplified_dot(ag: AssemblyGraph) -> str:
    """One node per circle; bold transfer, tool-exchange and handoff bundles as edges.

    Edges cut during replanning are left out. Transfer bundles are labelled
    with the number of shared grasps.
    """
    circles = ag.all_circles()
    ids = {c: f"c{i}" for i, c in enumerate(circles)}
    lines = ["digraph simplified {", "  node [fontsize=9];"]
    for c in circles:
        lines.append(f"  {ids[c]} [label={_q(c.label() + f' |G|={len(ag.keys(c))}')}, "
                     f"shape={SHAPES[NodeKind(c.kind)]}];")
    for kind, a, b in ag.circle_edges():
        kind = EdgeKind(kind)
        extra = f', label="{len(ag.shared(a, b))}"' if kind == EdgeKind.TRANSFER else ""
        lines.append(f"  {ids[a]} -> {ids[b]} [color={COLORS[kind]}, penwidth=2, "
                     f"kind={_q(kind.value)}{extra}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def full_dot(ag: AssemblyGraph) -> str:
    """Every (circle, grasp) node and every transit, transfer and exchange edge."""
    ids: dict = {}
    nodes, edges = [], []

    def nid(node) -> str:
        key = (node.kind, node.assembly_id, node.task, node.placement, node.gripper_id, node.grasp_index)
        if key not in ids:
            ids[key] = f"g{len(ids)}"
            c = Circle(node.kind, node.assembly_id, node.task, node.placement, node.gripper_id)
            nodes.append(f"  {ids[key]} [label={_q(c.label() + ' ' + str(node.grasp_index))}, "
                         f"shape={SHAPES[NodeKind(node.kind)]}];")
        return ids[key]

    for c in ag.all_circles():
        for k in sorted(ag.keys(c)):
            nid(ag.node(c, k))
    for kind, a, b in ag.iter_full_edges():
        attrs = f"color={COLORS[kind]}, kind={_q(kind.value)}"
        if kind == EdgeKind.TRANSIT:
            attrs += ", dir=none"
        edges.append(f"  {nid(a)} -> {nid(b)} [{attrs}];")
    return "\n".join(["digraph full {", "  node [fontsize=8];"] + nodes + edges + ["}"]) + "\n"
