"""Audits shared by the unit and acceptance tests."""
from __future__ import annotations

import itertools

from asmplan.asmgraph import Circle, EdgeKind, NodeKind, SimplifiedGraph


def edge_kind_violations(ag, full=True) -> list:
    """Edges of an assembly graph that break their kind's defining predicate.

    Transit: same circle (site and gripper), different grasp.
    TransferAssembly: same gripper and grasp, different site.
    ToolExchange: different gripper.
    Handoff: same gripper.
    """
    bad = []

    def site(n):
        return (n.kind, n.assembly_id, n.task, n.placement)

    if full:
        for kind, a, b in ag.iter_full_edges():
            if kind == EdgeKind.TRANSIT:
                ok = site(a) == site(b) and a.gripper_id == b.gripper_id and a.grasp_index != b.grasp_index
            elif kind == EdgeKind.TRANSFER:
                ok = a.gripper_id == b.gripper_id and a.grasp_index == b.grasp_index and site(a) != site(b)
            elif kind == EdgeKind.TOOL_EXCHANGE:
                ok = a.gripper_id != b.gripper_id
            else:
                ok = a.gripper_id == b.gripper_id
            if not ok:
                bad.append((kind, a, b))
    costs = ag.scene.costs
    g = ag.simplified
    for e in g.edges:
        a, b = ag.circle_of(e.u), ag.circle_of(e.v)
        if e.kind == EdgeKind.TRANSFER:
            ok = (a.gripper_id == b.gripper_id and a.site != b.site and e.grasps
                  and e.grasps <= ag.keys(a) & ag.keys(b) and e.cost == costs.transfer)
        elif e.kind == EdgeKind.TOOL_EXCHANGE:
            ok = a.gripper_id != b.gripper_id and e.cost == costs.tool_exchange
        elif e.kind == EdgeKind.HANDOFF:
            ok = a.gripper_id == b.gripper_id and e.cost == costs.handoff
        else:
            ok = False      # transit edges never appear in the search graph
        if not ok:
            bad.append((e.kind, a, b))
    return bad


def random_graph(rng, n, p=0.3, max_cost=6, ties=True):
    """Random directed simplified graph; costs are small integers so that
    many equal-cost paths exist."""
    g = SimplifiedGraph()
    for i in range(n):
        g.add_vertex(i)
    edges = []
    kinds = [EdgeKind.TRANSFER, EdgeKind.TOOL_EXCHANGE, EdgeKind.HANDOFF]
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < p:
                c = int(rng.integers(0, max_cost)) if ties else float(rng.uniform(0, max_cost))
                g.add_edge(u, v, kinds[int(rng.integers(3))], c)
                edges.append((u, v, c))
    return g, edges


def path_cost(g, edge_ids) -> float:
    return float(sum(g.edges[e].cost for e in edge_ids))


def is_path(g, edge_ids, roots, goals) -> bool:
    if not edge_ids:
        return bool(set(roots) & set(goals))
    es = [g.edges[e] for e in edge_ids]
    return (es[0].u in roots and es[-1].v in goals
            and all(a.v == b.u for a, b in zip(es, es[1:])))


def min_exchanges_along(ag, core) -> int:
    """Fewest tool exchanges over every gripper assignment to the chosen
    path's transfer hops, with the path's resting sites held fixed.

    A gripper change between hops of the same stage is only possible while
    the object rests in the escape area; between stages it is always
    possible. A first hop that needs a tool other than the mounted one
    costs one exchange.
    """
    hops = [(a.circle.site, a.circle_to.site, a.stage) for a in core.actions if a.kind == "transfer"]
    grippers = sorted(ag.scene.grippers)
    feasible = []
    for sa, sb, _ in hops:
        feasible.append([g for g in grippers
                         if ag.keys(Circle(*sa, g)) & ag.keys(Circle(*sb, g))])
    mounted = ag.scene.planner.initial_gripper
    best = None
    for pick in itertools.product(*feasible):
        n = int(mounted is not None and pick[0] != mounted)
        ok = True
        for k in range(len(hops) - 1):
            if pick[k] == pick[k + 1]:
                continue
            same_stage = hops[k][2] == hops[k + 1][2]
            if same_stage and hops[k][1][0] != NodeKind.ESCAPE:
                ok = False
                break
            n += 1
        if ok and (best is None or n < best):
            best = n
    return best


def consecutive_exchanges(plan) -> bool:
    kinds = [s.kind for s in plan.steps]
    return any(a == b == "ToolExchange" for a, b in zip(kinds, kinds[1:]))

