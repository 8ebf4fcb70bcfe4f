"""Assembly sequences with tool exchanges, and an independent plan checker.

The sequence is recovered from a validated search path with the stack
algorithm: starting from the root's assembly node, each popped node
contributes the trip that fits the attached object (and parks the result
when it is not the final product), then the trip that brings the base to
the assembly point. Sub-assemblies that start from the escape area are
pushed and expanded the same way. Trips are collected from the goal
backwards and reversed at the end.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

from .asmgraph import AssemblyGraph, NodeKind, PlanCore
from .errors import MalformedGraph
from .geometry import PlacementPose, Pose
from .grasp import GraspPose
from .motion import MotionTrace

STEP_KINDS = ("Pick", "Place", "Assemble", "ToolExchange", "Retreat")


@dataclass(eq=False)
class PlanStep:
    kind: str
    assembly_id: str | None
    gripper_id: str
    grasp: GraspPose | None = None
    grasp_key: tuple | None = None
    from_placement: PlacementPose | None = None
    to_placement: PlacementPose | None = None
    wrist: Pose | None = None
    motion_ref: str | None = None
    previous_gripper: str | None = None    # ToolExchange only
    task: int | None = None                # Assemble only: index into the task list

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "assembly": self.assembly_id, "gripper": self.gripper_id}
        if self.previous_gripper is not None:
            d["previous_gripper"] = self.previous_gripper
        if self.grasp is not None:
            d["grasp"] = self.grasp.to_dict()
            d["grasp_key"] = list(self.grasp_key)
        if self.from_placement is not None:
            d["from"] = self.from_placement.to_dict()
        if self.to_placement is not None:
            d["to"] = self.to_placement.to_dict()
        if self.wrist is not None:
            d["wrist_world"] = self.wrist.to_dict()
        if self.task is not None:
            d["task"] = self.task
        d["motion_ref"] = self.motion_ref
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "PlanStep":
        return cls(d["kind"], d.get("assembly"), d["gripper"],
                   GraspPose.from_dict(d["grasp"]) if "grasp" in d else None,
                   tuple(d["grasp_key"]) if "grasp_key" in d else None,
                   PlacementPose.from_dict(d["from"]) if "from" in d else None,
                   PlacementPose.from_dict(d["to"]) if "to" in d else None,
                   Pose.from_dict(d["wrist_world"]) if "wrist_world" in d else None,
                   d.get("motion_ref"), d.get("previous_gripper"), d.get("task"))


@dataclass(eq=False)
class AssemblyPlan:
    steps: list
    tree_id: int
    tree_edges: tuple
    initial_gripper: str
    total_cost: float
    cut_history: list = field(default_factory=list)
    stack_iterations: int = 0
    motions: dict = field(default_factory=dict)    # motion_ref -> MotionTrace

    def to_json(self) -> dict:
        return {
            "tree": {"id": self.tree_id, "hyperedges": list(self.tree_edges)},
            "initial_gripper": self.initial_gripper,
            "total_cost": self.total_cost,
            "cut_history": self.cut_history,
            "stack_iterations": self.stack_iterations,
            "steps": [s.to_dict() for s in self.steps],
            "motions": {k: self.motions[k].to_dict() for k in sorted(self.motions, key=_ref_order)},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    @classmethod
    def from_json(cls, d: Mapping) -> "AssemblyPlan":
        return cls([PlanStep.from_dict(s) for s in d["steps"]], int(d["tree"]["id"]),
                   tuple(d["tree"]["hyperedges"]), d["initial_gripper"], float(d["total_cost"]),
                   list(d.get("cut_history", [])), int(d.get("stack_iterations", 0)),
                   {k: MotionTrace.from_dict(v) for k, v in d.get("motions", {}).items()})

    def gripper_usage(self) -> list:
        """Grippers in the order they are mounted."""
        out = [self.initial_gripper]
        out += [s.gripper_id for s in self.steps if s.kind == "ToolExchange"]
        return out


def _ref_order(ref: str):
    return int(ref[1:]) if ref[1:].isdigit() else ref


def count_tool_exchanges(plan: AssemblyPlan) -> int:
    return sum(1 for s in plan.steps if s.kind == "ToolExchange")


# ---------------------------------------------------------------------------
# Stack algorithm
# ---------------------------------------------------------------------------

def _stage_of_action(ag: AssemblyGraph, act) -> int:
    if act.kind in ("handoff", "exchange"):
        return ag.stage_of(ag.simplified.edges[act.edge].v)
    if act.kind == "approach":
        return 0
    return act.stage


def _trips(ag: AssemblyGraph, core: PlanCore) -> dict:
    """Action indices grouped by stage (junction actions go to the later stage)."""
    out = {s: [] for s in range(len(ag.stages))}
    for i, act in enumerate(core.actions):
        out[_stage_of_action(ag, act)].append(i)
    return out


def stack_order(ag: AssemblyGraph, core: PlanCore) -> tuple:
    """Stage order recovered with the stack algorithm, and its iteration count."""
    trips = _trips(ag, core)
    if ag.stages[0].role == "deliver":
        return [0], 1
    by_role = {(st.task, st.role): st.index for st in ag.stages}
    g = ag.graph
    result_task = {g[t.result].id: k for k, t in enumerate(ag.tasks)}
    collected = []
    stack = [len(ag.tasks) - 1]
    iterations = 0
    while stack:
        iterations += 1
        t = stack.pop()
        base, attach, result = ag.task_of(t)
        attach_stage = by_role.get((t, "attach"))
        base_stage = by_role.get((t, "base"))
        if attach_stage is None or base_stage is None or not trips[base_stage]:
            raise MalformedGraph(f"task {t} ({result}) has no linked base node path")
        # connect the path through the assembly node (fit, then park)
        if (t, "park") in by_role:
            collected.append(by_role[(t, "park")])
        collected.append(attach_stage)
        if _starts_at_escape(ag, core, trips[attach_stage]):
            stack.append(result_task[attach])
        # connect the path through the corresponding base node
        collected.append(base_stage)
        if _starts_at_escape(ag, core, trips[base_stage]):
            stack.append(result_task[base])
    collected.reverse()
    return collected, iterations + 1   # the final empty-stack test counts as an iteration


def _starts_at_escape(ag, core, idx) -> bool:
    for i in idx:
        act = core.actions[i]
        if act.kind == "transfer":
            return act.circle.kind == NodeKind.ESCAPE
    return False


def generate_sequence(ag: AssemblyGraph, core: PlanCore) -> AssemblyPlan:
    """Turn a validated, grasp-assigned path into an executable step list.

    Raises
    ------
    MalformedGraph
        If a task lacks the base trip linked to its assembly node, or the
        recovered stage order disagrees with the searched path.
    """
    order, iterations = stack_order(ag, core)
    trips = _trips(ag, core)
    seq = [i for s in order for i in trips[s]]
    if seq != list(range(len(core.actions))):
        raise MalformedGraph("stack order does not reproduce the searched path")
    motions: dict = {}

    def ref(trace) -> str:
        k = f"m{len(motions)}"
        motions[k] = trace
        return k

    steps: list = []
    hand = None           # (assembly id, grasp key, circle) currently held
    tool = None
    pending = None        # motion ref of the free approach to the next Pick
    for i, act in enumerate(core.actions):
        traces = core.traces.get(i, [])
        if act.kind == "approach":
            tool = act.circle_to.gripper_id
            pending = ref(traces[0])
        elif act.kind in ("transit", "handoff"):
            pending = ref(traces[0])
            hand = None
        elif act.kind == "exchange":
            steps.append(PlanStep("ToolExchange", None, act.circle_to.gripper_id,
                                  motion_ref=ref(traces[0]), previous_gripper=tool))
            tool = act.circle_to.gripper_id
            pending = ref(traces[1])
            hand = None
        elif act.kind == "transfer":
            a, b = act.circle, act.circle_to
            st = ag.stages[act.stage]
            obj = st.object_id
            fa = ag.grasp_set(a).by_key(act.key)
            fb = ag.grasp_set(b).by_key(act.key)
            if hand is None or hand[1] != act.key or hand[2] != a:
                steps.append(PlanStep("Pick", obj, a.gripper_id, fa.grasp, act.key,
                                      from_placement=a.placement, wrist=fa.wrist_world,
                                      motion_ref=pending))
            else:
                # grasp kept across the handoff: re-pick the merged object in place
                steps.append(PlanStep("Pick", obj, a.gripper_id, fa.grasp, act.key,
                                      from_placement=a.placement, wrist=fa.wrist_world))
            pending = None
            kind = "Assemble" if (b.kind == NodeKind.ASSEMBLY and st.role == "attach") else "Place"
            steps.append(PlanStep(kind, obj, b.gripper_id, fb.grasp, act.key,
                                  to_placement=b.placement, wrist=fb.wrist_world,
                                  motion_ref=ref(traces[0]),
                                  task=b.task if kind == "Assemble" else None))
            hand = (obj, act.key, b)
        elif act.kind == "retreat":
            steps.append(PlanStep("Retreat", None, tool,
                                  motion_ref=ref(traces[0]) if traces else None))
    first = core.actions[0].circle_to.gripper_id
    mounted = ag.scene.planner.initial_gripper or first
    if mounted != first:
        # the tool stand swap happens before the very first approach
        steps.insert(0, PlanStep("ToolExchange", None, first, previous_gripper=mounted))
    tree = ag.tree
    return AssemblyPlan(steps, tree.id, tree.edges, mounted,
                        float(core.cost), list(core.cut_history), iterations, motions)


# ---------------------------------------------------------------------------
# Independent symbolic checker
# ---------------------------------------------------------------------------

def verify_plan(plan: AssemblyPlan, scene) -> list:
    """Simulate the plan symbolically; an empty list means it is sound.

    Checks single-hand operation, one tool at a time, grasp/gripper
    consistency, that only existing objects move, that the assembly point
    holds at most one object, that every fit joins the base waiting at the
    assembly point with its partner along a selected hyperedge, and that the
    final product is the root resting at the assembly point.
    """
    graph = scene.andor_graph
    ws = scene.workspace
    out = []
    edges = list(plan.tree_edges)
    for k in edges:
        if not 0 <= k < len(graph.hyperedges):
            return [f"tree refers to unknown hyperedge {k}"]
    ids = {i: a.id for i, a in enumerate(graph.assemblies)}
    joins = {}
    for k in edges:
        h = graph.hyperedges[k]
        base = graph.base_child(k)
        attach = h.children[1] if base == h.children[0] else h.children[0]
        joins[(ids[base], ids[attach])] = ids[h.parent]
    parts_of = {a.id: a.part_set for a in graph.assemblies}
    leaves = [ids[v] for v in _tree_leaves(graph, edges)]
    ap = tuple(ws.assembly_point)
    escapes = {tuple(p) for p in ws.escape_points}
    # object -> grid point (None while in hand)
    loc = {}
    for aid in leaves:
        pid = next(iter(parts_of[aid]))
        loc[aid] = tuple(ws.initial_points.get(pid, ()))
    tool = plan.initial_gripper
    hand = None           # (object, gripper, grasp key)
    base_placed = {}
    for n, s in enumerate(plan.steps):
        where = f"step {n} ({s.kind})"
        if s.kind not in STEP_KINDS:
            out.append(f"{where}: unknown step kind")
            continue
        if s.kind == "ToolExchange":
            if hand is not None:
                out.append(f"{where}: tool exchange while holding {hand[0]}")
            if s.previous_gripper is not None and s.previous_gripper != tool:
                out.append(f"{where}: exchange from {s.previous_gripper} but {tool} is mounted")
            if s.gripper_id == tool:
                out.append(f"{where}: exchange to the gripper already mounted")
            if s.gripper_id not in scene.grippers:
                out.append(f"{where}: unknown gripper {s.gripper_id}")
            tool = s.gripper_id
            continue
        if s.kind == "Retreat":
            if hand is not None:
                out.append(f"{where}: retreat while holding {hand[0]}")
            continue
        if s.gripper_id != tool:
            out.append(f"{where}: gripper mismatch, uses {s.gripper_id} while {tool} is mounted")
        if s.grasp is not None and s.grasp.gripper_id != s.gripper_id:
            out.append(f"{where}: grasp belongs to gripper {s.grasp.gripper_id}")
        if s.grasp is not None and s.assembly_id in parts_of and s.grasp.part_id not in parts_of[s.assembly_id]:
            out.append(f"{where}: grasped part {s.grasp.part_id} is not in {s.assembly_id}")
        if s.kind == "Pick":
            if hand is not None:
                out.append(f"{where}: pick while holding {hand[0]}")
            if s.assembly_id not in loc:
                out.append(f"{where}: {s.assembly_id} does not exist as a separate object")
            elif loc[s.assembly_id] is None:
                out.append(f"{where}: {s.assembly_id} is already in hand")
            elif s.from_placement is not None and tuple(s.from_placement.grid_point) != loc[s.assembly_id]:
                out.append(f"{where}: {s.assembly_id} is not at {s.from_placement.grid_point}")
            else:
                loc[s.assembly_id] = None
            hand = (s.assembly_id, s.gripper_id, s.grasp_key)
            continue
        # Place / Assemble
        if hand is None or hand[0] != s.assembly_id:
            out.append(f"{where}: {s.assembly_id} is not in hand")
            continue
        if (hand[1], hand[2]) != (s.gripper_id, s.grasp_key):
            out.append(f"{where}: grasp differs from the matching pick")
        gp = tuple(s.to_placement.grid_point) if s.to_placement is not None else None
        if s.kind == "Place":
            occupied = [a for a, p in loc.items() if p == gp and a != s.assembly_id]
            if gp == ap and occupied:
                out.append(f"{where}: assembly point already holds {occupied[0]}")
            if gp != ap and gp not in escapes:
                out.append(f"{where}: {gp} is neither the assembly point nor an escape point")
            loc[s.assembly_id] = gp
            if gp == ap:
                base_placed[s.assembly_id] = n
        else:
            at_point = [a for a, p in loc.items() if p == ap]
            base = at_point[0] if len(at_point) == 1 else None
            result = joins.get((base, s.assembly_id))
            if base is None:
                partners = sorted(b for b, a in joins if a == s.assembly_id)
                if partners:
                    out.append(f"{where}: ordering violation, base {partners[0]} was not placed first")
                else:
                    out.append(f"{where}: no base waits at the assembly point")
            elif result is None:
                out.append(f"{where}: {s.assembly_id} does not fit {base} in the selected tree")
            elif base not in base_placed or base_placed[base] > n:
                out.append(f"{where}: ordering violation, base {base} was not placed first")
            if result is not None:
                del loc[base]
                del loc[s.assembly_id]
                loc[result] = ap
        hand = None
    root = graph.assemblies[graph.root].id
    if hand is not None:
        out.append(f"plan ends holding {hand[0]}")
    if set(loc) != {root}:
        out.append(f"plan ends with objects {sorted(loc)} instead of the root {root}")
    elif edges and loc[root] != ap:
        out.append(f"root {root} is not at the assembly point")
    elif not edges and loc[root] not in escapes:
        out.append(f"single part {root} was not delivered to the escape area")
    return out


def _tree_leaves(graph, edges) -> list:
    root = graph.root
    chosen = {graph.hyperedges[k].parent: k for k in edges}
    out, stack = [], [root]
    while stack:
        v = stack.pop()
        if v in chosen:
            stack.extend(graph.hyperedges[chosen[v]].children)
        else:
            out.append(v)
    return sorted(out)
