"""Assembly graph construction, Dijkstra search, grasp assignment and replanning.

Vocabulary
----------
circle
    One filtered grasp set: an assembly resting in one placement, grasped by
    one gripper. Its dots are the individual grasps.
stage
    One trip of one object in the schedule of a solution tree: the base
    child travelling to the assembly point, the attached child travelling
    into its fitted pose, or a finished sub-assembly being parked in the
    escape area. Stages follow the order produced by the sequencing stack
    algorithm, so a path through the stage-expanded graph is a complete
    assembly plan.

The search graph (``SimplifiedGraph``) has one vertex per (stage, circle,
context). The context remembers what later stages depend on: the base
placement while its partner is attached, and where parked sub-assemblies
wait. Its edges are bold transfer bundles (same gripper, at least one
grasp valid at both ends), tool-exchange bundles (different grippers) and
zero-cost handoffs, where the same tool releases one object and moves on to
the next. Transit (regrasp) edges stay implicit and are re-inserted by
:func:`assign_grasps`.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import andor
from .errors import BudgetExhausted, InvalidQuery, NoCommonGrasp, NoPath
from .geometry import (Assembly, Pose, PlacementPose, assembly_hull, enumerate_placements,
                       part_shapes, placement_pose_to_world, rests_stably, stable_facets)
from .grasp import (FilteredGraspSet, GraspDatabase, TableCollision, default_reachability,
                    filter_grasps, gripper_shapes, stability_index)
from .motion import Infeasible, MotionQuery, MotionTrace, check_edge
from .scene import CostConfig, Scene


class NodeKind(str, Enum):
    BASE = "Base"
    ASSEMBLY = "AssemblyNode"
    ESCAPE = "Escape"
    INITIAL = "Initial"


class EdgeKind(str, Enum):
    TRANSIT = "Transit"
    TRANSFER = "TransferAssembly"
    TOOL_EXCHANGE = "ToolExchange"
    HANDOFF = "Handoff"


@dataclass(frozen=True, order=True)
class Circle:
    kind: str
    assembly_id: str
    task: int                 # task index for Base/AssemblyNode circles, else -1
    placement: PlacementPose  # for AssemblyNode: the base's placement
    gripper_id: str

    @property
    def site(self) -> tuple:
        """Everything but the gripper: the object's resting state."""
        return (self.kind, self.assembly_id, self.task, self.placement)

    def label(self) -> str:
        p = self.placement
        t = f"t{self.task}/" if self.task >= 0 else ""
        return (f"{self.kind}:{t}{self.assembly_id}@{p.grid_point[0]},{p.grid_point[1]}"
                f"/f{p.facet_id}/y{p.yaw:.3f}/{self.gripper_id}")


@dataclass(frozen=True)
class GraphNode:
    """A node of the full assembly graph: one grasp in one circle."""

    kind: str
    assembly_id: str
    placement: PlacementPose
    gripper_id: str | None
    grasp_index: tuple | None
    task: int = -1


@dataclass(frozen=True)
class Stage:
    index: int
    role: str        # "base" | "attach" | "park" | "deliver"
    task: int        # index into AssemblyGraph.tasks, -1 for "deliver"
    object_id: str   # assembly moved during the stage


@dataclass(frozen=True)
class SEdge:
    id: int
    kind: EdgeKind
    u: int
    v: int
    cost: float
    grasps: frozenset = frozenset()


class SimplifiedGraph:
    """Directed multigraph with deterministic integer vertex and edge ids."""

    def __init__(self):
        self.keys: list = []
        self.index: dict = {}
        self.edges: list = []
        self.out: list = []
        self.removed: set = set()

    def add_vertex(self, key) -> int:
        i = self.index.get(key)
        if i is None:
            i = len(self.keys)
            self.keys.append(key)
            self.index[key] = i
            self.out.append([])
        return i

    def add_edge(self, u: int, v: int, kind=EdgeKind.TRANSFER, cost: float = 1.0,
                 grasps: Iterable = ()) -> int:
        e = SEdge(len(self.edges), EdgeKind(kind), u, v, float(cost), frozenset(grasps))
        self.edges.append(e)
        self.out[u].append(e.id)
        return e.id

    def remove_edge(self, eid: int) -> None:
        self.removed.add(eid)

    def neighbors(self, u: int):
        for eid in self.out[u]:
            if eid not in self.removed:
                yield self.edges[eid]

    def __len__(self):
        return len(self.keys)


@dataclass
class SearchResult:
    edges: list
    vertices: list
    cost: float
    root: int
    goal: int


def dijkstra_search(graph: SimplifiedGraph, roots: Iterable[int], goals: Iterable[int],
                    costs: CostConfig | None = None,
                    root_cost: Mapping[int, float] | None = None) -> SearchResult:
    """Least-cost path from any root to any goal.

    All roots are seeded at cost zero, which returns the same cost as a
    separate search per root followed by picking the cheapest root. Ties
    are broken by (predecessor id, edge id), then by the lowest goal id.
    With ``costs`` given, edge costs are taken per edge kind; ``root_cost``
    seeds individual roots at a nonzero starting cost.
    """
    roots = sorted(set(roots))
    goals = set(goals)
    if not roots or not goals:
        raise NoPath("empty root or goal set")

    def w(e: SEdge) -> float:
        if costs is None:
            return e.cost
        return {EdgeKind.TRANSFER: costs.transfer, EdgeKind.TOOL_EXCHANGE: costs.tool_exchange,
                EdgeKind.TRANSIT: costs.transit, EdgeKind.HANDOFF: costs.handoff}[e.kind]

    root_cost = root_cost or {}
    dist = {r: float(root_cost.get(r, 0.0)) for r in roots}
    pred: dict = {}
    done: set = set()
    heap = [(d, r) for r, d in dist.items()]
    heapq.heapify(heap)
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for e in graph.neighbors(u):
            nd = d + w(e)
            old = dist.get(e.v)
            if old is None or nd < old:
                dist[e.v] = nd
                pred[e.v] = (u, e.id)
                heapq.heappush(heap, (nd, e.v))
            elif nd == old and e.v not in done and (u, e.id) < pred.get(e.v, (u, e.id)):
                pred[e.v] = (u, e.id)
    reached = [g for g in goals if g in dist]
    if not reached:
        raise NoPath("no goal is reachable from any root")
    goal = min(reached, key=lambda g: (dist[g], g))
    edges, v = [], goal
    while v in pred:
        u, eid = pred[v]
        edges.append(eid)
        v = u
    edges.reverse()
    verts = [v] + [graph.edges[e].v for e in edges]
    return SearchResult(edges, verts, dist[goal], v, goal)


# ---------------------------------------------------------------------------
# Assembly graph
# ---------------------------------------------------------------------------

class AssemblyGraph:
    """Grasp sets, circles and the stage-expanded search graph of one tree.

    Build with :func:`build_assembly_graph`.
    """

    def __init__(self, tree: andor.SolutionTree, scene: Scene, grasp_db: GraspDatabase,
                 reachable: Callable | None = None, collides: Callable | None = None):
        self.tree = tree
        self.scene = scene
        self.db = grasp_db
        self.graph = tree.graph
        self.tasks = andor.linearize(tree)
        self.root_id = self.graph[tree.root].id
        self.assemblies = {a.id: a for a in self.graph.assemblies}
        ws = scene.workspace
        self.reachable = reachable or (lambda w: default_reachability(w, ws, scene.reach))
        self.collides = collides or TableCollision(ws.table_height, scene.obstacles)
        self.empty_sets: list = []
        self._sets: dict = {}
        self._pose: dict = {}
        self._stable: dict = {}
        self._hull: dict = {}
        self._shared: dict = {}
        self._stab: dict = {}
        self.stages = self._make_stages()
        self.simplified = SimplifiedGraph()
        self.roots: list = []
        self.goals: list = []
        self.root_cost: dict = {}

    # --- geometry caches -------------------------------------------------

    def assembly(self, aid: str) -> Assembly:
        return self.assemblies[aid]

    def is_leaf(self, aid: str) -> bool:
        return len(self.assemblies[aid].parts) == 1

    def stable(self, aid: str) -> list:
        if aid not in self._stable:
            self._stable[aid] = stable_facets(self.assemblies[aid], self.scene.parts)
            self._hull[aid] = assembly_hull(self.assemblies[aid], self.scene.parts)
        return self._stable[aid]

    def placements(self, aid: str, grid_points) -> list:
        self.stable(aid)
        return enumerate_placements(self.assemblies[aid], self.scene.parts, grid_points,
                                    self.scene.yaw_set)

    def initial_placements(self, aid: str) -> list:
        pid = self.assemblies[aid].parts[0]
        g = self.scene.workspace.initial_points[pid]
        if pid in self.scene.initial_placements:
            f, y = self.scene.initial_placements[pid]
            return [PlacementPose(tuple(g), f, y)]
        return self.placements(aid, [g])

    def resting_pose(self, aid: str, placement: PlacementPose) -> Pose:
        key = (aid, placement)
        if key not in self._pose:
            self.stable(aid)
            self._pose[key] = placement_pose_to_world(placement, self.assemblies[aid], self.scene.parts,
                                                      self.scene.workspace, self._hull[aid],
                                                      self._stable[aid])
        return self._pose[key]

    def task_of(self, t: int) -> tuple:
        task = self.tasks[t]
        g = self.graph
        return g[task.base].id, g[task.attach].id, g[task.result].id

    def world_pose(self, c: Circle) -> Pose:
        """World pose of the circle's assembly anchor."""
        if c.kind != NodeKind.ASSEMBLY:
            return self.resting_pose(c.assembly_id, c.placement)
        base, _, result = self.task_of(c.task)
        wb = self.resting_pose(base, c.placement)
        rb = self.assemblies[result].part_pose(self.assemblies[base].anchor)
        return wb @ rb.inverse()

    def insertion_dir(self, t: int) -> np.ndarray:
        """World-independent unit direction (result frame) along which the
        attached child moves into place."""
        base, attach, result = self.task_of(t)
        R = self.assemblies[result]
        B = self.assemblies[base]
        U = self.assemblies[attach]
        if R.anchor in U.parts:
            return -np.asarray(R.approach_dir(B.parts[0]))
        return np.asarray(R.approach_dir(U.parts[0]))

    def grasp_set(self, c: Circle) -> FilteredGraspSet:
        fs = self._sets.get(c)
        if fs is None:
            W = self.world_pose(c)
            A = self.assemblies[c.assembly_id]
            gr = self.scene.grippers[c.gripper_id]
            table = self.scene.workspace.table_height
            if c.kind == NodeKind.ASSEMBLY and not rests_stably(A, self.scene.parts, W, table):
                fs = FilteredGraspSet(c.placement, c.gripper_id)
            else:
                fs = filter_grasps(A, c.placement, gr, self.db, self.scene.parts,
                                   self.scene.workspace, W, self.reachable, self.collides)
            if not fs.grasps:
                self.empty_sets.append(c)
            self._sets[c] = fs
        return fs

    def keys(self, c: Circle) -> frozenset:
        return self.grasp_set(c).keys

    def shared(self, a: Circle, b: Circle) -> frozenset:
        k = (a, b)
        if k not in self._shared:
            self._shared[k] = self.keys(a) & self.keys(b) if a.gripper_id == b.gripper_id else frozenset()
        return self._shared[k]

    def stability(self, key: tuple, gripper_id: str) -> float:
        k = (key, gripper_id)
        if k not in self._stab:
            pid, idx = key
            g = self.db.get(pid, gripper_id)[idx]
            self._stab[k] = stability_index(g, self.scene.parts[pid], self.scene.grippers[gripper_id])
        return self._stab[k]

    # --- circles -----------------------------------------------------------

    def circles(self, kind: str, aid: str, placements, task: int = -1) -> list:
        return [Circle(kind, aid, task, p, g) for p in placements for g in sorted(self.scene.grippers)]

    def initial_circles(self, aid):
        return self.circles(NodeKind.INITIAL, aid, self.initial_placements(aid))

    def escape_circles(self, aid, placements=None):
        if placements is None:
            placements = self.placements(aid, self.scene.workspace.escape_points)
        return self.circles(NodeKind.ESCAPE, aid, placements)

    def base_circles(self, t):
        base, _, _ = self.task_of(t)
        pl = self.placements(base, [self.scene.workspace.assembly_point])
        return self.circles(NodeKind.BASE, base, pl, t)

    def assembly_circles(self, t, base_placement):
        _, _, result = self.task_of(t)
        return self.circles(NodeKind.ASSEMBLY, result, [base_placement], t)

    # --- stages ------------------------------------------------------------

    def _make_stages(self) -> list:
        out = []
        if not self.tasks:
            return [Stage(0, "deliver", -1, self.root_id)]
        for t, task in enumerate(self.tasks):
            b, a, r = self.task_of(t)
            out.append(Stage(len(out), "base", t, b))
            out.append(Stage(len(out), "attach", t, a))
            if r != self.root_id:
                out.append(Stage(len(out), "park", t, r))
        return out

    def stage_starts(self, s: int, ctx: tuple, prev_end: Circle | None):
        """(start circles, context) of stage ``s`` given the incoming context."""
        st = self.stages[s]
        base_pl, parked = ctx
        parked = dict(parked)
        if st.role == "park":
            circles = [Circle(prev_end.kind, prev_end.assembly_id, prev_end.task, prev_end.placement, g)
                       for g in sorted(self.scene.grippers)]
            return circles, (None, tuple(sorted(parked.items())))
        if self.is_leaf(st.object_id):
            circles = self.initial_circles(st.object_id)
        else:
            q = parked.pop(st.object_id)
            circles = self.escape_circles(st.object_id, [q])
        if st.role == "attach":
            base_pl = prev_end.placement
        else:
            base_pl = None
        return circles, (base_pl, tuple(sorted(parked.items())))

    def stage_successors(self, s: int, c: Circle, ctx: tuple) -> list:
        """Circles reachable from ``c`` by one transfer inside stage ``s``."""
        st = self.stages[s]
        if c.kind in (NodeKind.BASE,) or (c.kind == NodeKind.ASSEMBLY and st.role == "attach"):
            return []
        esc = [e for e in self.escape_circles(st.object_id) if e.gripper_id == c.gripper_id
               and e.placement != c.placement]
        if st.role in ("park", "deliver"):
            return esc
        if st.role == "base":
            targets = self.base_circles(st.task)
        else:
            targets = self.assembly_circles(st.task, ctx[0])
        return esc + [t for t in targets if t.gripper_id == c.gripper_id]

    def stage_exchanges(self, s: int, c: Circle) -> list:
        """Same-site circles with another gripper (exchange while the object rests)."""
        if c.kind != NodeKind.ESCAPE:
            return []
        return [Circle(c.kind, c.assembly_id, c.task, c.placement, g)
                for g in sorted(self.scene.grippers) if g != c.gripper_id]

    def is_stage_end(self, s: int, c: Circle) -> bool:
        role = self.stages[s].role
        return {"base": NodeKind.BASE, "attach": NodeKind.ASSEMBLY,
                "park": NodeKind.ESCAPE, "deliver": NodeKind.ESCAPE}[role] == c.kind

    def next_context(self, s: int, c: Circle, ctx: tuple) -> tuple:
        base_pl, parked = ctx
        if self.stages[s].role == "park":
            parked = tuple(sorted(dict(parked, **{c.assembly_id: c.placement}).items()))
        return (base_pl, parked)

    # --- full graph view -----------------------------------------------------

    def circle_of(self, v: int) -> Circle:
        return self.simplified.keys[v][1]

    def stage_of(self, v: int) -> int:
        return self.simplified.keys[v][0]

    def all_circles(self) -> list:
        return sorted({k[1] for k in self.simplified.keys})

    def circle_edges(self) -> list:
        """Distinct (kind, u circle, v circle) relations behind the search graph."""
        rel = set()
        for e in self.simplified.edges:
            a, b = self.circle_of(e.u), self.circle_of(e.v)
            if a == b or e.id in self.simplified.removed:
                continue
            rel.add((e.kind.value, a, b))
        return sorted(rel)

    def node(self, c: Circle, key) -> GraphNode:
        return GraphNode(c.kind, c.assembly_id, c.placement, c.gripper_id, key, c.task)

    def iter_full_edges(self):
        """Yield (EdgeKind, GraphNode, GraphNode) for every edge of the full graph."""
        for c in self.all_circles():
            ks = sorted(self.keys(c))
            for k1, k2 in itertools.combinations(ks, 2):
                yield EdgeKind.TRANSIT, self.node(c, k1), self.node(c, k2)
        for kind, a, b in self.circle_edges():
            if kind == EdgeKind.TRANSFER.value:
                for k in sorted(self.shared(a, b)):
                    yield EdgeKind.TRANSFER, self.node(a, k), self.node(b, k)
            elif kind == EdgeKind.TOOL_EXCHANGE.value:
                for k1 in sorted(self.keys(a)):
                    for k2 in sorted(self.keys(b)):
                        yield EdgeKind.TOOL_EXCHANGE, self.node(a, k1), self.node(b, k2)
            else:
                for k1 in sorted(self.keys(a)):
                    for k2 in sorted(self.keys(b)):
                        yield EdgeKind.HANDOFF, self.node(a, k1), self.node(b, k2)


def build_assembly_graph(tree: andor.SolutionTree, scene: Scene, grasp_db: GraspDatabase,
                         reachable: Callable | None = None,
                         collides: Callable | None = None) -> AssemblyGraph:
    """Expand a solution tree into circles and the stage-indexed search graph.

    Node sets follow the replacement rules: leaves become initial and escape
    circles, interior vertices base, assembly and escape circles, the root
    base and assembly circles. Circles whose grasp set is empty are recorded
    in ``empty_sets`` and left unconnected.
    """
    ag = AssemblyGraph(tree, scene, grasp_db, reachable, collides)
    g = ag.simplified
    costs = scene.costs
    last = len(ag.stages) - 1
    ctx0 = (None, ())
    starts, ctx = ag.stage_starts(0, ctx0, None)
    mounted = scene.planner.initial_gripper
    queue = []
    for c in starts:
        if ag.keys(c):
            v = g.add_vertex((0, c, ctx))
            ag.roots.append(v)
            if mounted is not None and c.gripper_id != mounted:
                ag.root_cost[v] = costs.tool_exchange
            queue.append(v)
    seen = set(queue)
    head = 0
    while head < len(queue):
        v = queue[head]
        head += 1
        s, c, ctx = g.keys[v]

        def link(key, kind, cost, grasps=()):
            w = g.add_vertex(key)
            g.add_edge(v, w, kind, cost, grasps)
            if w not in seen:
                seen.add(w)
                queue.append(w)

        for c2 in ag.stage_successors(s, c, ctx):
            sh = ag.shared(c, c2)
            if sh:
                link((s, c2, ctx), EdgeKind.TRANSFER, costs.transfer, sh)
        for c2 in ag.stage_exchanges(s, c):
            if ag.keys(c2):
                link((s, c2, ctx), EdgeKind.TOOL_EXCHANGE, costs.tool_exchange)
        if ag.is_stage_end(s, c):
            if s == last:
                ag.goals.append(v)
                continue
            nctx = ag.next_context(s, c, ctx)
            nstarts, nctx2 = ag.stage_starts(s + 1, nctx, c)
            for c2 in nstarts:
                if not ag.keys(c2):
                    continue
                if c2.gripper_id == c.gripper_id:
                    link((s + 1, c2, nctx2), EdgeKind.HANDOFF, costs.handoff)
                else:
                    link((s + 1, c2, nctx2), EdgeKind.TOOL_EXCHANGE, costs.tool_exchange)
    # make sure every circle's grasp set is evaluated (records empty sets)
    for st in ag.stages:
        if st.role in ("base", "attach", "deliver") and ag.is_leaf(st.object_id):
            for c in ag.initial_circles(st.object_id):
                ag.keys(c)
    return ag


# ---------------------------------------------------------------------------
# Grasp assignment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Action:
    """One step of a plan core.

    kind is "transfer" (carry along search edge ``edge`` with grasp ``key``),
    "transit" (regrasp inside ``circle`` from ``key_from`` to ``key``),
    "handoff" / "exchange" (leave one circle for the next stage's start),
    "approach" (first pick) or "retreat" (final release).
    """

    kind: str
    edge: int = -1
    key: tuple | None = None
    key_from: tuple | None = None
    circle: Circle | None = None
    circle_to: Circle | None = None
    stage: int = -1


def _hops(ag: AssemblyGraph, path: Sequence[int]) -> list:
    return [eid for eid in path if ag.simplified.edges[eid].kind == EdgeKind.TRANSFER]


def assign_grasps(ag: AssemblyGraph, path: Sequence[int], cuts: Mapping | None = None) -> list:
    """Choose one grasp per transfer hop and expand the path into actions.

    Each hop takes the allowed shared grasp with the largest stability index
    (ties to the smallest grasp key). Transit actions are inserted where
    consecutive hops through the same circle need different grasps.

    Raises
    ------
    NoCommonGrasp
        When every shared grasp of a hop has been cut.
    """
    cuts = cuts or {}
    g = ag.simplified
    choice = {}
    for eid in _hops(ag, path):
        e = g.edges[eid]
        gid = ag.circle_of(e.u).gripper_id
        cand = sorted(e.grasps - cuts.get(eid, frozenset()))
        if not cand:
            raise NoCommonGrasp(eid)
        best = cand[0]
        for k in cand[1:]:
            if round(ag.stability(k, gid), 12) > round(ag.stability(best, gid), 12):
                best = k
        choice[eid] = best
    actions = []
    held = None        # (circle, key) while the gripper holds an object
    prev_key = None
    first = True
    for eid in path:
        e = g.edges[eid]
        a, b = ag.circle_of(e.u), ag.circle_of(e.v)
        s = ag.stage_of(e.u)
        if e.kind == EdgeKind.TRANSFER:
            k = choice[eid]
            if first:
                actions.append(Action("approach", key=k, circle_to=a, stage=s))
                first = False
            elif held is not None and held[0] == a and held[1] != k:
                actions.append(Action("transit", key=k, key_from=held[1], circle=a, stage=s))
            elif held is None:
                actions.append(Action("pick", key=k, circle_to=a, stage=s))
            actions.append(Action("transfer", edge=eid, key=k, circle=a, circle_to=b, stage=s))
            held = (b, k)
            prev_key = k
        else:
            if e.kind == EdgeKind.HANDOFF and a == b:
                continue  # same circle, same tool: keep holding
            actions.append(Action("exchange" if e.kind == EdgeKind.TOOL_EXCHANGE else "handoff",
                                  edge=eid, key_from=prev_key, circle=a, circle_to=b, stage=s))
            held = None
    # attach the pick grasp to each handoff/exchange
    out = []
    for i, act in enumerate(actions):
        if act.kind in ("handoff", "exchange"):
            nxt = next(x for x in actions[i + 1:] if x.kind == "transfer")
            act = Action(act.kind, act.edge, nxt.key, act.key_from, act.circle, act.circle_to, act.stage)
        if act.kind == "pick":
            continue
        out.append(act)
    if actions:
        out.append(Action("retreat", key=prev_key, circle=held[0] if held else None,
                          stage=ag.stage_of(g.edges[path[-1]].v)))
    return out


# ---------------------------------------------------------------------------
# Motion validation and replanning
# ---------------------------------------------------------------------------

@dataclass
class PlanCore:
    """A searched, grasp-assigned and motion-validated path."""

    tree_id: int
    path: list
    actions: list
    traces: dict              # action index -> list of MotionTrace
    cost: float
    cut_history: list = field(default_factory=list)
    searches: int = 1


class WorldState:
    """Where every object currently rests (anchor world poses)."""

    def __init__(self, ag: AssemblyGraph):
        self.ag = ag
        self.poses: dict = {}

    def shapes(self, exclude=()) -> list:
        out = list(self.ag.scene.obstacles)
        for aid in sorted(self.poses):
            if aid in exclude:
                continue
            out.extend(part_shapes(self.ag.assembly(aid), self.ag.scene.parts, self.poses[aid]).values())
        return out

    def signature(self, exclude=()) -> tuple:
        return tuple((aid, self.poses[aid].matrix().round(9).tobytes())
                     for aid in sorted(self.poses) if aid not in exclude)


def _open_width(gripper, width, gap) -> float:
    return min(width + 2 * gap, gripper.max_width)


class MotionValidator:
    """Turns actions into motion queries and runs the pluggable checker."""

    def __init__(self, ag: AssemblyGraph, checker: Callable[[MotionQuery], MotionTrace] | None = None):
        self.ag = ag
        cfg = ag.scene.motion
        self.cfg = cfg
        self.checker = checker or (lambda q: check_edge(q, cfg))
        self.cache: dict = {}

    def _run(self, sig, make_query):
        if sig not in self.cache:
            try:
                self.cache[sig] = self.checker(make_query())
            except (Infeasible, InvalidQuery) as exc:
                self.cache[sig] = exc
        res = self.cache[sig]
        if isinstance(res, Exception):
            raise res
        return res

    def wrist(self, c: Circle, key) -> Pose:
        return self.ag.grasp_set(c).by_key(key).wrist_world

    def free_body(self, gripper_id, key):
        gr = self.ag.scene.grippers[gripper_id]
        w = self.ag.db.get(key[0], gripper_id)[key[1]].jaw_width
        return gripper_shapes(gr, _open_width(gr, w, self.cfg.release_gap))

    def free_motion(self, world, start: Pose | None, goal: Pose | None, start_gk, goal_gk):
        """Empty-handed motion between two wrist poses with the jaw opened.

        A missing ``start`` (``goal``) means a straight entry into (exit
        from) the other pose along the gripper's approach axis, as when
        coming from or going to the tool stand.
        """
        bodies = [self.free_body(*gk) for gk in (start_gk, goal_gk) if gk is not None]
        body = max(bodies, key=lambda b: b[1].vertices[:, 1].max())
        r = self.cfg.retreat
        dep = -start.rotation[:, 2] * r if start is not None else np.zeros(3)
        app = goal.rotation[:, 2] * r if goal is not None else np.zeros(3)
        if start is None:
            start = Pose(goal.rotation, goal.translation - app)
        if goal is None:
            goal = Pose(start.rotation, start.translation + dep)
        obstacles = world.shapes()
        sig = ("free", start.matrix().round(9).tobytes(), goal.matrix().round(9).tobytes(),
               tuple(b.vertices.round(9).tobytes() for b in body), world.signature(),
               dep.round(9).tobytes(), app.round(9).tobytes())
        return self._run(sig, lambda: MotionQuery(start, goal, body, obstacles,
                                                  table_height=self.ag.scene.workspace.table_height,
                                                  depart=dep, approach=app))

    def carry(self, world, act: Action, obj: str, into_assembly: Circle | None):
        ag = self.ag
        a, b = act.circle, act.circle_to
        gid = a.gripper_id
        gr = ag.scene.grippers[gid]
        start = self.wrist(a, act.key)
        goal = self.wrist(b, act.key)
        w = ag.db.get(act.key[0], gid)[act.key[1]].jaw_width
        body = gripper_shapes(gr, w)
        obj_pose = world.poses[obj]
        inv = start.inverse()
        attached = [s.posed(inv) for s in part_shapes(ag.assembly(obj), ag.scene.parts, obj_pose).values()]
        lift = np.array([0.0, 0.0, self.cfg.lift])
        if into_assembly is not None:
            Wr = ag.world_pose(b)
            approach = Wr.rotation @ ag.insertion_dir(b.task) * self.cfg.approach_dist
        else:
            approach = -lift
        exclude = (obj,)
        obstacles = world.shapes(exclude)
        sig = ("carry", start.matrix().round(9).tobytes(), goal.matrix().round(9).tobytes(), obj,
               act.key, gid, world.signature(exclude), approach.round(9).tobytes())
        return self._run(sig, lambda: MotionQuery(start, goal, body, obstacles, attached, obj,
                                                  ag.scene.workspace.table_height, lift, approach))


def _initial_world(ag: AssemblyGraph, path: Sequence[int]) -> WorldState:
    world = WorldState(ag)
    g = ag.simplified
    for eid in path:
        e = g.edges[eid]
        for v in (e.u, e.v):
            c = ag.circle_of(v)
            if c.kind == NodeKind.INITIAL and c.assembly_id not in world.poses:
                world.poses[c.assembly_id] = ag.world_pose(c)
    return world


@dataclass
class _Failure(Exception):
    edge: int
    key: tuple
    reason: str


def validate_actions(ag: AssemblyGraph, path: Sequence[int], actions: Sequence[Action],
                     validator: MotionValidator) -> dict:
    """Motion-check every action in order; raise _Failure naming the hop to cut."""
    g = ag.simplified
    world = _initial_world(ag, path)
    traces: dict = {}
    hops = [i for i, a in enumerate(actions) if a.kind == "transfer"]

    def hop_before(i):
        j = max((h for h in hops if h < i), default=None)
        return actions[j] if j is not None else None

    def hop_after(i):
        j = min((h for h in hops if h > i), default=None)
        return actions[j] if j is not None else None

    for i, act in enumerate(actions):
        blame_before = act.kind == "retreat"
        try:
            if act.kind == "approach":
                c = act.circle_to
                w = validator.wrist(c, act.key)
                traces[i] = [validator.free_motion(world, None, w, None, (c.gripper_id, act.key))]
            elif act.kind == "retreat":
                if act.circle is None:
                    continue
                c = act.circle
                w = validator.wrist(c, act.key)
                traces[i] = [validator.free_motion(world, w, None, (c.gripper_id, act.key), None)]
            elif act.kind in ("transit", "handoff"):
                a = act.circle
                b = act.circle_to or a
                # exit from the released grasp alone decides whom to blame
                blame_before = True
                validator.free_motion(world, validator.wrist(a, act.key_from), None,
                                      (a.gripper_id, act.key_from), None)
                blame_before = False
                traces[i] = [validator.free_motion(world, validator.wrist(a, act.key_from),
                                                   validator.wrist(b, act.key),
                                                   (a.gripper_id, act.key_from), (b.gripper_id, act.key))]
            elif act.kind == "exchange":
                a, b = act.circle, act.circle_to
                blame_before = True
                t1 = validator.free_motion(world, validator.wrist(a, act.key_from), None,
                                           (a.gripper_id, act.key_from), None)
                blame_before = False
                t2 = validator.free_motion(world, None, validator.wrist(b, act.key),
                                           None, (b.gripper_id, act.key))
                traces[i] = [t1, t2]
            elif act.kind == "transfer":
                st = ag.stages[act.stage]
                obj = st.object_id
                into = act.circle_to if (act.circle_to.kind == NodeKind.ASSEMBLY
                                         and st.role == "attach") else None
                if obj not in world.poses:
                    world.poses[obj] = ag.world_pose(act.circle)
                traces[i] = [validator.carry(world, act, obj, into)]
                if into is not None:
                    base, attach, result = ag.task_of(into.task)
                    world.poses.pop(base, None)
                    world.poses.pop(attach, None)
                    world.poses[result] = ag.world_pose(into)
                else:
                    world.poses[obj] = ag.world_pose(act.circle_to)
        except (Infeasible, InvalidQuery) as exc:
            if act.kind == "transfer":
                target = act
            else:
                target = hop_before(i) if blame_before else hop_after(i)
                target = target or hop_after(i) or hop_before(i)
            seg = getattr(exc, "segment", "endpoint")
            raise _Failure(target.edge, target.key, f"{act.kind}:{seg}: {exc}") from None
    return traces


def validate_and_replan(ag: AssemblyGraph, search: SearchResult,
                        checker: Callable[[MotionQuery], MotionTrace] | None = None,
                        budget: int | None = None) -> PlanCore:
    """Validate the searched path; on a motion failure cut the offending
    (hop, grasp), reassign grasps and, if a hop runs dry, remove its edge
    and search again.

    Raises
    ------
    BudgetExhausted
        After ``budget`` cuts without a valid plan.
    NoPath
        When cutting disconnects every root from every goal.
    """
    budget = ag.scene.planner.cut_budget if budget is None else budget
    validator = MotionValidator(ag, checker)
    cuts: dict = {}
    history: list = []
    path, cost = list(search.edges), search.cost
    searches = 1
    while True:
        try:
            actions = assign_grasps(ag, path, cuts)
        except NoCommonGrasp as exc:
            ag.simplified.remove_edge(exc.hop)
            history.append({"edge": exc.hop, "grasp": None, "reason": "edge removed: no grasp left"})
            try:
                res = dijkstra_search(ag.simplified, ag.roots, ag.goals, root_cost=ag.root_cost)
            except NoPath as np_exc:
                raise NoPath(f"tree {ag.tree.id}: graph disconnected after {len(_cut_list(history))} cuts",
                             ag.empty_sets) from np_exc
            path, cost = list(res.edges), res.cost
            searches += 1
            continue
        try:
            traces = validate_actions(ag, path, actions, validator)
        except _Failure as f:
            if len(_cut_list(history)) >= budget:
                raise BudgetExhausted(f"tree {ag.tree.id}: cut budget of {budget} exhausted",
                                      history) from None
            cuts[f.edge] = cuts.get(f.edge, frozenset()) | {f.key}
            history.append({"edge": f.edge, "grasp": list(f.key), "reason": f.reason})
            continue
        return PlanCore(ag.tree.id, path, actions, traces, cost, history, searches)


def _cut_list(history) -> list:
    return [h for h in history if h["grasp"] is not None]
