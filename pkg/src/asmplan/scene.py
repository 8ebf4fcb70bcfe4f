"""Scene files: parts, grippers, workspace, AND/OR graph and planner settings.

A scene is a single JSON document::

    {
      "parts": [{"id": "P1", "box": [sx, sy, sz]} | {"id": .., "vertices": [[x,y,z], ..]},
                ...],                     # optional "mass", "cog"
      "grippers": [{"id": "H1", "min_width": 0, "max_width": 0.06,
                    "finger_pad": [w, h], "finger_depth": d, "palm_clearance": c}],
      "workspace": {"grid_pitch": 0.2, "assembly_point": [0, 0],
                    "escape_points": [[1, 0]], "initial_points": {"P1": [0, 1]},
                    "table_height": 0.0},
      "initial_placements": {"P1": {"down": [0, 0, -1], "yaw": 0}},   # optional
      "andor": {"assemblies": [...], "hyperedges": [...]},
      "obstacles": [{"box": [sx, sy, sz], "center": [x, y, z]}],       # optional
      "costs": {...}, "motion": {...}, "sampling": {...}, "reach": {...},
      "yaw_set": [0, 1.5707963267948966], "seed": 0,
      "planner": {"max_trees": 10, "cut_budget": 50}
    }
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import andor
from .errors import SceneError
from .geometry import (DEFAULT_YAWS, ConvexShape, Part, Workspace, box_shape,
                       convex_hull, facet_with_normal, interpenetrating_pairs, stable_facets)
from .grasp import GraspDatabase, GraspSampling, Gripper, ReachParams, generate_grasps
from .motion import MotionConfig


@dataclass(frozen=True)
class CostConfig:
    transit: float = 1.0
    transfer: float = 1.0
    tool_exchange: float = 5.0
    handoff: float = 0.0

    @classmethod
    def from_dict(cls, d) -> "CostConfig":
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class PlannerConfig:
    max_trees: int = 10
    cut_budget: int = 50
    initial_gripper: str | None = None    # tool mounted before the first pick

    @classmethod
    def from_dict(cls, d) -> "PlannerConfig":
        return cls(**{k: (v if k == "initial_gripper" else int(v)) for k, v in d.items()})


@dataclass(eq=False)
class Scene:
    parts: dict
    grippers: dict
    workspace: Workspace
    andor_graph: andor.AndOrGraph
    costs: CostConfig = field(default_factory=CostConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    sampling: GraspSampling = field(default_factory=GraspSampling)
    reach: ReachParams = field(default_factory=ReachParams)
    yaw_set: tuple = DEFAULT_YAWS
    initial_placements: dict = field(default_factory=dict)   # part id -> (facet, yaw)
    obstacles: list = field(default_factory=list)            # world ConvexShapes
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    seed: int = 0
    name: str = "scene"
    source: dict = field(default_factory=dict, repr=False)

    @property
    def assemblies(self) -> dict:
        return {a.id: a for a in self.andor_graph.assemblies}

    def with_seed(self, seed: int) -> "Scene":
        import dataclasses
        motion = dataclasses.replace(self.motion, seed=seed)
        return dataclasses.replace(self, seed=seed, motion=motion)

    def grasp_database(self, cache_dir: str | Path | None = None) -> GraspDatabase:
        """Generate (or load from a content-addressed cache) every part's grasps."""
        entries = {}
        for pid in sorted(self.parts):
            for gid in sorted(self.grippers):
                part, gr = self.parts[pid], self.grippers[gid]
                path = None
                if cache_dir is not None:
                    key = hashlib.sha256(json.dumps(
                        [part.vertices.round(12).tolist(), gr.to_dict(),
                         [self.sampling.spacing, self.sampling.rolls]]).encode()).hexdigest()[:20]
                    path = Path(cache_dir) / f"grasps-{pid}-{gid}-{key}.json"
                    if path.exists():
                        entries[(pid, gid)] = GraspDatabase.from_json(
                            json.loads(path.read_text())).get(pid, gid)
                        continue
                entries[(pid, gid)] = generate_grasps(part, gr, self.sampling)
                if path is not None:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    path.write_text(GraspDatabase({(pid, gid): entries[(pid, gid)]}).dumps())
        return GraspDatabase(entries)


def _part_from_json(d) -> Part:
    if "box" in d:
        return Part.box(d["id"], d["box"], float(d.get("mass", 1.0)),
                        center=d.get("center", (0, 0, 0)), cog=d.get("cog"))
    return Part(d["id"], np.asarray(d["vertices"], float), float(d.get("mass", 1.0)), d.get("cog"))


def _obstacle_from_json(d) -> ConvexShape:
    if "box" in d:
        return box_shape(d["box"], d.get("center", (0, 0, 0)))
    return convex_hull(d["vertices"]).shape


def scene_from_dict(data: Mapping, name: str = "scene") -> Scene:
    """Build a scene; malformed input raises SceneError."""
    try:
        parts = {}
        for d in data["parts"]:
            p = _part_from_json(d)
            parts[p.id] = p
        grippers = {g["id"]: Gripper.from_dict(g) for g in data["grippers"]}
        ws = data["workspace"]
        workspace = Workspace(float(ws["grid_pitch"]), tuple(ws["assembly_point"]),
                              tuple(tuple(p) for p in ws["escape_points"]),
                              dict(ws.get("initial_points", {})), float(ws.get("table_height", 0.0)))
        graph = andor.AndOrGraph.from_json(data["andor"])
        init = {}
        for pid, spec in data.get("initial_placements", {}).items():
            if pid not in parts:
                raise SceneError(f"initial placement for unknown part {pid!r}")
            if "facet" in spec:
                facet = int(spec["facet"])
            else:
                facet = facet_with_normal(parts[pid].hull, spec["down"])
            init[pid] = (facet, float(spec.get("yaw", 0.0)))
        scene = Scene(
            parts=parts, grippers=grippers, workspace=workspace, andor_graph=graph,
            costs=CostConfig.from_dict(data.get("costs", {})),
            motion=MotionConfig.from_dict(data.get("motion", {})),
            sampling=GraspSampling.from_dict(data.get("sampling", {})),
            reach=ReachParams.from_dict(data.get("reach", {})),
            yaw_set=tuple(float(y) for y in data.get("yaw_set", DEFAULT_YAWS)),
            initial_placements=init,
            obstacles=[_obstacle_from_json(o) for o in data.get("obstacles", [])],
            planner=PlannerConfig.from_dict(data.get("planner", {})),
            seed=int(data.get("seed", 0)), name=str(data.get("name", name)), source=dict(data))
    except SceneError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"malformed scene: {exc.__class__.__name__}: {exc}") from exc
    if "seed" in data:
        scene = scene.with_seed(scene.seed)
    return scene


def shipped_scene(name: str) -> Path:
    """Path of a scene file bundled with the package (``two_cubes``, ...)."""
    path = Path(__file__).parent / "scenes" / f"{name}.json"
    if not path.exists():
        raise SceneError(f"no shipped scene named {name!r}")
    return path


def load_scene(path: str | Path) -> Scene:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read scene {path}: {exc}") from exc
    return scene_from_dict(data, name=path.stem)


def validate_scene(scene: Scene) -> list:
    """Aggregate every validator's findings; an empty list means the scene is usable."""
    out = list(scene.workspace.violations())
    for g in scene.grippers.values():
        out.extend(g.violations())
    graph = scene.andor_graph
    out.extend(andor.validate(graph))
    ig = scene.planner.initial_gripper
    if ig is not None and ig not in scene.grippers:
        out.append(f"planner: initial_gripper refers to dangling gripper id {ig!r}")
    for a in graph.assemblies:
        for pid in a.parts:
            if pid not in scene.parts:
                out.append(f"assembly {a.id}: dangling part id {pid!r}")
    if any("dangling" in v for v in out):
        return out
    used = graph.all_parts
    for pid in sorted(used):
        if pid not in scene.workspace.initial_points:
            out.append(f"part {pid}: no initial point")
    for pid in scene.workspace.initial_points:
        if pid not in scene.parts:
            out.append(f"workspace: initial point for dangling part id {pid!r}")
    for pid, (facet, _) in scene.initial_placements.items():
        single = [a for a in graph.assemblies if a.parts == (pid,)]
        if single and facet not in stable_facets(single[0], scene.parts):
            out.append(f"part {pid}: initial facet {facet} is not stable")
    for a in graph.assemblies:
        bad = interpenetrating_pairs(a, scene.parts)
        for p, q in bad:
            out.append(f"assembly {a.id}: parts {p} and {q} interpenetrate")
    out.extend(_pose_consistency(graph))
    return out


def _pose_consistency(graph: andor.AndOrGraph, tol=1e-6) -> list:
    """Each child's internal relative poses must agree with its parent's."""
    out = []
    for k, h in enumerate(graph.hyperedges):
        parent = graph[h.parent]
        for c in h.children:
            child = graph[c]
            if any(p not in parent.parts for p in child.parts):
                continue
            anchor = parent.part_pose(child.anchor).inverse()
            for pid in child.parts[1:]:
                expect = anchor @ parent.part_pose(pid)
                if not expect.allclose(child.part_pose(pid), atol=tol):
                    out.append(f"hyperedge {k}: pose of {pid} in {child.id} disagrees with {parent.id}")
    return out
