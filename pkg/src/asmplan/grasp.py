"""Parallel-jaw grippers, antipodal grasp databases and grasp filtering.

Gripper frame convention
------------------------
The origin is the grasp centre, midway between the finger pads. ``+y`` is the
closing axis (finger 1 sits at ``-y``, finger 2 at ``+y``), ``+z`` is the
approach direction (the palm lies on the ``-z`` side) and ``x = y × z``.
Finger pads are rectangles ``pad_w`` (along x) by ``pad_h`` (along z)
centred on the grasp centre.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from shapely.geometry import Point, Polygon, box as shapely_box

from .errors import NoContact
from .geometry import (Assembly, ConvexShape, Part, PlacementPose, Pose, Workspace,
                       box_shape, part_shapes, sat_overlap)

CONTACT_TOL = 1e-9
ANTIPODAL_TOL = 1e-6


@dataclass(frozen=True)
class Gripper:
    """Two-finger parallel-jaw gripper.

    ``finger_depth`` is the finger thickness along the closing axis and
    ``palm_clearance`` the gap between the palm-side edge of the pads and
    the palm.
    """

    id: str
    min_width: float
    max_width: float
    finger_pad: tuple = (0.02, 0.02)
    finger_depth: float = 0.01
    palm_clearance: float = 0.03
    palm_thickness: float = 0.02

    def violations(self) -> list:
        out = []
        if not (self.max_width > self.min_width >= 0):
            out.append(f"gripper {self.id}: need max_width > min_width >= 0")
        if min(self.finger_pad) <= 0 or self.finger_depth <= 0:
            out.append(f"gripper {self.id}: finger dimensions must be positive")
        return out

    def to_dict(self) -> dict:
        return {"id": self.id, "min_width": self.min_width, "max_width": self.max_width,
                "finger_pad": list(self.finger_pad), "finger_depth": self.finger_depth,
                "palm_clearance": self.palm_clearance, "palm_thickness": self.palm_thickness}

    @classmethod
    def from_dict(cls, d) -> "Gripper":
        return cls(d["id"], float(d["min_width"]), float(d["max_width"]),
                   tuple(d.get("finger_pad", (0.02, 0.02))), float(d.get("finger_depth", 0.01)),
                   float(d.get("palm_clearance", 0.03)), float(d.get("palm_thickness", 0.02)))


@lru_cache(maxsize=256)
def gripper_shapes(gripper: Gripper, jaw_width: float) -> tuple:
    """Finger and palm boxes in the gripper frame for a given opening."""
    pw, ph = gripper.finger_pad
    length = ph + gripper.palm_clearance
    zc = ph / 2 - length / 2
    half = jaw_width / 2 + gripper.finger_depth / 2
    fingers = [box_shape((pw, gripper.finger_depth, length), (0, s * half, zc)) for s in (-1, 1)]
    span = gripper.max_width + 2 * gripper.finger_depth
    palm = box_shape((pw, span, gripper.palm_thickness),
                     (0, 0, -ph / 2 - gripper.palm_clearance - gripper.palm_thickness / 2))
    return (fingers[0], fingers[1], palm)


@dataclass(frozen=True, eq=False)
class GraspPose:
    part_id: str
    gripper_id: str
    wrist_pose: Pose
    jaw_width: float

    def to_dict(self) -> dict:
        return {"part": self.part_id, "gripper": self.gripper_id,
                "wrist_pose": self.wrist_pose.to_dict(), "width": self.jaw_width}

    @classmethod
    def from_dict(cls, d) -> "GraspPose":
        return cls(d["part"], d["gripper"], Pose.from_dict(d["wrist_pose"]), float(d["width"]))


@dataclass(frozen=True)
class GraspSampling:
    spacing: float = 0.01
    rolls: int = 4

    @classmethod
    def from_dict(cls, d) -> "GraspSampling":
        return cls(float(d.get("spacing", 0.01)), int(d.get("rolls", 4)))


def _plane_basis(y: np.ndarray) -> tuple:
    e = np.eye(3)[int(np.argmin(np.abs(y)))]
    u = np.cross(y, e)
    u /= np.linalg.norm(u)
    v = np.cross(y, u)
    return u, v


def antipodal_pairs(part: Part, min_width: float, max_width: float) -> list:
    """Facet pairs ``(i, j, separation)`` with opposed normals whose separation
    lies in ``[min_width, max_width]``."""
    hull = part.hull
    out = []
    for i in range(len(hull.facets)):
        for j in range(i + 1, len(hull.facets)):
            if np.linalg.norm(hull.normals[i] + hull.normals[j]) < ANTIPODAL_TOL:
                d = float(hull.offsets[i] + hull.offsets[j])
                if min_width - 1e-12 <= d <= max_width + 1e-12:
                    out.append((i, j, d))
    return out


def generate_grasps(part: Part, gripper: Gripper, sampling: GraspSampling = GraspSampling()) -> list:
    """Sample antipodal parallel-jaw grasps of a convex part.

    Grasp centres lie on a grid of pitch ``sampling.spacing`` over the
    overlap of the two opposed facets (projected along the closing axis),
    each with ``sampling.rolls`` approach directions about the closing axis.
    Grasps whose palm penetrates the part are dropped.
    """
    hull = part.hull
    part_shape = hull.shape
    grasps = []
    for i, j, d in antipodal_pairs(part, gripper.min_width, gripper.max_width):
        y = hull.normals[j]
        u, v = _plane_basis(y)
        fi = hull.facet_points(i)
        fj = hull.facet_points(j)
        overlap = Polygon(np.c_[fi @ u, fi @ v]).intersection(Polygon(np.c_[fj @ u, fj @ v]))
        if overlap.is_empty or overlap.area <= 0:
            continue
        mid = ((fi @ y).mean() + (fj @ y).mean()) / 2
        c = np.asarray(overlap.centroid.coords[0])
        x0, y0, x1, y1 = overlap.bounds
        s = sampling.spacing
        ku = np.arange(-np.ceil((c[0] - x0) / s), np.ceil((x1 - c[0]) / s) + 1)
        kv = np.arange(-np.ceil((c[1] - y0) / s), np.ceil((y1 - c[1]) / s) + 1)
        centres = [(c[0] + a * s, c[1] + b * s) for a in ku for b in kv]
        centres = [p for p in centres if overlap.contains(Point(p))]
        centres.sort(key=lambda p: ((p[0] - c[0]) ** 2 + (p[1] - c[1]) ** 2, p))
        for cu, cv in centres:
            t = cu * u + cv * v + mid * y
            for r in range(sampling.rolls):
                th = 2 * np.pi * r / sampling.rolls
                z = np.cos(th) * u + np.sin(th) * v
                x = np.cross(y, z)
                pose = Pose(np.c_[x, y, z], t)
                shapes = gripper_shapes(gripper, d)
                if any(sat_overlap(s_.posed(pose), part_shape) > CONTACT_TOL for s_ in shapes):
                    continue
                grasps.append(GraspPose(part.id, gripper.id, pose, d))
    return grasps


def contact_polygons(grasp: GraspPose, part: Part) -> list:
    """Face polygons touched by each finger, in pad coordinates (x, z).

    Raises NoContact if a finger has no coplanar facet.
    """
    hull = part.hull
    R, t = grasp.wrist_pose.rotation, grasp.wrist_pose.translation
    x, y, z = R[:, 0], R[:, 1], R[:, 2]
    out = []
    for sign in (-1, 1):
        c = t + sign * grasp.jaw_width / 2 * y
        k = None
        for f, n in enumerate(hull.normals):
            if np.linalg.norm(n - sign * y) < ANTIPODAL_TOL and abs(n @ c - hull.offsets[f]) < 1e-6:
                k = f
                break
        if k is None:
            raise NoContact(f"finger {sign:+d} of grasp on {part.id} touches no facet")
        p = hull.facet_points(k) - c
        out.append(np.c_[p @ x, p @ z])
    return out


def stability_index(grasp: GraspPose, part: Part, gripper: Gripper) -> float:
    """Smaller of the two finger-pad contact areas (m²)."""
    pw, ph = gripper.finger_pad
    pad = shapely_box(-pw / 2, -ph / 2, pw / 2, ph / 2)
    areas = [pad.intersection(Polygon(poly)).area for poly in contact_polygons(grasp, part)]
    if min(areas) <= 0:
        raise NoContact(f"empty pad contact for grasp on {part.id}")
    return float(min(areas))


class GraspDatabase:
    """Per (part, gripper) lists of grasps, ``entries[(part_id, gripper_id)]``."""

    def __init__(self, entries: Mapping | None = None):
        self.entries: dict = {k: list(v) for k, v in (entries or {}).items()}

    @classmethod
    def generate(cls, parts: Iterable[Part], grippers: Iterable[Gripper],
                 sampling: GraspSampling = GraspSampling()) -> "GraspDatabase":
        grippers = list(grippers)
        return cls({(p.id, g.id): generate_grasps(p, g, sampling) for p in parts for g in grippers})

    def get(self, part_id: str, gripper_id: str) -> list:
        return self.entries.get((part_id, gripper_id), [])

    def __len__(self):
        return sum(len(v) for v in self.entries.values())

    def to_json(self) -> list:
        return [g.to_dict() for key in sorted(self.entries) for g in self.entries[key]]

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, data: Sequence[Mapping]) -> "GraspDatabase":
        entries: dict = {}
        for d in data:
            g = GraspPose.from_dict(d)
            entries.setdefault((g.part_id, g.gripper_id), []).append(g)
        return cls(entries)


# ---------------------------------------------------------------------------
# Filtering against reachability and collisions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReachParams:
    """Spherical shell around ``center`` plus a height band and approach cone.

    ``center`` defaults to the assembly point; heights are relative to the
    table. ``cone`` is the largest allowed angle between the approach axis
    and straight down.
    """

    center: tuple | None = None
    r_min: float = 0.0
    r_max: float = 1.0
    z_min: float = -0.01
    z_max: float = 0.8
    cone: float = np.pi / 2

    @classmethod
    def from_dict(cls, d) -> "ReachParams":
        d = dict(d)
        if d.get("center") is not None:
            d["center"] = tuple(d["center"])
        return cls(**d)


def default_reachability(wrist_world: Pose, workspace: Workspace, reach: ReachParams = ReachParams()) -> bool:
    """Closed-region reachability test standing in for inverse kinematics."""
    c = (workspace.grid_to_world(workspace.assembly_point) if reach.center is None
         else np.asarray(reach.center, float))
    p = wrist_world.translation
    r = np.linalg.norm(p - c)
    if r < reach.r_min - 1e-12 or r > reach.r_max + 1e-12:
        return False
    h = p[2] - workspace.table_height
    if h < reach.z_min - 1e-12 or h > reach.z_max + 1e-12:
        return False
    cosang = float(-wrist_world.rotation[2, 2])
    return cosang >= np.cos(reach.cone) - 1e-12


class TableCollision:
    """Collision predicate against the table half-space and static obstacles."""

    def __init__(self, table_height: float, obstacles: Sequence[ConvexShape] = ()):
        self.table_height = table_height
        self.obstacles = list(obstacles)

    def __call__(self, shapes: Sequence[ConvexShape]) -> bool:
        for s in shapes:
            if s.lo[2] < self.table_height - CONTACT_TOL:
                return True
            for o in self.obstacles:
                if sat_overlap(s, o) > CONTACT_TOL:
                    return True
        return False


@dataclass(frozen=True, eq=False)
class FilteredGrasp:
    key: tuple          # (part_id, index into GraspDatabase list)
    grasp: GraspPose
    wrist_world: Pose


@dataclass(eq=False)
class FilteredGraspSet:
    placement: PlacementPose
    gripper_id: str
    grasps: list = field(default_factory=list)

    @property
    def keys(self) -> frozenset:
        return frozenset(g.key for g in self.grasps)

    def by_key(self, key) -> FilteredGrasp:
        for g in self.grasps:
            if g.key == key:
                return g
        raise KeyError(key)

    def __len__(self):
        return len(self.grasps)


def filter_grasps(assembly: Assembly, placement: PlacementPose, gripper: Gripper,
                  db: GraspDatabase, parts_db: Mapping[str, Part], workspace: Workspace,
                  world_pose: Pose,
                  reachable: Callable[[Pose], bool] | None = None,
                  collides: Callable[[Sequence[ConvexShape]], bool] | None = None) -> FilteredGraspSet:
    """Grasps of ``assembly`` (resting at ``world_pose``) usable by ``gripper``.

    The candidate set is the union of the database entries of every part of
    the assembly. A grasp survives when the wrist is reachable, the gripper
    body is clear of the environment (``collides``) and it does not
    penetrate any other part of the same assembly.
    """
    if reachable is None:
        reachable = lambda w: default_reachability(w, workspace)  # noqa: E731
    if collides is None:
        collides = TableCollision(workspace.table_height)
    shapes = part_shapes(assembly, parts_db, world_pose)
    out = FilteredGraspSet(placement, gripper.id)
    for pid in assembly.parts:
        part_world = world_pose @ assembly.part_pose(pid)
        others = [s for q, s in shapes.items() if q != pid]
        for idx, g in enumerate(db.get(pid, gripper.id)):
            wrist = part_world @ g.wrist_pose
            if not reachable(wrist):
                continue
            body = [s.posed(wrist) for s in gripper_shapes(gripper, g.jaw_width)]
            if collides(body):
                continue
            if any(sat_overlap(b, o) > CONTACT_TOL for b in body for o in others):
                continue
            out.grasps.append(FilteredGrasp((pid, idx), g, wrist))
    return out
