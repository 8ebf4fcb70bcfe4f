"""Rigid-body geometry: poses, parts, assemblies, hulls and stable placements.

All lengths are in meters, masses in kilograms and angles in radians. The
table is the horizontal plane ``z = table_height`` and gravity points along
``-z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError

from .errors import DegenerateGeometry, InvalidFacet, UnknownPart

ORTHO_TOL = 1e-9
UNIT_TOL = 1e-9
HULL_TOL = 1e-9
STABILITY_MARGIN = 1e-4
NORMAL_MERGE_TOL = 1e-6
DEFAULT_YAWS = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)


# ---------------------------------------------------------------------------
# Poses
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``x -> R @ x + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if np.max(np.abs(R @ R.T - np.eye(3))) > ORTHO_TOL or np.linalg.det(R) < 0:
            raise ValueError("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(_reorthonormalize(self.rotation @ other.rotation),
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform an (N, 3) array (or a single 3-vector) of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {"R": [float(v) for v in self.rotation.reshape(-1)],
                "t": [float(v) for v in self.translation]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Pose":
        return cls(np.asarray(d["R"], dtype=float).reshape(3, 3), d["t"])

    def allclose(self, other: "Pose", atol=1e-9) -> bool:
        return (np.allclose(self.rotation, other.rotation, atol=atol)
                and np.allclose(self.translation, other.translation, atol=atol))

    def __repr__(self):
        return f"Pose(t={np.round(self.translation, 6).tolist()})"


def _reorthonormalize(R: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(R)
    return u @ vt


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def rotation_between(a, b) -> np.ndarray:
    """Smallest rotation taking unit vector ``a`` onto unit vector ``b``.

    For antiparallel inputs the rotation is a half turn about the world
    x axis (or y axis when ``a`` is along x).
    """
    a = np.asarray(a, float) / np.linalg.norm(a)
    b = np.asarray(b, float) / np.linalg.norm(b)
    c = float(a @ b)
    if c > 1 - 1e-12:
        return np.eye(3)
    if c < -1 + 1e-12:
        axis = np.array([1.0, 0, 0]) if abs(a[0]) < 0.9 else np.array([0, 1.0, 0])
        axis = axis - (axis @ a) * a
        axis /= np.linalg.norm(axis)
        return 2 * np.outer(axis, axis) - np.eye(3)
    v = np.cross(a, b)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1 + c)


# ---------------------------------------------------------------------------
# Convex shapes and hulls
# ---------------------------------------------------------------------------

class ConvexShape:
    """Lightweight convex polytope used by the separating-axis test.

    Holds vertices plus the face normals and edge directions (each up to
    sign) that generate all candidate separating axes.
    """

    __slots__ = ("vertices", "face_axes", "edge_dirs", "lo", "hi")

    def __init__(self, vertices, face_axes, edge_dirs):
        self.vertices = np.asarray(vertices, dtype=float)
        self.face_axes = np.asarray(face_axes, dtype=float)
        self.edge_dirs = np.asarray(edge_dirs, dtype=float)
        self.lo = self.vertices.min(axis=0)
        self.hi = self.vertices.max(axis=0)

    def transformed(self, R, t) -> "ConvexShape":
        return ConvexShape(self.vertices @ R.T + t, self.face_axes @ R.T,
                           self.edge_dirs @ R.T)

    def posed(self, pose: Pose) -> "ConvexShape":
        return self.transformed(pose.rotation, pose.translation)


def _unique_dirs(dirs: np.ndarray, tol=1e-9) -> np.ndarray:
    out = []
    for d in dirs:
        n = np.linalg.norm(d)
        if n < tol:
            continue
        d = d / n
        if not any(abs(abs(d @ o) - 1) < 1e-12 for o in out):
            out.append(d)
    return np.array(out).reshape(-1, 3)


def sat_overlap(a: ConvexShape, b: ConvexShape) -> float:
    """Minimum projected overlap of two convex shapes over all SAT axes.

    Positive values mean the interiors intersect (the value bounds the
    penetration depth); zero means touching; negative means separated.
    """
    if np.any(a.hi < b.lo) or np.any(b.hi < a.lo):
        return float(np.max(np.maximum(b.lo - a.hi, a.lo - b.hi)) * -1)
    axes = [a.face_axes, b.face_axes]
    if len(a.edge_dirs) and len(b.edge_dirs):
        cr = np.cross(a.edge_dirs[:, None, :], b.edge_dirs[None, :, :]).reshape(-1, 3)
        nrm = np.linalg.norm(cr, axis=1)
        keep = nrm > 1e-9
        axes.append(cr[keep] / nrm[keep, None])
    axes = np.vstack(axes)
    pa = a.vertices @ axes.T
    pb = b.vertices @ axes.T
    overlap = np.minimum(pa.max(0), pb.max(0)) - np.maximum(pa.min(0), pb.min(0))
    return float(overlap.min())


@dataclass(eq=False)
class Hull:
    """Convex hull with coplanar triangles merged into polygonal facets.

    ``facets[k]`` lists indices into ``points`` in counter-clockwise order
    seen from outside; ``normals[k]`` is the outward unit normal and
    ``offsets[k]`` the plane offset, so interior points satisfy
    ``normals @ x <= offsets``.
    """

    points: np.ndarray
    facets: list
    normals: np.ndarray
    offsets: np.ndarray

    @cached_property
    def vertex_ids(self) -> np.ndarray:
        return np.unique(np.concatenate(self.facets))

    @property
    def vertices(self) -> np.ndarray:
        return self.points[self.vertex_ids]

    def signed_distances(self, x) -> np.ndarray:
        """Signed distance of point(s) to every facet plane (positive = outside)."""
        x = np.asarray(x, dtype=float)
        return x @ self.normals.T - self.offsets

    def contains(self, x, tol=HULL_TOL) -> bool:
        return bool(np.all(self.signed_distances(x) <= tol))

    def facet_points(self, k: int) -> np.ndarray:
        return self.points[self.facets[k]]

    def facet_centroid(self, k: int) -> np.ndarray:
        return self.facet_points(k).mean(axis=0)

    @cached_property
    def edge_dirs(self) -> np.ndarray:
        d = []
        for f in self.facets:
            p = self.points[f]
            d.append(np.roll(p, -1, axis=0) - p)
        return _unique_dirs(np.vstack(d))

    @cached_property
    def shape(self) -> ConvexShape:
        return ConvexShape(self.vertices, _unique_dirs(self.normals), self.edge_dirs)

    @cached_property
    def volume(self) -> float:
        return float(ConvexHull(self.vertices).volume)


def convex_hull(points) -> Hull:
    """Convex hull of a 3D point set with merged planar facets.

    Raises
    ------
    DegenerateGeometry
        If fewer than four points are given or they do not span 3D.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 4:
        raise DegenerateGeometry(f"need at least 4 points, got {len(pts)}")
    centered = pts - pts.mean(axis=0)
    scale = max(np.abs(centered).max(), 1e-300)
    if np.linalg.matrix_rank(centered / scale, tol=1e-9) < 3:
        raise DegenerateGeometry("points are coplanar")
    try:
        qh = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateGeometry(str(exc)) from exc

    groups: list[list[int]] = []
    group_normals: list[np.ndarray] = []
    for s, eq in enumerate(qh.equations):
        n = eq[:3]
        for g, gn in zip(groups, group_normals):
            if np.linalg.norm(gn - n) < NORMAL_MERGE_TOL:
                g.append(s)
                break
        else:
            groups.append([s])
            group_normals.append(n.copy())

    facets, normals, offsets = [], [], []
    for g in groups:
        idx = np.unique(qh.simplices[g].reshape(-1))
        n = qh.equations[g, :3].mean(axis=0)
        n /= np.linalg.norm(n)
        off = float(np.mean(pts[idx] @ n))
        facets.append(_order_ccw(pts, idx, n))
        normals.append(n)
        offsets.append(off)
    order = sorted(range(len(facets)), key=lambda k: tuple(np.round(normals[k], 9)))
    return Hull(pts, [facets[k] for k in order], np.array([normals[k] for k in order]),
                np.array([offsets[k] for k in order]))


def _order_ccw(pts, idx, n) -> np.ndarray:
    p = pts[idx]
    c = p.mean(axis=0)
    u = p[0] - c
    if np.linalg.norm(u) < 1e-15:
        u = np.cross(n, [1.0, 0, 0])
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    ang = np.arctan2((p - c) @ v, (p - c) @ u)
    return np.asarray(idx)[np.argsort(ang, kind="stable")]


def box_vertices(size, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    s = np.asarray(size, float) / 2
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], float)
    return corners * s + np.asarray(center, float)


_BOX_AXES = np.eye(3)


def box_shape(size, center=(0.0, 0.0, 0.0)) -> ConvexShape:
    """Axis-aligned box as a :class:`ConvexShape` (no hull computation)."""
    return ConvexShape(box_vertices(size, center), _BOX_AXES, _BOX_AXES)


# ---------------------------------------------------------------------------
# Parts and assemblies
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Part:
    """A rigid convex part given by its vertex list (body frame)."""

    id: str
    vertices: np.ndarray
    mass: float = 1.0
    cog: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        if self.mass <= 0:
            raise ValueError(f"part {self.id}: mass must be positive")
        hull = self.hull  # raises DegenerateGeometry
        if self.cog is None:
            self.cog = _solid_centroid(hull)
        self.cog = np.asarray(self.cog, dtype=float).reshape(3)
        if not hull.contains(self.cog):
            raise ValueError(f"part {self.id}: cog lies outside the hull")

    @cached_property
    def hull(self) -> Hull:
        return convex_hull(self.vertices)

    @classmethod
    def box(cls, id, size, mass=1.0, center=(0.0, 0.0, 0.0), cog=None) -> "Part":
        return cls(id, box_vertices(size, center), mass, cog)


def _solid_centroid(hull: Hull) -> np.ndarray:
    """Volume centroid by tetrahedral decomposition about the vertex mean."""
    c0 = hull.vertices.mean(axis=0)
    total, acc = 0.0, np.zeros(3)
    for f in hull.facets:
        p = hull.points[f]
        for i in range(1, len(p) - 1):
            tet = np.array([c0, p[0], p[i], p[i + 1]])
            vol = abs(np.linalg.det(tet[1:] - tet[0])) / 6
            total += vol
            acc += vol * tet.mean(axis=0)
    return acc / total


@dataclass(eq=False)
class Assembly:
    """Composite of parts; poses are relative to the first (anchor) part.

    ``relative_poses[i]`` and ``approach_dirs[i]`` belong to ``parts[i + 1]``.
    A single-part assembly has both lists empty.
    """

    id: str
    parts: tuple
    relative_poses: tuple = ()
    approach_dirs: tuple = ()

    def __post_init__(self):
        self.parts = tuple(self.parts)
        self.relative_poses = tuple(self.relative_poses)
        self.approach_dirs = tuple(np.asarray(a, dtype=float).reshape(3) for a in self.approach_dirs)
        if not self.parts:
            raise ValueError(f"assembly {self.id}: no parts")
        if len(set(self.parts)) != len(self.parts):
            raise ValueError(f"assembly {self.id}: repeated part ids")
        n = len(self.parts) - 1
        if len(self.relative_poses) != n or len(self.approach_dirs) != n:
            raise ValueError(f"assembly {self.id}: expected {n} relative poses and approach directions")
        for a in self.approach_dirs:
            if abs(np.linalg.norm(a) - 1) > UNIT_TOL:
                raise ValueError(f"assembly {self.id}: approach direction is not unit length")

    @property
    def anchor(self) -> str:
        return self.parts[0]

    @property
    def part_set(self) -> frozenset:
        return frozenset(self.parts)

    def part_pose(self, part_id: str) -> Pose:
        """Pose of ``part_id`` in the anchor frame."""
        if part_id == self.parts[0]:
            return Pose()
        try:
            return self.relative_poses[self.parts.index(part_id) - 1]
        except ValueError:
            raise UnknownPart(f"part {part_id} not in assembly {self.id}") from None

    def approach_dir(self, part_id: str) -> np.ndarray:
        i = self.parts.index(part_id)
        if i == 0:
            raise ValueError("the anchor part has no approach direction")
        return self.approach_dirs[i - 1]


def _lookup(parts_db: Mapping[str, Part], pid: str) -> Part:
    try:
        return parts_db[pid]
    except KeyError:
        raise UnknownPart(f"unknown part {pid!r}") from None


def part_shapes(assembly: Assembly, parts_db: Mapping[str, Part], pose: Pose | None = None) -> dict:
    """World (or anchor-frame, if ``pose`` is None) convex shapes of every part."""
    out = {}
    for pid in assembly.parts:
        p = assembly.part_pose(pid) if pose is None else pose @ assembly.part_pose(pid)
        out[pid] = _lookup(parts_db, pid).hull.shape.posed(p)
    return out


def assembly_points(assembly: Assembly, parts_db: Mapping[str, Part]) -> np.ndarray:
    return np.vstack([assembly.part_pose(pid).apply(_lookup(parts_db, pid).hull.vertices)
                      for pid in assembly.parts])


def assembly_hull(assembly: Assembly, parts_db: Mapping[str, Part]) -> Hull:
    return convex_hull(assembly_points(assembly, parts_db))


def composite_cog(assembly: Assembly, parts_db: Mapping[str, Part]) -> np.ndarray:
    """Mass-weighted centre of gravity in the anchor frame."""
    m_tot, acc = 0.0, np.zeros(3)
    for pid in assembly.parts:
        part = _lookup(parts_db, pid)
        m_tot += part.mass
        acc += part.mass * assembly.part_pose(pid).apply(part.cog)
    return acc / m_tot


def rests_stably(assembly: Assembly, parts_db, world_pose: Pose, table_height: float = 0.0,
                 margin: float = STABILITY_MARGIN, tol: float = 1e-6) -> bool:
    """True if the assembly at ``world_pose`` sits on the table without
    sinking into it and its centre of gravity projects strictly inside the
    support polygon (by at least ``margin``)."""
    from shapely.geometry import MultiPoint, Point, Polygon

    pts = world_pose.apply(assembly_points(assembly, parts_db))
    if pts[:, 2].min() < table_height - tol:
        return False
    support = pts[pts[:, 2] <= table_height + tol, :2]
    if len(support) < 3:
        return False
    poly = MultiPoint([tuple(p) for p in support]).convex_hull
    if not isinstance(poly, Polygon):
        return False
    c = world_pose.apply(composite_cog(assembly, parts_db))
    pt = Point(c[0], c[1])
    return poly.contains(pt) and poly.exterior.distance(pt) > margin


def interpenetrating_pairs(assembly: Assembly, parts_db, tol=1e-6) -> list:
    shapes = part_shapes(assembly, parts_db)
    ids = list(shapes)
    return [(a, b) for i, a in enumerate(ids) for b in ids[i + 1:]
            if sat_overlap(shapes[a], shapes[b]) > tol]


# ---------------------------------------------------------------------------
# Workspace and placements
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Workspace:
    grid_pitch: float
    assembly_point: tuple
    escape_points: tuple
    initial_points: dict
    table_height: float = 0.0

    def __post_init__(self):
        self.assembly_point = tuple(int(v) for v in self.assembly_point)
        self.escape_points = tuple(sorted(tuple(int(v) for v in p) for p in self.escape_points))
        self.initial_points = {k: tuple(int(v) for v in p) for k, p in self.initial_points.items()}

    def violations(self) -> list:
        out = []
        if not self.grid_pitch > 0:
            out.append("workspace: grid_pitch must be positive")
        if not self.escape_points:
            out.append("workspace: escape area is empty")
        if self.assembly_point in self.escape_points:
            out.append("workspace: assembly point lies in the escape area")
        for pid, p in self.initial_points.items():
            if p == self.assembly_point:
                out.append(f"workspace: initial point of {pid} is the assembly point")
        return out

    def grid_to_world(self, grid_point) -> np.ndarray:
        i, j = grid_point
        return np.array([i * self.grid_pitch, j * self.grid_pitch, self.table_height])


@dataclass(frozen=True, order=True)
class PlacementPose:
    """A resting pose: grid point, supporting hull facet, yaw about +z."""

    grid_point: tuple
    facet_id: int
    yaw: float

    def to_dict(self) -> dict:
        return {"grid": list(self.grid_point), "facet": self.facet_id, "yaw": self.yaw}

    @classmethod
    def from_dict(cls, d) -> "PlacementPose":
        return cls(tuple(d["grid"]), int(d["facet"]), float(d["yaw"]))


def cog_projection_margin(hull: Hull, k: int, cog) -> float:
    """Smallest distance from the CoG's projection on facet ``k`` to the facet
    boundary; negative when the projection falls outside the polygon."""
    n = hull.normals[k]
    p = cog - (n @ cog - hull.offsets[k]) * n
    poly = hull.facet_points(k)
    nxt = np.roll(poly, -1, axis=0)
    inward = np.cross(n, nxt - poly)
    inward /= np.linalg.norm(inward, axis=1)[:, None]
    return float(np.min(np.einsum("ij,ij->i", p - poly, inward)))


def stable_facets(assembly: Assembly, parts_db, margin: float = STABILITY_MARGIN) -> list:
    """Facets the assembly can rest on: the CoG projects strictly inside with
    at least ``margin`` clearance to every facet edge."""
    hull = assembly_hull(assembly, parts_db)
    cog = composite_cog(assembly, parts_db)
    return [k for k in range(len(hull.facets)) if cog_projection_margin(hull, k, cog) > margin]


def facet_down_rotation(normal, yaw: float) -> np.ndarray:
    return rot_z(yaw) @ rotation_between(normal, [0.0, 0.0, -1.0])


def placement_pose_to_world(placement: PlacementPose, assembly: Assembly, parts_db,
                            workspace: Workspace, hull: Hull | None = None,
                            stable: Sequence[int] | None = None) -> Pose:
    """World pose of the assembly anchor for a stable placement.

    The chosen facet lies in the table plane and its vertex centroid sits on
    the grid point. ``hull`` and ``stable`` may be passed to avoid
    recomputation.
    """
    if hull is None:
        hull = assembly_hull(assembly, parts_db)
    if stable is None:
        stable = stable_facets(assembly, parts_db)
    if placement.facet_id not in stable:
        raise InvalidFacet(f"facet {placement.facet_id} of {assembly.id} is not stable")
    R = facet_down_rotation(hull.normals[placement.facet_id], placement.yaw)
    c = hull.facet_centroid(placement.facet_id)
    t = workspace.grid_to_world(placement.grid_point) - R @ c
    # remove rounding so the support facet is exactly at table height
    z = (hull.facet_points(placement.facet_id) @ R.T + t)[:, 2]
    t[2] += workspace.table_height - z.mean()
    return Pose(R, t)


def enumerate_placements(assembly: Assembly, parts_db, grid_points: Iterable,
                         yaws: Sequence[float] = DEFAULT_YAWS) -> list:
    facets = stable_facets(assembly, parts_db)
    return [PlacementPose(tuple(g), f, float(y)) for g in grid_points for f in facets for y in yaws]


def facet_with_normal(hull: Hull, direction, tol=1e-6) -> int:
    d = np.asarray(direction, float)
    d /= np.linalg.norm(d)
    for k, n in enumerate(hull.normals):
        if np.linalg.norm(n - d) < tol:
            return k
    raise InvalidFacet(f"no hull facet with outward normal {d.tolist()}")
