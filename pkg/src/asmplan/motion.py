"""Motion feasibility for a free-flying gripper carrying an optional load.

Edges are validated by straight-line interpolation (position lerp plus
rotation slerp) and, when that is blocked, by a goal-biased RRT in the
6-DOF pose space. Obstacles are convex shapes plus the table half-space.
Touching contact is never a collision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidQuery, PlanningError
from .geometry import ConvexShape, Pose, sat_overlap

COLLISION_TOL = 1e-9


class Infeasible(PlanningError):
    """No collision-free motion was found; ``segment`` names the failing part."""

    stage = "motion"

    def __init__(self, message, segment="transfer"):
        super().__init__(message)
        self.segment = segment


@dataclass(frozen=True)
class MotionConfig:
    resolution: float = 0.005
    node_limit: int = 5000
    goal_bias: float = 0.1
    step_pos: float = 0.03
    step_rot: float = 0.3
    connect_radius: float = 0.15
    seed: int = 0
    bounds_margin: float = 0.3
    ceiling: float = 0.6
    lift: float = 0.15
    retreat: float = 0.05
    approach_dist: float = 0.05
    release_gap: float = 0.004

    @classmethod
    def from_dict(cls, d) -> "MotionConfig":
        fields_ = cls.__dataclass_fields__
        return cls(**{k: (int(v) if fields_[k].type == "int" else float(v))
                      for k, v in d.items() if k in fields_})


@dataclass(eq=False)
class MotionQuery:
    """A gripper motion between two world poses.

    ``body`` and ``attached`` are shapes in the gripper frame; ``depart`` and
    ``approach`` are world displacement vectors for the straight exit from
    ``start_pose`` and the straight entry into ``goal_pose``.
    """

    start_pose: Pose
    goal_pose: Pose
    body: Sequence[ConvexShape]
    obstacles: Sequence[ConvexShape] = ()
    attached: Sequence[ConvexShape] = ()
    attached_id: str | None = None
    table_height: float | None = 0.0
    depart: np.ndarray = field(default_factory=lambda: np.zeros(3))
    approach: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bounds: tuple | None = None


@dataclass(eq=False)
class MotionTrace:
    waypoints: list
    resolution: float
    attached_id: str | None = None
    planner: str = "straight"

    def to_dict(self) -> dict:
        return {"planner": self.planner, "resolution": self.resolution,
                "attached": self.attached_id,
                "waypoints": [w.to_dict() for w in self.waypoints]}

    @classmethod
    def from_dict(cls, d) -> "MotionTrace":
        return cls([Pose.from_dict(w) for w in d["waypoints"]], float(d["resolution"]),
                   d.get("attached"), d.get("planner", "straight"))

    def to_csv(self) -> str:
        rows = ["x,y,z,qx,qy,qz,qw"]
        for w in self.waypoints:
            q = Rotation.from_matrix(w.rotation).as_quat()
            rows.append(",".join(f"{v:.9g}" for v in (*w.translation, *q)))
        return "\n".join(rows) + "\n"


def collide(body: Sequence[ConvexShape], attached: Sequence[ConvexShape] | None, pose: Pose,
            obstacles: Sequence[ConvexShape], table_height: float | None = None) -> bool:
    """True iff any moving shape (gripper body or load, given in the gripper
    frame) placed at ``pose`` penetrates an obstacle or the table."""
    R, t = pose.rotation, pose.translation
    return _collide_rt(list(body) + list(attached or ()), R, t, obstacles, table_height)


def _collide_rt(moving, R, t, obstacles, table_height) -> bool:
    for m in moving:
        w = m.transformed(R, t)
        if table_height is not None and w.lo[2] < table_height - COLLISION_TOL:
            return True
        for o in obstacles:
            if sat_overlap(w, o) > COLLISION_TOL:
                return True
    return False


# ---------------------------------------------------------------------------
# pose-space helpers (position + unit quaternion, scipy's x, y, z, w order)
# ---------------------------------------------------------------------------

def _quat(R) -> np.ndarray:
    q = Rotation.from_matrix(R).as_quat()
    return q if q[3] >= 0 else -q


def _mat(q) -> np.ndarray:
    return Rotation.from_quat(q).as_matrix()


def _angle(q1, q2) -> float:
    return 2.0 * math.acos(min(1.0, abs(float(np.dot(q1, q2)))))


def _slerp(q1, q2, s) -> np.ndarray:
    d = float(np.dot(q1, q2))
    if d < 0:
        q2, d = -q2, -d
    if d > 1 - 1e-12:
        q = q1 + s * (q2 - q1)
    else:
        th = math.acos(d)
        q = (math.sin((1 - s) * th) * q1 + math.sin(s * th) * q2) / math.sin(th)
    return q / np.linalg.norm(q)


class _Checker:
    def __init__(self, query: MotionQuery, config: MotionConfig):
        self.moving = list(query.body) + list(query.attached)
        self.obstacles = list(query.obstacles)
        self.table = query.table_height
        self.res = config.resolution
        self.radius = max(float(np.linalg.norm(m.vertices, axis=1).max()) for m in self.moving)

    def free(self, p, q) -> bool:
        return not _collide_rt(self.moving, _mat(q), p, self.obstacles, self.table)

    def n_steps(self, p1, q1, p2, q2) -> int:
        d = max(np.linalg.norm(p2 - p1), _angle(q1, q2) * self.radius)
        return max(1, int(math.ceil(d / self.res)))

    def segment_free(self, p1, q1, p2, q2) -> bool:
        n = self.n_steps(p1, q1, p2, q2)
        for k in range(1, n + 1):
            s = k / n
            if not self.free(p1 + s * (p2 - p1), _slerp(q1, q2, s)):
                return False
        return True


def _densify(points, step_pos, step_rot) -> list:
    out = [points[0]]
    for (p1, q1), (p2, q2) in zip(points, points[1:]):
        n = max(1, int(math.ceil(max(np.linalg.norm(p2 - p1) / step_pos,
                                     _angle(q1, q2) / step_rot) - 1e-9)))
        for k in range(1, n + 1):
            s = k / n
            out.append((p1 + s * (p2 - p1), _slerp(q1, q2, s)))
    return out


def _rrt(chk: _Checker, start, goal, bounds, config: MotionConfig):
    rng = np.random.default_rng(config.seed)
    w_rot = config.step_pos / config.step_rot
    lo, hi = bounds
    cap = config.node_limit + 2
    P = np.empty((cap, 3))
    Q = np.empty((cap, 4))
    parent = np.full(cap, -1, dtype=int)
    P[0], Q[0] = start
    n = 1
    gp, gq = goal
    while n < cap - 1:
        if rng.random() < config.goal_bias:
            sp, sq = gp, gq
        else:
            sp = lo + rng.random(3) * (hi - lo)
            sq = Rotation.random(random_state=rng).as_quat()
        dots = np.abs(Q[:n] @ sq).clip(max=1.0)
        dist = np.linalg.norm(P[:n] - sp, axis=1) + w_rot * 2 * np.arccos(dots)
        i = int(np.argmin(dist))
        dp = np.linalg.norm(sp - P[i])
        da = _angle(Q[i], sq)
        f = min(1.0, config.step_pos / dp if dp > 0 else 1.0, config.step_rot / da if da > 0 else 1.0)
        np_, nq = P[i] + f * (sp - P[i]), _slerp(Q[i], sq, f)
        if not chk.segment_free(P[i], Q[i], np_, nq):
            continue
        P[n], Q[n], parent[n] = np_, nq, i
        n += 1
        if (np.linalg.norm(gp - np_) + w_rot * _angle(nq, gq) <= config.connect_radius
                and chk.segment_free(np_, nq, gp, gq)):
            path = [(gp, gq)]
            j = n - 1
            while j >= 0:
                path.append((P[j].copy(), Q[j].copy()))
                j = parent[j]
            return path[::-1]
    return None


def check_edge(query: MotionQuery, config: MotionConfig = MotionConfig()) -> MotionTrace:
    """Find a collision-free motion for ``query``.

    Raises
    ------
    InvalidQuery
        If the start or goal pose is itself in collision.
    Infeasible
        If a straight exit/entry segment is blocked, or the RRT exhausts its
        node limit.
    """
    chk = _Checker(query, config)
    s = (query.start_pose.translation.copy(), _quat(query.start_pose.rotation))
    g = (query.goal_pose.translation.copy(), _quat(query.goal_pose.rotation))
    if not chk.free(*s):
        raise InvalidQuery("start pose is in collision")
    if not chk.free(*g):
        raise InvalidQuery("goal pose is in collision")
    s2 = (s[0] + np.asarray(query.depart, float), s[1])
    g2 = (g[0] - np.asarray(query.approach, float), g[1])
    if not chk.segment_free(*s, *s2):
        raise Infeasible("straight departure is blocked", "depart")
    if not chk.segment_free(*g2, *g):
        raise Infeasible("straight approach is blocked", "approach")
    planner = "straight"
    if chk.segment_free(*s2, *g2):
        middle = [s2, g2]
    else:
        bounds = query.bounds
        if bounds is None:
            pts = np.array([s[0], g[0], s2[0], g2[0]])
            m = config.bounds_margin
            floor = query.table_height if query.table_height is not None else pts[:, 2].min() - m
            lo = np.array([pts[:, 0].min() - m, pts[:, 1].min() - m, floor])
            hi = np.array([pts[:, 0].max() + m, pts[:, 1].max() + m,
                           max(pts[:, 2].max(), floor + config.ceiling)])
            bounds = (lo, hi)
        middle = _rrt(chk, s2, g2, (np.asarray(bounds[0], float), np.asarray(bounds[1], float)), config)
        if middle is None:
            raise Infeasible(f"RRT found no path within {config.node_limit} nodes", "transfer")
        planner = "rrt"
    pts = _dedupe([s, s2] + list(middle[1:-1]) + [g2, g])
    dense = _densify(pts, config.step_pos, config.step_rot)
    return MotionTrace([Pose(_mat(q), p) for p, q in dense], config.resolution,
                       query.attached_id, planner)


def _dedupe(points) -> list:
    out = [points[0]]
    for p, q in points[1:]:
        if np.linalg.norm(p - out[-1][0]) > 1e-15 or _angle(q, out[-1][1]) > 1e-12:
            out.append((p, q))
    if len(out) == 1:
        out.append(points[-1])
    return out


def trace_poses(trace: MotionTrace, resolution: float, radius: float) -> list:
    """All interpolated poses along a trace at a given stepping resolution."""
    out = [trace.waypoints[0]]
    for a, b in zip(trace.waypoints, trace.waypoints[1:]):
        p1, q1 = a.translation, _quat(a.rotation)
        p2, q2 = b.translation, _quat(b.rotation)
        d = max(np.linalg.norm(p2 - p1), _angle(q1, q2) * radius)
        n = max(1, int(math.ceil(d / resolution)))
        for k in range(1, n + 1):
            s = k / n
            out.append(Pose(_mat(_slerp(q1, q2, s)), p1 + s * (p2 - p1)))
    return out
