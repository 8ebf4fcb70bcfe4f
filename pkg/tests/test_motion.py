import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from asmplan.errors import InvalidQuery
from asmplan.geometry import Pose, box_shape
from asmplan.motion import (Infeasible, MotionConfig, MotionQuery, MotionTrace, check_edge, collide,
                            trace_poses)
from oracles import trace_violations

BODY = (box_shape((0.02, 0.02, 0.02)),)
CFG = MotionConfig()


def at(x, y, z, R=None):
    return Pose(np.eye(3) if R is None else R, [x, y, z])


def wall():
    return (box_shape((0.02, 0.6, 0.3), (0.2, 0.0, 0.15)),)


def verts(shapes):
    return [s.vertices for s in shapes]


def assert_oracle_clean(query, trace):
    moving = verts(query.body) + verts(query.attached)
    bad = trace_violations(trace.waypoints, moving, verts(query.obstacles), query.table_height,
                           trace.resolution / 10)
    assert bad == []


def test_touching_is_not_collision():
    assert not collide(BODY, None, at(0, 0, 0.01), [], table_height=0.0)
    assert collide(BODY, None, at(0, 0, 0.009), [], table_height=0.0)
    side = box_shape((0.02, 0.02, 0.02), (0.02, 0, 0.05))
    assert not collide(BODY, None, at(0, 0, 0.05), [side])
    assert collide(BODY, None, at(0.001, 0, 0.05), [side])


def test_attached_load_collides():
    load = (box_shape((0.02, 0.02, 0.02), (0, 0, -0.03)),)
    assert not collide(BODY, None, at(0, 0, 0.02), [], 0.0)
    assert collide(BODY, load, at(0, 0, 0.02), [], 0.0)


def test_straight_line_in_free_space():
    R = Rotation.from_euler("z", 1.0).as_matrix()
    q = MotionQuery(at(0, 0, 0.1), at(0.3, 0.1, 0.2, R), BODY)
    tr = check_edge(q, CFG)
    assert tr.planner == "straight"
    assert tr.waypoints[0].allclose(q.start_pose) and tr.waypoints[-1].allclose(q.goal_pose)
    poses = trace_poses(tr, CFG.resolution, 0.02)
    steps = [np.linalg.norm(b.translation - a.translation) for a, b in zip(poses, poses[1:])]
    assert max(steps) <= CFG.resolution + 1e-12
    assert_oracle_clean(q, tr)


def test_oracle_flags_a_trace_through_the_wall():
    straight = MotionTrace([at(0, 0, 0.05), at(0.4, 0, 0.05)], CFG.resolution)
    q = MotionQuery(straight.waypoints[0], straight.waypoints[-1], BODY, obstacles=wall())
    bad = trace_violations(straight.waypoints, verts(BODY), verts(q.obstacles), 0.0, CFG.resolution / 10)
    assert bad and all(k == 0 for _, k, _ in bad)
    sunk = [at(0, 0, 0.05), at(0.1, 0, 0.0)]
    assert any(k == "table" for _, k, _ in trace_violations(sunk, verts(BODY), [], 0.0, 0.001))


def test_wall_forces_rrt_and_trace_is_clean():
    q = MotionQuery(at(0, 0, 0.05), at(0.4, 0, 0.05), BODY, obstacles=wall())
    tr = check_edge(q, CFG)
    assert tr.planner == "rrt"
    assert tr.waypoints[-1].allclose(q.goal_pose)
    assert_oracle_clean(q, tr)


def test_carried_load_around_wall():
    load = (box_shape((0.03, 0.03, 0.03), (0, 0, -0.026)),)
    q = MotionQuery(at(0, 0, 0.05), at(0.4, 0, 0.05), BODY, obstacles=wall(), attached=load,
                    attached_id="L")
    tr = check_edge(q, CFG)
    assert tr.attached_id == "L"
    assert_oracle_clean(q, tr)


def test_deterministic_for_fixed_seed():
    q = MotionQuery(at(0, 0, 0.05), at(0.4, 0, 0.05), BODY, obstacles=wall())
    a, b = check_edge(q, CFG), check_edge(q, CFG)
    assert a.to_dict() == b.to_dict()


@pytest.mark.parametrize("obstacles", [(), wall()])
def test_feasibility_is_symmetric(obstacles):
    p, g = at(0, 0, 0.05), at(0.4, 0, 0.05)
    fwd = check_edge(MotionQuery(p, g, BODY, obstacles=obstacles), CFG)
    back = check_edge(MotionQuery(g, p, BODY, obstacles=obstacles), CFG)
    assert fwd.waypoints[0].allclose(back.waypoints[-1])


def cage(cx, cy, cz, inner=0.06, t=0.01):
    h = inner / 2 + t / 2
    size_x, size_y, size_z = (t, inner + 2 * t, inner + 2 * t), (inner + 2 * t, t, inner + 2 * t), \
        (inner + 2 * t, inner + 2 * t, t)
    return tuple([box_shape(size_x, (cx + s * h, cy, cz)) for s in (-1, 1)]
                 + [box_shape(size_y, (cx, cy + s * h, cz)) for s in (-1, 1)]
                 + [box_shape(size_z, (cx, cy, cz + s * h)) for s in (-1, 1)])


def test_enclosed_goal_is_infeasible():
    q = MotionQuery(at(0, 0, 0.1), at(0.3, 0, 0.1), BODY, obstacles=cage(0.3, 0, 0.1))
    with pytest.raises(Infeasible):
        check_edge(q, MotionConfig(node_limit=300))


def test_colliding_endpoints_are_invalid():
    with pytest.raises(InvalidQuery):
        check_edge(MotionQuery(at(0, 0, 0.0), at(0.2, 0, 0.1), BODY), CFG)
    with pytest.raises(InvalidQuery):
        check_edge(MotionQuery(at(0, 0, 0.1), at(0.2, 0, 0.0), BODY), CFG)


def test_blocked_departure_reports_segment():
    lid = (box_shape((0.1, 0.1, 0.01), (0, 0, 0.085)),)
    q = MotionQuery(at(0, 0, 0.05), at(0.3, 0, 0.05), BODY, obstacles=lid, depart=np.array([0, 0, 0.05]))
    with pytest.raises(Infeasible) as e:
        check_edge(q, CFG)
    assert e.value.segment == "depart"
    q = MotionQuery(at(0.3, 0, 0.05), at(0, 0, 0.05), BODY, obstacles=lid, approach=np.array([0, 0, -0.05]))
    with pytest.raises(Infeasible) as e:
        check_edge(q, CFG)
    assert e.value.segment == "approach"


def test_trace_round_trips():
    tr = check_edge(MotionQuery(at(0, 0, 0.1), at(0.1, 0, 0.1), BODY), CFG)
    tr2 = MotionTrace.from_dict(tr.to_dict())
    assert tr2.to_dict() == tr.to_dict()
    assert tr.to_csv().splitlines()[0] == "x,y,z,qx,qy,qz,qw"
