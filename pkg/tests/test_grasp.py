import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from asmplan.errors import NoContact
from asmplan.geometry import (Assembly, Part, PlacementPose, Pose, Workspace, box_vertices,
                              facet_with_normal, placement_pose_to_world, sat_overlap)
from asmplan.grasp import (GraspDatabase, GraspPose, GraspSampling, Gripper, ReachParams,
                           TableCollision, antipodal_pairs, default_reachability, filter_grasps,
                           generate_grasps, gripper_shapes, stability_index)
from oracles import pad_contact_area

SMALL = Gripper("H1", 0.0, 0.06)
LARGE = Gripper("H2", 0.0, 0.10)
WS = Workspace(0.2, (0, 0), ((0, -1),), {"C": (1, 0)})


def cube(size=0.05, pid="C"):
    return Part.box(pid, (size,) * 3)


def test_cube_grasp_count_and_width():
    gs = generate_grasps(cube(), SMALL)
    assert len(gs) > 0
    assert {round(g.jaw_width, 12) for g in gs} == {0.05}


def test_width_limits_exclude_everything():
    assert generate_grasps(cube(), Gripper("W", 0.06, 0.10)) == []
    assert generate_grasps(Part.box("B", (0.15, 0.15, 0.15)), LARGE) == []


def test_box_pairs_respect_limits():
    p = Part.box("B", (0.03, 0.08, 0.05))
    widths = sorted(round(d, 9) for *_, d in antipodal_pairs(p, 0.0, 0.06))
    assert widths == [0.03, 0.05]
    assert {round(g.jaw_width, 9) for g in generate_grasps(p, SMALL)} == {0.03, 0.05}


def test_fingers_touch_and_do_not_penetrate():
    p = cube()
    for g in generate_grasps(p, SMALL)[:40]:
        shapes = [s.posed(g.wrist_pose) for s in gripper_shapes(SMALL, g.jaw_width)]
        for s in shapes:
            assert sat_overlap(s, p.hull.shape) <= 1e-9
        # both fingers are in contact, the palm is clear
        for finger in shapes[:2]:
            assert sat_overlap(finger, p.hull.shape) == pytest.approx(0.0, abs=1e-9)
        assert sat_overlap(shapes[2], p.hull.shape) < -1e-3


def test_stability_index_of_centered_cube_grasp():
    p = cube()
    g = generate_grasps(p, SMALL)[0]
    assert stability_index(g, p, SMALL) == pytest.approx(4e-4, rel=1e-9)


def test_stability_index_matches_clipping_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        size = rng.uniform(0.01, 0.06, 3)
        R = Rotation.random(random_state=rng).as_matrix()
        p = Part("P", box_vertices(size) @ R.T)
        gr = Gripper("G", 0.0, 0.06, finger_pad=tuple(rng.uniform(0.005, 0.03, 2)))
        for g in generate_grasps(p, gr, GraspSampling(0.004, 4))[::7]:
            assert stability_index(g, p, gr) == pytest.approx(pad_contact_area(g, p, gr), rel=1e-9, abs=1e-15)


def test_stability_index_no_contact():
    p = cube()
    g = generate_grasps(p, SMALL)[0]
    shifted = GraspPose(g.part_id, g.gripper_id, Pose(g.wrist_pose.rotation, g.wrist_pose.translation + 1.0),
                        g.jaw_width)
    with pytest.raises(NoContact):
        stability_index(shifted, p, SMALL)


def test_database_json_round_trip():
    db = GraspDatabase.generate([cube()], [SMALL])
    db2 = GraspDatabase.from_json(db.to_json())
    assert len(db2) == len(db)
    assert db2.dumps() == db.dumps()


def placed_cube():
    p = cube()
    a = Assembly("A", ("C",))
    f = facet_with_normal(p.hull, [0, 0, -1])
    pl = PlacementPose((1, 0), f, 0.0)
    return p, a, pl, placement_pose_to_world(pl, a, {"C": p}, WS)


def test_filter_removes_table_collisions():
    p, a, pl, W = placed_cube()
    db = GraspDatabase.generate([p], [SMALL])
    fs = filter_grasps(a, pl, SMALL, db, {"C": p}, WS, W)
    assert 0 < len(fs) < len(db.get("C", "H1"))
    table = TableCollision(0.0)
    for fg in fs.grasps:
        assert not table([s.posed(fg.wrist_world) for s in gripper_shapes(SMALL, fg.grasp.jaw_width)])
    # the bottom-face grasps are the ones removed
    assert all(fg.wrist_world.translation[2] > 0 for fg in fs.grasps)


def test_filter_respects_reachability():
    p, a, pl, W = placed_cube()
    db = GraspDatabase.generate([p], [SMALL])
    none = filter_grasps(a, pl, SMALL, db, {"C": p}, WS, W, reachable=lambda w: False)
    assert len(none) == 0
    tight = ReachParams(r_max=0.1)
    far = filter_grasps(a, pl, SMALL, db, {"C": p}, WS, W,
                        reachable=lambda w: default_reachability(w, WS, tight))
    assert len(far) == 0


def test_reachability_region_is_closed():
    reach = ReachParams(r_max=0.2)
    on_boundary = Pose(np.diag([1.0, -1.0, -1.0]), [0.2, 0.0, 0.0])
    assert default_reachability(on_boundary, WS, reach)
    assert not default_reachability(Pose(np.diag([1.0, -1.0, -1.0]), [0.2001, 0.0, 0.0]), WS, reach)
