"""Regenerate the shipped scene files under src/asmplan/scenes."""
import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "asmplan" / "scenes"
I3 = [1, 0, 0, 0, 1, 0, 0, 0, 1]
DOWN = [0, 0, -1]


def at(z, x=0.0, y=0.0):
    return {"R": I3, "t": [x, y, z]}


def leaf(pid):
    return {"id": "A" + pid[1:], "parts": [pid]}


SMALL = {"id": "H1", "min_width": 0.0, "max_width": 0.06, "finger_pad": [0.008, 0.008]}
LARGE = {"id": "H2", "min_width": 0.0, "max_width": 0.10}


def workspace(initial, escapes=((0, -1), (1, -1))):
    return {"grid_pitch": 0.2, "assembly_point": [0, 0], "escape_points": [list(e) for e in escapes],
            "initial_points": initial, "table_height": 0.0}


def flat(*pids):
    return {p: {"down": DOWN, "yaw": 0.0} for p in pids}


def three_blocks():
    # base block, thin tile on top, cube on the tile
    return {
        "name": "three_blocks",
        "parts": [{"id": "P1", "box": [0.04, 0.04, 0.01]},
                  {"id": "P2", "box": [0.07, 0.07, 0.07]},
                  {"id": "P3", "box": [0.08, 0.08, 0.04]}],
        "grippers": [SMALL, LARGE],
        "workspace": workspace({"P1": [1, 1], "P2": [-1, 1], "P3": [-1, 0]}),
        "initial_placements": flat("P1", "P2", "P3"),
        "yaw_set": [0.0, 1.5707963267948966],
        "andor": {
            "assemblies": [
                {"id": "A123", "parts": ["P3", "P1", "P2"], "rel_poses": [at(0.025), at(0.065)],
                 "approach_dirs": [DOWN, DOWN]},
                {"id": "A13", "parts": ["P3", "P1"], "rel_poses": [at(0.025)], "approach_dirs": [DOWN]},
                leaf("P3"), leaf("P1"), leaf("P2")],
            "hyperedges": [{"parent": "A123", "children": ["A13", "A2"]},
                           {"parent": "A13", "children": ["A3", "A1"], "base": "A3"}]},
    }


def tile_stack():
    # body with two identical thin tiles stacked on it
    return {
        "name": "tile_stack",
        "parts": [{"id": "P1", "box": [0.08, 0.08, 0.05]},
                  {"id": "P2", "box": [0.07, 0.03, 0.01]},
                  {"id": "P3", "box": [0.07, 0.03, 0.01]}],
        "grippers": [SMALL, dict(LARGE, min_width=0.04)],
        "workspace": workspace({"P1": [-1, 0], "P2": [1, 1], "P3": [-1, 1]}),
        "initial_placements": flat("P1", "P2", "P3"),
        "yaw_set": [0.0, 1.5707963267948966],
        "andor": {
            "assemblies": [
                {"id": "A123", "parts": ["P1", "P2", "P3"], "rel_poses": [at(0.03), at(0.04)],
                 "approach_dirs": [DOWN, DOWN]},
                {"id": "A12", "parts": ["P1", "P2"], "rel_poses": [at(0.03)], "approach_dirs": [DOWN]},
                leaf("P1"), leaf("P2"), leaf("P3")],
            "hyperedges": [{"parent": "A123", "children": ["A12", "A3"]},
                           {"parent": "A12", "children": ["A1", "A2"], "base": "A1"}]},
    }


def two_cubes():
    return {
        "name": "two_cubes",
        "parts": [{"id": "P1", "box": [0.05, 0.05, 0.05]}, {"id": "P2", "box": [0.05, 0.05, 0.05]}],
        "grippers": [dict(SMALL, finger_pad=[0.02, 0.02])],
        "workspace": workspace({"P1": [1, 0], "P2": [-1, 0]}),
        "initial_placements": flat("P1", "P2"),
        "yaw_set": [0.0],
        "andor": {
            "assemblies": [
                {"id": "A12", "parts": ["P1", "P2"], "rel_poses": [at(0.05)], "approach_dirs": [DOWN]},
                leaf("P1"), leaf("P2")],
            "hyperedges": [{"parent": "A12", "children": ["A1", "A2"]}]},
    }


def blocked_grasp():
    # two posts flank P1 along the closing axis of its preferred grasp: the
    # closed grasp fits between them, the opened jaw does not
    scene = two_cubes()
    scene["name"] = "blocked_grasp"
    scene["obstacles"] = [{"box": [0.02, 0.01, 0.06], "center": [0.2, s * 0.042, 0.03]} for s in (-1, 1)]
    return scene


def two_trees():
    # tree 0 would push P2 up into place from below; tree 1 is feasible
    side = {"R": I3, "t": [0.05, 0.0, 0.0]}
    return {
        "name": "two_trees",
        "parts": [{"id": "P1", "box": [0.05, 0.05, 0.05]}, {"id": "P2", "box": [0.05, 0.05, 0.05]},
                  {"id": "P3", "box": [0.05, 0.05, 0.05]}],
        "grippers": [dict(SMALL, finger_pad=[0.02, 0.02])],
        "workspace": workspace({"P1": [1, 0], "P2": [-1, 0], "P3": [1, 1]}),
        "initial_placements": flat("P1", "P2", "P3"),
        "yaw_set": [0.0],
        "andor": {
            "assemblies": [
                {"id": "A123", "parts": ["P1", "P2", "P3"], "rel_poses": [at(0.05), side],
                 "approach_dirs": [DOWN, [-1, 0, 0]]},
                {"id": "A12", "parts": ["P1", "P2"], "rel_poses": [at(0.05)], "approach_dirs": [[0, 0, 1]]},
                {"id": "A13", "parts": ["P1", "P3"], "rel_poses": [side], "approach_dirs": [[-1, 0, 0]]},
                leaf("P1"), leaf("P2"), leaf("P3")],
            "hyperedges": [{"parent": "A123", "children": ["A12", "A3"]},
                           {"parent": "A123", "children": ["A13", "A2"]},
                           {"parent": "A12", "children": ["A1", "A2"], "base": "A1"},
                           {"parent": "A13", "children": ["A1", "A3"], "base": "A1"}]},
    }


def too_wide():
    return {
        "name": "too_wide",
        "parts": [{"id": "P1", "box": [0.15, 0.15, 0.15]}],
        "grippers": [SMALL, LARGE],
        "workspace": workspace({"P1": [1, 0]}),
        "yaw_set": [0.0],
        "andor": {"assemblies": [leaf("P1")], "hyperedges": []},
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for fn in (three_blocks, tile_stack, two_cubes, blocked_grasp, two_trees, too_wide):
        scene = fn()
        (OUT / f"{scene['name']}.json").write_text(json.dumps(scene, indent=1) + "\n")


if __name__ == "__main__":
    main()
