import copy
import json
import re

import pydot
import pytest

from asmplan import cli
from asmplan.errors import NoSolution, SceneError
from asmplan.planner import plan_scene
from asmplan.scene import load_scene, scene_from_dict, validate_scene
from asmplan.sequence import AssemblyPlan, verify_plan
from conftest import ALL_SCENES, scene_path


def source(name="two_cubes"):
    return json.loads(scene_path(name).read_text())


def write(tmp_path, data, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


@pytest.mark.parametrize("name", ALL_SCENES)
def test_shipped_scenes_validate(name, capsys):
    assert cli.main(["validate", "--scene", str(scene_path(name))]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_dangling_gripper_id(tmp_path, capsys):
    d = source()
    d["planner"] = {"initial_gripper": "H9"}
    assert cli.main(["validate", "--scene", write(tmp_path, d)]) == 2
    assert "'H9'" in capsys.readouterr().out


def test_dangling_part_id():
    d = source()
    d["andor"]["assemblies"][1]["parts"] = ["P7"]
    probs = validate_scene(scene_from_dict(d))
    assert any("'P7'" in p for p in probs)


def test_partition_violation_is_surfaced():
    d = source()
    d["andor"]["hyperedges"][0]["children"] = ["A1", "A1"]
    probs = validate_scene(scene_from_dict(d))
    assert any("partition violation" in p for p in probs)


def test_unreadable_scene(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    assert cli.main(["plan", "--scene", str(p), "--out", str(tmp_path / "o.json")]) == 2
    assert "error [scene]" in capsys.readouterr().err
    with pytest.raises(SceneError):
        scene_from_dict({"parts": []})


def test_plan_two_cubes(tmp_path, capsys):
    out = tmp_path / "plan.json"
    assert cli.main(["plan", "--scene", str(scene_path("two_cubes")), "--out", str(out)]) == 0
    assert "0 tool exchanges" in capsys.readouterr().out
    plan = AssemblyPlan.from_json(json.loads(out.read_text()))
    assert verify_plan(plan, load_scene(scene_path("two_cubes"))) == []
    assert plan.gripper_usage() == ["H1"]


def test_too_wide_names_the_empty_sets(tmp_path, capsys):
    code = cli.main(["plan", "--scene", str(scene_path("too_wide")), "--out", str(tmp_path / "p.json")])
    assert code == 4
    err = capsys.readouterr().err
    assert "empty grasp sets" in err
    assert "Initial:" in err


def test_no_solution_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise NoSolution("root A12 cannot be decomposed into single parts")
    monkeypatch.setattr(cli, "plan_scene", boom)
    assert cli.main(["plan", "--scene", str(scene_path("two_cubes")), "--out", str(tmp_path / "p")]) == 3
    assert "A12" in capsys.readouterr().err


def test_internal_error_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("unexpected")
    monkeypatch.setattr(cli, "plan_scene", boom)
    assert cli.main(["plan", "--scene", str(scene_path("two_cubes")), "--out", str(tmp_path / "p")]) == 5


def single_part(tmp_path):
    d = source()
    d["parts"] = d["parts"][:1]
    d["workspace"]["initial_points"] = {"P1": [1, 0]}
    d["workspace"]["escape_points"] = [[0, -1]]
    d["initial_placements"] = {"P1": {"down": [0, 0, -1]}}
    d["andor"] = {"assemblies": [{"id": "A1", "parts": ["P1"]}], "hyperedges": []}
    d["sampling"] = {"spacing": 0.05, "rolls": 1}
    return write(tmp_path, d, "single.json")


def export(tmp_path, scene, mode, k):
    out = tmp_path / f"g{mode}{k}.dot"
    assert cli.main(["graph", "--scene", scene, mode, "--out", str(out)]) == 0
    return out.read_bytes()


def edge_kinds(text):
    g = pydot.graph_from_dot_data(text)[0]
    assert g.get_nodes() and g.get_edges()
    return {e.get("kind").strip('"') for e in g.get_edges()}


@pytest.mark.parametrize("mode", ["--simplified", "--full"])
def test_two_cube_exports_repeat_byte_for_byte(tmp_path, mode):
    scene = str(scene_path("two_cubes"))
    a, b = export(tmp_path, scene, mode, 0), export(tmp_path, scene, mode, 1)
    assert a == b
    lines = a.decode().splitlines()
    assert lines[0].startswith("digraph") and lines[-1] == "}"
    stmt = re.compile(r'^  [cg]\d+( -> [cg]\d+)? \[.*\];$')
    assert all(stmt.match(ln) for ln in lines[2:-1])


def test_simplified_export_parses(tmp_path):
    text = export(tmp_path, str(scene_path("two_cubes")), "--simplified", 0).decode()
    assert edge_kinds(text) <= {"TransferAssembly", "ToolExchange", "Handoff"}


def test_full_export_parses(tmp_path):
    text = export(tmp_path, single_part(tmp_path), "--full", 0).decode()
    assert {"Transit", "TransferAssembly"} <= edge_kinds(text)


def test_grasps_command(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert cli.main(["grasps", "--scene", str(scene_path("two_cubes")), "--part", "P1",
                     "--gripper", "H1", "--out", str(out)]) == 0
    n = int(capsys.readouterr().out.split()[0])
    assert n > 0
    assert cli.main(["grasps", "--scene", str(scene_path("two_cubes")), "--part", "P9",
                     "--gripper", "H1", "--out", str(out)]) == 2


def test_seed_and_cache_flags(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    args = ["plan", "--scene", str(scene_path("two_cubes")), "--seed", "3",
            "--grasp-cache", str(tmp_path / "cache")]
    assert cli.main(args + ["--out", str(out1)]) == 0
    assert any((tmp_path / "cache").iterdir())
    assert cli.main(args + ["--out", str(out2)]) == 0       # second run reads the cache
    assert out1.read_bytes() == out2.read_bytes()


def small_and_wide():
    d = source()
    d["grippers"].append({"id": "H2", "min_width": 0.06, "max_width": 0.10, "finger_pad": [0.02, 0.02]})
    return d


def test_initial_gripper_that_fits_costs_nothing():
    d = small_and_wide()
    d["planner"] = {"initial_gripper": "H1"}
    res = plan_scene(scene_from_dict(d))
    assert res.plan.gripper_usage() == ["H1"]


def test_initial_gripper_that_cannot_grasp_is_swapped_first():
    d = small_and_wide()
    base = plan_scene(scene_from_dict(copy.deepcopy(d)))
    d["planner"] = {"initial_gripper": "H2"}
    scene = scene_from_dict(d)
    res = plan_scene(scene)
    assert res.plan.steps[0].kind == "ToolExchange"
    assert res.plan.gripper_usage() == ["H2", "H1"]
    assert res.plan.total_cost == base.plan.total_cost + scene.costs.tool_exchange
    assert verify_plan(res.plan, scene) == []
