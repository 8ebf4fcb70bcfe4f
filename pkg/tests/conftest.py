import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from asmplan import load_scene, plan_scene  # noqa: E402
from asmplan.motion import check_edge  # noqa: E402

SCENES = Path(__file__).resolve().parents[1] / "src" / "asmplan" / "scenes"
PLANNABLE = ["two_cubes", "three_blocks", "tile_stack", "blocked_grasp", "two_trees"]
ALL_SCENES = PLANNABLE + ["too_wide"]


def scene_path(name: str) -> Path:
    return SCENES / f"{name}.json"


class RecordingChecker:
    """Runs the default motion checker and remembers every query it saw."""

    def __init__(self, scene):
        self.config = scene.motion
        self.log = []

    def __call__(self, query):
        trace = check_edge(query, self.config)
        self.log.append((query, trace))
        return trace


_RUNS: dict = {}
_SCENES: dict = {}
_DBS: dict = {}


def get_scene(name):
    if name not in _SCENES:
        _SCENES[name] = load_scene(scene_path(name))
    return _SCENES[name]


def get_db(name):
    if name not in _DBS:
        _DBS[name] = get_scene(name).grasp_database()
    return _DBS[name]


def planned(name):
    """(PlanResult, RecordingChecker, wall seconds), computed once per session."""
    if name not in _RUNS:
        t0 = time.perf_counter()
        scene = load_scene(scene_path(name))
        rec = RecordingChecker(scene)
        res = plan_scene(scene, checker=rec)
        _RUNS[name] = (res, rec, time.perf_counter() - t0)
    return _RUNS[name]


@pytest.fixture(params=PLANNABLE)
def planned_scene(request):
    return request.param, get_scene(request.param), *planned(request.param)
