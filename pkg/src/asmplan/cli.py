"""Command line entry point.

Subcommands: ``plan``, ``graph``, ``validate`` and ``grasps``. Exit codes
are 0 on success, 2 for unreadable or invalid scenes, 3 when the AND/OR
graph has no solution, 4 when no path survives search and replanning, and
5 for internal errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import andor
from .asmgraph import build_assembly_graph
from .errors import NoSolution, PlanningError, SceneError, UnknownPart
from .export import full_dot, simplified_dot
from .planner import PlanningFailed, plan_scene
from .scene import load_scene, validate_scene

EXIT_OK, EXIT_SCENE, EXIT_NO_SOLUTION, EXIT_NO_PATH, EXIT_INTERNAL = 0, 2, 3, 4, 5


def _load(path):
    scene = load_scene(path)
    problems = validate_scene(scene)
    if problems:
        raise SceneError(problems)
    return scene


def _write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_plan(args) -> int:
    scene = _load(args.scene)
    if args.seed is not None:
        scene = scene.with_seed(args.seed)
    res = plan_scene(scene, max_trees=args.max_trees, cut_budget=args.cut_budget,
                     cache_dir=args.grasp_cache)
    _write(args.out, res.plan.dumps())
    usage = " -> ".join(res.plan.gripper_usage())
    exchanges = sum(1 for s in res.plan.steps if s.kind == "ToolExchange")
    print(f"plan: tree {res.plan.tree_id}, {len(res.plan.steps)} steps, "
          f"{exchanges} tool exchanges ({usage}), cost {res.plan.total_cost:g}, "
          f"{len(res.plan.cut_history)} cuts, {res.seconds:.2f} s")
    return EXIT_OK


def cmd_graph(args) -> int:
    scene = _load(args.scene)
    tree = next(andor.enumerate_solutions(scene.andor_graph, 1))
    ag = build_assembly_graph(tree, scene, scene.grasp_database(args.grasp_cache))
    _write(args.out, full_dot(ag) if args.full else simplified_dot(ag))
    return EXIT_OK


def cmd_validate(args) -> int:
    scene = load_scene(args.scene)
    problems = validate_scene(scene)
    for p in problems:
        print(p)
    if problems:
        return EXIT_SCENE
    print("ok")
    return EXIT_OK


def cmd_grasps(args) -> int:
    scene = _load(args.scene)
    if args.part not in scene.parts:
        raise SceneError(f"unknown part id {args.part!r}")
    if args.gripper not in scene.grippers:
        raise SceneError(f"unknown gripper id {args.gripper!r}")
    from .grasp import GraspDatabase, generate_grasps
    db = GraspDatabase({(args.part, args.gripper): generate_grasps(
        scene.parts[args.part], scene.grippers[args.gripper], scene.sampling)})
    _write(args.out, db.dumps())
    print(f"{len(db)} grasps")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asmplan", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plan", help="plan an assembly and write the plan JSON")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-trees", type=int)
    p.add_argument("--cut-budget", type=int)
    p.add_argument("--grasp-cache", help="directory for cached grasp databases")
    p.set_defaults(func=cmd_plan)
    p = sub.add_parser("graph", help="export the assembly graph of the first solution tree as DOT")
    p.add_argument("--scene", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--simplified", action="store_true")
    g.add_argument("--full", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--grasp-cache")
    p.set_defaults(func=cmd_graph)
    p = sub.add_parser("validate", help="check a scene file")
    p.add_argument("--scene", required=True)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("grasps", help="generate one part's grasp database for one gripper")
    p.add_argument("--scene", required=True)
    p.add_argument("--part", required=True)
    p.add_argument("--gripper", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grasps)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SceneError as exc:
        for v in exc.violations:
            print(f"error [scene]: {v}", file=sys.stderr)
        return EXIT_SCENE
    except NoSolution as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except PlanningFailed as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    except (PlanningError, UnknownPart) as exc:
        print(f"error [{getattr(exc, 'stage', 'internal')}]: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
