"""Grasp and assembly planning with gripper exchange.

Parts are convex polyhedra, products are described by AND/OR graphs, and a
plan is found by searching an assembly graph whose nodes pair an assembly's
placement with a grasp and a gripper. Motions are checked for a free-flying
gripper.
"""
from .andor import AndOrGraph, Hyperedge, SolutionTree, enumerate_solutions, linearize
from .asmgraph import (AssemblyGraph, EdgeKind, NodeKind, assign_grasps, build_assembly_graph,
                       dijkstra_search, validate_and_replan)
from .geometry import Assembly, Part, PlacementPose, Pose, Workspace, convex_hull, stable_facets
from .grasp import GraspDatabase, Gripper, filter_grasps, generate_grasps, stability_index
from .motion import MotionConfig, MotionQuery, MotionTrace, check_edge, collide
from .planner import PlanResult, plan_scene
from .scene import Scene, load_scene, scene_from_dict, shipped_scene, validate_scene
from .sequence import AssemblyPlan, count_tool_exchanges, generate_sequence, verify_plan

__version__ = "0.1.0"

__all__ = [
    "AndOrGraph", "Assembly", "AssemblyGraph", "AssemblyPlan", "EdgeKind", "GraspDatabase",
    "Gripper", "Hyperedge", "MotionConfig", "MotionQuery", "MotionTrace", "NodeKind", "Part",
    "PlacementPose", "PlanResult", "Pose", "Scene", "SolutionTree", "Workspace",
    "assign_grasps", "build_assembly_graph", "check_edge", "collide", "convex_hull",
    "count_tool_exchanges", "dijkstra_search", "enumerate_solutions", "filter_grasps",
    "generate_grasps", "generate_sequence", "linearize", "load_scene", "plan_scene",
    "scene_from_dict", "shipped_scene", "stability_index", "stable_facets", "validate_and_replan",
    "validate_scene", "verify_plan",
]
