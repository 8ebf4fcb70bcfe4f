"""End-to-end planning over successive AND/OR solution trees."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import andor
from .asmgraph import AssemblyGraph, PlanCore, build_assembly_graph, dijkstra_search, validate_and_replan
from .errors import BudgetExhausted, NoPath, PlanningError
from .grasp import GraspDatabase
from .scene import Scene
from .sequence import AssemblyPlan, generate_sequence, verify_plan

log = logging.getLogger(__name__)


@dataclass
class TreeAttempt:
    tree_id: int
    outcome: str
    message: str = ""
    cuts: int = 0


@dataclass
class PlanResult:
    plan: AssemblyPlan
    graph: AssemblyGraph
    attempts: list = field(default_factory=list)
    seconds: float = 0.0
    core: PlanCore | None = None


class PlanningFailed(PlanningError):
    """Every solution tree failed; ``attempts`` tells why each one did."""

    stage = "search"

    def __init__(self, message, attempts, empty_sets=()):
        super().__init__(message)
        self.attempts = list(attempts)
        self.empty_sets = list(empty_sets)


def plan_scene(scene: Scene, grasp_db: GraspDatabase | None = None, *,
               max_trees: int | None = None, cut_budget: int | None = None,
               checker: Callable | None = None, cache_dir: str | Path | None = None) -> PlanResult:
    """Plan an assembly: enumerate solution trees, build and search each
    tree's assembly graph, validate motions with replanning, and sequence
    the first plan that survives.

    Raises
    ------
    NoSolution
        If the AND/OR graph has no solution tree.
    PlanningFailed
        If no tree yields a valid plan (search or cut budget failure).
    """
    t0 = time.perf_counter()
    if grasp_db is None:
        grasp_db = scene.grasp_database(cache_dir)
    max_trees = scene.planner.max_trees if max_trees is None else max_trees
    budget = scene.planner.cut_budget if cut_budget is None else cut_budget
    attempts, empty = [], []
    for tree in andor.enumerate_solutions(scene.andor_graph, max_trees):
        ag = build_assembly_graph(tree, scene, grasp_db)
        try:
            res = dijkstra_search(ag.simplified, ag.roots, ag.goals, root_cost=ag.root_cost)
            core = validate_and_replan(ag, res, checker, budget)
        except NoPath as exc:
            empty.extend(ag.empty_sets)
            attempts.append(TreeAttempt(tree.id, "NoPath", str(exc)))
            log.info("tree %d: %s", tree.id, exc)
            continue
        except BudgetExhausted as exc:
            attempts.append(TreeAttempt(tree.id, "BudgetExhausted", str(exc),
                                      sum(1 for h in exc.cut_history if h["grasp"] is not None)))
            log.info("tree %d: %s", tree.id, exc)
            continue
        plan = generate_sequence(ag, core)
        problems = verify_plan(plan, scene)
        if problems:
            raise PlanningError("generated plan failed verification: " + "; ".join(problems))
        attempts.append(TreeAttempt(tree.id, "ok", cuts=sum(1 for h in core.cut_history if h["grasp"] is not None)))
        return PlanResult(plan, ag, attempts, time.perf_counter() - t0, core)
    detail = "; ".join(f"tree {a.tree_id}: {a.outcome} ({a.message})" for a in attempts)
    if empty:
        names = sorted({c.label() for c in empty})
        detail += "; empty grasp sets: " + ", ".join(names[:20])
    raise PlanningFailed(f"no solution tree produced a valid plan: {detail}", attempts, empty)
