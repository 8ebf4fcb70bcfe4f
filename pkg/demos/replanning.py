"""
Replanning after motion failures
================================

The graph search only knows which grasps are collision-free at rest. Motions
are checked afterwards, and a failed motion cuts the offending grasp from its
hop before the search runs again. When a whole solution tree runs out of
options, the planner moves on to the next decomposition.
"""

from asmplan import load_scene, plan_scene, shipped_scene

# two posts next to the first part block most of its grasps during approach
scene = load_scene(shipped_scene("blocked_grasp"))
res = plan_scene(scene)
print(f"blocked_grasp: {len(res.plan.cut_history)} cuts before a valid plan")
for h in res.plan.cut_history[:5]:
    print("   edge", h["edge"], "grasp", h["grasp"], "-", h["reason"])
print("   ...")
used = [(a.edge, a.key) for a in res.core.actions if a.kind == "transfer"]
print("   grasps finally used:", used)

# the first decomposition of this product inserts a part along a blocked
# direction; every grasp fails, the budget runs out, tree 1 succeeds
scene = load_scene(shipped_scene("two_trees"))
res = plan_scene(scene)
for a in res.attempts:
    print(f"two_trees: tree {a.tree_id} -> {a.outcome} ({a.cuts} cuts)")
print("plan uses tree", res.plan.tree_id, "with", len(res.plan.steps), "steps")
