"""
Stable placements and grasp quality
===================================

Every planning node starts from a part resting on one of its stable facets.
This script lists which facets of a wedge it can rest on, then
ranks the grasps of a cube by their finger-pad contact area.
"""

import numpy as np

from asmplan import Assembly, Gripper, Part, generate_grasps, stability_index, stable_facets

# a prism whose triangular section overhangs: the short slanted face is too
# narrow to hold the centre of mass above it
tri = np.array([[0.0, 0.0], [0.12, 0.0], [-0.04, 0.03]])
wedge = Part("W", np.array([[x, y, z] for x, y in tri for z in (0.0, 0.04)]))
facets = stable_facets(Assembly("W", ("W",)), {"W": wedge})
print("facets of the wedge (outward normals):")
for k, n in enumerate(wedge.hull.normals):
    print("  ", k, np.round(n, 3), "stable" if k in facets else "tips over")

# grasps of a 5 cm cube by a gripper with 2 cm square pads
cube = Part.box("C", (0.05, 0.05, 0.05))
gripper = Gripper("H1", 0.0, 0.06, finger_pad=(0.02, 0.02))
grasps = generate_grasps(cube, gripper)
scores = np.array([stability_index(g, cube, gripper) for g in grasps])
print(f"\n{len(grasps)} grasps of the cube; pad contact area from {scores.min():.2e} "
      f"to {scores.max():.2e} m^2")
best = grasps[int(np.argmax(scores))]
print("best grasp wrist position:", np.round(best.wrist_pose.translation, 4))
