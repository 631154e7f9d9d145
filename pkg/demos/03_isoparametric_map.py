"""
Inspecting the isoparametric map.

A single triangle with two vertices on the circle r = 1/2: its curved edge
passes through the projected chord midpoint, the Jacobian stays positive, and
the mapped area approaches the sector area.
"""
import numpy as np

from isodg import Circle, Mesh, build_isoparametric_map, generate_disc_mesh, mapped_measure
from isodg.geometry import boundary_distance, jacobian, map_point, surface_frame

circle = Circle((0.0, 0.0), 0.5)
tri = Mesh([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]], [[0, 1, 2]])

# for odd k the chord midpoint is not a Lagrange node, so it lands only near
# the circle; this quarter-disc element is deliberately huge
for k in (1, 2, 3, 4):
    gmap = build_isoparametric_map(tri, k, circle)
    mid = map_point(gmap, 0, [0.5, 0.5])
    _, det = jacobian(gmap, 0, [1 / 3, 1 / 3])
    print(f"k={k}: edge midpoint -> {mid}, |x| = {np.linalg.norm(mid):.15f}, "
          f"det J(barycenter) = {det:.6f}, area = {mapped_measure(gmap):.10f} "
          f"(sector {np.pi / 16:.10f})")

# %% surface frame on the curved edge: the normal is radial at the midpoint
gmap = build_isoparametric_map(tri, 2, circle)
frame = surface_frame(gmap, 0, 0, [0.5, 0.5])
print("normal", frame.normal, "scale", frame.scale)

# %% geometric error orders on the refined disc
for k in (1, 2, 3):
    d = [boundary_distance(build_isoparametric_map(generate_disc_mesh(l, circle), k, circle), circle)
         for l in (1, 2, 3, 4)]
    print(f"k={k}: boundary distance orders", np.round(np.log2(np.array(d[:-1]) / d[1:]), 2))
