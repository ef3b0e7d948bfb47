"""Geodesic distances, metric balls, separated nets, and cutoffs.

The Bergman metric is discretized as a nearest-neighbor graph over a
quadrature grid; Dijkstra gives distances, metric balls, and from those
a maximal r-separated net with a subordinate partition of unity.
"""

import math

import numpy as np

from bergmanlab import domains as dom
from bergmanlab.geometry import (GeodesicField, build_net, covering_audit,
                                 metric_ball, multiplicity,
                                 partition_of_unity, separation_audit)
from bergmanlab.kernels import engine_for

disc = dom.disc()
grid = dom.build_grid(disc, 0.025)
field = GeodesicField(engine_for(disc), grid)
print(f"disc grid: {len(grid)} nodes, resolution {grid.resolution}")

# -- distance oracle ---------------------------------------------------

oracle = math.sqrt(2.0) * math.atanh(0.5)
d = field.distance(np.array([0.0j]), np.array([0.5 + 0.0j]))
print(f"\ndist(0, 0.5) = {d:.5f}   closed form {oracle:.5f}   "
      f"rel err {abs(d - oracle) / oracle:.2%}")

# the distance is Moebius-invariant: rotations cost nothing
d2 = field.distance(np.array([0.0j]), np.array([0.5j]))
print(f"dist(0, 0.5i) = {d2:.5f}   (rotation of the same pair)")

# -- metric balls ------------------------------------------------------

print("\nunit metric balls B(zeta, 1) shrink in Euclidean size near "
      "the boundary:")
for t in (0.0, 0.5, 0.9):
    ball = metric_ball(field, np.array([t + 0.0j]), 1.0)
    print(f"  zeta = {t:3.1f}   nodes {len(ball):5d}   "
          f"Lebesgue mass {ball.lebesgue_mass:.4f}")

# -- nets and partitions ----------------------------------------------

net = build_net(field, 0.5)
print(f"\nmaximal 0.5-separated net: {len(net)} centers")
print(f"  separation audit : {separation_audit(net):.4f}  (>= 0.5)")
print(f"  covering fraction: {covering_audit(net):.4f}  (= 1.0)")
print(f"  multiplicity at radius 1.0: {multiplicity(net, 1.0)}")

part = partition_of_unity(net)
sums = np.sum(part.evaluate(grid.nodes), axis=0)
print(f"  partition of unity: max |sum - 1| = "
      f"{np.max(np.abs(sums - 1.0)):.2e}")
