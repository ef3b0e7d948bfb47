"""The local holomorphic-approximation functional omega.

omega_r(phi, zeta) measures how well the symbol phi is approximated by
holomorphic polynomials on the Bergman metric ball B(zeta, r), in the
Bergman-volume-weighted L^2 norm.  Decay of omega along every ray to
the boundary is the compactness criterion for the Hankel operator; a
plateau pins the obstruction to a boundary region.
"""

import math

import numpy as np

from bergmanlab import domains as dom
from bergmanlab.approximation import boundary_scan, omega
from bergmanlab.geometry import GeodesicField, metric_ball
from bergmanlab.harness import symbol_parse
from bergmanlab.kernels import engine_for

disc = dom.disc()
field = GeodesicField(engine_for(disc), dom.build_grid(disc, 0.025))
sym = symbol_parse("conj(z1)", 1)

# -- value at the center ----------------------------------------------

ball = metric_ball(field, np.array([0.0j]), 1.0)
val = omega(field, ball, sym, degree=6)
u = math.tanh(1.0 / math.sqrt(2.0)) ** 2
oracle = 2.0 * math.pi * (1.0 / (1.0 - u) - 1.0 + math.log(1.0 - u))
print(f"omega_1(conj(z), 0) = {val.value:.4f}   "
      f"closed form {oracle:.4f}")
print(f"  ball: {val.n_nodes} nodes, {val.n_unknowns} unknowns, "
      f"lstsq rank {val.rank}")

# -- decay toward the boundary (compact case) -------------------------

scan = boundary_scan(field, sym, radius=1.0, degree=4, n_rays=2,
                     steps=(0.3, 0.5, 0.7, 0.85, 0.92))
print("\ndisc scan of omega along rays to the boundary:")
for row in scan.rows:
    flag = "" if row.admissible else "   (inadmissible: ball too thin)"
    print(f"  t = {row.t:4.2f}   omega = {row.value:9.5f}{flag}")
print(f"  tail trend {scan.tail_trend:.3f}  ->  "
      f"{'decaying (compact)' if scan.decaying else 'plateau'}")

# -- plateau on the bidisc (non-compact case) -------------------------

bid = dom.polydisc(2)
bfield = GeodesicField(engine_for(bid), dom.build_grid(bid, 0.1))
bsym = symbol_parse("conj(z2)", 2)
dirs = np.array([[1.0, 0.0j], [1j, 0.0]])  # toward the face |z1| = 1
bscan = boundary_scan(bfield, bsym, radius=1.0, degree=2,
                      directions=dirs, steps=(0.3, 0.5, 0.7, 0.8))
print("\nbidisc, conj(z2), rays toward the face |z1| = 1:")
for row in bscan.rows:
    if row.ray == 0:
        print(f"  t = {row.t:4.2f}   omega = {row.value:9.5f}")
print(f"  tail trend {bscan.tail_trend:.3f}  ->  "
      f"{'decaying' if bscan.decaying else 'plateau (NOT compact)'}")
