"""Truncated Hankel operators: compact vs non-compact spectra.

On the disc the Hankel operator with symbol conj(z) is compact and its
singular values are known exactly.  On the bidisc the same symbol in
the second variable tensors with the identity: a singular value of
fixed size acquires multiplicity growing with the truncation degree,
the numerical signature of non-compactness.
"""

import math

import numpy as np

from bergmanlab import domains as dom
from bergmanlab.harness import symbol_parse
from bergmanlab.kernels import engine_for, reinhardt_basis
from bergmanlab.operators import (compactness_indicator, hankel_matrix,
                                  weak_null_probe)

# -- disc oracle -------------------------------------------------------

disc = dom.disc()
quad = dom.build_grid(disc, 0.0, scheme="product-polar", degree=50)
basis = reinhardt_basis(disc, 40)
trunc = hankel_matrix(symbol_parse("conj(z1)", 1), basis, quad, guard=0)
print("disc, symbol conj(z): singular values vs 1/sqrt((j+1)(j+2))")
for j in range(5):
    oracle = 1.0 / math.sqrt((j + 1) * (j + 2))
    print(f"  sigma_{j} = {trunc.singular_values[j]:.6f}   "
          f"oracle {oracle:.6f}")

# -- bidisc: multiplicity growth --------------------------------------

bid = dom.polydisc(2)
bquad = dom.build_grid(bid, 0.0, scheme="product-polar", degree=12)
sym = symbol_parse("conj(z2)", 2)

print("\nbidisc, symbol conj(z2): count of sigma > 0.5 * sigma_0 "
      "per truncation degree")
def build(n):
    return hankel_matrix(sym, reinhardt_basis(bid, n, per_variable=True),
                         bquad, guard=2, per_variable=True)

ind = compactness_indicator(build, (2, 4, 6, 8), threshold_ratio=0.5)
for n, c in zip(ind.degrees, ind.counts):
    print(f"  N = {n:2d}   count = {c}")
print(f"  verdict: {'compact' if ind.compact else 'NOT compact'} "
      f"(growing multiplicity)")

# -- weak-null probe ---------------------------------------------------

print("\n||H s_zeta|| along zeta = (t, 0): stays bounded away from 0")
centers = np.array([[t, 0.0] for t in (0.5, 0.7, 0.9)], dtype=complex)
probe = weak_null_probe(sym, engine_for(bid),
                        reinhardt_basis(bid, 10, per_variable=True),
                        bquad, centers)
for (t, _), p in zip(centers, probe):
    print(f"  t = {t.real:4.2f}   probe = {p:.4f}")
print("compact operators would send these normalized kernel sections "
      "to 0 in norm.")
