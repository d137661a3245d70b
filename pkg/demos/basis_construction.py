"""
Building a network basis
========================

Start from a small graph, take powers of its adjacency matrix and complete
them with an orthonormal remainder that spans everything the powers cannot
express.
"""

import numpy as np

from lcsm import build_basis, check_linear_independence, normalize_basis
from lcsm.symcore import frob_inner

# a path on five nodes
A = np.zeros((5, 5))
for k in range(4):
    A[k, k + 1] = A[k + 1, k] = 1.0

# entry (k, l) of A^2 counts walks of length two between k and l
A2 = A @ A
print("walks of length 2 from node 0 to node 2:", A2[0, 2])

# I, A, A^2 must be linearly independent before anything else happens
print("independent:", bool(check_linear_independence([np.eye(5), A, A2])))

bs = build_basis(adjacency=A, s=2)
print(f"p = {bs.p} basis matrices: 1 identity, {bs.s} powers, {bs.q} remainder")
print("orthogonality residuals:", bs.orthogonality_residuals())
print("u_p (sqrt of the largest rank):", bs.u_p)

# every remainder matrix is Frobenius-orthogonal to the identity and the powers
F = bs.remainder_matrices()
print("max |<F_k, A^2>|:", max(abs(frob_inner(Fk, A2)) for Fk in F))

# rescaling to unit Frobenius norm keeps the span and records the factors
nb = normalize_basis(bs)
print("scales of I, A, A^2:", np.round(nb.scales[:3], 4))
