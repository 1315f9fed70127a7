"""Single and double layer operators on a polygonal boundary.

The Galerkin matrices integrate the logarithmic kernel with closed-form inner
moments, so identities like K 1 = -1/2 hold to machine precision even at
corners. The single layer potential of a mean-zero density decays like 1/r.
"""
import numpy as np
from scipy.linalg import eigh, null_space

from dgbem import BoundarySpace, assemble_K, assemble_V, triangulate_polygon
from dgbem.bem import eval_double_layer, eval_single_layer

mesh = triangulate_polygon("lshape", 2)
bs = BoundarySpace.from_mesh(mesh, 2)
V, K = assemble_V(bs), assemble_K(bs)

one = bs.constant()
print("max |<mu, K 1> + 1/2 <mu, 1>| =", np.abs(K @ one + 0.5 * bs.mass_diagonal * one).max())
print("relative asymmetry of V       =", np.abs(V - V.T).max() / np.abs(V).max())
z = null_space(bs.mean_weights[None])
print("smallest eigenvalue of V on mean-zero densities =", eigh(z.T @ V @ z, eigvals_only=True)[0])

print("\nDouble layer of the constant 1: -1 inside, 0 outside")
for p in ([0.25, 0.25], [0.75, 0.75], [2.0, 2.0]):
    print(f"  D1{tuple(p)} = {eval_double_layer(bs, one, [p])[0]: .3e}")

lam = bs.project(lambda x, y: x - y)
lam -= bs.constant(bs.mean_weights @ lam / bs.total_length)
print("\nSingle layer potential of a mean-zero density")
for r in (10.0, 100.0, 1000.0):
    print(f"  r = {r:6.0f}: S lam = {eval_single_layer(bs, lam, [[r, 0.0]])[0]: .3e}")
