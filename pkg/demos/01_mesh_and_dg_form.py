"""Meshes, discontinuous spaces and the interior penalty form.

A polygon is triangulated once and refined by midpoint quadrisection, which
keeps every mesh level shape-similar. On each mesh the interior penalty matrix
reproduces the Dirichlet energy of any globally linear function, because all
jump terms vanish for continuous fields.
"""
import numpy as np

from dgbem import DGSpace, PenaltyConfig, assemble_a_dg, refine_uniform, triangulate_polygon
from dgbem.dg import l2_project
from dgbem.mesh import mesh_quality


mesh = triangulate_polygon("lshape", 1)
for level in range(3):
    q = mesh_quality(mesh)
    print(f"level {level}: {mesh.n_triangles:4d} triangles, {mesh.n_interior_edges:4d} interior edges, "
          f"h = {mesh.h_max:.4f}, min angle = {q['min_angle']:.1f} deg")
    mesh = refine_uniform(mesh)

space = DGSpace(mesh, 2)
u = l2_project(space, lambda x, y: 2 * x - y).coeffs
for xi in (-1, 0, 1):
    a = assemble_a_dg(space, PenaltyConfig(xi, 10.0))
    print(f"xi = {xi:+d}: u^T A u = {u @ a @ u:.12f}   (|Omega| |grad u|^2 = {0.75 * 5:.12f})")

a = assemble_a_dg(space, PenaltyConfig(-1, 10.0)).toarray()
print("non-symmetric variant: max |A - A^T| =", np.abs(a - a.T).max())
