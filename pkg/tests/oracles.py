"""Independent reference computations shared by the unit and acceptance tests."""
import numpy as np

from dgbem.dg import average_normal_derivative, jump


def duffy_rule(n):
    """Tensor Gauss rule collapsed onto the reference triangle (independent of the package rules)."""
    g, w = np.polynomial.legendre.leggauss(n)
    g, w = 0.5 * (g + 1), 0.5 * w
    s, t = np.meshgrid(g, g, indexing="ij")
    ws = np.outer(w, w) * (1 - s)
    return np.column_stack([s.ravel(), (t * (1 - s)).ravel()]), ws.ravel()


def naive_a_dg(space, cfg, u, v):
    """a_DG(u, v) summed term by term with point evaluations on every element and edge."""
    mesh = space.mesh
    ref, wref = duffy_rule(space.k + 2)
    total = 0.0
    for t in range(mesh.n_triangles):
        p = mesh.vertices[mesh.triangles[t]]
        jac = np.column_stack([p[1] - p[0], p[2] - p[0]])
        x = p[0] + ref @ jac.T
        gu, gv = u.on_element(t, x, 1), v.on_element(t, x, 1)
        total += abs(np.linalg.det(jac)) * np.sum(wref * (gu * gv).sum(1))
    g, w = np.polynomial.legendre.leggauss(space.k + 2)
    g, w = 0.5 * (g + 1), 0.5 * w
    sigma = cfg.edge_sigma(mesh.n_interior_edges)
    for e, edge in enumerate(mesh.interior_edges):
        ju, jv = jump(u, edge, g), jump(v, edge, g)
        au, av = average_normal_derivative(u, edge, g), average_normal_derivative(v, edge, g)
        integrand = au * jv + cfg.xi * av * ju + sigma[e] / edge.h_e * ju * jv
        total += edge.h_e * np.sum(w * integrand)
    return total
