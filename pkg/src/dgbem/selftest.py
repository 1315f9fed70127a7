"""Fast end-to-end checks of exact identities, used by ``dgbem selftest``."""
import numpy as np

from .bem import BoundarySpace, assemble_K, assemble_V, fundamental_solution
from .coupling import coupled_problem
from .dg import DGSpace, PenaltyConfig, assemble_a_dg, assemble_jump_matrix, l2_project
from .mesh import refine_uniform, triangulate_polygon
from .verify import eoc, fractional_gram


def _check(name, fn):
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failed check
        return name, False, f"{type(exc).__name__}: {exc}"
    return name, bool(ok), detail


def _mesh_counts():
    m0 = triangulate_polygon("square")
    m1 = refine_uniform(m0)
    got = [(m.n_triangles, m.n_interior_edges, m.n_boundary_segments) for m in (m0, m1)]
    return got == [(2, 1, 4), (8, 8, 8)], str(got)


def _refinement_similarity():
    m = triangulate_polygon("lshape")
    r = refine_uniform(m)
    ok = abs(m.min_angle() - r.min_angle()) < 1e-10 and 3 * r.n_triangles == 2 * r.n_interior_edges + r.n_boundary_segments
    return ok, f"min angle {m.min_angle():.6f} -> {r.min_angle():.6f}"


def _continuous_jump():
    space = DGSpace(triangulate_polygon("square", 1), 1)
    u = l2_project(space, lambda x, y: 2 * x - y + 0.3).coeffs
    val = u @ (assemble_jump_matrix(space) @ u)
    return abs(val) < 1e-14, f"|u|_h^2 = {val:.1e}"


def _linear_energy():
    space = DGSpace(triangulate_polygon("square", 1), 2)
    u = l2_project(space, lambda x, y: 2 * x - y).coeffs
    worst = 0.0
    for xi in (-1, 0, 1):
        a = assemble_a_dg(space, PenaltyConfig(xi, 7.0))
        worst = max(worst, abs(u @ (a @ u) - 5.0))
    return worst < 1e-12, f"max deviation {worst:.1e}"


def _symmetric_sipg():
    space = DGSpace(triangulate_polygon("square", 1), 2)
    a = assemble_a_dg(space, PenaltyConfig(1, 10.0)).toarray()
    rel = np.abs(a - a.T).max() / np.abs(a).max()
    return rel < 1e-13, f"relative asymmetry {rel:.1e}"


def _fundamental_values():
    v1 = fundamental_solution(np.array([0.0, 0.0]), np.array([0.6, 0.8]))
    ve = fundamental_solution(np.array([0.0, 0.0]), np.array([np.e, 0.0]))
    return abs(v1) < 1e-15 and abs(ve + 0.5 / np.pi) < 1e-15, f"{v1:.1e}, {ve:.6f}"


def _double_layer_identity():
    bs = BoundarySpace.from_mesh(triangulate_polygon("lshape", 1), 2)
    kmat = assemble_K(bs)
    one = bs.constant()
    res = np.abs(kmat @ one + 0.5 * bs.mass_diagonal * one).max()
    nb = bs.nb
    self_blocks = max(np.abs(kmat[s * nb:(s + 1) * nb, s * nb:(s + 1) * nb]).max() for s in range(bs.n_segments))
    return res < 1e-8 and self_blocks == 0.0, f"identity residual {res:.1e}, self blocks {self_blocks}"


def _single_layer_symmetry():
    vmat = assemble_V(BoundarySpace.from_mesh(triangulate_polygon("square", 1), 2))
    rel = np.abs(vmat - vmat.T).max() / np.abs(vmat).max()
    return rel < 1e-12, f"relative asymmetry {rel:.1e}"


def _zero_data():
    sol = coupled_problem(triangulate_polygon("square", 1), 1, PenaltyConfig(-1, 20.0))
    size = np.abs(sol.u.coeffs).max() + np.abs(sol.lam.coeffs).max()
    return size <= 1e-10, f"max |coeff| {size:.1e}"


def _rates():
    r1 = eoc([1, 0.5, 0.25], [1, 0.5, 0.25])
    r2 = eoc([1, 0.5, 0.25], [1, 0.25, 0.0625])
    return np.allclose(r1, 1.0) and np.allclose(r2, 2.0), f"{r1}, {r2}"


def _constant_seminorm():
    g = fractional_gram(0.4, 2)
    return abs(g.seminorm[0]).max() < 1e-14, f"{abs(g.seminorm[0]).max():.1e}"


CHECKS = (
    ("mesh_counts", _mesh_counts),
    ("refinement_similarity", _refinement_similarity),
    ("continuous_jump_zero", _continuous_jump),
    ("linear_energy_exact", _linear_energy),
    ("sipg_symmetric", _symmetric_sipg),
    ("fundamental_values", _fundamental_values),
    ("double_layer_constant", _double_layer_identity),
    ("single_layer_symmetric", _single_layer_symmetry),
    ("zero_data_solve", _zero_data),
    ("eoc_trivial_rates", _rates),
    ("constant_seminorm_zero", _constant_seminorm),
)


def run_checks():
    """Run every check; returns a list of ``(name, passed, detail)``."""
    return [_check(name, fn) for name, fn in CHECKS]
