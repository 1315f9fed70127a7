import numpy as np
import pytest

from dgbem.bem import BoundarySpace
from dgbem.coupling import (
    ProblemData, _dense_solver, assemble_coupled, check_lambda_mean, coupled_problem, data_integrals,
    exterior_eval, read_solution, solve, write_solution,
)
from dgbem.dg import DGSpace, PenaltyConfig, l2_project
from dgbem.manufactured import make_dipole_case


def build(mesh, k, cfg, case=None):
    space = DGSpace(mesh, k)
    bs = BoundarySpace.from_mesh(mesh, k)
    data = case.problem_data(bs) if case is not None else None
    return assemble_coupled(mesh, space, bs, cfg, data)


@pytest.fixture(scope="module")
def dipole_solution(square2):
    case = make_dipole_case()
    return case, solve(build(square2, 2, PenaltyConfig(-1, 20.0), case))


def test_zero_data_gives_zero(lshape1):
    system = build(lshape1, 2, PenaltyConfig(0, 20.0))
    assert not system.rhs_u.any() and not system.rhs_lam.any()
    sol = solve(system)
    assert np.abs(sol.u.coeffs).max() + np.abs(sol.lam.coeffs).max() <= 1e-10
    assert exterior_eval(sol, [[2.0, 2.0]])[0] == 0.0


def test_trace_coupling_of_constant(lshape1):
    system = build(lshape1, 2, PenaltyConfig(1, 20.0))
    one = system.dg_space.constant().coeffs
    mu_one = system.boundary_space.mass_diagonal * system.boundary_space.constant()
    assert np.abs(system.B @ one - mu_one).max() < 1e-14
    assert np.abs(system.C @ one - mu_one).max() < 1e-8


def test_degree_mismatch_rejected(square1):
    with pytest.raises(ValueError, match="degree mismatch"):
        assemble_coupled(square1, DGSpace(square1, 2), BoundarySpace.from_mesh(square1, 1), PenaltyConfig(1))


def test_system_is_non_symmetric(square1):
    mat = build(square1, 1, PenaltyConfig(1, 20.0)).matrix()
    assert np.abs(mat - mat.T).max() > 1e-2


@pytest.mark.parametrize("geometry", ["square", "lshape"])
@pytest.mark.parametrize("xi", [-1, 0, 1])
def test_polynomial_interior_is_reproduced(geometry, xi):
    """With no exterior field and u in V_h, the discrete solution is exact and lam_h = 0."""
    from dgbem.mesh import triangulate_polygon
    mesh = triangulate_polygon(geometry, 1)
    case = make_dipole_case(geometry, d=(0.0, 0.0), interior="polynomial", degree=2)
    sol = solve(build(mesh, 2, PenaltyConfig(xi, 20.0), case))
    exact = l2_project(sol.system.dg_space, case.u).coeffs
    assert np.abs(sol.u.coeffs - exact).max() < 1e-10
    assert np.abs(sol.lam.coeffs).max() < 1e-10
    assert sol.c_h == pytest.approx(case.mean(mesh), abs=1e-10)


def test_schur_matches_dense(dipole_solution):
    _, sol = dipole_solution
    u, lam = _dense_solver(sol.system)(sol.system.rhs_u, sol.system.rhs_lam)
    assert np.abs(u - sol.u.coeffs).max() < 1e-10 * np.abs(u).max()
    assert np.abs(lam - sol.lam.coeffs).max() < 1e-10 * np.abs(lam).max()
    assert max(sol.residual_u, sol.residual_lam) < 1e-12


def test_c_h_formula(dipole_solution):
    _, sol = dipole_solution
    assert sol.c_h_formula == pytest.approx(sol.c_h, rel=1e-8)


def test_lambda_mean(dipole_solution, square2):
    case, sol = dipole_solution
    int_f, int_b1 = data_integrals(sol.system)
    scale = abs(int_f) + abs(int_b1) + 1.0
    assert abs(int_f + int_b1) <= 1e-10 * scale
    assert check_lambda_mean(sol) <= 1e-10 * scale
    assert abs(sol.lam.integral()) <= 1e-10 * scale


def test_exterior_far_field_decay(dipole_solution):
    _, sol = dipole_solution
    near = abs(exterior_eval(sol, [[20.0, 0.0]])[0])
    far = abs(exterior_eval(sol, [[200.0, 0.0]])[0])
    assert far <= (0.1 + 0.01) * near


def test_exterior_close_to_exact(dipole_solution):
    case, sol = dipole_solution
    x = np.array([[2.0, 2.0], [-1.0, 0.3], [0.5, 1.8]])
    err = np.abs(exterior_eval(sol, x) - case.u_plus(x[:, 0], x[:, 1]))
    assert err.max() < 1e-2 * np.abs(case.u_plus(x[:, 0], x[:, 1])).max()


def test_exterior_near_field_rejected(dipole_solution):
    _, sol = dipole_solution
    with pytest.raises(ValueError, match="near field"):
        exterior_eval(sol, [[1.01, 0.5]])


def test_data_integrals_zero():
    from dgbem.mesh import triangulate_polygon
    system = build(triangulate_polygon("square", 1), 1, PenaltyConfig(1))
    assert data_integrals(system) == (0.0, 0.0)


def test_solution_io_roundtrip(tmp_path, dipole_solution):
    _, sol = dipole_solution
    path = tmp_path / "solution.txt"
    write_solution(sol, path)
    back = read_solution(path)
    assert back["k"] == 2 and back["xi"] == -1 and back["sigma"] == [20.0]
    assert back["mesh"] == sol.system.dg_space.mesh.hash()
    assert np.array_equal(back["u"], sol.u.coeffs)
    assert np.array_equal(back["lambda"], sol.lam.coeffs)
    assert back["c_h"] == sol.c_h


def test_coupled_problem_convenience(square1):
    data = ProblemData(f=lambda x, y: np.ones_like(x), beta1=lambda x, y: -np.ones_like(x) / 4.0)
    sol = coupled_problem(square1, 1, PenaltyConfig(1, 20.0), data)
    assert check_lambda_mean(sol) < 1e-12
