import numpy as np
import pytest

from dgbem.bem import BoundarySpace
from dgbem.dg import DGSpace
from dgbem.manufactured import CaseError, LambdaNorm, make_dipole_case, projection_errors, volume_errors
from dgbem.mesh import refine_uniform, triangulate_polygon

CASES = [
    dict(),
    dict(interior="polynomial", degree=3),
    dict(interior="cutoff"),
    dict(polygon="lshape", x0=(0.25, 0.3), d=(0.3, -1.0)),
    dict(polygon="lshape", x0=(0.25, 0.3), interior="cutoff", cutoff_radius=0.1),
]


def fd_grad(f, x, y, h=1e-5):
    return ((f(x + h, y) - f(x - h, y)) / (2 * h), (f(x, y + h) - f(x, y - h)) / (2 * h))


def five_point_laplacian(f, x, y, h):
    return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / h ** 2


def boundary_points(case, n=7):
    poly = case.polygon
    t = (np.arange(n) + 0.37) / n
    pts, nrm = [], []
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        d = b - a
        pts.append(a + t[:, None] * d)
        nrm.append(np.tile([d[1], -d[0]] / np.linalg.norm(d), (n, 1)))
    return np.concatenate(pts), np.concatenate(nrm)


def test_exterior_field_is_harmonic():
    case = make_dipole_case()
    assert abs(five_point_laplacian(case.u_plus, 2.0, 1.0, 1e-3)) <= 1e-6


@pytest.mark.parametrize("kw", CASES)
def test_derivatives_match_finite_differences(kw):
    case = make_dipole_case(**kw)
    rng = np.random.default_rng(5)
    x, y = rng.uniform(0.05, 0.45, 20), rng.uniform(0.05, 0.45, 20)
    gx, gy = case.grad_u(x, y)
    fx, fy = fd_grad(case.u, x, y)
    assert np.allclose(gx, fx, atol=1e-7) and np.allclose(gy, fy, atol=1e-7)
    hxx, hxy, hyy = case.hess_u(x, y)
    (ax, ay), (bx, by) = fd_grad(lambda s, t: case.grad_u(s, t)[0], x, y), fd_grad(lambda s, t: case.grad_u(s, t)[1], x, y)
    assert np.allclose(hxx, ax, atol=1e-6) and np.allclose(hxy, ay, atol=1e-6)
    assert np.allclose(hxy, bx, atol=1e-6) and np.allclose(hyy, by, atol=1e-6)
    ox, oy = 1.0 + rng.uniform(0.1, 2, 10), rng.uniform(-2, 2, 10)
    px, py = case.grad_u_plus(ox, oy)
    qx, qy = fd_grad(case.u_plus, ox, oy)
    assert np.allclose(px, qx, atol=1e-8) and np.allclose(py, qy, atol=1e-8)


def test_zero_dipole():
    case = make_dipole_case(d=(0.0, 0.0))
    pts, nrm = boundary_points(case)
    x, y = pts[:, 0], pts[:, 1]
    assert np.all(case.u_plus(x, y) == 0.0)
    assert np.all(case.lam(x, y, nrm) == 0.0)
    assert np.allclose(case.beta0(x, y), case.u(x, y), atol=0)
    gx, gy = case.grad_u(x, y)
    assert np.allclose(case.beta1(x, y, nrm), gx * nrm[:, 0] + gy * nrm[:, 1], atol=0)


@pytest.mark.parametrize("kw", CASES)
def test_compatibility(kw):
    case = make_dipole_case(**kw)
    mesh = triangulate_polygon(case.polygon, 2)
    assert abs(case.compatibility(mesh, order=20)) <= 1e-10


@pytest.mark.parametrize("x0, d", [((0.3, 0.4), (1, 0)), ((0.7, 0.2), (-0.4, 2.0)), ((0.5, 0.5), (0, 3))])
def test_compatibility_trig_any_dipole(x0, d):
    case = make_dipole_case(x0=x0, d=d)
    assert abs(case.compatibility(triangulate_polygon("square", 2), order=20)) <= 1e-10


def test_dipole_flux_vanishes():
    case = make_dipole_case()
    bs = BoundarySpace.from_mesh(triangulate_polygon("square", 3), 0)
    _, lam = case.boundary_callables(bs)
    assert abs(bs.integrate(lam, n_points=30)) <= 1e-10


def test_cutoff_data_vanish():
    for kw in CASES:
        if kw.get("interior") != "cutoff":
            continue
        case = make_dipole_case(**kw)
        pts, nrm = boundary_points(case, 25)
        assert np.abs(case.beta0(pts[:, 0], pts[:, 1])).max() <= 1e-13
        assert np.abs(case.beta1(pts[:, 0], pts[:, 1], nrm)).max() <= 1e-13


def test_cutoff_smooth_across_radius():
    case = make_dipole_case(interior="cutoff", cutoff_radius=0.1)
    ang = np.linspace(0, 2 * np.pi, 9)
    for r0, r1 in [(0.1 - 1e-7, 0.1 + 1e-7)]:
        p0 = case.x0[:, None] + r0 * np.array([np.cos(ang), np.sin(ang)])
        p1 = case.x0[:, None] + r1 * np.array([np.cos(ang), np.sin(ang)])
        assert np.allclose(case.u(*p0), case.u(*p1), atol=1e-5)
        for a, b in zip(case.hess_u(*p0), case.hess_u(*p1)):
            assert np.allclose(a, b, rtol=1e-4, atol=1e-3)


def test_mean_values():
    mesh = triangulate_polygon("square", 1)
    assert make_dipole_case().mean(mesh) == pytest.approx(0.5, abs=1e-13)
    # int (x + y/2)^3 over the unit square is 21/32
    assert make_dipole_case(interior="polynomial", degree=3, offset=0.0).mean(mesh) == pytest.approx(21 / 32, abs=1e-13)


def test_trig_source():
    case = make_dipole_case()
    x, y = np.array([0.1, 0.6]), np.array([0.3, 0.9])
    assert np.allclose(case.f(x, y), 2 * np.pi ** 2 * np.cos(np.pi * x) * np.cos(np.pi * y), atol=1e-12)


@pytest.mark.parametrize("x0", [(1.5, 0.5), (1.0, 0.5), (0.75, 0.75)])
def test_centre_outside_rejected(x0):
    with pytest.raises(CaseError, match="inside"):
        make_dipole_case("lshape", x0=x0)


def test_bad_interior_rejected():
    with pytest.raises(CaseError, match="interior"):
        make_dipole_case(interior="gaussian")


def test_projection_errors_vanish_for_polynomials():
    mesh = triangulate_polygon("lshape", 1)
    case = make_dipole_case("lshape", x0=(0.25, 0.25), d=(0, 0), interior="polynomial", degree=2)
    space, bs = DGSpace(mesh, 2), BoundarySpace.from_mesh(mesh, 2)
    err = projection_errors(case, space, bs)
    assert max(err.values()) < 1e-12


def test_volume_error_oracle():
    """u_h = 0 gives the norms of the exact field: L2^2 of cos cos + 1/2 on the unit square is 1/4 + 1/4."""
    mesh = triangulate_polygon("square", 2)
    case = make_dipole_case()
    space = DGSpace(mesh, 1)
    l2, h1, _ = volume_errors(case, space, np.zeros(space.total_dofs), order=16)
    assert l2 ** 2 == pytest.approx(0.25 + 0.25, rel=1e-10)
    assert h1 ** 2 == pytest.approx(np.pi ** 2 / 2, rel=1e-10)


def test_lambda_error_converges():
    case = make_dipole_case()
    errs = []
    mesh = triangulate_polygon("square", 1)
    for _ in range(3):
        bs = BoundarySpace.from_mesh(mesh, 1)
        _, lam = case.boundary_callables(bs)
        errs.append(LambdaNorm(bs).error(case, bs.project(lam)))
        mesh = refine_uniform(mesh)
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates[-1] > 2.0  # best approximation in H^{-1/2} converges at k + 3/2
