"""Closed-form test cases for the transmission problem and exact error norms.

A case combines a smooth interior field ``u`` with an exterior dipole field

    u_plus(x) = d . (x - x0) / (2 pi |x - x0|^2),   x0 inside the domain,

which is harmonic outside x0 and decays like 1/r. The data are
``f = -lap u``, ``beta0 = u - u_plus`` and ``beta1 = d_nu u - d_nu u_plus`` on the
boundary, and the exact density is ``lam = d_nu u_plus``.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bem import BoundarySpace, assemble_V, point_segment_distance, v_energy_norm
from .coupling import ProblemData, exterior_eval
from .dg import assemble_jump_matrix, l2_project
from .basis import legendre01, triangle_basis
from .mesh import GEOMETRIES, _point_in_polygon, validate_polygon
from .quadrature import gauss_legendre, triangle_rule

INTERIOR_CHOICES = ("trig", "polynomial", "cutoff")
EXTERIOR_POINT = (2.0, 2.0)
ERROR_KEYS = ("l2", "h1", "jump", "lambda_v", "c", "exterior")


class CaseError(ValueError):
    pass


def _dipole(x0, d):
    def val(x, y):
        rx, ry = x - x0[0], y - x0[1]
        return (d[0] * rx + d[1] * ry) / (2.0 * np.pi * (rx * rx + ry * ry))

    def grad(x, y):
        rx, ry = x - x0[0], y - x0[1]
        r2 = rx * rx + ry * ry
        dr = d[0] * rx + d[1] * ry
        c = 1.0 / (2.0 * np.pi)
        return c * (d[0] / r2 - 2.0 * dr * rx / r2 ** 2), c * (d[1] / r2 - 2.0 * dr * ry / r2 ** 2)

    return val, grad


def _trig(offset):
    pi = np.pi

    def val(x, y):
        return np.cos(pi * x) * np.cos(pi * y) + offset

    def grad(x, y):
        return -pi * np.sin(pi * x) * np.cos(pi * y), -pi * np.cos(pi * x) * np.sin(pi * y)

    def hess(x, y):
        cc = np.cos(pi * x) * np.cos(pi * y)
        ss = np.sin(pi * x) * np.sin(pi * y)
        return -pi ** 2 * cc, pi ** 2 * ss, -pi ** 2 * cc

    return val, grad, hess


def _polynomial(p, offset):
    # u = (x + y/2)^p + offset
    def val(x, y):
        return (x + 0.5 * y) ** p + offset

    def grad(x, y):
        g = p * (x + 0.5 * y) ** (p - 1) if p >= 1 else 0.0 * x
        return g, 0.5 * g

    def hess(x, y):
        h = p * (p - 1) * (x + 0.5 * y) ** (p - 2) if p >= 2 else 0.0 * x
        return h, 0.5 * h, 0.25 * h

    return val, grad, hess


def _cutoff(x0, d, rho):
    """Smooth field equal to the dipole outside the disc |x - x0| <= rho.

    Inside, the radial profile 1 / (2 pi s), s = |x - x0|^2, is replaced by its
    cubic Taylor polynomial at s = rho^2, which makes u three times
    continuously differentiable.
    """
    s0 = rho * rho
    cj = np.array([(-1.0) ** j / (2.0 * np.pi * s0 ** (j + 1)) for j in range(4)])

    def g(s, n):
        inside = s < s0
        ds = s - s0
        safe = np.where(inside, 1.0, s)
        if n == 0:
            poly = cj[0] + cj[1] * ds + cj[2] * ds ** 2 + cj[3] * ds ** 3
            exact = 1.0 / (2.0 * np.pi * safe)
        elif n == 1:
            poly = cj[1] + 2.0 * cj[2] * ds + 3.0 * cj[3] * ds ** 2
            exact = -1.0 / (2.0 * np.pi * safe ** 2)
        else:
            poly = 2.0 * cj[2] + 6.0 * cj[3] * ds
            exact = 1.0 / (np.pi * safe ** 3)
        return np.where(inside, poly, exact)

    def parts(x, y):
        rx, ry = x - x0[0], y - x0[1]
        s = rx * rx + ry * ry
        return rx, ry, s, d[0] * rx + d[1] * ry

    def val(x, y):
        rx, ry, s, dr = parts(x, y)
        return dr * g(s, 0)

    def grad(x, y):
        rx, ry, s, dr = parts(x, y)
        g0, g1 = g(s, 0), g(s, 1)
        return d[0] * g0 + 2.0 * dr * rx * g1, d[1] * g0 + 2.0 * dr * ry * g1

    def hess(x, y):
        rx, ry, s, dr = parts(x, y)
        g1, g2 = g(s, 1), g(s, 2)
        hxx = 4.0 * d[0] * rx * g1 + dr * (2.0 * g1 + 4.0 * rx * rx * g2)
        hxy = 2.0 * (d[0] * ry + d[1] * rx) * g1 + dr * 4.0 * rx * ry * g2
        hyy = 4.0 * d[1] * ry * g1 + dr * (2.0 * g1 + 4.0 * ry * ry * g2)
        return hxx, hxy, hyy

    return val, grad, hess


@dataclass
class ManufacturedCase:
    """Exact interior/exterior fields with the data they generate.

    All field callables take coordinate arrays ``(x, y)``; gradients return a
    pair of arrays and Hessians the triple ``(u_xx, u_xy, u_yy)``.
    """

    polygon: np.ndarray
    x0: np.ndarray
    d: np.ndarray
    interior: str
    u: object = field(repr=False)
    grad_u: object = field(repr=False)
    hess_u: object = field(repr=False)
    u_plus: object = field(repr=False)
    grad_u_plus: object = field(repr=False)
    source_radius: Optional[float] = None

    def f(self, x, y):
        hxx, _, hyy = self.hess_u(x, y)
        return -(hxx + hyy)

    def beta0(self, x, y):
        return self.u(x, y) - self.u_plus(x, y)

    def beta1(self, x, y, normal):
        gx, gy = self.grad_u(x, y)
        px, py = self.grad_u_plus(x, y)
        return (gx - px) * normal[..., 0] + (gy - py) * normal[..., 1]

    def lam(self, x, y, normal):
        px, py = self.grad_u_plus(x, y)
        return px * normal[..., 0] + py * normal[..., 1]

    def boundary_callables(self, space):
        """``beta1`` and ``lam`` as ``g(x, y, segment)`` callables for a boundary space."""
        normals = space.normal

        def beta1(x, y, seg):
            return self.beta1(x, y, normals[seg])

        def lam(x, y, seg):
            return self.lam(x, y, normals[seg])

        return beta1, lam

    def problem_data(self, space):
        beta1, _ = self.boundary_callables(space)
        return ProblemData(self.f, self.beta0, beta1)

    def mean(self, mesh, order=14):
        """Exact interior mean c, by high-order quadrature on the mesh."""
        x, w = _mesh_quadrature(mesh, order)
        return float((self.u(x[..., 0], x[..., 1]) * w).sum() / w.sum())

    def compatibility(self, mesh, order=14):
        """Quadrature value of int f + int beta1, which vanishes analytically."""
        space = BoundarySpace.from_mesh(mesh, 0)
        beta1, _ = self.boundary_callables(space)
        if self.source_radius is None:
            x, w = _mesh_quadrature(mesh, order)
            int_f = float((self.f(x[..., 0], x[..., 1]) * w).sum())
        else:
            int_f = self._disc_source_integral(order)
        return int_f + space.integrate(beta1, n_points=order)

    def _disc_source_integral(self, order):
        """Integral of f supported on the cutoff disc; f is a polynomial there, so this rule is exact."""
        r, wr = gauss_legendre(order)
        r, wr = r * self.source_radius, wr * self.source_radius
        theta = 2 * np.pi * np.arange(2 * order) / (2 * order)
        x = self.x0[0] + r[:, None] * np.cos(theta)[None]
        y = self.x0[1] + r[:, None] * np.sin(theta)[None]
        return float(np.einsum("r,rt->", wr * r, self.f(x, y)) * 2 * np.pi / (2 * order))


def _mesh_quadrature(mesh, order):
    pts, w = triangle_rule(order)
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    x = p[:, None, 0] + np.einsum("tij,qj->tqi", jac, pts)
    return x, w[None, :] * det[:, None]


def make_dipole_case(polygon="square", x0=(0.3, 0.4), d=(1.0, 0.0), interior="trig", degree=3,
                     offset=0.5, cutoff_radius=None):
    """Build a manufactured case.

    Parameters
    ----------
    polygon : str or sequence of (x, y)
        Named geometry ("square", "lshape") or a counterclockwise vertex loop.
    x0, d : pair of float
        Dipole centre (strictly inside) and direction. ``d = 0`` switches the
        exterior field off.
    interior : {"trig", "polynomial", "cutoff"}
        ``"trig"`` is ``cos(pi x) cos(pi y) + offset``; ``"polynomial"`` is
        ``(x + y/2)**degree + offset``; ``"cutoff"`` is the dipole itself with
        its singularity smoothed out inside a disc of radius ``cutoff_radius``
        (default: half the distance from x0 to the boundary), so that both
        jump data vanish.
    """
    poly = validate_polygon(GEOMETRIES[polygon] if isinstance(polygon, str) else polygon)
    x0 = np.asarray(x0, float)
    d = np.asarray(d, float)
    n = len(poly)
    dist = min(float(point_segment_distance(x0, poly[i], poly[(i + 1) % n])) for i in range(n))
    if not _point_in_polygon(x0, poly) or dist <= 1e-12:
        raise CaseError(f"dipole centre {tuple(x0)} must lie strictly inside the domain")
    up, gup = _dipole(x0, d)
    if interior == "trig":
        u, gu, hu = _trig(offset)
    elif interior == "polynomial":
        if int(degree) != degree or degree < 0:
            raise CaseError(f"polynomial degree must be a nonnegative integer, got {degree!r}")
        u, gu, hu = _polynomial(int(degree), offset)
    elif interior == "cutoff":
        rho = 0.5 * dist if cutoff_radius is None else float(cutoff_radius)
        if not 0.0 < rho < dist:
            raise CaseError("cutoff radius must be positive and smaller than dist(x0, boundary)")
        u, gu, hu = _cutoff(x0, d, rho)
    else:
        raise CaseError(f"interior must be one of {INTERIOR_CHOICES}, got {interior!r}")
    return ManufacturedCase(poly, x0, d, interior, u, gu, hu, up, gup, rho if interior == "cutoff" else None)


# -- error norms ---------------------------------------------------------------

def _fields(space, coeffs, pts, order):
    """u_h and its physical derivatives at reference points ``pts`` of every element."""
    out = triangle_basis(space.k, pts[:, 0], pts[:, 1], order)
    c = coeffs.reshape(space.n_elements, space.dofs_per_element)
    res = [c @ out[0].T]
    if order >= 1:
        g = np.einsum("tji,qaj->tqai", space.jac_inv, out[1])
        res.append(np.einsum("tqai,ta->tqi", g, c))
    if order >= 2:
        h = np.einsum("tji,qajl,tlm->tqaim", space.jac_inv, out[2], space.jac_inv)
        res.append(np.einsum("tqaim,ta->tqim", h, c))
    return res


def volume_errors(case, space, coeffs, order=None, c_shift=0.0):
    """(L2, broken H1 seminorm, elementwise H2 seminorm weighted by h_K) of u - u_h.

    ``c_shift`` is added to the exact field (used for u - c style comparisons).
    """
    order = order or 2 * space.k + 6
    pts, w = triangle_rule(order)
    x = space.origin[:, None, :] + np.einsum("tij,qj->tqi", space.jac, pts)
    wt = w[None, :] * space.det[:, None]
    uh, guh, huh = _fields(space, coeffs, pts, 2)
    ex, ey = x[..., 0], x[..., 1]
    e0 = case.u(ex, ey) + c_shift - uh
    gx, gy = case.grad_u(ex, ey)
    e1 = (gx - guh[..., 0]) ** 2 + (gy - guh[..., 1]) ** 2
    hxx, hxy, hyy = case.hess_u(ex, ey)
    e2 = (hxx - huh[..., 0, 0]) ** 2 + 2 * (hxy - huh[..., 0, 1]) ** 2 + (hyy - huh[..., 1, 1]) ** 2
    hk = space.mesh.element_diameters()
    l2 = np.sqrt((wt * e0 ** 2).sum())
    h1 = np.sqrt((wt * e1).sum())
    h2 = np.sqrt(((wt * e2).sum(axis=1) * hk ** 2).sum())
    return float(l2), float(h1), float(h2)


def boundary_trace_error(case, space, coeffs, order=None):
    """sqrt(sum_e h_e^{-1} ||u - u_h||_e^2) over boundary segments."""
    mesh = space.mesh
    t, w = gauss_legendre(order or space.k + 6)
    a, b = mesh.boundary_endpoints()
    x = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    own = np.broadcast_to(mesh.bseg_owner[:, None], x.shape[:2])
    (vals,) = space.basis_at(own, x)
    uh = np.einsum("sqa,sa->sq", vals, coeffs.reshape(space.n_elements, -1)[mesh.bseg_owner])
    err = case.u(x[..., 0], x[..., 1]) - uh
    # h_e^{-1} * h_e cancels the length factor of the line element
    return float(np.sqrt((w[None, :] * err ** 2).sum()))


def boundary_density_error(case, space, coeffs, order=None):
    """(L2 error, sqrt(sum_e h_e^{-1} ||lam - lam_h||_e^2)) for a density on ``space``."""
    _, lam = case.boundary_callables(space)
    t, w = gauss_legendre(order or space.k + 8)
    x = space.points(t)
    ex = lam(x[..., 0], x[..., 1], np.arange(space.n_segments)[:, None])
    lh = np.einsum("qj,sj->sq", legendre01(space.k, t), coeffs.reshape(space.n_segments, -1))
    e2 = (w[None, :] * (ex - lh) ** 2).sum(axis=1)
    return float(np.sqrt((e2 * space.length).sum())), float(np.sqrt(e2.sum()))


class LambdaNorm:
    """V-energy norm of lam - lam_h with lam sampled into the bisected boundary space."""

    def __init__(self, space):
        self.space = space
        self.fine = space.refine()
        self.prolong = space.prolongation(self.fine)
        self.vmat = assemble_V(self.fine)

    def error(self, case, coeffs):
        _, lam = case.boundary_callables(self.fine)
        diff = self.fine.project(lam) - self.prolong @ coeffs
        # sampled densities carry quadrature-level means; remove them before the norm
        diff -= self.fine.constant(self.fine.mean_weights @ diff / self.fine.total_length)
        return v_energy_norm(self.fine, diff, self.vmat)



def exact_errors(case, solution, fine_quadrature_order=None, lambda_norm=None, exterior_point=EXTERIOR_POINT):
    """Error norms of a computed solution against the exact fields.

    Returns a dict with keys ``l2``, ``h1`` (broken gradient), ``jump``
    (``|u_h|_h``), ``lambda_v`` (V-energy norm), ``c`` (``|c - c_h|``) and
    ``exterior`` (pointwise exterior error at ``exterior_point``).
    """
    system = solution.system
    space = system.dg_space
    order = fine_quadrature_order or 2 * space.k + 6
    u = solution.u.coeffs
    l2, h1, _ = volume_errors(case, space, u, order)
    jump = float(np.sqrt(max(u @ (assemble_jump_matrix(space) @ u), 0.0)))
    lam_norm = lambda_norm or LambdaNorm(system.boundary_space)
    lam_v = lam_norm.error(case, solution.lam.coeffs)
    c_err = abs(case.mean(space.mesh) - solution.c_h)
    pt = np.asarray(exterior_point, float)
    ext = abs(float(exterior_eval(solution, pt[None])[0]) - float(case.u_plus(pt[0], pt[1])))
    return {"l2": float(l2), "h1": float(h1), "jump": jump, "lambda_v": float(lam_v), "c": float(c_err),
            "exterior": ext}


def projection_errors(case, space, boundary_space, lambda_norm=None, order=None):
    """Pieces of the strong norm of (u - Pi_h u, lam - P_h lam).

    Returns a dict with the broken gradient, jump, V-norm, boundary trace,
    boundary density and weighted H2 contributions (not squared).
    """
    order = order or 2 * space.k + 6
    pu = l2_project(space, case.u, order).coeffs
    _, h1, h2 = volume_errors(case, space, pu, order)
    jump = float(np.sqrt(max(pu @ (assemble_jump_matrix(space) @ pu), 0.0)))
    _, lam = case.boundary_callables(boundary_space)
    plam = boundary_space.project(lam, n_points=order)
    lam_norm = lambda_norm or LambdaNorm(boundary_space)
    lam_v = lam_norm.error(case, plam)
    trace = boundary_trace_error(case, space, pu, order)
    _, dens = boundary_density_error(case, boundary_space, plam, order)
    return {"h1": h1, "jump": jump, "lambda_v": lam_v, "trace": trace, "density": dens, "h2": h2}
