"""Discontinuous P_k spaces and the interior penalty form.

Conventions: for an interior edge the jump is ``u|K_plus - u|K_minus`` and the
average normal derivative is ``(d_n u|K_plus + d_n u|K_minus) / 2`` with the
edge normal pointing from K_minus into K_plus. Assembled matrices act as
``A[i, j] = a(phi_j, phi_i)`` so that ``v @ A @ u == a(u, v)``.

With this orientation, elementwise integration by parts gives
``(grad u, grad v) = (-lap u, v) + <d_nu u, v>_Gamma - sum_e <d_nu u, [v]>_e`` for
smooth u, so the consistent interior penalty form is

    a(u, v) = (grad_h u, grad_h v) + sum_e <{d_nu u}, [v]>_e
              + xi sum_e <{d_nu v}, [u]>_e + sum_e sigma_e / h_e <[u], [v]>_e.

Writing the jump the other way round (K_minus minus K_plus) turns the two
middle signs into the familiar minus signs; the matrices are identical.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .basis import legendre01, modal_to_nodal, n_triangle_dofs, triangle_basis
from .mesh import BoundarySegment, InteriorEdge
from .quadrature import edge_points, gauss_legendre, triangle_rule


class DGSpace:
    """Element-wise discontinuous P_k space on a mesh (k >= 1)."""

    def __init__(self, mesh, k):
        if int(k) != k or k < 1:
            raise ValueError(f"polynomial degree k must be an integer >= 1, got {k!r}")
        self.mesh = mesh
        self.k = int(k)
        self.dofs_per_element = n_triangle_dofs(self.k)
        self.n_elements = mesh.n_triangles
        self.total_dofs = self.n_elements * self.dofs_per_element
        p = mesh.vertices[mesh.triangles]
        self.origin = p[:, 0]
        self.jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        self.det = self.jac[:, 0, 0] * self.jac[:, 1, 1] - self.jac[:, 0, 1] * self.jac[:, 1, 0]
        self.jac_inv = np.linalg.inv(self.jac)

    def element_dofs(self, t):
        return np.arange(self.dofs_per_element) + np.asarray(t)[..., None] * self.dofs_per_element

    def dof_matrix(self):
        return np.arange(self.total_dofs).reshape(self.n_elements, self.dofs_per_element)

    def to_reference(self, elements, points):
        """Reference coordinates of physical points; ``elements`` broadcasts against ``points[..., 0]``."""
        elements = np.asarray(elements)
        d = np.asarray(points, float) - self.origin[elements]
        return np.einsum("...ij,...j->...i", self.jac_inv[elements], d)

    def to_physical(self, elements, ref_points):
        elements = np.asarray(elements)
        return self.origin[elements] + np.einsum("...ij,...j->...i", self.jac[elements], ref_points)

    def basis_at(self, elements, points, order=0):
        """Basis values (and physical gradients/Hessians) at physical points of given elements."""
        elements = np.asarray(elements)
        ref = self.to_reference(elements, points)
        out = triangle_basis(self.k, ref[..., 0], ref[..., 1], order)
        res = [out[0]]
        if order >= 1:
            jinv = self.jac_inv[elements]
            res.append(np.einsum("...ji,...aj->...ai", jinv, out[1]))
        if order >= 2:
            res.append(np.einsum("...ji,...ajl,...lm->...aim", jinv, out[2], jinv))
        return tuple(res)

    def locate(self, points):
        """Index of an element containing each point (closed triangles)."""
        pts = np.atleast_2d(np.asarray(points, float))
        ref = np.einsum("tij,ptj->pti", self.jac_inv, pts[:, None, :] - self.origin[None])
        lam = np.concatenate([ref, 1.0 - ref.sum(-1, keepdims=True)], axis=-1)
        score = lam.min(-1)
        el = score.argmax(axis=1)
        if np.any(score[np.arange(len(pts)), el] < -1e-10):
            raise ValueError("point outside the mesh")
        return el

    def function(self, coeffs=None):
        if coeffs is None:
            coeffs = np.zeros(self.total_dofs)
        return DGFunction(self, np.asarray(coeffs, float))

    def constant(self, value=1.0):
        c = np.zeros((self.n_elements, self.dofs_per_element))
        c[:, 0] = value * np.sqrt(0.5)
        return DGFunction(self, c.ravel())

    @cached_property
    def mass_diagonal(self):
        """The mass matrix is diagonal: |det J_K| on every dof of K."""
        return np.repeat(self.det, self.dofs_per_element)

    def mass_matrix(self):
        return sp.diags(self.mass_diagonal)

    @cached_property
    def constant_weights(self):
        """Vector w with w @ u == integral of u over the domain."""
        w = np.zeros((self.n_elements, self.dofs_per_element))
        w[:, 0] = self.det * np.sqrt(0.5)
        return w.ravel()


@dataclass
class DGFunction:
    space: DGSpace
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.space.total_dofs,):
            raise ValueError(f"coefficient length {self.coeffs.shape} does not match space ({self.space.total_dofs})")

    def local(self):
        return self.coeffs.reshape(self.space.n_elements, self.space.dofs_per_element)

    def on_element(self, t, points, order=0):
        """Value (order 0) or gradient (order 1) of the restriction to element ``t``."""
        out = self.space.basis_at(t, points, order)
        c = self.local()[t]
        if order == 0:
            return out[0] @ c
        return np.einsum("...ad,a->...d", out[1], c)

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        el = self.space.locate(pts)
        (vals,) = self.space.basis_at(el, pts)
        return np.einsum("pa,pa->p", vals, self.local()[el])

    def mean(self):
        return float(self.space.constant_weights @ self.coeffs) / self.space.mesh.area

    def __add__(self, other):
        return DGFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return DGFunction(self.space, self.coeffs - other.coeffs)

    def __mul__(self, c):
        return DGFunction(self.space, c * self.coeffs)

    __rmul__ = __mul__


@dataclass
class PenaltyConfig:
    """Interior penalty parameters: ``xi`` in {-1, 0, 1} and per-edge ``sigma > 0``."""

    xi: int
    sigma: object = 10.0

    def __post_init__(self):
        if self.xi not in (-1, 0, 1):
            raise ValueError(f"xi must be one of -1, 0, 1, got {self.xi!r}")
        if np.any(np.asarray(self.sigma, float) <= 0):
            raise ValueError("sigma must be positive on every edge")

    def edge_sigma(self, n_edges):
        s = np.broadcast_to(np.asarray(self.sigma, float), (n_edges,))
        return np.array(s)

    @property
    def sigma_min(self):
        return float(np.min(self.sigma))


def eval_basis(space, element, point, derivative_order=0, basis="modal"):
    """Local basis values (or physical gradients) of ``element`` at a physical point.

    ``basis="nodal"`` returns the Lagrange basis on the equispaced P_k lattice.
    """
    out = space.basis_at(element, np.asarray(point, float), derivative_order)
    res = out[derivative_order]
    if basis == "nodal":
        res = np.tensordot(modal_to_nodal(space.k), res, axes=([1], [0]))
    elif basis != "modal":
        raise ValueError(f"unknown basis {basis!r}")
    return res


def _edge_index(mesh, edge):
    if isinstance(edge, BoundarySegment):
        raise ValueError("jumps are defined on interior edges only; got a boundary segment")
    if isinstance(edge, InteriorEdge):
        match = np.flatnonzero((mesh.iedge_minus == edge.K_minus) & (mesh.iedge_plus == edge.K_plus))
        return int(match[0])
    e = int(edge)
    if not 0 <= e < mesh.n_interior_edges:
        raise ValueError(f"interior edge index {e} out of range")
    return e


def _edge_point(mesh, e, t):
    a, b = mesh.vertices[mesh.iedge_vertices[e]]
    t = np.asarray(t, float)
    return a + t[..., None] * (b - a)


def jump(u, edge, t):
    """Jump u|K_plus - u|K_minus at parameter t in [0, 1] along an interior edge."""
    mesh = u.space.mesh
    e = _edge_index(mesh, edge)
    x = _edge_point(mesh, e, t)
    return u.on_element(mesh.iedge_plus[e], x) - u.on_element(mesh.iedge_minus[e], x)


def average_normal_derivative(u, edge, t):
    mesh = u.space.mesh
    e = _edge_index(mesh, edge)
    x = _edge_point(mesh, e, t)
    n = mesh.iedge_normal[e]
    gp = u.on_element(mesh.iedge_plus[e], x, order=1) @ n
    gm = u.on_element(mesh.iedge_minus[e], x, order=1) @ n
    return 0.5 * (gp + gm)


class EdgeData:
    """Basis traces on interior edges at Gauss points.

    ``jump_basis[e, q]`` holds the jump of every local dof of (K_plus, K_minus)
    and ``avg_basis[e, q]`` the averaged normal derivatives; ``weights`` include
    the edge length.
    """

    def __init__(self, space, n_points=None):
        mesh = space.mesh
        nq = n_points or edge_points(space.k)
        t, w = gauss_legendre(nq)
        a = mesh.vertices[mesh.iedge_vertices[:, 0]]
        b = mesh.vertices[mesh.iedge_vertices[:, 1]]
        x = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        kp = np.broadcast_to(mesh.iedge_plus[:, None], x.shape[:2])
        km = np.broadcast_to(mesh.iedge_minus[:, None], x.shape[:2])
        vp, gp = space.basis_at(kp, x, 1)
        vm, gm = space.basis_at(km, x, 1)
        n = mesh.iedge_normal[:, None, None, :]
        self.t = t
        self.points = x
        self.weights = w[None, :] * mesh.iedge_length[:, None]
        self.jump_basis = np.concatenate([vp, -vm], axis=-1)
        self.avg_basis = 0.5 * np.concatenate([(gp * n).sum(-1), (gm * n).sum(-1)], axis=-1)
        self.dofs = np.concatenate([space.element_dofs(mesh.iedge_plus), space.element_dofs(mesh.iedge_minus)], axis=1)
        self.length = mesh.iedge_length


def _scatter(n, dofs, local):
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def assemble_stiffness(space):
    """Broken gradient form (grad_h u, grad_h v)."""
    pts, w = triangle_rule(2 * space.k - 2)
    _, g = triangle_basis(space.k, pts[:, 0], pts[:, 1], 1)
    gp = np.einsum("tji,qaj->tqai", space.jac_inv, g)
    loc = np.einsum("q,tqai,tqbi->tab", w, gp, gp) * space.det[:, None, None]
    return _scatter(space.total_dofs, space.dof_matrix(), loc)


def assemble_jump_matrix(space, edges=None):
    """Matrix J with u @ J @ u == sum_e h_e^{-1} ||[u]||_e^2."""
    ed = edges or EdgeData(space)
    loc = np.einsum("eq,eqa,eqb->eab", ed.weights / ed.length[:, None], ed.jump_basis, ed.jump_basis)
    return _scatter(space.total_dofs, ed.dofs, loc)


def assemble_a_dg(space, cfg):
    """Interior penalty matrix for a_DG with the given xi and edge penalties."""
    ed = EdgeData(space)
    sigma = cfg.edge_sigma(space.mesh.n_interior_edges)
    cons = np.einsum("eq,eqa,eqb->eab", ed.weights, ed.jump_basis, ed.avg_basis)
    pen = np.einsum("eq,eqa,eqb->eab", ed.weights, ed.jump_basis, ed.jump_basis)
    loc = cons + cfg.xi * cons.transpose(0, 2, 1) + (sigma / ed.length)[:, None, None] * pen
    a = assemble_stiffness(space) + _scatter(space.total_dofs, ed.dofs, loc)
    return a.tocsr()


def jump_seminorm(u, jump_matrix=None):
    jm = jump_matrix if jump_matrix is not None else assemble_jump_matrix(u.space)
    return float(np.sqrt(max(u.coeffs @ (jm @ u.coeffs), 0.0)))


def element_quadrature(space, order):
    """Physical quadrature points (nt, nq, 2), weights (nt, nq) and reference basis values (nq, nb)."""
    pts, w = triangle_rule(order)
    (vals,) = triangle_basis(space.k, pts[:, 0], pts[:, 1])
    x = space.origin[:, None, :] + np.einsum("tij,qj->tqi", space.jac, pts)
    return x, w[None, :] * space.det[:, None], vals


def l2_project(space, f, order=None):
    """Element-wise L2 projection of a callable ``f(x, y)``."""
    x, w, vals = element_quadrature(space, order or 2 * space.k + 6)
    fx = np.asarray(f(x[..., 0], x[..., 1]), float)
    # orthonormal basis: local mass is det(J) * I
    coeffs = np.einsum("tq,tq,qa->ta", w, fx, vals) / space.det[:, None]
    return DGFunction(space, coeffs.ravel())


def load_vector(space, f, order=None):
    """Vector of (f, phi_i) for a callable ``f(x, y)``."""
    x, w, vals = element_quadrature(space, order or 2 * space.k + 6)
    fx = np.asarray(f(x[..., 0], x[..., 1]), float)
    return np.einsum("tq,tq,qa->ta", w, fx, vals).ravel()


def trace_map(space, k_boundary=None):
    """Sparse map from volume coefficients to boundary Legendre coefficients on each segment.

    Row ``s * (k+1) + j`` is the j-th orthonormal Legendre coefficient (in the
    segment parameter t in [0, 1]) of the owner element's polynomial on
    boundary segment ``s``. The restriction is exact.
    """
    mesh = space.mesh
    kb = space.k if k_boundary is None else k_boundary
    t, w = gauss_legendre(space.k + kb + 1)
    a, b = mesh.boundary_endpoints()
    x = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    own = np.broadcast_to(mesh.bseg_owner[:, None], x.shape[:2])
    (vals,) = space.basis_at(own, x)
    psi = legendre01(kb, t)
    loc = np.einsum("q,qj,sqa->sja", w, psi, vals)
    nseg, nb = mesh.n_boundary_segments, kb + 1
    rows = np.repeat(np.arange(nseg * nb).reshape(nseg, nb)[:, :, None], space.dofs_per_element, axis=2)
    cols = np.broadcast_to(space.element_dofs(mesh.bseg_owner)[:, None, :], rows.shape)
    return sp.csr_matrix((loc.ravel(), (rows.ravel(), cols.ravel())), shape=(nseg * nb, space.total_dofs))
