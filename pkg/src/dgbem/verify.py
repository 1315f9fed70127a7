"""Numerical checks of coercivity, convergence and the discrete norm machinery.

Everything here reduces to dense or sparse linear algebra on the assembled
matrices: generalized symmetric eigenproblems for constants and coercivity,
log-ratio fits for convergence orders, and exact polynomial quadrature for the
fractional Sobolev-Slobodetskij Gram matrices on the unit interval.
"""
import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import legendre01, legendre_monomial_coeffs, triangle_basis
from .bem import BoundarySpace, assemble_K, assemble_V
from .coupling import assemble_coupled, solve
from .dg import DGSpace, EdgeData, PenaltyConfig, _scatter, assemble_jump_matrix, assemble_stiffness
from .manufactured import ERROR_KEYS, LambdaNorm, exact_errors, projection_errors
from .mesh import refine_uniform, triangulate_polygon
from .quadrature import edge_points, gauss_jacobi01, gauss_legendre, triangle_rule

log = logging.getLogger(__name__)

COERCIVITY_BOUND = 0.25
COERCIVITY_TOL = 1e-3
EIGEN_RESIDUAL_TOL = 1e-8
SIGMA_GRID = tuple(2.0 ** j for j in range(11))


# -- triple norms --------------------------------------------------------------

def assemble_hessian_matrix(space):
    """Matrix H with u @ H @ u == sum_K h_K^2 |u|_{2,K}^2."""
    k = space.k
    if k < 2:
        return sp.csr_matrix((space.total_dofs, space.total_dofs))
    pts, w = triangle_rule(2 * k - 4)
    _, _, hess = triangle_basis(k, pts[:, 0], pts[:, 1], 2)
    ji = space.jac_inv
    hp = np.einsum("tji,qajl,tlm->tqaim", ji, hess, ji)
    hk = space.mesh.element_diameters()
    loc = np.einsum("q,tqaim,tqbim->tab", w, hp, hp) * (space.det * hk ** 2)[:, None, None]
    return _scatter(space.total_dofs, space.dof_matrix(), loc)


@dataclass
class TripleNorms:
    """Matrices of the discrete seminorm and of the stronger norm on V_h x Lambda_h.

    ``|||(u, lam)|||_h^2 = u @ grad_jump @ u + lam @ vmat @ lam``; the strong norm
    adds ``u @ trace @ u + lam @ density @ lam + u @ hessian @ u``.
    """

    grad_jump: sp.csr_matrix
    vmat: np.ndarray
    trace: sp.csr_matrix = field(repr=False)
    density: np.ndarray = field(repr=False)
    hessian: sp.csr_matrix = field(repr=False)

    @classmethod
    def from_system(cls, system):
        space = system.dg_space
        bs = system.boundary_space
        grad_jump = (assemble_stiffness(space) + assemble_jump_matrix(space)).tocsr()
        # h_e^{-1} ||.||_e^2 in the orthonormal Legendre basis is the plain sum of squares
        trace = (system.T.T @ system.T).tocsr()
        return cls(grad_jump, system.Vmat, trace, np.eye(bs.total_dofs), assemble_hessian_matrix(space))

    def seminorm(self, u, lam):
        return float(np.sqrt(u @ (self.grad_jump @ u) + lam @ (self.vmat @ lam)))

    def strong(self, u, lam):
        extra = u @ (self.trace @ u) + lam @ (self.density @ lam) + u @ (self.hessian @ u)
        return float(np.sqrt(self.seminorm(u, lam) ** 2 + extra))

    def matrix(self):
        return sla.block_diag(self.grad_jump.toarray(), self.vmat)

    def strong_matrix(self):
        return sla.block_diag((self.grad_jump + self.trace + self.hessian).toarray(), self.vmat + self.density)


def mean_zero_basis(system):
    """Orthonormal basis of V_h* x Lambda_h^(0) as columns of a dense matrix."""
    zu = sla.null_space(system.dg_space.constant_weights[None, :])
    zl = sla.null_space(system.boundary_space.mean_weights[None, :])
    return sla.block_diag(zu, zl)


# -- coercivity ----------------------------------------------------------------

@dataclass
class SpectrumReport:
    sigma: float
    xi: int
    k: int
    level: int
    min_quotient: float
    residual: float
    n_dofs: int

    @property
    def coercive(self):
        return self.min_quotient >= COERCIVITY_BOUND - COERCIVITY_TOL


def _min_generalized_eig(a, b):
    """Smallest eigenpair of the definite pencil (a, b) and its relative residual."""
    w, v = sla.eigh(a, b, subset_by_index=[0, 0])
    z = v[:, 0]
    res = np.linalg.norm(a @ z - w[0] * (b @ z)) / (np.linalg.norm(a, 2) * np.linalg.norm(z))
    return float(w[0]), float(res)


def coercivity_spectrum(mesh, k, xi, sigma, level=0):
    """Minimum Rayleigh quotient of sym(B) against the triple seminorm on V_h* x Lambda_h^(0)."""
    space = DGSpace(mesh, k)
    bs = BoundarySpace.from_mesh(mesh, k)
    system = assemble_coupled(mesh, space, bs, PenaltyConfig(xi, float(sigma)))
    m = system.matrix()
    sym = 0.5 * (m + m.T)
    norms = TripleNorms.from_system(system).matrix()
    z = mean_zero_basis(system)
    nz = z.T @ norms @ z
    try:
        sla.cholesky(nz)
    except sla.LinAlgError:
        raise RuntimeError("triple seminorm is singular on the mean-zero subspace") from None
    q, res = _min_generalized_eig(z.T @ sym @ z, nz)
    if res > EIGEN_RESIDUAL_TOL:
        log.warning("eigen-residual %.2e above %.0e", res, EIGEN_RESIDUAL_TOL)
    return SpectrumReport(float(sigma), int(xi), int(k), int(level), q, res, z.shape[1])


def mesh_family(geometry, n_levels, coarse_subdivisions=1):
    mesh = triangulate_polygon(geometry, coarse_subdivisions)
    out = [mesh]
    for _ in range(n_levels - 1):
        mesh = refine_uniform(mesh)
        out.append(mesh)
    return out


def empirical_sigma0(geometry, k, xi, n_levels=3, grid=SIGMA_GRID, coarse_subdivisions=1):
    """Smallest grid value sigma0 with coercive quotients at sigma0 and 4 sigma0 on every level.

    Returns ``(sigma0, reports)``; ``sigma0`` is None if no grid value qualifies.
    """
    meshes = mesh_family(geometry, n_levels, coarse_subdivisions)
    cache = {}

    def reports(sigma):
        if sigma not in cache:
            cache[sigma] = [coercivity_spectrum(m, k, xi, sigma, lev) for lev, m in enumerate(meshes)]
        return cache[sigma]

    for s in grid:
        if all(r.coercive for r in reports(s)) and all(r.coercive for r in reports(4.0 * s)):
            return s, reports(s) + reports(4.0 * s)
    return None, [r for s in grid for r in reports(s)]


def relative_variation(values):
    v = np.asarray(values, float)
    return float((v.max() - v.min()) / abs(v).max())


# -- convergence ---------------------------------------------------------------

def eoc(h, e):
    """Experimental orders log(e_i / e_{i+1}) / log(h_i / h_{i+1}); nan where undefined."""
    h = np.asarray(h, float)
    e = np.asarray(e, float)
    if len(h) != len(e):
        raise ValueError("h and e must have equal length")
    rates = np.full(len(e) - 1, np.nan)
    ok = (e[:-1] > 0) & (e[1:] > 0)
    if not ok.all():
        log.warning("non-positive error entries: rate undefined at intervals %s", np.flatnonzero(~ok).tolist())
    rates[ok] = np.log(e[:-1][ok] / e[1:][ok]) / np.log(h[:-1][ok] / h[1:][ok])
    return rates.tolist()


def quasi_optimality_ratio(errors, proj):
    """|||(u_h - u, lam_h - lam)|||_h / |||(u - Pi u, lam - P lam)|||_{h,st} from error pieces."""
    num = np.sqrt(errors["h1"] ** 2 + errors["jump"] ** 2 + errors["lambda_v"] ** 2)
    den = np.sqrt(sum(v ** 2 for v in proj.values()))
    return float(num / den)


def run_convergence_study(case, levels, k, xi, sigma, coarse_subdivisions=1, quasi_optimality=True):
    """Solve the manufactured case on nested meshes and tabulate errors and rates.

    Returns a list of row dicts with ``level``, ``h``, ``dofs``, every error of
    :func:`exact_errors`, optionally ``quasi_ratio``, and ``eoc_<name>`` columns
    (empty on the first row).
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    rows = []
    for lev, mesh in enumerate(mesh_family(case.polygon, levels, coarse_subdivisions)):
        space = DGSpace(mesh, k)
        bs = BoundarySpace.from_mesh(mesh, k)
        system = assemble_coupled(mesh, space, bs, PenaltyConfig(xi, float(sigma)), case.problem_data(bs))
        sol = solve(system)
        lam_norm = LambdaNorm(bs)
        errs = exact_errors(case, sol, lambda_norm=lam_norm)
        row = {"level": lev, "h": mesh.h_max, "dofs": system.n_u + system.n_lam}
        row.update(errs)
        if quasi_optimality:
            row["quasi_ratio"] = quasi_optimality_ratio(errs, projection_errors(case, space, bs, lam_norm))
        rows.append(row)
    keys = list(ERROR_KEYS)
    for key in keys:
        rates = eoc([r["h"] for r in rows], [r[key] for r in rows])
        rows[0][f"eoc_{key}"] = float("nan")
        for r, rate in zip(rows[1:], rates):
            r[f"eoc_{key}"] = rate
    return rows


# -- consistency ---------------------------------------------------------------

def _exact_a_dg(case, space, cfg):
    """a_DG(u, phi_i) for the smooth exact u: jumps of u vanish, so only two terms survive."""
    order = 2 * space.k + 6
    pts, w = triangle_rule(order)
    _, g = triangle_basis(space.k, pts[:, 0], pts[:, 1], 1)
    gp = np.einsum("tji,qaj->tqai", space.jac_inv, g)
    x = space.origin[:, None, :] + np.einsum("tij,qj->tqi", space.jac, pts)
    gx, gy = case.grad_u(x[..., 0], x[..., 1])
    vol = np.einsum("q,tqai,tqi->ta", w, gp, np.stack([gx, gy], -1)) * space.det[:, None]
    out = vol.ravel()
    ed = EdgeData(space, n_points=space.k + 6)
    n = space.mesh.iedge_normal
    ux, uy = case.grad_u(ed.points[..., 0], ed.points[..., 1])
    dnu = ux * n[:, None, 0] + uy * n[:, None, 1]
    loc = np.einsum("eq,eqa,eq->ea", ed.weights, ed.jump_basis, dnu)
    np.add.at(out, ed.dofs, loc)
    return out


def consistency_residual(case, mesh, k, xi, sigma):
    """Dual triple-norm of the residual of the exact solution in the discrete equations.

    The interior field enters through exact quadrature; boundary fields that
    meet the integral operators are represented on the twice-bisected
    boundary space of the same degree.
    """
    space = DGSpace(mesh, k)
    bs = BoundarySpace.from_mesh(mesh, k)
    cfg = PenaltyConfig(xi, float(sigma))
    system = assemble_coupled(mesh, space, bs, cfg, case.problem_data(bs))
    fine = bs.refine().refine()
    _, lam_c = case.boundary_callables(bs)
    _, lam_f = case.boundary_callables(fine)
    mass = bs.mass_diagonal
    r_u = _exact_a_dg(case, space, cfg) - system.T.T @ (mass * bs.project(lam_c)) - system.rhs_u
    r_l = (0.5 * mass * bs.project(case.u) - assemble_K(fine, bs) @ fine.project(case.u)
           + assemble_V(bs, fine) @ fine.project(lam_f) - system.rhs_lam)
    norms = TripleNorms.from_system(system)
    return dual_norm(system, norms, r_u, r_l)


def dual_norm(system, norms, r_u, r_l):
    """sup over (v, mu) in V_h* x Lambda_h^(0) of (r_u.v + r_l.mu) / |||(v, mu)|||_h."""
    w = system.dg_space.constant_weights
    e = system.dg_space.constant().coeffs
    r = r_u - (r_u @ e) / (w @ e) * w
    # (A + w w^T) x = r has a mean-zero solution because r is orthogonal to constants
    x = spla.spsolve((norms.grad_jump + sp.csr_matrix(np.outer(w, w))).tocsc(), r)
    zl = sla.null_space(system.boundary_space.mean_weights[None, :])
    rl = zl.T @ r_l
    y = np.linalg.solve(zl.T @ norms.vmat @ zl, rl)
    return float(np.sqrt(max(r @ x, 0.0) + max(rl @ y, 0.0)))


# -- discrete constants --------------------------------------------------------

def trace_constant(mesh, k):
    """C_star: max over v_h of sum_K sum_{e in dK} h_e ||v_h||_e^2 / ||v_h||^2."""
    space = DGSpace(mesh, k)
    t, w = gauss_legendre(k + 1)
    ref_edges = np.array([[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [0.0, 0.0]]])
    p = mesh.vertices[mesh.triangles]
    lens = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
    gram = np.zeros((mesh.n_triangles, space.dofs_per_element, space.dofs_per_element))
    for i, (a, b) in enumerate(ref_edges):
        x = a + t[:, None] * (b - a)
        (vals,) = triangle_basis(k, x[:, 0], x[:, 1])
        local = np.einsum("q,qa,qb->ab", w, vals, vals)
        gram += (lens[:, i] ** 2)[:, None, None] * local
    # mass is det * I in the orthonormal basis
    return float(max(np.linalg.eigvalsh(g).max() / d for g, d in zip(gram, space.det)))


def _second_eig(a, m):
    w = sla.eigh(a, m, eigvals_only=True, subset_by_index=[0, 1])
    return float(w[1])


def pf_constant(mesh, k):
    """C_PF = lambda_min^{-1/2} of (grad + jump form, mass) on mean-zero V_h."""
    space = DGSpace(mesh, k)
    a = (assemble_stiffness(space) + assemble_jump_matrix(space)).toarray()
    # the only zero mode is the constant, which is mass-orthogonal to V_h*
    return 1.0 / np.sqrt(_second_eig(a, np.diag(space.mass_diagonal)))


def pf_constant_continuous(mesh, k):
    """The same quotient restricted to globally continuous mean-zero functions."""
    space = DGSpace(mesh, k)
    jm = assemble_jump_matrix(space).toarray()
    z = sla.null_space(jm, rcond=1e-10)
    a = z.T @ assemble_stiffness(space).toarray() @ z
    m = z.T @ (space.mass_diagonal[:, None] * z)
    return 1.0 / np.sqrt(_second_eig(a, m))


# -- fractional norms on the unit interval -------------------------------------

@dataclass
class FractionalGram:
    """Gram matrices on P_k(0, 1) in the orthonormal Legendre basis."""

    s: float
    k: int
    seminorm: np.ndarray
    weight: np.ndarray

    @property
    def tilde(self):
        return self.seminorm + self.weight

    @property
    def l2(self):
        return np.eye(self.k + 1)


def _difference_quotients(k, x, y):
    """(psi_j(x) - psi_j(y)) / (x - y) evaluated exactly for polynomial psi_j."""
    c = legendre_monomial_coeffs(k)
    out = np.zeros(np.broadcast(x, y).shape + (k + 1,))
    for m in range(1, k + 1):
        dq = sum(x ** l * y ** (m - 1 - l) for l in range(m))
        out += dq[..., None] * c[:, m]
    return out


def fractional_gram(s, k, quadrature_refinement=0):
    """Sobolev-Slobodetskij seminorm and distance-weight Gram matrices on (0, 1).

    The seminorm double integral is split at the diagonal; on x > y the
    substitution y = x (1 - w) leaves ``x^(2-2s) w^(1-2s)`` times a polynomial,
    which Gauss-Jacobi rules integrate exactly. The weight integral
    ``int v^2 dist(x, {0, 1})^(-2s)`` is split at 1/2 and mapped to a
    Gauss-Jacobi rule for ``t^(-2s)``.
    """
    if not 0.0 < s < 0.5:
        raise ValueError(f"s must lie in (0, 1/2); the distance weight diverges for s >= 1/2 (got {s})")
    n = (k + 2) * 2 ** quadrature_refinement
    xa, wa = gauss_jacobi01(n, 0.0, 2.0 - 2.0 * s)
    wb_x, wb = gauss_jacobi01(n, 0.0, 1.0 - 2.0 * s)
    x = xa[:, None]
    y = x * (1.0 - wb_x[None, :])
    q = _difference_quotients(k, x, y)
    wt = wa[:, None] * wb[None, :]
    semi = 2.0 * np.einsum("ij,ija,ijb->ab", wt, q, q)
    t, wt1 = gauss_jacobi01(n, 0.0, -2.0 * s)
    scale = 0.5 ** (1.0 - 2.0 * s)
    left = legendre01(k, 0.5 * t)
    right = legendre01(k, 1.0 - 0.5 * t)
    weight = scale * (np.einsum("q,qa,qb->ab", wt1, left, left) + np.einsum("q,qa,qb->ab", wt1, right, right))
    return FractionalGram(float(s), int(k), semi, weight)


def reference_inverse_constant(s, k, quadrature_refinement=0):
    """max over P_k of ||v||_{s,~}^2 / ||v||^2 on the unit interval."""
    g = fractional_gram(s, k, quadrature_refinement)
    return float(np.linalg.eigvalsh(g.tilde).max())


@dataclass
class Lemma34Result:
    max_ratio: float
    constant: float
    ratios: np.ndarray = field(repr=False)
    numerators: np.ndarray = field(repr=False, default=None)
    denominators: np.ndarray = field(repr=False, default=None)

    @property
    def holds(self):
        return self.max_ratio <= self.constant + 1e-6


def edge_jump_coefficients(space):
    """Matrix mapping volume coefficients to Legendre coefficients of every interior-edge jump."""
    ed = EdgeData(space)
    t, w = gauss_legendre(edge_points(space.k))
    psi = legendre01(space.k, t)
    loc = np.einsum("q,qj,eqa->eja", w, psi, ed.jump_basis)
    ne, nb = loc.shape[:2]
    rows = np.broadcast_to(np.arange(ne * nb).reshape(ne, nb)[:, :, None], loc.shape)
    cols = np.broadcast_to(ed.dofs[:, None, :], loc.shape)
    return sp.csr_matrix((loc.ravel(), (rows.ravel(), cols.ravel())), shape=(ne * nb, space.total_dofs))


def lemma34_check(mesh, k, s=0.4, n_samples=100, seed=0, samples=None):
    """Ratio of the summed tilde norms of edge jumps (reference edge) to |u_h|_h^2.

    In 2D every edge maps to the unit interval with ``h_e^{d-2} = 1`` and
    ``||[u] o F_e||^2 = h_e^{-1} ||[u]||_e^2``, so each ratio is bounded by
    :func:`reference_inverse_constant`.
    """
    space = DGSpace(mesh, k)
    g = fractional_gram(s, k).tilde
    jmap = edge_jump_coefficients(space)
    if samples is None:
        samples = np.random.default_rng(seed).standard_normal((n_samples, space.total_dofs))
    num, den, ratios = [], [], []
    for u in np.atleast_2d(samples):
        c = (jmap @ u).reshape(-1, k + 1)
        num.append(float(np.einsum("ea,ab,eb->", c, g, c)))
        den.append(float((c * c).sum()))
        # a jump at round-off level means u_h is continuous: both sides vanish
        ratios.append(num[-1] / den[-1] if den[-1] > 1e-24 * float(u @ u) else 0.0)
    ratios = np.array(ratios)
    return Lemma34Result(float(ratios.max()), reference_inverse_constant(s, k), ratios, np.array(num),
                         np.array(den))


# -- output --------------------------------------------------------------------

def write_csv(path, rows, columns=None):
    """Write row dicts with a fixed header; floats use repr for reproducibility."""
    columns = columns or list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_fmt(r.get(c, "")) for c in columns])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return str(v)
