"""Non-symmetric IPDG/BEM coupling for the Laplace transmission problem.

Unknowns are ordered ``[u; lam]``. The block system reads

    [ A   -B^T ] [u  ]   [ (f, v) + <beta1, v>          ]
    [ C    V   ] [lam] = [ <mu, beta0/2 - K beta0>       ]

with ``B = M_G T`` (boundary mass times the volume trace map) and
``C = (M_G / 2 - K) T``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bem import BoundaryFunction, BoundarySpace, assemble_K, assemble_V, eval_double_layer, \
    eval_double_layer_function, eval_single_layer, point_segment_distance
from .dg import DGFunction, DGSpace, PenaltyConfig, assemble_a_dg, element_quadrature, load_vector, trace_map

log = logging.getLogger(__name__)

MONOLITHIC_LIMIT = 5000
RESIDUAL_TOL = 1e-10
BETA0_EXTRA_DEGREE = 2


class SolveError(RuntimeError):
    pass


@dataclass
class ProblemData:
    """Volume source and jump data; ``None`` means zero.

    Boundary data are callables ``g(x, y)`` or ``g(x, y, segment)``.
    """

    f: object = None
    beta0: object = None
    beta1: object = None


@dataclass
class CoupledSystem:
    dg_space: DGSpace
    boundary_space: BoundarySpace
    cfg: PenaltyConfig
    A: sp.csr_matrix
    B: sp.csr_matrix
    C: np.ndarray
    Vmat: np.ndarray
    rhs_u: np.ndarray
    rhs_lam: np.ndarray
    T: sp.csr_matrix = field(repr=False)
    K: np.ndarray = field(repr=False)
    data: ProblemData = field(repr=False, default_factory=ProblemData)

    @property
    def n_u(self):
        return self.A.shape[0]

    @property
    def n_lam(self):
        return self.Vmat.shape[0]

    def matrix(self):
        """The full (non-symmetric) coupled matrix as a dense array."""
        return np.block([[self.A.toarray(), -self.B.T.toarray()], [self.C, self.Vmat]])

    def apply(self, u, lam):
        return self.A @ u - self.B.T @ lam, self.C @ u + self.Vmat @ lam

    def residual(self, u, lam):
        ru, rl = self.apply(u, lam)
        return ru - self.rhs_u, rl - self.rhs_lam


@dataclass
class CoupledSolution:
    system: CoupledSystem
    u: DGFunction
    lam: BoundaryFunction
    c_h: float
    u_star: DGFunction
    residual_u: float = 0.0
    residual_lam: float = 0.0

    @property
    def c_h_formula(self):
        return c_h_from_formula(self.system, self.u_star.coeffs, self.lam.coeffs)


def assemble_coupled(mesh, dg_space, boundary_space, cfg, data=None, quad_order=None):
    """Assemble all blocks and right-hand sides of the coupled system."""
    data = data or ProblemData()
    if dg_space.k != boundary_space.k:
        raise ValueError(f"degree mismatch: volume k={dg_space.k}, boundary k={boundary_space.k}")
    if dg_space.mesh is not mesh or boundary_space.n_segments != mesh.n_boundary_segments:
        raise ValueError("spaces are not defined on the given mesh")
    k = dg_space.k
    A = assemble_a_dg(dg_space, cfg)
    T = trace_map(dg_space)
    mass = boundary_space.mass_diagonal
    B = sp.diags(mass) @ T
    K = assemble_K(boundary_space)
    C = np.asarray((0.5 * sp.diags(mass) @ T).toarray() - K @ T)
    Vmat = assemble_V(boundary_space)

    order = quad_order or 2 * k + 6
    rhs_u = np.zeros(dg_space.total_dofs)
    if data.f is not None:
        rhs_u += load_vector(dg_space, data.f, order)
    if data.beta1 is not None:
        # traces of V_h lie in the degree-k boundary space, so projecting beta1 is exact here
        rhs_u += T.T @ (mass * boundary_space.project(data.beta1, n_points=order))
    rhs_lam = np.zeros(boundary_space.total_dofs)
    if data.beta0 is not None:
        hi = boundary_space.with_degree(k + BETA0_EXTRA_DEGREE)
        b0_hi = hi.project(data.beta0, n_points=order)
        b0 = boundary_space.project(data.beta0, n_points=order)
        rhs_lam = 0.5 * mass * b0 - assemble_K(hi, boundary_space) @ b0_hi
    return CoupledSystem(dg_space, boundary_space, cfg, A, B.tocsr(), C, Vmat, rhs_u, rhs_lam, T.tocsr(), K, data)


def _relative_residuals(system, u, lam):
    ru, rl = system.residual(u, lam)
    su = max(np.linalg.norm(system.rhs_u), np.linalg.norm(system.A @ u) + np.linalg.norm(system.B.T @ lam))
    sl = max(np.linalg.norm(system.rhs_lam), np.linalg.norm(system.C @ u) + np.linalg.norm(system.Vmat @ lam))
    return (np.linalg.norm(ru) / su if su > 0 else np.linalg.norm(ru),
            np.linalg.norm(rl) / sl if sl > 0 else np.linalg.norm(rl))


def _schur_solver(system):
    """Factorized solver eliminating lam through a dense LU of V."""
    v_lu = sla.lu_factor(system.Vmat)
    if np.any(np.abs(np.diag(v_lu[0])) < 1e-14 * np.abs(system.Vmat).max()):
        raise SolveError("single-layer matrix is singular")
    bcols = np.unique(system.B.indices)
    ccols = np.flatnonzero(np.abs(system.C).sum(axis=0) > 0)
    idx = np.union1d(bcols, ccols)
    bsub = system.B[:, idx].toarray()
    csub = system.C[:, idx]
    block = bsub.T @ sla.lu_solve(v_lu, csub)
    rows = np.repeat(idx, len(idx))
    cols = np.tile(idx, len(idx))
    schur = (system.A + sp.csr_matrix((block.ravel(), (rows, cols)), shape=system.A.shape)).tocsc()
    with np.errstate(all="raise"):
        try:
            s_lu = spla.splu(schur)
        except (RuntimeError, FloatingPointError) as exc:
            raise SolveError(f"Schur complement factorization failed: {exc}") from None

    def solve(fu, fl):
        w = sla.lu_solve(v_lu, fl)
        u = s_lu.solve(fu + system.B.T @ w)
        lam = sla.lu_solve(v_lu, fl - system.C @ u)
        return u, lam

    return solve


def _dense_solver(system):
    mat = system.matrix()
    lu = sla.lu_factor(mat)
    if np.any(np.abs(np.diag(lu[0])) < 1e-14 * np.abs(mat).max()):
        raise SolveError("coupled matrix is singular")
    n = system.n_u

    def solve(fu, fl):
        x = sla.lu_solve(lu, np.concatenate([fu, fl]))
        return x[:n], x[n:]

    return solve


def solve(system, coercivity_threshold=None):
    """Solve the coupled system and decompose u_h = u_star + c_h."""
    if coercivity_threshold is not None and system.cfg.sigma_min < coercivity_threshold:
        log.warning("sigma_min=%g below coercivity threshold %g", system.cfg.sigma_min, coercivity_threshold)
    try:
        solver = _schur_solver(system)
    except SolveError:
        if system.n_u + system.n_lam > MONOLITHIC_LIMIT:
            raise
        log.info("Schur factorization failed; falling back to monolithic dense solve")
        solver = _dense_solver(system)
    u, lam = solver(system.rhs_u, system.rhs_lam)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(lam))):
        raise SolveError("non-finite solution")
    ru, rl = system.residual(u, lam)
    du, dl = solver(-ru, -rl)
    u, lam = u + du, lam + dl
    res_u, res_l = _relative_residuals(system, u, lam)
    if max(res_u, res_l) > RESIDUAL_TOL:
        log.warning("relative residuals %.2e / %.2e exceed %.0e", res_u, res_l, RESIDUAL_TOL)
    space = system.dg_space
    uf = space.function(u)
    c_h = uf.mean()
    u_star = uf - space.constant(c_h)
    return CoupledSolution(system, uf, system.boundary_space.function(lam), c_h, u_star, res_u, res_l)


def c_h_from_formula(system, u_star, lam):
    """c_h from the boundary integral identity obtained by testing with mu = 1."""
    one = system.boundary_space.constant()
    gamma = system.boundary_space.total_length
    return -(one @ (system.Vmat @ lam) + one @ (system.C @ u_star) - one @ system.rhs_lam) / gamma


def data_integrals(system, order=None):
    """(integral of f over the domain, integral of beta1 over the boundary)."""
    data = system.data
    space = system.dg_space
    int_f = 0.0
    if data.f is not None:
        x, w, _ = element_quadrature(space, order or 2 * space.k + 6)
        int_f = float((w * data.f(x[..., 0], x[..., 1])).sum())
    int_b1 = 0.0
    if data.beta1 is not None:
        int_b1 = system.boundary_space.integrate(data.beta1, n_points=order or 2 * space.k + 6)
    return int_f, int_b1


def check_lambda_mean(solution, data=None):
    """|int lam_h + int f + int beta1|, which vanishes by testing with v_h = 1."""
    int_f, int_b1 = data_integrals(solution.system)
    return abs(solution.lam.integral() + int_f + int_b1)


def exterior_eval(solution, points, beta0=None):
    """Discrete exterior field D(u_h - beta0) - S lam_h at points away from the boundary."""
    system = solution.system
    bs = system.boundary_space
    beta0 = system.data.beta0 if beta0 is None else beta0
    pts = np.atleast_2d(np.asarray(points, float))
    ends = np.concatenate([bs.a, bs.b])
    diam = np.sqrt(((ends[:, None] - ends[None]) ** 2).sum(-1)).max()
    dist = point_segment_distance(pts[:, None, :], bs.a[None], bs.b[None]).min(axis=1)
    if np.any(dist <= 0.05 * diam):
        raise ValueError("evaluation point too close to the boundary (near field)")
    val = eval_double_layer(bs, system.T @ solution.u.coeffs, pts) - eval_single_layer(bs, solution.lam.coeffs, pts)
    if beta0 is not None:
        val -= eval_double_layer_function(bs, beta0, pts)
    return val


def coupled_problem(mesh, k, cfg, data=None):
    """Convenience: spaces, assembly and solve in one call."""
    space = DGSpace(mesh, k)
    bspace = BoundarySpace.from_mesh(mesh, k)
    system = assemble_coupled(mesh, space, bspace, cfg, data)
    return solve(system)


def write_solution(solution, path):
    system = solution.system
    sigma = np.atleast_1d(np.asarray(system.cfg.sigma, float))
    with open(path, "w") as fh:
        fh.write("dgbem-sol v1\n")
        fh.write(f"k {system.dg_space.k}\n")
        fh.write(f"xi {system.cfg.xi}\n")
        fh.write("sigma " + " ".join(repr(float(s)) for s in sigma) + "\n")
        fh.write(f"mesh {system.dg_space.mesh.hash()}\n")
        fh.write(f"c_h {float(solution.c_h)!r}\n")
        fh.write(f"u {len(solution.u.coeffs)}\n")
        fh.writelines(f"{float(c)!r}\n" for c in solution.u.coeffs)
        fh.write(f"lambda {len(solution.lam.coeffs)}\n")
        fh.writelines(f"{float(c)!r}\n" for c in solution.lam.coeffs)


def read_solution(path):
    """Parse a solution file into a dict with metadata and coefficient arrays."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "dgbem-sol v1":
        raise ValueError(f"{path}: missing 'dgbem-sol v1' header")
    out = {}
    i = 1
    while i < len(lines):
        key, _, rest = lines[i].partition(" ")
        if key in ("u", "lambda"):
            n = int(rest)
            out[key] = np.array([float(v) for v in lines[i + 1:i + 1 + n]])
            i += n + 1
            continue
        if key in ("k", "xi"):
            out[key] = int(rest)
        elif key == "sigma":
            out[key] = [float(v) for v in rest.split()]
        elif key == "c_h":
            out[key] = float(rest)
        else:
            out[key] = rest
        i += 1
    return out
