"""Galerkin boundary elements for the 2D Laplace operator on polygonal curves.

Densities live on straight segments with the orthonormal Legendre basis in the
segment parameter t in [0, 1]; on a segment of length L the local mass matrix
is ``L * I``. Pairs of nearby segments are integrated with closed-form inner
integrals of the log and double-layer kernels against monomials, and a
graded outer Gauss rule. Well-separated pairs use tensor Gauss rules.
"""
import warnings
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import xlogy

from .basis import legendre01, legendre_monomial_coeffs
from .quadrature import composite_graded, gauss_legendre

NEAR_FACTOR = 1.0
FAR_POINTS = 12
POTENTIAL_POINTS = 16


class BoundarySpace:
    """Segment-wise discontinuous P_k space on a polygonal partition."""

    def __init__(self, starts, ends, k, sides=None):
        self.a = np.asarray(starts, float)
        self.b = np.asarray(ends, float)
        self.k = int(k)
        if self.k < 0:
            raise ValueError("boundary degree must be >= 0")
        self.n_segments = len(self.a)
        self.nb = self.k + 1
        self.total_dofs = self.n_segments * self.nb
        d = self.b - self.a
        self.length = np.linalg.norm(d, axis=1)
        self.tangent = d / self.length[:, None]
        self.normal = np.column_stack([self.tangent[:, 1], -self.tangent[:, 0]])
        self.sides = np.zeros(self.n_segments, dtype=np.int64) if sides is None else np.asarray(sides)

    @classmethod
    def from_mesh(cls, mesh, k):
        a, b = mesh.boundary_endpoints()
        return cls(a, b, k, mesh.bseg_side)

    def with_degree(self, k):
        return BoundarySpace(self.a, self.b, k, self.sides)

    def refine(self):
        """Bisect every segment; children of segment s are 2s and 2s+1."""
        m = 0.5 * (self.a + self.b)
        a = np.empty((2 * self.n_segments, 2))
        b = np.empty_like(a)
        a[0::2], b[0::2] = self.a, m
        a[1::2], b[1::2] = m, self.b
        return BoundarySpace(a, b, self.k, np.repeat(self.sides, 2))

    def prolongation(self, fine=None):
        """Exact embedding of this space into its bisection (same degree)."""
        fine = fine or self.refine()
        t, w = gauss_legendre(self.k + 1)
        psi_child = legendre01(self.k, t)
        blocks = []
        for c in (0, 1):
            psi_parent = legendre01(self.k, 0.5 * (c + t))
            blocks.append(np.einsum("q,qi,qj->ij", w, psi_child, psi_parent))
        p = np.zeros((fine.total_dofs, self.total_dofs))
        nb = self.nb
        for s in range(self.n_segments):
            for c in (0, 1):
                r = (2 * s + c) * nb
                p[r:r + nb, s * nb:(s + 1) * nb] = blocks[c]
        return p

    @property
    def total_length(self):
        return float(self.length.sum())

    @property
    def mass_diagonal(self):
        return np.repeat(self.length, self.nb)

    @property
    def mean_weights(self):
        """MeanZeroConstraint weights: ``w @ lam`` is the integral of lam over the boundary."""
        w = np.zeros((self.n_segments, self.nb))
        w[:, 0] = self.length
        return w.ravel()

    def constant(self, value=1.0):
        c = np.zeros((self.n_segments, self.nb))
        c[:, 0] = value
        return c.ravel()

    def points(self, t):
        """Physical points (nseg, len(t), 2) at parameters t."""
        t = np.asarray(t, float)
        return self.a[:, None, :] + t[None, :, None] * (self.b - self.a)[:, None, :]

    def project(self, g, n_points=None):
        """L2 projection of ``g(x, y, segment_index)`` (or ``g(x, y)``) onto the space."""
        t, w = gauss_legendre(n_points or self.k + 8)
        x = self.points(t)
        try:
            vals = g(x[..., 0], x[..., 1], np.arange(self.n_segments)[:, None])
        except TypeError:
            vals = g(x[..., 0], x[..., 1])
        psi = legendre01(self.k, t)
        return np.einsum("q,sq,qj->sj", w, np.asarray(vals, float), psi).ravel()

    def integrate(self, g, n_points=12):
        """Integral of ``g(x, y, segment_index)`` (or ``g(x, y)``) over the boundary."""
        t, w = gauss_legendre(n_points)
        x = self.points(t)
        try:
            vals = g(x[..., 0], x[..., 1], np.arange(self.n_segments)[:, None])
        except TypeError:
            vals = g(x[..., 0], x[..., 1])
        return float(np.einsum("q,sq,s->", w, np.asarray(vals, float), self.length))

    def function(self, coeffs=None):
        return BoundaryFunction(self, np.zeros(self.total_dofs) if coeffs is None else np.asarray(coeffs, float))


@dataclass
class BoundaryFunction:
    space: BoundarySpace
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.space.total_dofs,):
            raise ValueError("coefficient length does not match boundary space")

    def __call__(self, segment, t):
        c = self.coeffs.reshape(self.space.n_segments, self.space.nb)[segment]
        return legendre01(self.space.k, t) @ c

    def integral(self):
        return float(self.space.mean_weights @ self.coeffs)


# -- kernels -----------------------------------------------------------------

def fundamental_solution(x, y):
    """Phi(x, y) = -log|x - y| / (2 pi)."""
    r = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float), axis=-1)
    if np.any(r == 0):
        raise ValueError("fundamental solution is singular at x == y")
    return -np.log(r) / (2 * np.pi)


def grad_y_fundamental(x, y):
    """Gradient of Phi(x, y) with respect to y: (x - y) / (2 pi |x - y|^2)."""
    d = np.asarray(x, float) - np.asarray(y, float)
    r2 = (d ** 2).sum(-1)
    if np.any(r2 == 0):
        raise ValueError("fundamental solution is singular at x == y")
    return d / (2 * np.pi * r2[..., None])


def _segment_frame(x, a, b):
    d = b - a
    L = np.linalg.norm(d, axis=-1)
    tau = d / L[..., None]
    nu = np.stack([tau[..., 1], -tau[..., 0]], axis=-1)
    r = x - a
    t0 = (r * tau).sum(-1) / L
    dn = (r * nu).sum(-1)
    return L, t0, dn


def _binomial_shift(t0, p, inner):
    """Combine integrals of u**n into integrals of t**m = (u + t0)**m, m = 0..p."""
    out = []
    for m in range(p + 1):
        acc = 0.0
        for n in range(m + 1):
            acc = acc + comb(m, n) * t0 ** (m - n) * inner[n]
        out.append(acc)
    return np.stack(out, axis=-1)


def log_moments(x, a, b, p):
    """Integrals of t**m * log|x - y(t)| dt over t in [0, 1], y(t) = a + t (b - a), m = 0..p."""
    L, t0, dn = _segment_frame(x, a, b)
    delta = np.abs(dn) / L
    d2 = delta ** 2

    def antider(u):
        r2 = u ** 2 + d2
        D0 = np.where(delta > 0, delta * np.arctan2(u, np.where(delta > 0, delta, 1.0)), 0.0)
        D1 = 0.5 * xlogy(d2, r2)
        J = {2: u - D0, 3: 0.5 * u ** 2 - D1}
        for m in range(4, p + 3):
            J[m] = u ** (m - 1) / (m - 1) - d2 * J[m - 2]
        return [xlogy(u ** (n + 1), r2) / (n + 1) - 2.0 / (n + 1) * J[n + 2] for n in range(p + 1)]

    hi = antider(1.0 - t0)
    lo = antider(-t0)
    G = [h - l for h, l in zip(hi, lo)]
    mom = 0.5 * _binomial_shift(t0, p, G)
    return mom + np.log(L)[..., None] / np.arange(1, p + 2)


def dlp_moments(x, a, b, p):
    """Integrals of t**m * (x - y).nu(y) / |x - y|^2 * L dt over t in [0, 1], m = 0..p.

    These are the double-layer moments without the 1/(2 pi) factor.
    """
    L, t0, dn = _segment_frame(x, a, b)
    delta = np.abs(dn) / L
    d2 = delta ** 2
    sgn = np.sign(dn)

    def antider(u):
        H = {0: np.arctan2(u, delta), 1: 0.5 * xlogy(delta, u ** 2 + d2)}
        for m in range(2, p + 1):
            H[m] = delta * u ** (m - 1) / (m - 1) - d2 * H[m - 2]
        return [H[n] for n in range(p + 1)]

    hi = antider(1.0 - t0)
    lo = antider(-t0)
    G = [h - l for h, l in zip(hi, lo)]
    return sgn[..., None] * _binomial_shift(t0, p, G)


# -- Galerkin matrices ---------------------------------------------------------

def point_segment_distance(p, a, b):
    d = b - a
    t = np.clip(((p - a) * d).sum(-1) / (d * d).sum(-1), 0.0, 1.0)
    return np.linalg.norm(p - a - t[..., None] * d, axis=-1)


def _segment_distance(a1, b1, a2, b2):
    """Distance between non-crossing segments [a1, b1] and [a2, b2]."""
    return np.minimum.reduce([point_segment_distance(a1, a2, b2), point_segment_distance(b1, a2, b2),
                              point_segment_distance(a2, a1, b1), point_segment_distance(b2, a1, b1)])


def _outer_breaks(test, i, trial, j):
    a, b = test.a[i], test.b[i]
    L = test.length[i]
    brk = []
    for p in (trial.a[j], trial.b[j]):
        r = p - a
        t = r @ test.tangent[i] / L
        off = abs(r @ test.normal[i])
        if off < 1e-12 * L and -1e-12 < t < 1 + 1e-12:
            brk.append(t)
    return brk


def _kernel_far(kind, x, y, ny):
    d = x - y
    r2 = (d ** 2).sum(-1)
    if kind == "V":
        return -np.log(r2) / (4 * np.pi)
    return (d * ny).sum(-1) / (2 * np.pi * r2)


def _assemble(kind, test, trial):
    n_out, n_in = test.n_segments, trial.n_segments
    out = np.zeros((n_out, test.nb, n_in, trial.nb))
    tq, wq = gauss_legendre(FAR_POINTS)
    psi_test_far = legendre01(test.k, tq)
    psi_trial_far = legendre01(trial.k, tq)
    x_far = test.points(tq)
    y_far = trial.points(tq)
    cleg = legendre_monomial_coeffs(trial.k)
    for i in range(n_out):
        dist = _segment_distance(test.a[i], test.b[i], trial.a, trial.b)
        near = dist < NEAR_FACTOR * np.maximum(test.length[i], trial.length)
        far = np.flatnonzero(~near)
        if far.size:
            x = x_far[i][None, :, None, :]
            y = y_far[far][:, None, :, :]
            ker = _kernel_far(kind, x, y, trial.normal[far][:, None, None, :])
            w2 = np.outer(wq, wq)[None] * (test.length[i] * trial.length[far])[:, None, None]
            out[i, :, far, :] = np.einsum("fpq,pa,qb->fab", ker * w2, psi_test_far, psi_trial_far)
        for j in np.flatnonzero(near):
            if kind == "K" and _collinear(test, i, trial, j):
                continue
            s, ws = composite_graded(_outer_breaks(test, i, trial, j))
            x = test.a[i] + s[:, None] * (test.b[i] - test.a[i])
            if kind == "V":
                mom = -log_moments(x, trial.a[j], trial.b[j], trial.k) * trial.length[j] / (2 * np.pi)
            else:
                mom = dlp_moments(x, trial.a[j], trial.b[j], trial.k) / (2 * np.pi)
            inner = mom @ cleg.T
            psi = legendre01(test.k, s)
            out[i, :, j, :] = test.length[i] * np.einsum("q,qa,qb->ab", ws, psi, inner)
    return out.reshape(test.total_dofs, trial.total_dofs)


def _collinear(test, i, trial, j):
    """True if segment j lies on the line of segment i (double-layer kernel vanishes)."""
    L = test.length[i]
    return all(abs((p - test.a[i]) @ test.normal[i]) < 1e-12 * L for p in (trial.a[j], trial.b[j]))


def assemble_V(space, trial=None):
    """Single-layer Galerkin matrix <psi_i, V psi_j>."""
    _check_capacity(space)
    return _assemble("V", space, trial or space)


def assemble_K(trace_space, test_space=None):
    """Double-layer Galerkin matrix with rows <psi_i, K phi_j>, phi_j from ``trace_space``."""
    return _assemble("K", test_space or trace_space, trace_space)


def _check_capacity(space):
    pts = np.concatenate([space.a, space.b])
    diam = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1)).max()
    if diam >= 2.0:
        warnings.warn(f"boundary diameter {diam:.3g} >= 2: V may be indefinite off the mean-zero subspace",
                      stacklevel=3)


def v_energy_norm(space, coeffs, vmat=None, rtol=1e-6, atol=1e-10):
    """sqrt(lam^T V lam) for a mean-zero density; non-mean-zero input is rejected."""
    coeffs = np.asarray(coeffs, float)
    mean = space.mean_weights @ coeffs
    scale = space.mean_weights @ np.abs(coeffs.reshape(space.n_segments, space.nb)).sum(1).repeat(space.nb) / space.nb
    if abs(mean) > rtol * scale + atol:
        raise ValueError(f"density is not mean-zero (integral {mean:.3e})")
    vmat = assemble_V(space) if vmat is None else vmat
    return float(np.sqrt(max(coeffs @ vmat @ coeffs, 0.0)))


# -- potentials ----------------------------------------------------------------

def _potential(kind, space, coeffs, points, min_distance=0.0):
    pts = np.atleast_2d(np.asarray(points, float))
    c = np.asarray(coeffs, float).reshape(space.n_segments, space.nb)
    dist = point_segment_distance(pts[:, None, :], space.a[None], space.b[None])
    if np.any(dist.min(axis=1) <= min_distance):
        raise ValueError("evaluation point on (or too close to) the boundary")
    res = np.zeros(len(pts))
    near = dist < 2.0 * space.length[None]
    tq, wq = gauss_legendre(POTENTIAL_POINTS)
    y = space.points(tq)
    dens = legendre01(space.k, tq) @ c.T  # (q, nseg)
    ker = _kernel_far(kind, pts[:, None, None, :], y[None], space.normal[None, :, None, :])
    far_val = np.einsum("psq,q,qs,s->ps", ker, wq, dens, space.length)
    res += np.where(near, 0.0, far_val).sum(axis=1)
    pi_, si_ = np.nonzero(near)
    if pi_.size:
        x = pts[pi_]
        if kind == "V":
            mom = -log_moments(x, space.a[si_], space.b[si_], space.k) * space.length[si_, None] / (2 * np.pi)
        else:
            mom = dlp_moments(x, space.a[si_], space.b[si_], space.k) / (2 * np.pi)
        vals = np.einsum("nm,jm,nj->n", mom, legendre_monomial_coeffs(space.k), c[si_])
        np.add.at(res, pi_, vals)
    return res


def eval_single_layer(space, coeffs, points):
    """S lam at points off the boundary."""
    return _potential("V", space, coeffs, points)


def eval_double_layer(space, coeffs, points):
    """D phi at points off the boundary for segment-wise P_k data ``phi``."""
    return _potential("K", space, coeffs, points)


def eval_double_layer_function(space, g, points, n_points=24):
    """D g for a callable ``g(x, y, segment)`` by Gauss quadrature (points away from the boundary)."""
    pts = np.atleast_2d(np.asarray(points, float))
    t, w = gauss_legendre(n_points)
    y = space.points(t)
    try:
        vals = g(y[..., 0], y[..., 1], np.arange(space.n_segments)[:, None])
    except TypeError:
        vals = g(y[..., 0], y[..., 1])
    ker = _kernel_far("K", pts[:, None, None, :], y[None], space.normal[None, :, None, :])
    return np.einsum("psq,q,sq,s->p", ker, w, np.asarray(vals, float), space.length)
