"""Local polynomial bases.

Triangle basis: monomials centred at the barycentre of the reference triangle
(0,0), (1,0), (0,1), orthonormalized in L2 of that triangle. Interval basis:
shifted Legendre polynomials orthonormal on [0, 1].
"""
from functools import lru_cache

import numpy as np
from numpy.polynomial import Legendre, Polynomial

from .quadrature import triangle_rule


def n_triangle_dofs(k):
    return (k + 1) * (k + 2) // 2


@lru_cache(maxsize=None)
def _exponents(k):
    return tuple((d - j, j) for d in range(k + 1) for j in range(d + 1))


def _monomials(k, xi, eta, order):
    """Centred monomials and their derivatives up to ``order`` at reference points."""
    xs = np.asarray(xi, float) - 1.0 / 3.0
    ys = np.asarray(eta, float) - 1.0 / 3.0
    exps = _exponents(k)

    def pw(z, n):
        return z ** n if n >= 0 else np.zeros_like(z)

    val = np.stack([pw(xs, i) * pw(ys, j) for i, j in exps], axis=-1)
    if order == 0:
        return (val,)
    gx = np.stack([i * pw(xs, i - 1) * pw(ys, j) for i, j in exps], axis=-1)
    gy = np.stack([j * pw(xs, i) * pw(ys, j - 1) for i, j in exps], axis=-1)
    grad = np.stack([gx, gy], axis=-1)
    if order == 1:
        return val, grad
    hxx = np.stack([i * (i - 1) * pw(xs, i - 2) * pw(ys, j) for i, j in exps], axis=-1)
    hxy = np.stack([i * j * pw(xs, i - 1) * pw(ys, j - 1) for i, j in exps], axis=-1)
    hyy = np.stack([j * (j - 1) * pw(xs, i) * pw(ys, j - 2) for i, j in exps], axis=-1)
    hess = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
    return val, grad, hess


@lru_cache(maxsize=None)
def _orthonormalizer(k):
    pts, wts = triangle_rule(2 * k)
    (m,) = _monomials(k, pts[:, 0], pts[:, 1], 0)
    gram = (m * wts[:, None]).T @ m
    lower = np.linalg.cholesky(gram)
    return np.linalg.inv(lower)


def triangle_basis(k, xi, eta, order=0):
    """Orthonormal P_k basis on the reference triangle.

    Returns a tuple ``(values, ...)`` with shapes ``(..., nb)``,
    ``(..., nb, 2)`` and ``(..., nb, 2, 2)`` for derivative orders 0, 1, 2.
    """
    c = _orthonormalizer(k)
    out = _monomials(k, xi, eta, order)
    res = [out[0] @ c.T]
    if order >= 1:
        res.append(np.einsum("...bd,ab->...ad", out[1], c))
    if order >= 2:
        res.append(np.einsum("...bde,ab->...ade", out[2], c))
    return tuple(res)


@lru_cache(maxsize=None)
def lagrange_nodes(k):
    """Equispaced P_k lattice on the reference triangle, vertices first for k = 1."""
    if k == 1:
        return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return np.array([[i / k, j / k] for j in range(k + 1) for i in range(k + 1 - j)])


@lru_cache(maxsize=None)
def modal_to_nodal(k):
    """Matrix whose rows express the nodal (Lagrange) basis in the modal basis."""
    nodes = lagrange_nodes(k)
    (vand,) = triangle_basis(k, nodes[:, 0], nodes[:, 1])
    return np.linalg.inv(vand).T


@lru_cache(maxsize=None)
def legendre_monomial_coeffs(k):
    """Row j holds the power-basis coefficients (in t) of the orthonormal Legendre psi_j on [0, 1]."""
    c = np.zeros((k + 1, k + 1))
    for j in range(k + 1):
        p = Legendre.basis(j, domain=[0.0, 1.0]).convert(kind=Polynomial).coef * np.sqrt(2 * j + 1)
        c[j, : len(p)] = p
    return c


def legendre01(k, t, order=0):
    """Orthonormal Legendre basis on [0, 1]: values (..., k+1) and optionally derivatives."""
    t = np.asarray(t, float)
    c = legendre_monomial_coeffs(k)
    powers = np.stack([t ** m for m in range(k + 1)], axis=-1)
    vals = powers @ c.T
    if order == 0:
        return vals
    dpow = np.stack([m * t ** (m - 1) if m > 0 else np.zeros_like(t) for m in range(k + 1)], axis=-1)
    return vals, dpow @ c.T
