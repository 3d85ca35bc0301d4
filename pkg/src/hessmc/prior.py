"""Gaussian field prior built from an anisotropic reaction-diffusion operator.

The operator ``A = -gamma div(Psi grad) + delta`` with natural boundary
conditions is discretized with bilinear elements as ``A_h = N^{-1} K``; the
prior covariance is ``A^{-2}``, so the discrete precision is ``R = K N^{-1} K``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import spd
from .errors import NonPositiveParameter, RankOutOfRange
from .mesh import Mesh2D


def anisotropy_matrix(a, b, beta):
    """2x2 anisotropy tensor with eigenvalue ``b`` along ``(cos beta, sin beta)`` and ``a`` across it."""
    if a <= 0 or b <= 0:
        raise NonPositiveParameter(f"anisotropy needs a, b > 0, got a={a}, b={b}")
    s, c = np.sin(beta), np.cos(beta)
    return np.array(
        [
            [a * s**2 + b * c**2, (b - a) * s * c],
            [(b - a) * s * c, b * s**2 + a * c**2],
        ]
    )


@dataclass(frozen=True)
class AnisotropyTensor:
    a: float = 1.0
    b: float = 1.0
    beta: float = 0.0

    def matrix(self):
        return anisotropy_matrix(self.a, self.b, self.beta)


def assemble_mass(mesh: Mesh2D):
    phi, _, w = mesh.quadrature
    elem = np.einsum("q,qa,qb->ab", w, phi, phi)
    return mesh.assemble(0.5 * (elem + elem.T))  # bitwise symmetric


def assemble_stiffness(mesh: Mesh2D, gamma, delta, psi=None):
    """``K_ij = int gamma Psi grad(phi_i).grad(phi_j) + delta phi_i phi_j``."""
    if gamma < 0 or delta < 0:
        raise NonPositiveParameter(f"need gamma >= 0 and delta >= 0, got {gamma}, {delta}")
    Psi = np.eye(2) if psi is None else (psi.matrix() if isinstance(psi, AnisotropyTensor) else np.asarray(psi))
    phi, dphi, w = mesh.quadrature
    elem = gamma * np.einsum("q,qai,ij,qbj->ab", w, dphi, Psi, dphi)
    elem = elem + delta * np.einsum("q,qa,qb->ab", w, phi, phi)
    return mesh.assemble(0.5 * (elem + elem.T))


@dataclass(frozen=True, eq=False)
class BilaplacianPrior:
    mesh: Mesh2D
    gamma: float
    delta: float
    psi: AnisotropyTensor
    mean: np.ndarray
    N: np.ndarray
    K: np.ndarray
    R: np.ndarray
    precision: spd.SpdFactor

    @property
    def dim(self):
        return self.mesh.n_nodes

    def cost(self, x):
        """``0.5 (x - m)^T R (x - m)``; the negative log-density up to a constant."""
        d = np.asarray(x) - self.mean
        return 0.5 * float(d @ (self.R @ d))

    def logpdf(self, x):
        return -self.cost(x)

    def grad(self, x):
        return self.R @ (np.asarray(x) - self.mean)

    def covariance(self):
        return self.precision.inverse()

    def pointwise_variance(self):
        return np.diag(self.covariance()).copy()


def build_prior(mesh, gamma, delta, psi=None, mean=0.0, factor="cholesky"):
    if gamma < 0 or delta <= 0:
        raise NonPositiveParameter(f"need gamma >= 0 and delta > 0, got {gamma}, {delta}")
    psi = psi if psi is not None else AnisotropyTensor()
    N = assemble_mass(mesh)
    K = assemble_stiffness(mesh, gamma, delta, psi)
    R = K @ linalg.solve(N, K, assume_a="pos")
    R = 0.5 * (R + R.T)
    m = np.broadcast_to(np.asarray(mean, dtype=float), (mesh.n_nodes,)).copy()
    return BilaplacianPrior(mesh, gamma, delta, psi, m, N, K, R, spd.factorize(R, factor, check_symmetry=False))


def sample_prior(prior: BilaplacianPrior, rng, u=None):
    """``mean + R^{-1/2} u`` with ``u`` standard normal (drawn from ``rng`` unless given)."""
    if u is None:
        u = rng.standard_normal(prior.dim)
    return prior.mean + prior.precision.solve_sqrt_transpose(u)


@dataclass(frozen=True)
class KLExpansion:
    mean: np.ndarray
    lambdas: np.ndarray
    modes: np.ndarray  # columns, N-orthonormal

    @property
    def rank(self):
        return self.lambdas.size

    def sample(self, rng, xi=None):
        if xi is None:
            xi = rng.standard_normal(self.rank)
        return self.mean + self.modes @ (self.lambdas * xi)

    def pointwise_variance(self):
        return (self.modes**2) @ self.lambdas**2


def kl_expansion(prior: BilaplacianPrior, r):
    """Leading ``r`` Karhunen-Loeve pairs of the prior.

    Solves ``C N phi = lambda^2 phi`` with ``C = R^{-1}`` as the symmetric-definite
    pencil ``(N C N, N)``; modes come back N-orthonormal. Returns
    ``(lambdas, modes)`` wrapped in a :class:`KLExpansion`.
    """
    n = prior.dim
    if not 1 <= r <= n:
        raise RankOutOfRange(f"rank {r} outside [1, {n}]")
    N = prior.N
    NCN = N @ prior.precision.solve(N)
    NCN = 0.5 * (NCN + NCN.T)
    vals, vecs = linalg.eigh(NCN, N, subset_by_index=[n - r, n - 1])
    vals, vecs = vals[::-1], vecs[:, ::-1]
    return KLExpansion(prior.mean.copy(), np.sqrt(vals), vecs)
