"""Negative log-densities ``J`` with gradients, and Hessians where available.

A target exposes ``dim``, ``value(psi)``, ``grad(psi)`` and
``value_and_grad(psi)``. ``value`` is ``+inf`` outside the support and
``value_and_grad`` then returns ``(inf, None)``, which the samplers treat as
an automatic rejection.
"""

from __future__ import annotations

import numpy as np

from . import forward as fwd
from . import spd
from .errors import DimensionMismatch, ForwardSolveFailure, HessianUnavailable, ModeUnsupported, OutOfSupport


class Target:
    dim = None

    def _check(self, psi):
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (self.dim,):
            raise DimensionMismatch(f"expected shape ({self.dim},), got {psi.shape}")
        return psi

    def value(self, psi):
        return self.value_and_grad(psi)[0]

    def grad(self, psi):
        return self.value_and_grad(psi)[1]

    def value_and_grad(self, psi):
        raise NotImplementedError

    def hess(self, psi):
        raise ModeUnsupported(f"{type(self).__name__} has no analytic Hessian")

    def map_hessian(self, psi_map):
        """SPD preconditioner built at the MAP point."""
        return spd.eigen_factor(hessian_at(self, psi_map, "analytic"))


class GaussianTarget(Target):
    def __init__(self, mean, precision):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        if not isinstance(precision, spd.SpdFactor):
            precision = spd.cholesky(np.atleast_2d(precision))
        self.precision = precision
        self.dim = self.mean.size
        if precision.n != self.dim:
            raise DimensionMismatch("mean and precision sizes differ")

    @classmethod
    def from_covariance(cls, mean, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(mean, spd.cholesky(np.linalg.inv(cov)))

    def value_and_grad(self, psi):
        d = self._check(psi) - self.mean
        g = self.precision.apply(d)
        return 0.5 * float(d @ g), g

    def hess(self, psi):
        return self.precision.matrix()

    def map_hessian(self, psi_map):
        return self.precision


class LogNormalTarget(Target):
    """``J = 0.5 ||Lambda^{1/2}(log(psi - c) - m_l)||^2 + sum log(psi - c)``.

    The log term is the density's Jacobian, so the minimizer is the mode
    ``exp(m_l - Sigma_l 1) + c`` of the (shifted) log-normal density.
    """

    def __init__(self, m_l, Lambda, shift=0.0):
        self.m_l = np.atleast_1d(np.asarray(m_l, dtype=float))
        self.Lambda = np.atleast_2d(np.asarray(Lambda, dtype=float))
        self.shift = float(shift)
        self.dim = self.m_l.size
        if self.Lambda.shape != (self.dim, self.dim):
            raise DimensionMismatch("m_l and Lambda sizes differ")

    @classmethod
    def from_covariance(cls, m_l, Sigma_l, shift=0.0):
        Sigma_l = np.atleast_2d(np.asarray(Sigma_l, dtype=float))
        return cls(m_l, np.linalg.inv(Sigma_l), shift)

    @property
    def Sigma_l(self):
        return np.linalg.inv(self.Lambda)

    def map_point(self):
        return np.exp(self.m_l - self.Sigma_l @ np.ones(self.dim)) + self.shift

    def _x(self, psi, strict):
        x = self._check(psi) - self.shift
        bad = np.flatnonzero(~(x > 0))
        if bad.size:
            if strict:
                raise OutOfSupport(int(bad[0]))
            return None
        return x

    def value_and_grad(self, psi):
        x = self._x(psi, strict=False)
        if x is None:
            return np.inf, None
        lx = np.log(x)
        Lr = self.Lambda @ (lx - self.m_l)
        J = 0.5 * float((lx - self.m_l) @ Lr) + float(np.sum(lx))
        return J, (Lr + 1.0) / x

    def grad(self, psi):
        x = self._x(psi, strict=True)
        return (self.Lambda @ (np.log(x) - self.m_l) + 1.0) / x

    def hess(self, psi):
        x = self._x(psi, strict=True)
        Lr = self.Lambda @ (np.log(x) - self.m_l)
        H = self.Lambda / np.outer(x, x)
        H[np.diag_indices(self.dim)] -= (Lr + 1.0) / x**2
        return H

    def J_grad_hess(self, psi):
        self._x(psi, strict=True)
        J, g = self.value_and_grad(psi)
        return J, g, self.hess(psi)


class PosteriorTarget(Target):
    """Data misfit of the Darcy model plus the Gaussian field prior."""

    def __init__(self, prior, problem, plan, y, sigma_eps, hessian_threshold=1e-2):
        self.prior = prior
        self.problem = problem
        self.plan = plan
        self.y = np.asarray(y, dtype=float)
        self.sigma_eps = float(sigma_eps)
        self.hessian_threshold = hessian_threshold
        self.dim = prior.dim

    def terms(self, psi):
        """``(misfit, prior_cost)`` at ``psi``."""
        psi = self._check(psi)
        return fwd.misfit(self.problem, psi, self.plan, self.y, self.sigma_eps), self.prior.cost(psi)

    def value(self, psi):
        try:
            return sum(self.terms(psi))
        except ForwardSolveFailure:
            return np.inf

    def value_and_grad(self, psi):
        """``(inf, None)`` when the forward solve breaks down, e.g. on a divergent HMC trajectory."""
        psi = self._check(psi)
        try:
            sol = fwd.solve_forward(self.problem, psi)
        except ForwardSolveFailure:
            return np.inf, None
        r = fwd.observe(sol, self.plan) - self.y
        s2 = self.sigma_eps**2
        J = 0.5 * float(r @ r) / s2 + self.prior.cost(psi)
        g = fwd.adjoint_sensitivity(sol, self.plan.matrix.T @ (r / s2)) + self.prior.grad(psi)
        return J, g

    def hess(self, psi):
        raise HessianUnavailable("no analytic Hessian for the PDE posterior; use gauss_newton or fd_of_grad")

    def misfit_hessian(self, psi):
        return fwd.misfit_hessian_gn(self.problem, self._check(psi), self.plan, self.sigma_eps)

    def map_hessian(self, psi_map):
        return spd.low_rank_hessian(self.misfit_hessian(psi_map), self.prior.precision, self.hessian_threshold)


def gaussian_logdensity_grad(t: GaussianTarget, psi):
    return t.value_and_grad(psi)


def lognormal_J_grad_hess(t: LogNormalTarget, psi):
    return t.J_grad_hess(psi)


def posterior_J_grad(t: PosteriorTarget, psi):
    return t.value_and_grad(psi)


def fd_hessian(target, psi, h=1e-5):
    """Central differences of the gradient, one column per coordinate, symmetrized."""
    psi = np.asarray(psi, dtype=float)
    H = np.empty((target.dim, target.dim))
    for j in range(target.dim):
        e = np.zeros(target.dim)
        e[j] = h
        H[:, j] = (target.grad(psi + e) - target.grad(psi - e)) / (2 * h)
    return 0.5 * (H + H.T)


def hessian_at(target, psi, mode="analytic"):
    if mode == "analytic":
        H = target.hess(psi)
    elif mode == "fd_of_grad":
        return fd_hessian(target, psi)
    elif mode == "gauss_newton":
        if not isinstance(target, PosteriorTarget):
            raise ModeUnsupported(f"gauss_newton needs a PosteriorTarget, got {type(target).__name__}")
        H = target.misfit_hessian(psi) + target.prior.R
    else:
        raise ModeUnsupported(f"unknown Hessian mode {mode!r}")
    return 0.5 * (H + H.T)
