"""Dense symmetric positive-definite factorizations.

Every factor represents a matrix ``M`` through a square root ``S`` with
``M = S @ S.T``. Samplers only ever need the five actions below, so the
factor classes never expose ``S`` itself:

* ``apply(v)``                 ->  M v
* ``solve(v)``                 ->  M^{-1} v
* ``apply_sqrt(v)``            ->  S v        (draws from N(0, M))
* ``apply_sqrt_transpose(v)``  ->  S^T v
* ``solve_sqrt(v)``            ->  S^{-1} v   (whitening)
* ``solve_sqrt_transpose(v)``  ->  S^{-T} v   (draws from N(0, M^{-1}))

Vectors may also be passed as ``(n, k)`` arrays of column vectors.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .errors import ConvergenceFailure, NotPositiveDefinite

SYMMETRY_RTOL = 1e-12


def symmetrize(M, rtol=SYMMETRY_RTOL):
    """Return ``(M + M.T) / 2`` after checking that ``M`` is symmetric to ``rtol``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if rtol is not None and scale > 0:
        asym = np.max(np.abs(M - M.T))
        if asym > rtol * scale:
            raise ValueError(f"matrix not symmetric: max|M - M^T| = {asym:.3e}")
    return 0.5 * (M + M.T)


class SpdFactor:
    """Common interface of the factor classes below."""

    kind = None

    @property
    def n(self):
        raise NotImplementedError

    def apply(self, v):
        return self.apply_sqrt(self.apply_sqrt_transpose(v))

    def solve(self, v):
        return self.solve_sqrt_transpose(self.solve_sqrt(v))

    def apply_sqrt(self, v):
        raise NotImplementedError

    def apply_sqrt_transpose(self, v):
        raise NotImplementedError

    def solve_sqrt(self, v):
        raise NotImplementedError

    def solve_sqrt_transpose(self, v):
        raise NotImplementedError

    @property
    def logdet(self):
        raise NotImplementedError

    def quad(self, v):
        """``v^T M v``."""
        w = self.apply_sqrt_transpose(v)
        return float(w @ w)

    def inv_quad(self, v):
        """``v^T M^{-1} v``, i.e. ``||M^{-1/2} v||^2``."""
        w = self.solve_sqrt(v)
        return float(w @ w)

    def matrix(self):
        return self.apply(np.eye(self.n))

    def inverse(self):
        return self.solve(np.eye(self.n))

    def sample(self, rng):
        """Draw from N(0, M)."""
        return self.apply_sqrt(rng.standard_normal(self.n))

    def sample_inverse(self, rng):
        """Draw from N(0, M^{-1})."""
        return self.solve_sqrt_transpose(rng.standard_normal(self.n))


class IdentityFactor(SpdFactor):
    kind = "identity"

    def __init__(self, n):
        self._n = int(n)

    @property
    def n(self):
        return self._n

    def _copy(self, v):
        return np.array(v, dtype=float)

    apply = solve = apply_sqrt = apply_sqrt_transpose = _copy
    solve_sqrt = solve_sqrt_transpose = _copy

    @property
    def logdet(self):
        return 0.0


class CholeskyFactor(SpdFactor):
    """``M = L L^T`` with ``L`` lower triangular."""

    kind = "cholesky"

    def __init__(self, L):
        self.L = np.asarray(L, dtype=float)

    @property
    def n(self):
        return self.L.shape[0]

    def apply_sqrt(self, v):
        return self.L @ v

    def apply_sqrt_transpose(self, v):
        return self.L.T @ v

    def solve_sqrt(self, v):
        return linalg.solve_triangular(self.L, v, lower=True, check_finite=False)

    def solve_sqrt_transpose(self, v):
        return linalg.solve_triangular(self.L, v, lower=True, trans="T", check_finite=False)

    def solve(self, v):
        return linalg.cho_solve((self.L, True), v, check_finite=False)

    @property
    def logdet(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))


class EigenFactor(SpdFactor):
    """``M = V diag(values) V^T`` with the symmetric square root ``V diag(sqrt(values)) V^T``."""

    kind = "eigen"

    def __init__(self, values, vectors):
        values = np.asarray(values, dtype=float)
        if np.any(values <= 0):
            raise NotPositiveDefinite(int(np.argmin(values)), "eigen factor needs positive eigenvalues")
        self.values = values
        self.vectors = np.asarray(vectors, dtype=float)
        self._sqrt = np.sqrt(values)

    @property
    def n(self):
        return self.vectors.shape[0]

    def _scaled(self, v, scale):
        V = self.vectors
        c = V.T @ v
        if c.ndim == 1:
            return V @ (scale * c)
        return V @ (scale[:, None] * c)

    def apply(self, v):
        return self._scaled(v, self.values)

    def solve(self, v):
        return self._scaled(v, 1.0 / self.values)

    def apply_sqrt(self, v):
        return self._scaled(v, self._sqrt)

    apply_sqrt_transpose = apply_sqrt

    def solve_sqrt(self, v):
        return self._scaled(v, 1.0 / self._sqrt)

    solve_sqrt_transpose = solve_sqrt

    @property
    def logdet(self):
        return float(np.sum(np.log(self.values)))


class LowRankHessian(SpdFactor):
    """Prior precision plus a low-rank data-informed update.

    With the prior precision factored as ``R = S S^T`` the represented matrix is

        H = S (I + V D V^T) S^T

    where ``V`` (n x r) has orthonormal columns and ``D`` holds the retained
    eigenvalues of the prior-preconditioned misfit Hessian ``S^{-1} H_mis S^{-T}``.
    Inverse and square roots follow from the orthogonality of ``V``.
    """

    kind = "lowrank"

    def __init__(self, prior_precision, V, D):
        self.prior = prior_precision
        self.V = np.asarray(V, dtype=float).reshape(prior_precision.n, -1)
        self.D = np.asarray(D, dtype=float).reshape(-1)
        # (I + V D V^T)^p = I + V ((1 + D)^p - 1) V^T
        self._half = np.sqrt(1.0 + self.D) - 1.0
        self._mhalf = 1.0 / np.sqrt(1.0 + self.D) - 1.0

    @property
    def n(self):
        return self.prior.n

    @property
    def rank(self):
        return self.D.size

    def _inner(self, v, coef):
        c = self.V.T @ v
        if c.ndim == 1:
            return v + self.V @ (coef * c)
        return v + self.V @ (coef[:, None] * c)

    def apply_sqrt(self, v):
        return self.prior.apply_sqrt(self._inner(v, self._half))

    def apply_sqrt_transpose(self, v):
        return self._inner(self.prior.apply_sqrt_transpose(v), self._half)

    def solve_sqrt(self, v):
        return self._inner(self.prior.solve_sqrt(v), self._mhalf)

    def solve_sqrt_transpose(self, v):
        return self.prior.solve_sqrt_transpose(self._inner(v, self._mhalf))

    def apply(self, v):
        return self.prior.apply_sqrt(self._inner(self.prior.apply_sqrt_transpose(v), self.D))

    def solve(self, v):
        # Woodbury on the orthonormal modes: (I + V D V^T)^{-1} = I - V D/(1+D) V^T
        w = self.prior.solve_sqrt(v)
        return self.prior.solve_sqrt_transpose(self._inner(w, -self.D / (1.0 + self.D)))

    @property
    def logdet(self):
        return self.prior.logdet + float(np.sum(np.log1p(self.D)))


def cholesky(M, check_symmetry=True):
    """Cholesky factor of a dense SPD matrix.

    Raises :class:`NotPositiveDefinite` carrying the (0-based) failing pivot.
    """
    M = symmetrize(M, SYMMETRY_RTOL if check_symmetry else None)
    L, info = lapack.dpotrf(M, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return CholeskyFactor(L)


def eigendecompose_sym(M, check_symmetry=True):
    """Eigenvalues in descending order and matching orthonormal eigenvectors (columns)."""
    M = symmetrize(M, SYMMETRY_RTOL if check_symmetry else None)
    try:
        values, vectors = linalg.eigh(M, check_finite=True)
    except (np.linalg.LinAlgError, linalg.LinAlgError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return values[::-1].copy(), vectors[:, ::-1].copy()


def eigen_factor(M, floor=None, check_symmetry=True):
    """Eigen factor of ``M``; with ``floor`` set, eigenvalues below ``floor * max|lambda|`` are raised to it."""
    values, vectors = eigendecompose_sym(M, check_symmetry)
    if floor is not None:
        top = np.max(np.abs(values))
        if top == 0:
            raise NotPositiveDefinite(0, "zero matrix cannot be floored")
        values = np.maximum(values, floor * top)
    return EigenFactor(values, vectors)


def factorize(M, kind="cholesky", check_symmetry=True):
    if kind == "cholesky":
        return cholesky(M, check_symmetry)
    if kind == "eigen":
        return eigen_factor(M, check_symmetry=check_symmetry)
    raise ValueError(f"unknown factor kind {kind!r}")


def low_rank_hessian(H_misfit, prior_precision, threshold=1e-2, relative=False):
    """Low-rank regularized posterior Hessian.

    Eigen-decomposes the prior-preconditioned misfit Hessian
    ``S^{-1} H_misfit S^{-T}`` (``R = S S^T``) and keeps the modes whose
    eigenvalue exceeds ``threshold`` (times the largest eigenvalue when
    ``relative``). The absolute default compares each mode with the unit
    contribution of the prior in these coordinates. Negative and small modes
    are dropped, so the result is SPD even for an indefinite ``H_misfit``;
    with nothing retained it equals the prior precision.
    """
    H = np.asarray(H_misfit, dtype=float)
    H = 0.5 * (H + H.T)
    Sinv = prior_precision.solve_sqrt
    G = Sinv(Sinv(H).T)  # S^{-1} H S^{-T}, H symmetric
    values, vectors = eigendecompose_sym(G, check_symmetry=False)
    cut = threshold * max(values[0], 0.0) if relative and values.size else threshold
    keep = values > cut
    return LowRankHessian(prior_precision, vectors[:, keep], values[keep])
