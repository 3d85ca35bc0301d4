"""Transient Darcy flow with injection wells, pointwise pressure observations
and discrete adjoint sensitivities with respect to ``theta = -log(kappa)``.

Model, on the physical domain (mesh coordinates times ``length_unit``)::

    c dp/dt - div( exp(-theta)/mu (grad p + rho_f g) ) = sum_w rate_w delta(x - x_w)

with ``c = porosity / K_f``, fixed pressure on the top edge and no flux on the
other edges. Space: bilinear elements; time: implicit Euler with ``n_t`` equal
steps. Because ``theta`` does not depend on time every solve factors a single
SPD matrix. The gradient is the exact adjoint of this discrete scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import ForwardSolveFailure
from .mesh import Mesh2D
from .prior import assemble_mass


@dataclass(frozen=True)
class Well:
    x: float
    y: float
    rate: float  # m^2/s per unit thickness


@dataclass(frozen=True, eq=False)
class DarcyProblem:
    mesh: Mesh2D
    length_unit: float = 1.0  # metres per mesh unit
    K_f: float = 2.27e9
    rho_f: float = 1000.0
    mu_visc: float = 1e-3
    porosity: float = 0.2
    # hydrostatic equilibrium is grad p = -rho_f g; the default makes p grow with depth
    gravity: tuple = (0.0, 9.81)
    p_top: float = 500e6
    wells: tuple = ()
    horizon: float = 10 * 86400.0
    n_t: int = 20
    initial: object = "hydrostatic"  # or a constant pressure
    dirichlet_edges: tuple = ("top",)

    def __post_init__(self):
        if self.n_t < 1:
            raise ValueError("n_t must be >= 1")
        if not self.porosity / self.K_f > 0:
            raise ValueError("storage coefficient must be positive")
        if not self.dirichlet_edges:
            raise ValueError("at least one Dirichlet edge is required")

    @property
    def storage(self):
        return self.porosity / self.K_f

    @property
    def dt(self):
        return self.horizon / self.n_t

    @property
    def n(self):
        return self.mesh.n_nodes

    @cached_property
    def phys(self):
        m = self.mesh
        return Mesh2D(m.nx, m.ny, m.Lx * self.length_unit, m.Ly * self.length_unit)

    @cached_property
    def dirichlet(self):
        nodes = np.unique(np.concatenate([self.mesh.boundary[e] for e in self.dirichlet_edges]))
        return nodes

    @cached_property
    def free(self):
        return np.setdiff1d(np.arange(self.n), self.dirichlet)

    @cached_property
    def mass(self):
        return assemble_mass(self.phys)

    @cached_property
    def rho_g(self):
        return self.rho_f * np.asarray(self.gravity, dtype=float)

    @cached_property
    def source(self):
        F = np.zeros(self.n)
        if self.wells:
            pts = [(w.x, w.y) for w in self.wells]
            W = self.mesh.interpolation_matrix(pts)
            F = W.T @ np.array([w.rate for w in self.wells])
        return F

    @cached_property
    def p_dirichlet(self):
        return self.initial_pressure[self.dirichlet]

    @cached_property
    def initial_pressure(self):
        if isinstance(self.initial, str):
            if self.initial != "hydrostatic":
                raise ValueError(f"unknown initial condition {self.initial!r}")
            xy = self.phys.coords
            top = np.array([0.0, self.phys.Ly])
            return self.p_top - (xy - top) @ self.rho_g
        p0 = np.full(self.n, float(self.initial))
        p0[self.mesh.boundary["top"]] = self.p_top
        return p0

    def kappa_qp(self, theta):
        """``exp(-theta)/mu`` at quadrature points, ``(n_cells, 4)``."""
        return np.exp(-self.mesh.cell_values(theta)) / self.mu_visc

    def operators(self, theta):
        """Conductivity matrix ``K`` and gravity load ``G`` for a log-permeability field."""
        ph = self.phys
        _, dphi, w = ph.quadrature
        kq = self.kappa_qp(theta)
        Ke = np.einsum("cq,q,qai,qbi->cab", kq, w, dphi, dphi)
        Ge = np.einsum("cq,q,qai,i->ca", kq, w, dphi, self.rho_g)
        return ph.assemble(Ke), ph.scatter(Ge)


@dataclass(frozen=True, eq=False)
class ForwardSolution:
    """Pressure at every time level plus what the adjoint needs."""

    problem: DarcyProblem
    theta: np.ndarray
    pressure: np.ndarray  # (n_t + 1, n)
    factor: tuple = field(repr=False)

    @property
    def final(self):
        return self.pressure[-1]


@dataclass(frozen=True, eq=False)
class ObservationPlan:
    """Pointwise observations of the final-time pressure, bilinearly interpolated."""

    mesh: Mesh2D
    points: np.ndarray

    @cached_property
    def matrix(self):
        return self.mesh.interpolation_matrix(self.points)

    @property
    def n_obs(self):
        return len(self.points)

    def subset(self, k):
        return ObservationPlan(self.mesh, np.asarray(self.points)[:k])


def solve_forward(prob: DarcyProblem, theta):
    theta = np.asarray(theta, dtype=float)
    with np.errstate(over="ignore"):
        K, G = prob.operators(theta)
    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(G))):
        raise ForwardSolveFailure(0, "conductivity overflow")
    f, d = prob.free, prob.dirichlet
    B = (prob.storage / prob.dt) * prob.mass[np.ix_(f, f)]
    S = B + K[np.ix_(f, f)]
    b = prob.source[f] - K[np.ix_(f, d)] @ prob.p_dirichlet - G[f]
    try:
        cf = linalg.cho_factor(S, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ForwardSolveFailure(0, f"forward system not SPD: {exc}") from exc
    P = np.empty((prob.n_t + 1, prob.n))
    P[0] = prob.initial_pressure
    P[:, d] = prob.p_dirichlet
    u = P[0, f]
    for step in range(1, prob.n_t + 1):
        u = linalg.cho_solve(cf, B @ u + b, check_finite=False)
        if not np.all(np.isfinite(u)):
            raise ForwardSolveFailure(step)
        P[step, f] = u
    return ForwardSolution(prob, theta, P, (cf, B))


def observe(traj, plan: ObservationPlan):
    p = traj.final if isinstance(traj, ForwardSolution) else np.asarray(traj)
    if p.ndim == 2:
        p = p[-1]
    return plan.matrix @ p


def synth_data(prob, theta_true, plan, sigma_eps, seed):
    clean = observe(solve_forward(prob, theta_true), plan)
    rng = np.random.default_rng(seed)
    return clean + sigma_eps * rng.standard_normal(clean.shape)


def adjoint_sensitivity(sol: ForwardSolution, load):
    """Gradient w.r.t. theta of ``load^T p(T)`` (``load`` on all nodes; ``(n,)`` or ``(n, k)``).

    One backward sweep per load column, all columns at once.
    """
    prob = sol.problem
    mesh = prob.phys
    f = prob.free
    (cf, B) = sol.factor
    load = np.asarray(load, dtype=float)
    vec = load.ndim == 1
    L = load[f][:, None] if vec else load[f]
    nt = prob.n_t
    lam = np.zeros((nt + 1, prob.n, L.shape[1]))
    z = linalg.cho_solve(cf, -L, check_finite=False)
    lam[nt][f] = z
    for step in range(nt - 1, 0, -1):
        z = linalg.cho_solve(cf, B @ z, check_finite=False)
        lam[step][f] = z
    # d/dtheta_j of sum_n lam^n . (K(theta) p^n + G(theta)); d kappa_q / d theta_j = -kappa_q phi_j(q)
    phi, _, w = mesh.quadrature
    gp = mesh.cell_gradients(sol.pressure[1:]) + prob.rho_g  # (nt, c, q, 2)
    gl = mesh.cell_gradients(np.moveaxis(lam[1:], -1, 1))  # (nt, k, c, q, 2)
    flux = np.einsum("tcqd,tkcqd->cqk", gp, gl)
    kq = prob.kappa_qp(sol.theta)
    elem = -np.einsum("cq,q,qa,cqk->cak", kq, w, phi, flux)
    out = np.zeros((prob.n, L.shape[1]))
    np.add.at(out, prob.mesh.cells.ravel(), elem.reshape(-1, L.shape[1]))
    return out[:, 0] if vec else out


def misfit(prob, theta, plan, y, sigma_eps, sol=None):
    sol = sol or solve_forward(prob, theta)
    r = observe(sol, plan) - y
    return 0.5 * float(r @ r) / sigma_eps**2


def gradient_adjoint(prob, theta, plan, y, sigma_eps, sol=None):
    """Gradient of ``0.5 ||obs(theta) - y||^2 / sigma^2`` by one forward and one adjoint sweep."""
    sol = sol or solve_forward(prob, theta)
    r = observe(sol, plan) - y
    return adjoint_sensitivity(sol, plan.matrix.T @ (r / sigma_eps**2))


def observation_jacobian(prob, theta, plan, sol=None):
    """``d obs / d theta`` (``n_obs x n``), one adjoint per observation."""
    sol = sol or solve_forward(prob, theta)
    return adjoint_sensitivity(sol, plan.matrix.T).T


def misfit_hessian_gn(prob, theta, plan, sigma_eps, sol=None):
    J = observation_jacobian(prob, theta, plan, sol)
    H = J.T @ J / sigma_eps**2
    return 0.5 * (H + H.T)
