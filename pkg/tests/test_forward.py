import dataclasses

import numpy as np
import pytest

from hessmc import forward as fwd
from hessmc.config import BlobConfig, load
from hessmc.errors import ForwardSolveFailure
from hessmc.experiment import Experiment, blob_field
from hessmc.map_solver import bfgs_minimize
from hessmc.mesh import Mesh2D
from hessmc.targets import PosteriorTarget, hessian_at


def test_observe_at_node_returns_nodal_value(small_mesh, rng):
    p = rng.standard_normal(small_mesh.n_nodes)
    idx = [0, 7, small_mesh.n_nodes - 1]
    plan = fwd.ObservationPlan(small_mesh, small_mesh.coords[idx])
    np.testing.assert_allclose(fwd.observe(p, plan), p[idx], rtol=0, atol=1e-14)


def test_observe_constant_field(small_mesh, small_plan):
    np.testing.assert_allclose(fwd.observe(np.full(small_mesh.n_nodes, 3.25), small_plan), 3.25, rtol=1e-14)


def test_observe_cell_center_of_bilinear_field():
    mesh = Mesh2D(1, 1, 1.0, 1.0)
    # nodes (0,0),(1,0),(0,1),(1,1)
    p = np.array([0.0, 1.0, 1.0, 2.0])
    plan = fwd.ObservationPlan(mesh, np.array([[0.5, 0.5]]))
    assert fwd.observe(p, plan)[0] == pytest.approx(1.0, abs=1e-15)


def test_observe_outside_domain_raises(small_mesh):
    from hessmc.errors import PointOutsideDomain

    with pytest.raises(PointOutsideDomain):
        fwd.ObservationPlan(small_mesh, np.array([[0.5, 0.5], [2.5, 0.1]])).matrix


def test_steady_trivial_solution(small_mesh):
    prob = fwd.DarcyProblem(small_mesh, gravity=(0.0, 0.0), p_top=2.5e6, initial=2.5e6, n_t=7)
    sol = fwd.solve_forward(prob, np.random.default_rng(3).normal(33, 1, small_mesh.n_nodes))
    np.testing.assert_allclose(sol.pressure, 2.5e6, rtol=1e-10)


def test_discrete_mass_balance(small_problem, small_mesh):
    theta = 33 + np.random.default_rng(4).normal(0, 0.5, small_mesh.n_nodes)
    sol = fwd.solve_forward(small_problem, theta)
    prob = small_problem
    K, G = prob.operators(theta)
    dt, c = prob.dt, prob.storage
    N = prob.mass
    stored = c * N.sum(axis=0) @ (sol.pressure[-1] - sol.pressure[0])
    injected = prob.horizon * sum(w.rate for w in prob.wells)
    # reaction at the Dirichlet nodes is the outflow through the top edge
    outflow = 0.0
    d = prob.dirichlet
    for k in range(1, prob.n_t + 1):
        res = c / dt * N @ (sol.pressure[k] - sol.pressure[k - 1]) + K @ sol.pressure[k] + G - prob.source
        outflow -= dt * res[d].sum()
    assert stored == pytest.approx(injected - outflow, rel=1e-8)


def test_self_convergence_on_reference_configuration():
    exp = Experiment(load("darcy-invert"))
    coarse = fwd.observe(fwd.solve_forward(exp.problem, exp.theta_true), exp.plan)
    m2 = Mesh2D(2 * exp.mesh.nx, 2 * exp.mesh.ny, exp.mesh.Lx, exp.mesh.Ly)
    fine_prob = dataclasses.replace(exp.problem, mesh=m2, n_t=2 * exp.problem.n_t)
    theta2 = exp.cfg.prior.mean + blob_field(m2.coords, exp.cfg.forward.truth)
    fine = fwd.observe(fwd.solve_forward(fine_prob, theta2), fwd.ObservationPlan(m2, exp.plan.points))
    assert np.max(np.abs(fine - coarse) / np.abs(coarse)) < 0.05


def test_synth_data_noiseless_and_deterministic(small_problem, small_plan, small_mesh):
    theta = np.full(small_mesh.n_nodes, 33.0)
    clean = fwd.observe(fwd.solve_forward(small_problem, theta), small_plan)
    np.testing.assert_array_equal(fwd.synth_data(small_problem, theta, small_plan, 0.0, 5), clean)
    a = fwd.synth_data(small_problem, theta, small_plan, 1e6, 11)
    b = fwd.synth_data(small_problem, theta, small_plan, 1e6, 11)
    assert a.tobytes() == b.tobytes()


def test_synth_data_noise_level(small_problem, small_plan, small_mesh):
    theta = np.full(small_mesh.n_nodes, 33.0)
    clean = fwd.observe(fwd.solve_forward(small_problem, theta), small_plan)
    sigma = 2e5
    resid = np.concatenate([fwd.synth_data(small_problem, theta, small_plan, sigma, s) - clean for s in range(1000)])
    assert np.std(resid) == pytest.approx(sigma, rel=0.1)


def test_zero_residual_gives_zero_gradient(small_problem, small_plan, small_mesh):
    theta = 33 + np.random.default_rng(6).normal(0, 0.5, small_mesh.n_nodes)
    y = fwd.observe(fwd.solve_forward(small_problem, theta), small_plan)
    g = fwd.gradient_adjoint(small_problem, theta, small_plan, y, 1e6)
    assert np.all(g == 0)


def _mirror_index(mesh):
    i, j = np.meshgrid(np.arange(mesh.nx + 1), np.arange(mesh.ny + 1))
    return (mesh.nx - i + j * (mesh.nx + 1)).ravel()


def test_gradient_mirror_symmetry(small_problem, small_mesh, rng):
    mirror = _mirror_index(small_mesh)
    theta = 33 + rng.normal(0, 0.4, small_mesh.n_nodes)
    theta = 0.5 * (theta + theta[mirror])
    pts = np.array([[0.3, 0.2], [0.7, 0.55], [0.95, 0.4]])
    pts = np.vstack([pts, np.column_stack([small_mesh.Lx - pts[:, 0], pts[:, 1]])])
    plan = fwd.ObservationPlan(small_mesh, pts)
    clean = fwd.observe(fwd.solve_forward(small_problem, theta), plan)
    y = clean + np.tile([1e6, -2e6, 5e5], 2)
    g = fwd.gradient_adjoint(small_problem, theta, plan, y, 1e6)
    np.testing.assert_allclose(g[mirror], g, rtol=0, atol=1e-10 * np.max(np.abs(g)))


@pytest.fixture(scope="module")
def posterior_6x4(small_prior, small_problem, small_plan, small_mesh):
    truth = 33 + blob_field(small_mesh.coords, [BlobConfig(0.55, 0.4, 0.6, 0.2, -1.5)])
    y = fwd.synth_data(small_problem, truth, small_plan, 1e6, 0)
    return PosteriorTarget(small_prior, small_problem, small_plan, y, 1e6)


def test_adjoint_gradient_vs_finite_differences(posterior_6x4, small_mesh):
    rng = np.random.default_rng(7)
    for _ in range(5):
        theta = 33 + rng.normal(0, 0.3, small_mesh.n_nodes)
        v = rng.standard_normal(small_mesh.n_nodes)
        g = posterior_6x4.grad(theta)
        h = 1e-4
        fd = (posterior_6x4.value(theta + h * v) - posterior_6x4.value(theta - h * v)) / (2 * h)
        assert fd == pytest.approx(g @ v, rel=1e-4)


def test_adjoint_finite_difference_error_is_second_order(posterior_6x4, small_mesh):
    rng = np.random.default_rng(8)
    theta = 33 + rng.normal(0, 0.3, small_mesh.n_nodes)
    v = rng.standard_normal(small_mesh.n_nodes)
    dd = posterior_6x4.grad(theta) @ v

    def err(h):
        fd = (posterior_6x4.value(theta + h * v) - posterior_6x4.value(theta - h * v)) / (2 * h)
        return abs(fd - dd) / abs(dd)

    e = [err(h) for h in (1e-2, 1e-3, 1e-4)]
    # a factor 100 per decade is O(h^2); 50 leaves room for the roundoff tail
    assert e[0] / e[1] > 50 and e[1] / e[2] > 50
    # below 1e-4 the truncation error is under the roundoff floor of J
    assert err(1e-5) < 1e-8


def test_gauss_newton_hessian_psd_and_rank(posterior_6x4, small_mesh):
    theta = 33 + np.random.default_rng(9).normal(0, 0.3, small_mesh.n_nodes)
    H = posterior_6x4.misfit_hessian(theta)
    lam = np.linalg.eigvalsh(H)
    assert lam[0] >= -1e-10 * np.abs(lam).max()
    assert np.linalg.matrix_rank(H, tol=1e-10 * lam.max()) <= posterior_6x4.plan.n_obs
    np.testing.assert_array_equal(H, H.T)


def test_gauss_newton_matches_fd_hessian_at_map(posterior_6x4, small_prior):
    res = bfgs_minimize(posterior_6x4, small_prior.mean.copy())
    assert res.converged
    Hgn = hessian_at(posterior_6x4, res.psi_map, "gauss_newton")
    Hfd = hessian_at(posterior_6x4, res.psi_map, "fd_of_grad")
    assert np.linalg.norm(Hgn - Hfd, 2) <= 0.05 * np.linalg.norm(Hfd, 2)
    # the MAP Hessian is SPD
    assert np.linalg.eigvalsh(Hgn)[0] > 0


def test_overflowing_conductivity_is_a_forward_failure(small_problem, small_mesh):
    theta = np.full(small_mesh.n_nodes, 33.0)
    theta[3] = -1e4
    with pytest.raises(ForwardSolveFailure):
        fwd.solve_forward(small_problem, theta)


def test_problem_rejects_bad_settings(small_mesh):
    with pytest.raises(ValueError):
        fwd.DarcyProblem(small_mesh, n_t=0)
    with pytest.raises(ValueError):
        fwd.DarcyProblem(small_mesh, dirichlet_edges=())
