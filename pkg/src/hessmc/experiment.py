"""Turn an :class:`ExperimentConfig` into concrete objects: targets, data, MAP point, MAP Hessian."""

from __future__ import annotations

import csv
from functools import cached_property

import numpy as np

from . import forward as fwd
from . import spd
from .config import ExperimentConfig
from .errors import ConfigError, DimensionMismatch
from .map_solver import bfgs_minimize
from .mesh import Mesh2D
from .prior import AnisotropyTensor, build_prior
from .targets import GaussianTarget, LogNormalTarget, PosteriorTarget, hessian_at


def random_rotation(n, rng):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def spectrum_covariance(n, top, condition, rng):
    """Randomly rotated covariance with log-spaced eigenvalues from ``top`` to ``top/condition``."""
    lam = top * np.logspace(0.0, -np.log10(condition), n) if n > 1 else np.array([top])
    Q = random_rotation(n, rng)
    C = (Q * lam) @ Q.T
    return 0.5 * (C + C.T)


def exponential_covariance(n, variance, length):
    if length <= 0:
        return variance * np.eye(n)
    i = np.arange(n)
    return variance * np.exp(-np.abs(i[:, None] - i[None, :]) / length)


def blob_field(coords, blobs):
    out = np.zeros(len(coords))
    for b in blobs:
        r2 = ((coords[:, 0] - b.x) / b.rx) ** 2 + ((coords[:, 1] - b.y) / b.ry) ** 2
        out += b.amp * np.exp(-0.5 * r2)
    return out


def tune_dt(target, h_map, method, start, goal=0.9, pilot=1000, seed=100, bounds=(1e-4, 10.0), iters=14):
    """Bisect log(dt) until a ``pilot``-step run accepts at about ``goal``.

    Acceptance falls with dt for the leapfrog samplers, which is all the
    bisection relies on. Pilot runs share one seed so the map dt -> rate is
    deterministic.
    """
    from .samplers import SamplerConfig, run_sampler

    lo, hi = np.log(bounds[0]), np.log(bounds[1])
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        cfg = SamplerConfig(method, dt=float(np.exp(mid)), n_samples=pilot, seed=seed)
        rate = run_sampler(target, start, cfg, h_map=h_map).acceptance_rate
        lo, hi = (mid, hi) if rate > goal else (lo, mid)
    return float(np.exp(0.5 * (lo + hi)))


class Experiment:
    """Lazily built components of one configured experiment."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg

    # -- field problem -------------------------------------------------
    @cached_property
    def mesh(self):
        m = self.cfg.mesh
        return Mesh2D(m.nx, m.ny, m.Lx, m.Ly)

    @cached_property
    def prior(self):
        p = self.cfg.prior
        return build_prior(self.mesh, p.gamma, p.delta, AnisotropyTensor(p.a, p.b, p.beta), p.mean, p.factor)

    @cached_property
    def problem(self):
        f = self.cfg.forward
        return fwd.DarcyProblem(
            self.mesh,
            length_unit=f.length_unit,
            K_f=f.K_f,
            rho_f=f.rho_f,
            mu_visc=f.mu,
            porosity=f.porosity,
            gravity=tuple(f.gravity),
            p_top=f.p_top,
            wells=tuple(fwd.Well(w.x, w.y, w.rate) for w in f.wells),
            horizon=f.horizon,
            n_t=f.n_t,
        )

    @cached_property
    def base_points(self):
        """All candidate observation points in their (possibly shuffled) order."""
        f = self.cfg.forward
        if f.obs_points is not None:
            return np.asarray(f.obs_points, dtype=float).reshape(-1, 2)
        nx, ny = f.obs_grid
        x0, x1, y0, y1 = f.obs_box
        xs, ys = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)
        pts = np.array([(x, y) for y in ys for x in xs])
        if f.obs_order_seed is not None:
            pts = pts[np.random.default_rng(f.obs_order_seed).permutation(len(pts))]
        return pts

    @cached_property
    def base_plan(self):
        return fwd.ObservationPlan(self.mesh, self.base_points)

    @cached_property
    def plan(self):
        f = self.cfg.forward
        if f.data_file:
            return fwd.ObservationPlan(self.mesh, read_observations(f.data_file)[0])
        n = len(self.base_points) if f.obs_points is not None else f.n_obs
        return self.base_plan.subset(n)

    @property
    def sigma(self):
        f = self.cfg.forward
        return f.sigma_eps * f.noise_scale

    @cached_property
    def theta_true(self):
        return self.prior.mean + blob_field(self.mesh.coords, self.cfg.forward.truth)

    def generate_data(self):
        """Noisy final-time pressures at ``plan`` points.

        Noise is drawn once for every base point and then truncated, so cases
        that differ only in ``n_obs`` or ``noise_scale`` share their noise.
        """
        clean = fwd.observe(fwd.solve_forward(self.problem, self.theta_true), self.base_plan)
        eta = np.random.default_rng(self.cfg.forward.data_seed).standard_normal(clean.shape)
        y = clean if self.cfg.forward.noiseless else clean + self.sigma * eta
        return y[: self.plan.n_obs]

    @cached_property
    def data(self):
        f = self.cfg.forward
        if f.data_file:
            return read_observations(f.data_file)[2]
        return self.generate_data()

    # -- targets ---------------------------------------------------------
    def _analytic_covariance(self):
        t = self.cfg.target
        if t.cov is not None:
            C = np.atleast_2d(np.asarray(t.cov, dtype=float))
        elif t.covariance == "prior":
            C = self.prior.covariance()
        elif t.covariance == "spectrum":
            C = spectrum_covariance(t.dim, t.variance, t.condition, np.random.default_rng(t.matrix_seed))
        else:
            C = exponential_covariance(t.dim, t.variance, t.correlation_length)
        return t.scale * C

    def _analytic_mean(self, n):
        m = np.asarray(self.cfg.target.mean, dtype=float)
        if m.ndim == 0:
            return np.full(n, float(m))
        if m.size != n:
            raise DimensionMismatch(f"target.mean has {m.size} entries, covariance is {n}x{n}")
        return m

    @cached_property
    def posterior(self):
        if not self.sigma > 0:
            raise ConfigError("the likelihood needs sigma_eps * noise_scale > 0; set forward.noiseless for noise-free data")
        return PosteriorTarget(
            self.prior, self.problem, self.plan, self.data, self.sigma, self.cfg.map.hessian_threshold
        )

    @cached_property
    def target(self):
        t = self.cfg.target
        if t.kind == "posterior":
            if t.laplace:
                return GaussianTarget(self.map_result.psi_map, self.map_hessian)
            return self.posterior
        C = self._analytic_covariance()
        mean = self._analytic_mean(C.shape[0])
        if t.kind == "gaussian":
            return GaussianTarget(mean, spd.cholesky(np.linalg.inv(C), check_symmetry=False))
        return LogNormalTarget.from_covariance(mean, C, t.shift)

    @property
    def dim(self):
        return self.target.dim

    def _start(self, spec, what):
        if isinstance(spec, list):
            x = np.asarray(spec, dtype=float)
            if x.size == 1:
                x = np.full(self.dim, float(x[0]))
            return x
        if spec == "mean":
            t = self.cfg.target
            if t.kind == "posterior":
                return self.prior.mean.copy()
            if t.kind == "lognormal":
                # componentwise median, inside the support
                return np.exp(self.target.m_l) + self.target.shift
            return self.target.mean.copy()
        if spec == "map":
            return self.map_result.psi_map.copy()
        raise ConfigError(f"{what}: unknown start {spec!r}")

    def map_start(self):
        return self._start(self.cfg.map.start, "map.start")

    @cached_property
    def map_result(self):
        m = self.cfg.map
        base = self.posterior if self.cfg.target.kind == "posterior" else self.target
        return bfgs_minimize(base, self.map_start(), gtol=m.gtol, max_iter=m.max_iter)

    @cached_property
    def map_hessian(self):
        """SPD factor of the Hessian at the MAP point, used by the Hessian-based samplers."""
        mode = self.cfg.map.hessian
        psi = self.map_result.psi_map
        if self.cfg.target.kind == "posterior":
            if mode in ("auto", "gauss_newton"):
                return self.posterior.map_hessian(psi)
            H = hessian_at(self.posterior, psi, mode)
            return spd.low_rank_hessian(H - self.prior.R, self.prior.precision, self.cfg.map.hessian_threshold)
        target = self.target
        if mode in ("auto", "analytic") and isinstance(target, GaussianTarget):
            return target.precision
        H = hessian_at(target, psi, "analytic" if mode == "auto" else mode)
        return spd.eigen_factor(H, check_symmetry=False)

    def sampler_start(self):
        return self._start(self.cfg.sampler.start, "sampler.start")

    def field_coords(self):
        """Coordinates per parameter: mesh nodes for field problems, else the index on the x axis."""
        t = self.cfg.target
        if t.kind == "posterior" or (t.covariance == "prior" and t.cov is None):
            return self.mesh.coords
        n = self.dim
        return np.column_stack([np.arange(n, dtype=float), np.zeros(n)])


def write_observations(path, points, y, theta_true, seed, coords):
    """Observation CSV: one row per measurement, then the true field as ``theta`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "index", "x", "y", "value"])
        for i, ((px, py), v) in enumerate(zip(points, y)):
            w.writerow(["obs", i, repr(float(px)), repr(float(py)), repr(float(v))])
        for i, ((cx, cy), v) in enumerate(zip(coords, theta_true)):
            w.writerow(["theta", i, repr(float(cx)), repr(float(cy)), repr(float(v))])
        w.writerow(["seed", 0, "", "", seed])


def read_observations(path):
    """Return ``(points, theta_true, y)`` from a file written by :func:`write_observations`."""
    pts, y, theta = [], [], []
    try:
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    if row["kind"] == "obs":
                        pts.append((float(row["x"]), float(row["y"])))
                        y.append(float(row["value"]))
                    elif row["kind"] == "theta":
                        theta.append(float(row["value"]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ConfigError(f"{path}:{lineno}: malformed row ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read observations {path}: {exc}") from exc
    return np.array(pts), np.array(theta), np.array(y)
