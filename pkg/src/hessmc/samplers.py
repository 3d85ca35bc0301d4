"""Metropolis-Hastings family of samplers sharing one chain runner.

Each method is a small proposal kernel. Per step the runner draws, in order:
any per-step learning rate, the standard-normal vector ``u`` (from the
injectable ``noise`` stream, default ``rng.standard_normal``), then one
uniform for the accept test. Two methods whose proposals coincide therefore
produce identical chains from the same seed.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import spd
from .errors import HessianUnavailable, ModeUnsupported, OutOfSupportStart

METHODS = ("mh", "hmc", "h_hmc", "mala", "sn_map", "sn_mcmc", "is_map")
HESSIAN_METHODS = ("h_hmc", "mala", "sn_map", "is_map")


@dataclass
class SamplerConfig:
    method: str = "mh"
    dt: float = 1.0
    tau: float = 0.5
    leapfrog_steps: int = 1
    learning_rate_max: float = 1.0
    random_learning_rate: bool = False
    n_samples: int = 1000
    seed: int = 0
    thinning: int = 1
    hessian_floor: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.leapfrog_steps < 1:
            raise ValueError("leapfrog_steps must be >= 1")
        if not 0 < self.learning_rate_max <= 1:
            raise ValueError("learning_rate_max must lie in (0, 1]")
        if self.n_samples < 1 or self.thinning < 1:
            raise ValueError("n_samples and thinning must be >= 1")


@dataclass
class Chain:
    samples: np.ndarray  # (n_kept, dim)
    logJ: np.ndarray  # J at the kept samples
    steps: np.ndarray  # 1-based step index of each kept sample
    accepted: np.ndarray  # every raw step
    log_alpha: np.ndarray  # every raw step
    seed: int
    method: str
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    proposals: np.ndarray = None

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accepted))

    @property
    def n_samples(self):
        return len(self.samples)

    def metadata(self):
        return {
            "seed": self.seed,
            "method": self.method,
            "config": self.config,
            "acceptance_rate": self.acceptance_rate,
            "n_steps": int(self.accepted.size),
            "n_kept": int(len(self.samples)),
            "wall_time": self.wall_time,
        }


@dataclass
class _State:
    x: np.ndarray
    J: float
    g: np.ndarray = None
    extra: object = None


def _standard_noise(rng, n):
    return rng.standard_normal(n)


def leapfrog(value_and_grad, x, p, g, dt, n_steps, mass):
    """``n_steps`` leapfrog steps with kinetic energy ``0.5 p^T M^{-1} p``.

    Returns ``(x, p, J, g)``; ``J`` is ``inf`` (and the trajectory stops) if a
    position leaves the support.
    """
    J = None
    for _ in range(n_steps):
        p = p - 0.5 * dt * g
        x = x + dt * mass.solve(p)
        J, g = value_and_grad(x)
        if not np.isfinite(J):
            return x, p, np.inf, None
        p = p - 0.5 * dt * g
    return x, p, J, g


class _Kernel:
    needs_grad = True

    def __init__(self, target, cfg):
        self.target = target
        self.cfg = cfg

    def init(self, x):
        if self.needs_grad:
            J, g = self.target.value_and_grad(x)
        else:
            J, g = self.target.value(x), None
        return _State(x, J, g)

    def evaluate(self, z):
        if self.needs_grad:
            J, g = self.target.value_and_grad(z)
        else:
            J, g = self.target.value(z), None
        return _State(z, J, g)

    def propose(self, s, rng, noise):
        """Return ``(proposal_state, log_alpha)``."""
        raise NotImplementedError


class _MH(_Kernel):
    needs_grad = False

    def propose(self, s, rng, noise):
        u = noise(rng, s.x.size)
        z = self.evaluate(s.x + self.cfg.dt * u)
        # symmetric proposal: delta q = 0
        return z, s.J - z.J


class _HMC(_Kernel):
    def __init__(self, target, cfg, mass):
        super().__init__(target, cfg)
        self.mass = mass

    def kinetic(self, p):
        return 0.5 * self.mass.inv_quad(p)

    def propose(self, s, rng, noise):
        u = noise(rng, s.x.size)
        p0 = self.mass.apply_sqrt(u)
        x1, p1, J1, g1 = leapfrog(
            self.target.value_and_grad, s.x, p0, s.g, self.cfg.dt, self.cfg.leapfrog_steps, self.mass
        )
        z = _State(x1, J1, g1)
        if not np.isfinite(J1):
            return z, -np.inf
        return z, (s.J + self.kinetic(p0)) - (J1 + self.kinetic(p1))


class _Newton(_Kernel):
    """Gaussian proposal ``N(x - a H^{-1} g(x), b^2 H^{-1})`` with fixed ``H``.

    SN-MAP uses ``(a, b) = (gamma, 1)``, MALA ``(tau, sqrt(2 tau))``.
    """

    def __init__(self, target, cfg, h, drift, scale):
        super().__init__(target, cfg)
        self.h = h
        self.drift = drift
        self.scale = scale

    def log_q(self, x, gx, z, drift):
        r = z - x + drift * self.h.solve(gx)
        return -0.5 * self.h.quad(r) / self.scale**2

    def step_drift(self, rng):
        return self.drift

    def propose(self, s, rng, noise):
        a = self.step_drift(rng)
        u = noise(rng, s.x.size)
        z = self.evaluate(s.x - a * self.h.solve(s.g) + self.scale * self.h.solve_sqrt_transpose(u))
        if not np.isfinite(z.J):
            return z, -np.inf
        dq = self.log_q(z.x, z.g, s.x, a) - self.log_q(s.x, s.g, z.x, a)
        return z, s.J - z.J + dq


class _SNMap(_Newton):
    def __init__(self, target, cfg, h):
        super().__init__(target, cfg, h, cfg.learning_rate_max, 1.0)

    def step_drift(self, rng):
        if self.cfg.random_learning_rate:
            # gamma ~ U(0, gamma_max]; the same gamma enters both proposal densities
            return self.cfg.learning_rate_max * (1.0 - rng.random())
        return self.cfg.learning_rate_max


class _Mala(_Newton):
    def __init__(self, target, cfg, h):
        super().__init__(target, cfg, h, cfg.tau, np.sqrt(2.0 * cfg.tau))


class _SNMcmc(_Kernel):
    """Newton proposal with the regularized local Hessian at the current point."""

    def local_hessian(self, x):
        try:
            H = self.target.hess(x)
        except ModeUnsupported as exc:
            raise HessianUnavailable(str(exc)) from exc
        return spd.eigen_factor(H, floor=self.cfg.hessian_floor, check_symmetry=False)

    def init(self, x):
        s = super().init(x)
        if np.isfinite(s.J):
            s.extra = self.local_hessian(x)
        return s

    @staticmethod
    def log_q(h, x, gx, z):
        r = z - x + h.solve(gx)
        return -0.5 * h.quad(r) + 0.5 * h.logdet

    def propose(self, s, rng, noise):
        u = noise(rng, s.x.size)
        h = s.extra
        z = self.evaluate(s.x - h.solve(s.g) + h.solve_sqrt_transpose(u))
        if not np.isfinite(z.J):
            return z, -np.inf
        z.extra = self.local_hessian(z.x)
        dq = self.log_q(z.extra, z.x, z.g, s.x) - self.log_q(h, s.x, s.g, z.x)
        return z, s.J - z.J + dq


class _ISMap(_Kernel):
    needs_grad = False

    def __init__(self, target, cfg, h, psi_map):
        super().__init__(target, cfg)
        self.h = h
        self.center = np.asarray(psi_map, dtype=float)

    def log_q(self, z):
        return -0.5 * self.h.quad(z - self.center)

    def propose(self, s, rng, noise):
        u = noise(rng, s.x.size)
        z = self.evaluate(self.center + self.h.solve_sqrt_transpose(u))
        if not np.isfinite(z.J):
            return z, -np.inf
        return z, s.J - z.J + self.log_q(s.x) - self.log_q(z.x)


def _run(kernel, psi0, cfg, rng, noise=None, record_proposals=False):
    noise = noise or _standard_noise
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    s = kernel.init(np.array(psi0, dtype=float))
    if not np.isfinite(s.J):
        raise OutOfSupportStart("chain start is outside the target support")
    n, dim = cfg.n_samples, s.x.size
    kept = np.arange(cfg.thinning, n + 1, cfg.thinning)
    samples = np.empty((kept.size, dim))
    logJ = np.empty(kept.size)
    accepted = np.zeros(n, dtype=bool)
    log_alpha = np.empty(n)
    proposals = np.empty((n, dim)) if record_proposals else None
    t0 = time.perf_counter()
    j = 0
    for k in range(n):
        z, la = kernel.propose(s, rng, noise)
        log_alpha[k] = la
        if record_proposals:
            proposals[k] = z.x
        if np.log(rng.random()) < min(0.0, la):
            s = z
            accepted[k] = True
        if (k + 1) % cfg.thinning == 0:
            samples[j] = s.x
            logJ[j] = s.J
            j += 1
    return Chain(
        samples=samples,
        logJ=logJ,
        steps=kept,
        accepted=accepted,
        log_alpha=log_alpha,
        seed=cfg.seed,
        method=cfg.method,
        config=asdict(cfg),
        wall_time=time.perf_counter() - t0,
        proposals=proposals,
    )


def mh_mcmc(target, psi0, cfg, rng=None, **kw):
    return _run(_MH(target, cfg), psi0, cfg, rng, **kw)


def hmc(target, psi0, cfg, mass=None, rng=None, **kw):
    """Leapfrog HMC; identity mass by default."""
    mass = mass if mass is not None else spd.IdentityFactor(target.dim)
    return _run(_HMC(target, cfg, mass), psi0, cfg, rng, **kw)


def h_hmc(target, psi0, cfg, h_map, rng=None, **kw):
    """HMC with the MAP Hessian as mass matrix."""
    return _run(_HMC(target, cfg, h_map), psi0, cfg, rng, **kw)


def mala(target, psi0, cfg, h_map=None, rng=None, **kw):
    """Preconditioned MALA with ``B = h_map^{-1}`` (identity when ``h_map`` is None)."""
    h_map = h_map if h_map is not None else spd.IdentityFactor(target.dim)
    return _run(_Mala(target, cfg, h_map), psi0, cfg, rng, **kw)


def sn_map(target, psi0, cfg, h_map, rng=None, **kw):
    return _run(_SNMap(target, cfg, h_map), psi0, cfg, rng, **kw)


def sn_mcmc(target, psi0, cfg, rng=None, **kw):
    if not hasattr(target, "hess"):
        raise HessianUnavailable(f"{type(target).__name__} provides no local Hessian")
    try:
        target.hess(np.asarray(psi0, dtype=float))
    except ModeUnsupported as exc:
        raise HessianUnavailable(str(exc)) from exc
    return _run(_SNMcmc(target, cfg), psi0, cfg, rng, **kw)


def is_map(target, psi_map, cfg, h_map, rng=None, **kw):
    return _run(_ISMap(target, cfg, h_map, psi_map), psi_map, cfg, rng, **kw)


def mala_log_ratio_expanded(J0, J1, x0, x1, g0, g1, h_map, tau):
    """Acceptance log-ratio of MALA written out in gradients instead of proposal densities."""
    return (
        J0
        - J1
        + 0.5 * float((x1 - x0) @ (g0 + g1))
        + 0.25 * tau * (h_map.inv_quad(g0) - h_map.inv_quad(g1))
    )


def sn_map_log_ratio_expanded(J0, J1, x0, x1, g0, g1, h_map):
    """Same for SN-MAP with unit learning rate."""
    return J0 - J1 + float((x1 - x0) @ (g0 + g1)) + 0.5 * (h_map.inv_quad(g0) - h_map.inv_quad(g1))


def run_sampler(target, psi0, cfg, h_map=None, psi_map=None, rng=None, **kw):
    """Dispatch on ``cfg.method``."""
    m = cfg.method
    if m in HESSIAN_METHODS and h_map is None:
        raise ValueError(f"method {m!r} needs the MAP Hessian")
    if m == "mh":
        return mh_mcmc(target, psi0, cfg, rng, **kw)
    if m == "hmc":
        return hmc(target, psi0, cfg, None, rng, **kw)
    if m == "h_hmc":
        return h_hmc(target, psi0, cfg, h_map, rng, **kw)
    if m == "mala":
        return mala(target, psi0, cfg, h_map, rng, **kw)
    if m == "sn_map":
        return sn_map(target, psi0, cfg, h_map, rng, **kw)
    if m == "sn_mcmc":
        return sn_mcmc(target, psi0, cfg, rng, **kw)
    if m == "is_map":
        return is_map(target, psi_map if psi_map is not None else psi0, cfg, h_map, rng, **kw)
    raise ValueError(m)
