"""Hessian-preconditioned MCMC and HMC samplers for Bayesian inverse problems."""

from .diagnostics import ChainStats, autocorrelation, credible_interval, iact_ess_se, kld_lognormal_normal
from .map_solver import OptimizeResult, bfgs_minimize
from .prior import AnisotropyTensor, BilaplacianPrior, build_prior, kl_expansion, sample_prior
from .samplers import Chain, SamplerConfig, run_sampler
from .targets import GaussianTarget, LogNormalTarget, PosteriorTarget

__version__ = "0.1.0"

__all__ = [
    "AnisotropyTensor",
    "BilaplacianPrior",
    "Chain",
    "ChainStats",
    "GaussianTarget",
    "LogNormalTarget",
    "OptimizeResult",
    "PosteriorTarget",
    "SamplerConfig",
    "autocorrelation",
    "bfgs_minimize",
    "build_prior",
    "credible_interval",
    "iact_ess_se",
    "kl_expansion",
    "kld_lognormal_normal",
    "run_sampler",
    "sample_prior",
]
