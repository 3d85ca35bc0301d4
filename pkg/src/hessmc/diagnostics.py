"""Chain statistics and the log-normal / normal KL divergence."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import spd
from .errors import ConstantSeries, TooFewSamples

RHO_CUTOFF = 0.05
TAU_FLOOR = 0.1
MIN_INTERVAL_SAMPLES = 100


def autocorrelation(series, max_lag):
    """``rho_1..rho_max_lag`` with the biased (divide by N) autocovariance."""
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if not 0 <= max_lag < n:
        raise ValueError(f"need 0 <= max_lag < len(series), got {max_lag} for length {n}")
    d = x - x.mean()
    c0 = float(d @ d)
    if c0 <= 1e-300 * n or np.ptp(x) == 0:
        raise ConstantSeries("series is constant")
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    return acov[1:] / c0


@dataclass
class ChainStats:
    tau_int: float
    n_eff: float
    se: float  # sigma / n_eff
    se_conventional: float  # sigma / sqrt(n_eff)
    mean: float
    std: float
    n: int
    truncation_lag: int
    acceptance_rate: float = float("nan")

    def to_dict(self):
        return asdict(self)


def iact(series, max_lag=None):
    """Integrated autocorrelation time and the lag at which the sum stopped.

    The sum ``1 + 2 sum rho_t`` runs while ``rho_t >= 0.05`` (and is positive),
    over at most ``N/10`` lags; the result is floored at 0.1.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    cap = max(1, n // 10) if max_lag is None else max_lag
    cap = min(cap, n - 1)
    rho = autocorrelation(x, cap)
    stop = np.flatnonzero((rho < RHO_CUTOFF) | (rho <= 0))
    t_star = int(stop[0]) if stop.size else cap
    tau = 1.0 + 2.0 * float(np.sum(rho[:t_star]))
    return max(tau, TAU_FLOOR), t_star


def iact_ess_se(series, sigma_tilde=None, acceptance_rate=float("nan")):
    x = np.asarray(series, dtype=float).ravel()
    tau, t_star = iact(x)
    sigma = float(np.std(x, ddof=1)) if sigma_tilde is None else float(sigma_tilde)
    n_eff = x.size / tau
    return ChainStats(
        tau_int=tau,
        n_eff=n_eff,
        se=sigma / n_eff,
        se_conventional=float(sigma / np.sqrt(n_eff)),
        mean=float(x.mean()),
        std=sigma,
        n=x.size,
        truncation_lag=t_star,
        acceptance_rate=float(acceptance_rate),
    )


def domain_average(samples):
    """Per-sample mean over all components; the scalar series used for chain diagnostics."""
    s = np.asarray(samples, dtype=float)
    return s if s.ndim == 1 else s.mean(axis=1)


def chain_stats(chain, probes=None):
    """Statistics of the domain-average series, plus one entry per probe component."""
    out = {"domain_average": iact_ess_se(domain_average(chain.samples), acceptance_rate=chain.acceptance_rate)}
    for j in probes or ():
        out[f"node_{j}"] = iact_ess_se(chain.samples[:, j], acceptance_rate=chain.acceptance_rate)
    return out


def credible_interval(samples, level=0.95):
    """Per-dimension percentile interval; returns ``(lo, hi)`` arrays."""
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] < MIN_INTERVAL_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_INTERVAL_SAMPLES} samples, got {s.shape[0]}")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    q = 100 * (1 - level) / 2
    lo, hi = np.percentile(s, [q, 100 - q], axis=0)
    return lo, hi


def lognormal_moments(m_q, Sigma_q):
    """Mean and covariance of ``exp(z)`` for ``z ~ N(m_q, Sigma_q)``."""
    m = np.atleast_1d(np.asarray(m_q, dtype=float))
    S = np.atleast_2d(np.asarray(Sigma_q, dtype=float))
    d = np.diag(S)
    mean = np.exp(m + 0.5 * d)
    cov = np.outer(mean, mean) * np.expm1(S)
    return mean, cov


def kld_lognormal_normal(m_q, Sigma_q, m_p, Sigma_p):
    """``KL(q || p)`` for log-normal ``q = logN(m_q, Sigma_q)`` and normal ``p = N(m_p, Sigma_p)``.

    Uses ``E_q[log q] = -n/2 log(2 pi e) - 0.5 log|Sigma_q| - sum m_q`` and the
    log-normal first and second moments in ``E_q[log p]``.
    """
    m_q = np.atleast_1d(np.asarray(m_q, dtype=float))
    m_p = np.atleast_1d(np.asarray(m_p, dtype=float))
    fq = spd.cholesky(np.atleast_2d(Sigma_q))
    fp = spd.cholesky(np.atleast_2d(Sigma_p))
    n = m_q.size
    mean, cov = lognormal_moments(m_q, Sigma_q)
    r = mean - m_p
    trace = float(np.trace(fp.solve(cov))) + fp.inv_quad(r)
    return -0.5 * (fq.logdet - fp.logdet) - 0.5 * n - float(np.sum(m_q)) + 0.5 * trace


def kld_monte_carlo(m_q, Sigma_q, m_p, Sigma_p, n_samples, rng):
    """Monte Carlo estimate of ``E_q[log q - log p]`` and its standard error."""
    m_q = np.atleast_1d(np.asarray(m_q, dtype=float))
    m_p = np.atleast_1d(np.asarray(m_p, dtype=float))
    fq = spd.cholesky(np.atleast_2d(Sigma_q))
    fp = spd.cholesky(np.atleast_2d(Sigma_p))
    n = m_q.size
    u = rng.standard_normal((n, n_samples))
    z = m_q[:, None] + fq.apply_sqrt(u)
    x = np.exp(z)
    log_q = -0.5 * np.sum(u * u, axis=0) - 0.5 * fq.logdet - np.sum(z, axis=0)
    w = fp.solve_sqrt(x - m_p[:, None])
    log_p = -0.5 * np.sum(w * w, axis=0) - 0.5 * fp.logdet
    d = log_q - log_p  # the 2 pi constants cancel
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(n_samples))
