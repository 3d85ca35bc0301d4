"""Log-normal targets of growing width: KL divergence from the Laplace
Gaussian against SN-MAP acceptance.

    python3 scripts/kld_trend.py --dim 5 --kappa 0.01 0.05 0.2 0.5
"""

import argparse

import numpy as np

from hessmc import spd
from hessmc.diagnostics import kld_lognormal_normal, kld_monte_carlo
from hessmc.experiment import exponential_covariance
from hessmc.samplers import SamplerConfig, run_sampler
from hessmc.targets import LogNormalTarget


def main():
    ap = argparse.ArgumentParser(description="KLD versus SN-MAP acceptance on log-normal targets")
    ap.add_argument("--dim", type=int, default=5)
    ap.add_argument("--mean", type=float, default=0.5)
    ap.add_argument("--length", type=float, default=2.0, help="correlation length in index units")
    ap.add_argument("--kappa", type=float, nargs="+", default=[0.01, 0.05, 0.2])
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--mc", type=int, default=200_000, help="Monte Carlo draws for the KLD cross-check")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    S = exponential_covariance(args.dim, 1.0, args.length)
    m = np.full(args.dim, args.mean)
    rng = np.random.default_rng(args.seed)
    print(f"{'kappa':>8}{'KLD':>10}{'KLD (MC)':>12}{'+-':>9}{'SN-MAP acc':>12}")
    for kappa in args.kappa:
        t = LogNormalTarget.from_covariance(m, kappa * S)
        x = t.map_point()
        H = t.hess(x)
        kl = kld_lognormal_normal(m, kappa * S, x, np.linalg.inv(H))
        mc, se = kld_monte_carlo(m, kappa * S, x, np.linalg.inv(H), args.mc, rng)
        ch = run_sampler(t, x, SamplerConfig("sn_map", n_samples=args.samples, seed=args.seed), h_map=spd.cholesky(H))
        print(f"{kappa:>8.3f}{kl:>10.4f}{mc:>12.4f}{se:>9.4f}{ch.acceptance_rate:>12.4f}")


if __name__ == "__main__":
    main()
