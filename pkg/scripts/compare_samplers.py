"""Compare MH, HMC, H-HMC and SN-MAP on the analytic presets.

Prints one row per (preset, method): acceptance, mean of the domain
average, IACT, effective sample size and both standard errors. Leapfrog step
sizes are tuned to a common pilot acceptance rate unless --no-tune is given.

    python3 scripts/compare_samplers.py gauss1d lognormal1d gauss-hd --samples 10000
"""

import argparse
import time

import numpy as np

from hessmc.config import load
from hessmc.diagnostics import domain_average, iact_ess_se
from hessmc.experiment import Experiment, tune_dt
from hessmc.samplers import SamplerConfig, run_sampler

METHODS = ("mh", "hmc", "h_hmc", "sn_map")


def compare(preset, methods, n_samples, seed, goal, tune):
    exp = Experiment(load(preset))
    base = exp.cfg.sampler
    start = exp.sampler_start()
    rows = []
    for method in methods:
        dt = base.dt
        if tune and method in ("hmc", "h_hmc"):
            dt = tune_dt(exp.target, exp.map_hessian, method, start, goal=goal)
        cfg = SamplerConfig(method, dt=dt, n_samples=n_samples, seed=seed, leapfrog_steps=base.leapfrog_steps)
        t0 = time.perf_counter()
        ch = run_sampler(exp.target, start, cfg, h_map=exp.map_hessian)
        st = iact_ess_se(domain_average(ch.samples))
        rows.append((preset, method, dt, ch.acceptance_rate, st.mean, st.tau_int, st.n_eff, st.se,
                     st.se_conventional, time.perf_counter() - t0))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("presets", nargs="*", default=["gauss1d", "lognormal1d"])
    ap.add_argument("--methods", nargs="+", default=list(METHODS), choices=METHODS)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--goal", type=float, default=0.9, help="pilot acceptance rate for step tuning")
    ap.add_argument("--no-tune", action="store_true")
    args = ap.parse_args()

    print(f"{'preset':<14}{'method':<8}{'dt':>9}{'acc':>7}{'mean':>10}{'tau':>9}{'n_eff':>9}"
          f"{'se':>10}{'se_conv':>10}{'sec':>7}")
    for preset in args.presets:
        for r in compare(preset, args.methods, args.samples, args.seed, args.goal, not args.no_tune):
            print(f"{r[0]:<14}{r[1]:<8}{r[2]:>9.4f}{r[3]:>7.3f}{r[4]:>10.4f}{r[5]:>9.2f}{r[6]:>9.0f}"
                  f"{r[7]:>10.2e}{r[8]:>10.2e}{r[9]:>7.1f}")


if __name__ == "__main__":
    main()
