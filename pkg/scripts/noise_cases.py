"""Run the five noise/measurement cases and print mean interval width at the probes.

Widths should not shrink as noise grows or observations are removed.

    python3 scripts/noise_cases.py --samples 10000
"""

import argparse
import time

import numpy as np

from hessmc.config import load
from hessmc.diagnostics import credible_interval
from hessmc.experiment import Experiment
from hessmc.samplers import run_sampler


def main():
    ap = argparse.ArgumentParser(description="credible interval widths across noise cases")
    ap.add_argument("--cases", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--samples", type=int)
    args = ap.parse_args()

    print(f"{'case':>5}{'sigma x':>9}{'n_obs':>7}{'acc':>7}{'mean width':>12}  per-probe widths")
    for k in args.cases:
        cfg = load(f"darcy-invert-case{k}")
        if args.samples:
            cfg.sampler.n_samples = args.samples
        exp = Experiment(cfg)
        t0 = time.perf_counter()
        ch = run_sampler(exp.target, exp.sampler_start(), cfg.sampler.sampler_config(), h_map=exp.map_hessian)
        lo, hi = credible_interval(ch.samples, cfg.outputs.level)
        w = (hi - lo)[cfg.outputs.probes]
        print(f"{k:>5}{cfg.forward.noise_scale:>9g}{exp.plan.n_obs:>7}{ch.acceptance_rate:>7.3f}{w.mean():>12.4f}  "
              f"{np.round(w, 3).tolist()}  ({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
