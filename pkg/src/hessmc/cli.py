"""Command line front end: ``hessmc {gen-data,find-map,sample,diagnose}``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import chainio, diagnostics
from .config import load, preset_names
from .errors import ConfigError, HessMCError
from .experiment import Experiment, write_observations
from .samplers import HESSIAN_METHODS, run_sampler

log = logging.getLogger("hessmc")


def _experiment(args):
    cfg = load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.forward.data_seed = args.seed
        cfg.sampler.seed = args.seed
    if getattr(args, "data", None):
        cfg.forward.data_file = str(args.data)
    return Experiment(cfg)


def _outdir(args, exp):
    out = Path(args.out or exp.cfg.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args):
    exp = _experiment(args)
    if exp.cfg.target.kind != "posterior":
        raise ConfigError("gen-data needs a configuration with target.kind = 'posterior'")
    out = Path(args.out or Path(exp.cfg.outputs.directory) / "observations.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    y = exp.generate_data()
    write_observations(out, exp.plan.points, y, exp.theta_true, exp.cfg.forward.data_seed, exp.mesh.coords)
    log.info("wrote %d observations to %s", len(y), out)
    return out


def cmd_find_map(args):
    exp = _experiment(args)
    out = _outdir(args, exp)
    res = exp.map_result
    chainio.write_field(out / "map.csv", exp.field_coords(), res.psi_map)
    record = res.to_dict()
    if exp.cfg.target.kind == "posterior":
        post = exp.posterior
        record["misfit_initial"], _ = post.terms(exp.map_start())
        record["misfit_final"], record["prior_cost_final"] = post.terms(res.psi_map)
        record["hessian_rank"] = exp.map_hessian.rank
    chainio.write_json(out / "map.json", record)
    log.info("MAP: J=%.6g |g|=%.3g after %d iterations (%s)", res.J_final, res.grad_norm_final, res.iterations, res.message)
    return out


def _run_chain(cfg_source, overrides, seed, n_samples, map_file):
    """Worker for one chain; rebuilds the experiment so chains share nothing."""
    exp = Experiment(load(cfg_source))
    for sec, key, val in overrides:
        setattr(getattr(exp.cfg, sec), key, val)
    if map_file:
        from .map_solver import OptimizeResult

        psi = chainio.read_field(map_file)
        exp.__dict__["map_result"] = OptimizeResult(psi, float("nan"), float("nan"), 0, True, message="loaded")
    scfg = exp.cfg.sampler.sampler_config(seed=seed, n_samples=n_samples)
    needs_h = scfg.method in HESSIAN_METHODS
    h = exp.map_hessian if needs_h else None
    psi_map = exp.map_result.psi_map if scfg.method == "is_map" else None
    return run_sampler(exp.target, exp.sampler_start(), scfg, h_map=h, psi_map=psi_map)


def cmd_sample(args):
    exp = _experiment(args)
    out = _outdir(args, exp)
    overrides = []
    if args.seed is not None:
        overrides += [("forward", "data_seed", args.seed)]
    if args.data:
        overrides += [("forward", "data_file", str(args.data))]
    base_seed = exp.cfg.sampler.seed
    seeds = [base_seed + k for k in range(args.chains)]
    n = args.samples or exp.cfg.sampler.n_samples
    jobs = [(args.config, overrides, s, n, args.map) for s in seeds]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            chains = list(pool.map(_run_chain, *zip(*jobs)))
    else:
        chains = [_run_chain(*j) for j in jobs]
    paths = []
    for s, chain in zip(seeds, chains):
        p = chainio.write_chain(out / f"chain_{chain.method}_{s}.csv", chain)
        paths.append(p)
        log.info("%s seed=%d acceptance=%.3f wall=%.1fs -> %s", chain.method, s, chain.acceptance_rate, chain.wall_time, p)
    return paths


def cmd_diagnose(args):
    exp = Experiment(load(args.config)) if args.config else None
    outs = exp.cfg.outputs if exp else None
    level = args.level or (outs.level if outs else 0.95)
    max_lag = args.max_lag or (outs.max_lag if outs else 200)
    probes = args.probes if args.probes is not None else (outs.probes if outs else [])
    out = Path(args.out or (outs.directory if outs else "."))
    out.mkdir(parents=True, exist_ok=True)

    report, acf, pooled = {}, {}, []
    for path in args.chains:
        samples, _, accepted, meta = chainio.read_chain(path)
        acc = meta.get("acceptance_rate", float(np.mean(accepted)))
        series = {"domain_average": diagnostics.domain_average(samples)}
        for j in probes:
            if not 0 <= j < samples.shape[1]:
                raise ConfigError(f"probe {j} outside 0..{samples.shape[1] - 1}")
            series[f"node_{j}"] = samples[:, j]
        entry = {}
        lag = min(max_lag, samples.shape[0] - 1)
        for name, x in series.items():
            st = diagnostics.iact_ess_se(x, acceptance_rate=acc)
            entry[name] = {
                "tau": st.tau_int,
                "n_eff": st.n_eff,
                "se": st.se,
                "se_conventional": st.se_conventional,
                "acceptance_rate": acc,
            }
            acf[f"{Path(path).stem}:{name}"] = diagnostics.autocorrelation(x, lag)
        report[str(path)] = entry
        pooled.append(samples)
    chainio.write_json(out / "diagnostics.json", report)

    n_lag = min(len(v) for v in acf.values())
    chainio.write_columns(out / "autocorrelation.csv", {"lag": list(range(1, n_lag + 1)), **{k: v[:n_lag] for k, v in acf.items()}})

    samples = np.vstack(pooled)
    lo, hi = diagnostics.credible_interval(samples, level)
    mean = samples.mean(axis=0)
    coords = exp.field_coords() if exp else np.column_stack([np.arange(samples.shape[1]), np.zeros(samples.shape[1])])
    if coords.shape[0] != samples.shape[1]:
        raise ConfigError("chain dimension does not match the configured field")
    section = args.section_x if args.section_x is not None else (outs.section_x if outs else None)
    if section is not None and exp is not None:
        nodes = exp.mesh.nodes_on_vertical_line(section)
    else:
        nodes = np.arange(samples.shape[1])
    chainio.write_intervals(out / "intervals.csv", nodes, coords, mean, lo, hi)
    log.info("diagnostics for %d chain(s) written to %s", len(args.chains), out)
    return out


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="hessmc", description="Hessian-preconditioned MCMC experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", required=True, help=f"TOML file or preset name ({', '.join(preset_names())})")
        sp.add_argument("--out", help="output file or directory")
        if seed:
            sp.add_argument("--seed", type=int, help="overrides the data and sampler seeds")

    g = sub.add_parser("gen-data", help="synthesize noisy observations")
    common(g)
    g.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("find-map", help="BFGS search for the MAP point")
    common(f)
    f.add_argument("--data", help="observation CSV from gen-data")
    f.set_defaults(func=cmd_find_map)

    s = sub.add_parser("sample", help="run the configured sampler")
    common(s)
    s.add_argument("--data", help="observation CSV from gen-data")
    s.add_argument("--map", help="MAP field CSV from find-map (computed inline otherwise)")
    s.add_argument("--chains", type=_positive, default=1)
    s.add_argument("--samples", type=_positive, help="overrides sampler.n_samples")
    s.add_argument("--jobs", type=_positive, default=1, help="chains run in this many processes")
    s.set_defaults(func=cmd_sample)

    d = sub.add_parser("diagnose", help="IACT, ESS, credible intervals and autocorrelation of chain files")
    d.add_argument("chains", nargs="+", help="chain CSV files")
    d.add_argument("--config", help="experiment config, for coordinates, probes and section line")
    d.add_argument("--out")
    d.add_argument("--level", type=float)
    d.add_argument("--max-lag", type=int)
    d.add_argument("--probes", type=int, nargs="*")
    d.add_argument("--section-x", type=float)
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except HessMCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
