import csv
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from hessmc import chainio
from hessmc.cli import main
from hessmc.config import load
from hessmc.experiment import Experiment, read_observations
from hessmc.targets import LogNormalTarget

SMALL_DARCY = """
extends = "darcy-invert"

[mesh]
nx = 6
ny = 4

[forward]
obs_grid = [5, 2]
n_obs = 10
{extra}

[sampler]
n_samples = 200
"""


def small_config(tmp_path, extra="", name="small.toml"):
    p = tmp_path / name
    p.write_text(SMALL_DARCY.format(extra=extra))
    return p


def obs_rows(path):
    with open(path, newline="") as fh:
        return [r for r in csv.DictReader(fh) if r["kind"] == "obs"]


def test_gen_data_is_byte_identical(tmp_path):
    cfg = small_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["gen-data", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["gen-data", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["gen-data", "--config", str(cfg), "--out", str(b), "--seed", "4"]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_gen_data_noiseless(tmp_path):
    cfg = small_config(tmp_path, extra="noise_scale = 0.0")
    out = tmp_path / "obs.csv"
    assert main(["gen-data", "--config", str(cfg), "--out", str(out)]) == 0
    exp = Experiment(load(cfg))
    from hessmc import forward as fwd

    clean = fwd.observe(fwd.solve_forward(exp.problem, exp.theta_true), exp.plan)
    pts, theta, y = read_observations(out)
    np.testing.assert_array_equal(y, clean)
    np.testing.assert_array_equal(theta, exp.theta_true)


def test_gen_data_reference_count(tmp_path):
    out = tmp_path / "obs.csv"
    assert main(["gen-data", "--config", "darcy-invert", "--out", str(out)]) == 0
    assert len(obs_rows(out)) == 52


def test_zero_sigma_posterior_is_a_config_error(tmp_path):
    cfg = small_config(tmp_path, extra="noise_scale = 0.0")
    assert main(["find-map", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_gen_data_needs_posterior(tmp_path):
    assert main(["gen-data", "--config", "gauss1d", "--out", str(tmp_path / "x.csv")]) == 2


def test_find_map_gaussian(tmp_path):
    assert main(["find-map", "--config", "gauss1d", "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "map.json").read_text())
    assert rec["converged"]
    assert rec["psi_map"][0] == pytest.approx(0.5, abs=1e-6)
    assert chainio.read_field(tmp_path / "map.csv")[0] == pytest.approx(0.5, abs=1e-6)


def test_find_map_lognormal(tmp_path):
    assert main(["find-map", "--config", "lognormal1d", "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "map.json").read_text())
    t = Experiment(load("lognormal1d")).target
    assert isinstance(t, LogNormalTarget)
    np.testing.assert_allclose(rec["psi_map"], t.map_point(), rtol=1e-6)


def test_find_map_noiseless_posterior(tmp_path):
    # truth equals the prior mean and the search starts away from it
    extra = "noiseless = true\ntruth = []\n\n[map]\nstart = [33.6]"
    cfg = small_config(tmp_path, extra=extra)
    assert main(["find-map", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "map.json").read_text())
    assert rec["misfit_initial"] > 0
    assert rec["misfit_final"] <= 1e-6 * rec["misfit_initial"]
    assert rec["hessian_rank"] >= 1


def test_sample_sn_map_on_gaussian(tmp_path):
    cfg = tmp_path / "g.toml"
    cfg.write_text('extends = "gauss1d"\n[sampler]\nmethod = "sn_map"\nn_samples = 500\n')
    assert main(["sample", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "chain_sn_map_0.json").read_text())
    assert meta["acceptance_rate"] == 1.0
    assert meta["method"] == "sn_map" and meta["seed"] == 0


def test_sample_seed_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["sample", "--config", "gauss1d", "--out", str(d), "--seed", "7", "--samples", "300"]) == 0
    assert (a / "chain_mh_7.csv").read_bytes() == (b / "chain_mh_7.csv").read_bytes()


def test_sample_multiple_chains(tmp_path):
    assert main(["sample", "--config", "gauss1d", "--out", str(tmp_path), "--chains", "3", "--samples", "100"]) == 0
    files = sorted(p.name for p in tmp_path.glob("chain_*.csv"))
    assert files == ["chain_mh_0.csv", "chain_mh_1.csv", "chain_mh_2.csv"]
    s0, _, _, _ = chainio.read_chain(tmp_path / "chain_mh_0.csv")
    s1, _, _, _ = chainio.read_chain(tmp_path / "chain_mh_1.csv")
    assert not np.array_equal(s0, s1)


def test_chain_file_format(tmp_path):
    assert main(["sample", "--config", "gauss1d", "--out", str(tmp_path), "--samples", "100"]) == 0
    path = tmp_path / "chain_mh_0.csv"
    header = path.read_text().splitlines()[0]
    assert header == "step,accepted,logJ,psi_0"
    samples, logJ, acc, meta = chainio.read_chain(path)
    assert samples.shape == (100, 1)
    assert meta["acceptance_rate"] == pytest.approx(acc.mean())


def test_sample_h_hmc_inverse_problem_budget(tmp_path):
    cfg = small_config(tmp_path)
    t0 = time.perf_counter()
    args = ["sample", "--config", str(cfg), "--out", str(tmp_path), "--samples", "1000"]
    assert main(args) == 0
    assert time.perf_counter() - t0 < 600
    samples, _, acc, meta = chainio.read_chain(tmp_path / "chain_h_hmc_0.csv")
    assert samples.shape == (1000, 35)
    assert 0 < meta["acceptance_rate"] <= 1


def test_sample_with_precomputed_map_and_data(tmp_path):
    cfg = small_config(tmp_path)
    obs = tmp_path / "obs.csv"
    assert main(["gen-data", "--config", str(cfg), "--out", str(obs), "--seed", "3"]) == 0
    assert main(["find-map", "--config", str(cfg), "--data", str(obs), "--out", str(tmp_path)]) == 0
    args = ["sample", "--config", str(cfg), "--data", str(obs), "--map", str(tmp_path / "map.csv"), "--samples", "50"]
    assert main(args + ["--out", str(tmp_path / "s")]) == 0
    assert main(args[:5] + ["--samples", "50", "--out", str(tmp_path / "inline")]) == 0
    chain = "chain_h_hmc_0.csv"
    # the MAP file round-trips exactly, so loading it reproduces the inline run
    assert (tmp_path / "s" / chain).read_bytes() == (tmp_path / "inline" / chain).read_bytes()
    psi = chainio.read_field(tmp_path / "map.csv")
    exp = Experiment(load(cfg))
    chainio.write_field(tmp_path / "shifted.csv", exp.field_coords(), psi + 0.01)
    args[args.index("--map") + 1] = str(tmp_path / "shifted.csv")
    assert main(args + ["--out", str(tmp_path / "shifted")]) == 0
    assert (tmp_path / "shifted" / chain).read_bytes() != (tmp_path / "inline" / chain).read_bytes()


def write_chain(path, x):
    x = np.asarray(x).reshape(len(x), -1)
    with open(path, "w") as fh:
        fh.write("step,accepted,logJ," + ",".join(f"psi_{i}" for i in range(x.shape[1])) + "\n")
        for k, row in enumerate(x, 1):
            fh.write(f"{k},1,0.0," + ",".join(repr(float(v)) for v in row) + "\n")


def ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    x = np.empty(n)
    x[0] = rng.standard_normal() / np.sqrt(1 - phi**2)
    for k in range(1, n):
        x[k] = phi * x[k - 1] + rng.standard_normal()
    return x


def test_diagnose_iid_chain(tmp_path):
    write_chain(tmp_path / "iid.csv", np.random.default_rng(0).standard_normal(5000))
    assert main(["diagnose", str(tmp_path / "iid.csv"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "diagnostics.json").read_text())
    entry = next(iter(rep.values()))["domain_average"]
    assert 0.8 <= entry["tau"] <= 1.5
    assert set(entry) >= {"tau", "n_eff", "se", "acceptance_rate"}
    assert (tmp_path / "intervals.csv").exists()
    assert (tmp_path / "autocorrelation.csv").exists()


def test_diagnose_identical_files_identical_results(tmp_path):
    x = ar1(0.5, 3000, 1)
    write_chain(tmp_path / "a.csv", x)
    write_chain(tmp_path / "b.csv", x)
    assert main(["diagnose", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "diagnostics.json").read_text())
    a, b = rep[str(tmp_path / "a.csv")], rep[str(tmp_path / "b.csv")]
    assert a == b


def test_diagnose_ar1_fixture(tmp_path):
    write_chain(tmp_path / "ar.csv", ar1(0.9, 100_000, 2))
    assert main(["diagnose", str(tmp_path / "ar.csv"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "diagnostics.json").read_text())
    assert next(iter(rep.values()))["domain_average"]["tau"] == pytest.approx(19.0, rel=0.15)


def test_diagnose_section_line_with_config(tmp_path):
    cfg = small_config(tmp_path)
    assert main(["sample", "--config", str(cfg), "--out", str(tmp_path), "--samples", "200"]) == 0
    chain = str(tmp_path / "chain_h_hmc_0.csv")
    args = ["diagnose", chain, "--config", str(cfg), "--out", str(tmp_path), "--section-x", "1.0", "--probes", "3", "10"]
    assert main(args) == 0
    with open(tmp_path / "intervals.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5  # ny + 1 nodes on x = 1
    assert all(float(r["x"]) == pytest.approx(1.0) for r in rows)
    assert all(float(r["lo"]) <= float(r["mean"]) <= float(r["hi"]) for r in rows)
    rep = json.loads((tmp_path / "diagnostics.json").read_text())
    assert set(rep[chain]) == {"domain_average", "node_3", "node_10"}


def test_diagnose_malformed_chain(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("step,accepted,logJ,psi_0\n1,1,0.0,0.5\n2,1,zero,0.1\n")
    assert main(["diagnose", str(bad), "--out", str(tmp_path)]) == 2
    assert "bad.csv:3" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[sampler]\nmetod = 'mh'\n")
    assert main(["sample", "--config", str(cfg)]) == 2
    assert "metod" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "hessmc", "find-map", "--config", "gauss1d", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "map.json").exists()
