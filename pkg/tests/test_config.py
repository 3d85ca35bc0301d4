import pytest

from hessmc.config import ExperimentConfig, from_dict, load, merge, preset_names
from hessmc.errors import ConfigError
from hessmc.experiment import Experiment

EXPECTED = {"gauss1d", "gauss-hd", "lognormal1d", "lognormal-hd", "lognormal-shifted", "darcy-invert"}


def test_expected_presets_ship():
    names = set(preset_names())
    assert EXPECTED <= names
    assert {f"darcy-invert-case{k}" for k in range(1, 6)} <= names


@pytest.mark.parametrize("name", preset_names())
def test_every_preset_validates(name):
    cfg = load(name)
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.name == name


def test_defaults_follow_reference_settings():
    cfg = from_dict({})
    assert (cfg.prior.gamma, cfg.prior.delta, cfg.prior.a, cfg.prior.b) == (0.5, 5e-3, 0.018, 0.97)
    assert cfg.forward.K_f == 2.27e9 and cfg.forward.porosity == 0.2
    assert cfg.sampler.leapfrog_steps == 1


@pytest.mark.parametrize(
    "doc",
    [
        {"sampler": {"metod": "mh"}},
        {"samplers": {}},
        {"forward": {"wells": [{"x": 0.5, "y": 0.5, "rate": 1.0, "depth": 3}]}},
    ],
)
def test_unknown_keys_rejected(doc):
    with pytest.raises(ConfigError):
        from_dict(doc)


@pytest.mark.parametrize(
    "doc",
    [
        {"sampler": {"dt": "fast"}},
        {"sampler": {"n_samples": 10.5}},
        {"sampler": {"method": "nuts"}},
        {"sampler": {"tau": 2.0}},
        {"target": {"laplace": 1}},
        {"target": {"kind": "cauchy"}},
        {"map": {"hessian": "bfgs"}},
        {"outputs": {"level": 1.5}},
        {"target": {"kind": "posterior"}, "forward": {"wells": []}},
        {"target": {"kind": "posterior"}, "forward": {"wells": [{"x": 1, "y": 0.5, "rate": 1}], "n_obs": 99}},
    ],
)
def test_invalid_values_rejected(doc):
    with pytest.raises(ConfigError):
        from_dict(doc)


def test_extends_merges_tables(tmp_path):
    p = tmp_path / "mine.toml"
    p.write_text('extends = "gauss1d"\n[sampler]\nmethod = "hmc"\nn_samples = 50\n')
    cfg = load(p)
    base = load("gauss1d")
    assert cfg.sampler.method == "hmc" and cfg.sampler.n_samples == 50
    assert cfg.sampler.dt == base.sampler.dt
    assert cfg.target == base.target
    assert cfg.name == "mine"


def test_cyclic_extends(tmp_path, monkeypatch):
    import hessmc.config as config

    docs = {"a": {"extends": "b"}, "b": {"extends": "c"}, "c": {"extends": "a"}}
    monkeypatch.setattr(config, "_read_preset", lambda n: dict(docs[n]))
    with pytest.raises(ConfigError, match="cyclic"):
        config.load_preset_dict("a")


def test_malformed_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[sampler\nmethod = 1\n")
    with pytest.raises(ConfigError):
        load(p)


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        load("no-such-preset")


def test_merge_is_recursive():
    assert merge({"a": {"x": 1, "y": 2}, "b": 1}, {"a": {"y": 3}}) == {"a": {"x": 1, "y": 3}, "b": 1}


@pytest.mark.parametrize("name", ["gauss1d", "lognormal1d", "lognormal-hd", "gauss-hd"])
def test_analytic_presets_build(name):
    exp = Experiment(load(name))
    assert exp.target.dim == exp.dim
    assert exp.map_result.psi_map.shape == (exp.dim,)


def test_darcy_preset_shape():
    cfg = load("darcy-invert")
    exp = Experiment(cfg)
    assert (cfg.mesh.nx, cfg.mesh.ny) == (16, 8)
    assert exp.plan.n_obs == 52
    assert exp.prior.dim == 17 * 9


def test_case_presets_share_noise_on_common_points():
    a = Experiment(load("darcy-invert-case3"))
    b = Experiment(load("darcy-invert-case4"))
    assert a.plan.n_obs == 60 and b.plan.n_obs == 20
    assert a.data[:20].tobytes() == b.data.tobytes()
