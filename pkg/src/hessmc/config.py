"""Experiment configuration: TOML documents mapped onto nested dataclasses.

A document may start with ``extends = "<preset>"``; the named preset is
loaded first and the document's tables are merged over it key by key.
Unknown sections or keys are rejected before anything is computed.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .samplers import METHODS, SamplerConfig

PRESET_PACKAGE = "hessmc.presets"


@dataclass
class MeshConfig:
    nx: int = 16
    ny: int = 8
    Lx: float = 2.0
    Ly: float = 1.0


@dataclass
class PriorConfig:
    gamma: float = 0.5
    delta: float = 5e-3
    a: float = 0.018
    b: float = 0.97
    beta: float = 1.017 * math.pi
    mean: float = 0.0
    factor: str = "cholesky"


@dataclass
class TargetConfig:
    """Analytic targets take ``mean`` (Gaussian mean, or ``m_l`` for log-normal) and a covariance.

    The covariance is ``cov`` when given, otherwise built per ``covariance``:
    ``exponential`` (``variance * exp(-|i-j|/correlation_length)``, diagonal
    for length 0), ``spectrum`` (random rotation of log-spaced eigenvalues
    from ``variance`` down to ``variance/condition``) or ``prior`` (the field
    prior on the configured mesh). Everything is then scaled by ``scale``.
    """

    kind: str = "gaussian"  # gaussian | lognormal | posterior
    dim: int = 1
    mean: object = 0.0
    cov: list = None
    covariance: str = "exponential"
    variance: float = 1.0
    correlation_length: float = 0.0
    condition: float = 1.0
    scale: float = 1.0
    matrix_seed: int = 0
    shift: float = 0.0
    laplace: bool = False  # posterior only: sample the Gaussian approximation at the MAP


@dataclass
class WellConfig:
    x: float
    y: float
    rate: float


@dataclass
class BlobConfig:
    """``amp * exp(-((x-cx)/rx)^2/2 - ((y-cy)/ry)^2/2)`` added to the prior mean."""

    x: float
    y: float
    rx: float
    ry: float
    amp: float


@dataclass
class ForwardConfig:
    length_unit: float = 500.0
    K_f: float = 2.27e9
    rho_f: float = 1000.0
    mu: float = 1e-3
    porosity: float = 0.2
    gravity: list = field(default_factory=lambda: [0.0, 9.81])
    p_top: float = 500e6
    horizon: float = 10 * 86400.0
    n_t: int = 20
    wells: list = field(default_factory=list)
    sigma_eps: float = 1e6
    noise_scale: float = 1.0
    noiseless: bool = False  # synthetic data without noise; the likelihood keeps its sigma
    obs_points: list = None
    obs_grid: list = field(default_factory=lambda: [13, 4])
    obs_box: list = field(default_factory=lambda: [0.1, 1.9, 0.1, 0.7])
    obs_order_seed: int = None  # shuffle the grid so every prefix is spread over the domain
    n_obs: int = 52
    truth: list = field(default_factory=list)
    data_seed: int = 0
    data_file: str = None


@dataclass
class MapConfig:
    gtol: float = None
    max_iter: int = 2000
    hessian: str = "auto"  # auto | analytic | gauss_newton | fd_of_grad
    hessian_threshold: float = 1e-2
    start: object = "mean"  # mean | list of values


@dataclass
class SamplerSection:
    method: str = "mh"
    dt: float = 1.0
    tau: float = 0.5
    leapfrog_steps: int = 1
    learning_rate_max: float = 1.0
    random_learning_rate: bool = False
    n_samples: int = 1000
    seed: int = 0
    thinning: int = 1
    start: object = "map"  # map | mean | list of values

    def sampler_config(self, seed=None, n_samples=None):
        return SamplerConfig(
            method=self.method,
            dt=self.dt,
            tau=self.tau,
            leapfrog_steps=self.leapfrog_steps,
            learning_rate_max=self.learning_rate_max,
            random_learning_rate=self.random_learning_rate,
            n_samples=self.n_samples if n_samples is None else n_samples,
            seed=self.seed if seed is None else seed,
            thinning=self.thinning,
        )


@dataclass
class OutputsConfig:
    directory: str = "out"
    probes: list = field(default_factory=list)
    section_x: float = None  # vertical section line for interval CSVs (field problems)
    level: float = 0.95
    max_lag: int = 200


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    mesh: MeshConfig = field(default_factory=MeshConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    target: TargetConfig = field(default_factory=TargetConfig)
    forward: ForwardConfig = field(default_factory=ForwardConfig)
    map: MapConfig = field(default_factory=MapConfig)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)

    def to_dict(self):
        return dataclasses.asdict(self)


_SECTIONS = {
    "mesh": MeshConfig,
    "prior": PriorConfig,
    "target": TargetConfig,
    "forward": ForwardConfig,
    "map": MapConfig,
    "sampler": SamplerSection,
    "outputs": OutputsConfig,
}
_NESTED = {("forward", "wells"): WellConfig, ("forward", "truth"): BlobConfig}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a table, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        kind = names[key].type
        if kind == "bool" and not isinstance(value, bool):
            raise ConfigError(f"{where}.{key}: expected true/false, got {value!r}")
        if kind in ("int", "float"):
            if value is None and names[key].default is None:
                pass
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
            elif kind == "int" and not float(value).is_integer():
                raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
            else:
                value = int(value) if kind == "int" else float(value)
        if kind == "str" and not isinstance(value, str):
            raise ConfigError(f"{where}.{key}: expected a string, got {value!r}")
        if kind == "list" and not isinstance(value, list):
            raise ConfigError(f"{where}.{key}: expected an array, got {value!r}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _validate(cfg: ExperimentConfig):
    t, s = cfg.target, cfg.sampler
    if t.kind not in ("gaussian", "lognormal", "posterior"):
        raise ConfigError(f"target.kind: unknown kind {t.kind!r}")
    if t.covariance not in ("exponential", "spectrum", "prior"):
        raise ConfigError(f"target.covariance: unknown construction {t.covariance!r}")
    if s.method not in METHODS:
        raise ConfigError(f"sampler.method: unknown method {s.method!r}")
    if cfg.map.hessian not in ("auto", "analytic", "gauss_newton", "fd_of_grad"):
        raise ConfigError(f"map.hessian: unknown mode {cfg.map.hessian!r}")
    try:
        s.sampler_config()
    except ValueError as exc:
        raise ConfigError(f"sampler: {exc}") from exc
    if t.kind == "posterior":
        f = cfg.forward
        if f.sigma_eps < 0 or f.noise_scale < 0:
            raise ConfigError("forward: sigma_eps and noise_scale must be >= 0")
        if not f.wells:
            raise ConfigError("forward.wells: at least one well is required")
        if f.obs_points is None and f.n_obs > f.obs_grid[0] * f.obs_grid[1]:
            raise ConfigError(f"forward.n_obs: {f.n_obs} exceeds the {f.obs_grid} observation grid")
    if not 0 < cfg.outputs.level < 1:
        raise ConfigError("outputs.level must lie in (0, 1)")


def from_dict(data) -> ExperimentConfig:
    data = dict(data)
    data.pop("extends", None)
    name = data.pop("name", "experiment")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s) {', '.join(unknown)}")
    sections = {}
    for sec, cls in _SECTIONS.items():
        raw = dict(data.get(sec, {}))
        for (s, key), sub in _NESTED.items():
            if s == sec and key in raw:
                raw[key] = [_build(sub, item, f"{sec}.{key}[{i}]") for i, item in enumerate(raw[key])]
        sections[sec] = _build(cls, raw, sec)
    cfg = ExperimentConfig(name=name, **sections)
    _validate(cfg)
    return cfg


def merge(base, override):
    """Recursive dict merge; tables merge key by key, everything else is replaced."""
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def preset_names():
    return sorted(p.name[:-5] for p in resources.files(PRESET_PACKAGE).iterdir() if p.name.endswith(".toml"))


def _parse(text, origin):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc


def _resolve(data, seen):
    parent = data.get("extends")
    if parent is None:
        return data
    if parent in seen:
        raise ConfigError(f"cyclic 'extends' through {parent!r}")
    return merge(_resolve(_read_preset(parent), seen | {parent}), data)


def _read_preset(name):
    """Parsed preset document, ``extends`` not yet applied."""
    res = resources.files(PRESET_PACKAGE) / f"{name}.toml"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    data = _parse(res.read_text(), f"preset {name}")
    data.setdefault("name", name)
    return data


def load_preset_dict(name):
    return _resolve(_read_preset(name), {name})


def load(source) -> ExperimentConfig:
    """Load a config from a file path or a preset name."""
    path = Path(source)
    if path.suffix == ".toml" or path.exists():
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
        data = _parse(text, str(path))
        data.setdefault("name", path.stem)
        data = _resolve(data, set())
    else:
        data = load_preset_dict(str(source))
    return from_dict(data)
