"""Campaign configuration files (YAML).

Example::

    name: losbo_vs_realbeta
    seed: 7
    repetitions: 100
    iterations: 20
    functions:
      source: generate        # generate | files | benchmark
      kind: se_onb            # se_onb | pre_rkhs
      count: 10
      norm: 10.0
      length_scale: 0.1414213562373095
    noise: {kind: uniform, magnitude: 0.01}
    noise_margin_factor: 2.0
    algorithms:
      - {type: losbo, bound: {strategy: fixed, fixed_value: 2.0}}
      - {type: safeopt, label: real_beta_safeopt,
         bound: {strategy: abbasi_yadkori, B: true_norm, R: noise, delta: 0.01}}

Within a ``bound`` block, ``B: true_norm`` means the exact RKHS norm of each
target and ``R: noise`` the sub-Gaussian constant of the noise.  A ``model``
block overrides the GP used by an algorithm (misspecification scenarios).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import yaml

from ..bounds import BoundSpec
from ..kernels import Domain, Kernel
from .problem import NoiseSpec

__all__ = [
    "ConfigError",
    "FunctionSpec",
    "ModelSpec",
    "AlgorithmSpec",
    "CampaignConfig",
    "load_config",
    "ALGORITHM_TYPES",
    "ZERO_VIOLATION_TYPES",
    "WORKERS_ENV",
    "worker_count",
]

WORKERS_ENV = "SAFEBO_WORKERS"
ALGORITHM_TYPES = ("safeopt", "losbo", "los_gp_ucb", "random_search")
# algorithms whose safety only rests on the Lipschitz and noise bounds
ZERO_VIOLATION_TYPES = ("losbo", "los_gp_ucb", "random_search")

_DEFAULT_LENGTH_SCALE = 0.2 / 2**0.5


class ConfigError(ValueError):
    pass


def worker_count():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


@dataclass
class FunctionSpec:
    source: str = "generate"
    kind: str = "se_onb"
    family: str = "se"
    length_scale: float = _DEFAULT_LENGTH_SCALE
    norm: float = 10.0
    count: int = 10
    num_terms: int = 40
    num_centers: int | None = None
    files: list = field(default_factory=list)
    benchmark: str | None = None
    domain: tuple = ((-2.0,), (2.0,))
    threshold: float | None = None

    @property
    def domain_obj(self):
        return Domain(*self.domain)

    @property
    def generation_kernel(self):
        family = "se" if self.kind == "se_onb" else self.family
        return Kernel(family, self.length_scale, 1.0)


@dataclass
class ModelSpec:
    """GP model of an algorithm; unset fields follow the target's kernel."""

    family: str | None = None
    length_scale: float | None = None
    length_scale_factor: float = 1.0
    output_variance: float = 1.0
    noise_variance: object = "R"
    prior_mean: float | None = None


@dataclass
class AlgorithmSpec:
    type: str
    label: str
    bound: dict
    model: ModelSpec
    starts_per_ball: int = 2


@dataclass
class CampaignConfig:
    name: str
    seed: int
    repetitions: int
    iterations: int
    functions: FunctionSpec
    noise: NoiseSpec
    algorithms: list
    noise_margin_factor: float = 2.0
    grid_size: int = 500
    fine_grid_size: int = 2000
    initial_set: str = "per_repetition"
    output_dir: str | None = None

    @property
    def noise_margin(self):
        return self.noise_margin_factor * self.noise.bound


def _take(d, key, default=None, cast=None):
    if key not in d or d[key] is None:
        return default
    return cast(d[key]) if cast else d[key]


def _parse_domain(raw):
    if raw is None:
        return FunctionSpec.domain
    if isinstance(raw, dict):
        return tuple(raw["lower"]), tuple(raw["upper"])
    lower, upper = zip(*raw)
    return tuple(lower), tuple(upper)


def _check_bound(bound, index):
    # placeholders stand in for values only known once the targets exist
    probe = dict(bound)
    if probe.get("B") in ("true_norm", "true"):
        probe["B"] = 1.0
    if probe.get("R") in ("noise", "R"):
        probe["R"] = 1.0
    try:
        BoundSpec(**probe)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"algorithm {index}: {exc}") from exc


def _parse_algorithm(raw, index):
    if isinstance(raw, str):
        raw = {"type": raw}
    kind = str(raw.get("type", "")).lower().replace("-", "_")
    if kind in ("real_beta_safeopt", "realbeta"):
        kind = "safeopt"
    if kind not in ALGORITHM_TYPES:
        raise ConfigError(f"algorithm {index}: unknown type {raw.get('type')!r}")
    bound = dict(raw.get("bound") or {"strategy": "fixed", "fixed_value": 2.0})
    model_raw = raw.get("model") or {}
    unknown = set(model_raw) - set(ModelSpec.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"algorithm {index}: unknown model keys {sorted(unknown)}")
    model = ModelSpec(**model_raw)
    _check_bound(bound, index)
    return AlgorithmSpec(
        type=kind,
        label=str(raw.get("label", kind)),
        bound=bound,
        model=model,
        starts_per_ball=int(raw.get("starts_per_ball", 2)),
    )


def config_from_dict(d):
    try:
        fraw = dict(d.get("functions") or {})
        fspec = FunctionSpec(
            source=str(fraw.get("source", "generate")),
            kind=str(fraw.get("kind", "se_onb")),
            family=str(fraw.get("family", "se")),
            length_scale=float(fraw.get("length_scale", _DEFAULT_LENGTH_SCALE)),
            norm=float(fraw.get("norm", 10.0)),
            count=int(fraw.get("count", 10)),
            num_terms=int(fraw.get("num_terms", 40)),
            num_centers=_take(fraw, "num_centers", None, int),
            files=list(fraw.get("files") or []),
            benchmark=fraw.get("benchmark"),
            domain=_parse_domain(fraw.get("domain")),
            threshold=_take(fraw, "threshold", None, float),
        )
        if fspec.source not in ("generate", "files", "benchmark"):
            raise ConfigError(f"unknown function source {fspec.source!r}")
        if fspec.kind not in ("se_onb", "pre_rkhs"):
            raise ConfigError(f"unknown function kind {fspec.kind!r}")
        if fspec.source == "benchmark" and not fspec.benchmark:
            raise ConfigError("functions.benchmark is required for source 'benchmark'")
        if fspec.source == "files" and not fspec.files:
            raise ConfigError("functions.files is empty")
        nraw = d.get("noise") or {}
        noise = NoiseSpec(str(nraw.get("kind", "uniform")), float(nraw.get("magnitude", 0.01)))
        algorithms = [_parse_algorithm(a, i) for i, a in enumerate(d.get("algorithms") or [])]
        if not algorithms:
            raise ConfigError("no algorithms configured")
        labels = [a.label for a in algorithms]
        if len(set(labels)) != len(labels):
            raise ConfigError("algorithm labels must be unique")
        cfg = CampaignConfig(
            name=str(d.get("name", "campaign")),
            seed=int(d.get("seed", 0)),
            repetitions=int(d.get("repetitions", 0)),
            iterations=int(d.get("iterations", 20)),
            functions=fspec,
            noise=noise,
            algorithms=algorithms,
            noise_margin_factor=float(d.get("noise_margin_factor", 2.0)),
            grid_size=int(d.get("grid_size", 500)),
            fine_grid_size=int(d.get("fine_grid_size", 2000)),
            initial_set=str(d.get("initial_set", "per_repetition")),
            output_dir=d.get("output_dir"),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if cfg.repetitions < 0 or cfg.iterations < 1:
        raise ConfigError("repetitions must be >= 0 and iterations >= 1")
    if cfg.initial_set not in ("per_repetition", "per_function"):
        raise ConfigError(f"unknown initial_set {cfg.initial_set!r}")
    return cfg


def load_config(path):
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    cfg = config_from_dict(raw)
    if cfg.functions.source == "files":
        base = os.path.dirname(os.path.abspath(path))
        cfg.functions.files = [f if os.path.isabs(f) else os.path.join(base, f) for f in cfg.functions.files]
    return cfg
