"""How often does a heuristic scaling ``beta`` fail to cover the target?

For each random Gaussian-RKHS target and each random data set, a GP is fitted
and the band ``mu +- beta * sigma`` is checked on a fine grid; a data set
counts as a violation if the target leaves the band anywhere on the grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import gp as gpmod
from ..kernels import Domain, Kernel
from ..rkhs import GENERATION_DOMAIN, sample_se_onb

__all__ = ["BoundCheckConfig", "BoundCheckResult", "heuristic_bound_violation_experiment", "band_violated"]

DATASET_STREAM = 4


@dataclass
class BoundCheckConfig:
    num_functions: int = 20
    num_datasets: int = 200
    num_inputs: int = 100
    norm: float = 10.0
    length_scale: float = 0.2 / np.sqrt(2.0)
    num_terms: int = 40
    noise_variance: float = 0.01
    beta: float = 2.0
    grid_size: int = 1000
    seed: int = 0
    input_domain: Domain = field(default_factory=lambda: Domain.interval(0.0, 1.0))
    check_domain: Domain = GENERATION_DOMAIN

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("input_domain", "check_domain"):
            if key in d:
                lo, hi = d[key]
                d[key] = Domain.interval(float(lo), float(hi))
        return cls(**d)


@dataclass
class BoundCheckResult:
    config: BoundCheckConfig
    violations: np.ndarray  # (num_functions, num_datasets) booleans

    @property
    def per_function_counts(self):
        return self.violations.sum(axis=1)

    @property
    def mean_count(self):
        return float(self.per_function_counts.mean())

    @property
    def sd_count(self):
        return float(self.per_function_counts.std())

    @property
    def fraction(self):
        return float(self.violations.mean()) if self.violations.size else 0.0


def band_violated(target_values, mean, std, beta):
    """True if ``|f - mu| > beta * sigma`` at any grid point."""
    return bool(np.any(np.abs(target_values - mean) > beta * std))


def heuristic_bound_violation_experiment(cfg=None, progress=None):
    """Violation indicators for every (function, data set) pair."""
    cfg = cfg or BoundCheckConfig()
    grid = cfg.check_domain.grid(cfg.grid_size)
    kernel = Kernel("se", cfg.length_scale, 1.0)
    gp_config = gpmod.GPConfig(kernel, cfg.noise_variance, 0.0)
    noise_sd = np.sqrt(cfg.noise_variance)
    out = np.zeros((cfg.num_functions, cfg.num_datasets), dtype=bool)
    for fid in range(cfg.num_functions):
        f = sample_se_onb(cfg.length_scale, cfg.check_domain, cfg.num_terms, cfg.norm,
                          np.random.default_rng(np.random.SeedSequence([cfg.seed, 0, fid, 0])))
        f_grid = f(grid)
        for rep in range(cfg.num_datasets):
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, DATASET_STREAM, fid, rep]))
            x = cfg.input_domain.uniform(rng, cfg.num_inputs)
            y = f(x) + rng.normal(0.0, noise_sd, size=cfg.num_inputs)
            post = gpmod.fit(gp_config, x, y)
            mean, std = post.predict(grid, return_std=True)
            out[fid, rep] = band_violated(f_grid, mean, std, cfg.beta)
        if progress:
            progress(fid + 1, cfg.num_functions)
    return BoundCheckResult(cfg, out)
