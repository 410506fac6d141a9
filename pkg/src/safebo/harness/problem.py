"""Turning a known target function into a safe optimization instance.

The recipe follows the synthetic experiments: the Lipschitz bound is 1.1
times the largest slope found on a fine grid, the safety threshold is
``mean - 0.2 * sd`` of the target on that grid, and the initial safe input is
drawn from the grid points of the contiguous super-level interval
``{f >= h + E}`` around the grid maximizer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kernels import Domain, as_points

__all__ = [
    "UNIFORM",
    "NORMAL",
    "NONE",
    "NoiseSpec",
    "InstanceRejected",
    "ProblemInstance",
    "estimate_lipschitz",
    "compute_threshold",
    "initial_interval",
    "pick_initial_safe_set",
    "pick_initial_safe_index",
    "normalized_metric",
    "normalized_value",
    "prepare_instance",
    "LIPSCHITZ_SAFETY_FACTOR",
    "THRESHOLD_SD_FACTOR",
]

UNIFORM = "uniform"
NORMAL = "normal"
NONE = "none"

LIPSCHITZ_SAFETY_FACTOR = 1.1
THRESHOLD_SD_FACTOR = 0.2
_MC_SAMPLES = 200_000
_MAX_GRID_POINTS = 4_000_000


class InstanceRejected(ValueError):
    """The target does not admit a nondegenerate instance; regenerate it."""


@dataclass(frozen=True)
class NoiseSpec:
    """Additive observation noise.

    ``magnitude`` is the bound ``B_eps`` for uniform noise on
    ``[-B_eps, B_eps]`` and the variance for normal noise.
    """

    kind: str = UNIFORM
    magnitude: float = 0.01

    def __post_init__(self):
        kind = str(self.kind).lower().replace("-", "_")
        kind = {"uniformbounded": UNIFORM, "uniform_bounded": UNIFORM, "gaussian": NORMAL,
                "truncated_none": NONE, "truncatednone": NONE, "zero": NONE}.get(kind, kind)
        if kind not in (UNIFORM, NORMAL, NONE):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind != NONE and not self.magnitude > 0:
            raise ValueError("noise magnitude must be positive")

    def sample(self, rng, size=None):
        if self.kind == UNIFORM:
            return rng.uniform(-self.magnitude, self.magnitude, size=size)
        if self.kind == NORMAL:
            return rng.normal(0.0, np.sqrt(self.magnitude), size=size)
        return np.zeros(size) if size is not None else 0.0

    @property
    def bound(self):
        """Almost-sure bound on |noise| (inf for normal noise)."""
        if self.kind == UNIFORM:
            return float(self.magnitude)
        if self.kind == NORMAL:
            return float("inf")
        return 0.0

    @property
    def subgaussian_constant(self):
        if self.kind == UNIFORM:
            return float(self.magnitude)
        if self.kind == NORMAL:
            return float(np.sqrt(self.magnitude))
        return 0.0


def _evaluation_points(domain, grid_size, seed=0):
    """Fine grid when affordable, otherwise seeded uniform samples."""
    if grid_size ** domain.dimension <= _MAX_GRID_POINTS:
        return domain.grid(grid_size), True
    return domain.uniform(np.random.default_rng(seed), _MC_SAMPLES), False


def estimate_lipschitz(target, domain, grid_size=2000):
    """1.1 times the largest finite-difference slope of ``target`` on a grid.

    In 1d the slopes are between adjacent grid points.  In higher dimension
    the gradient is estimated from forward differences to the grid neighbours
    (or from central differences at random samples when a grid is too large).
    """
    d = domain.dimension
    if d == 1:
        x = np.linspace(domain.lower[0], domain.upper[0], grid_size)
        f = np.asarray(target(x.reshape(-1, 1)), dtype=float).ravel()
        slope = np.max(np.abs(np.diff(f)) / np.diff(x))
        return LIPSCHITZ_SAFETY_FACTOR * float(slope)
    pts, on_grid = _evaluation_points(domain, grid_size)
    if on_grid:
        shape = (grid_size,) * d
        f = np.asarray(target(pts), dtype=float).reshape(shape)
        steps = (domain.upper_array - domain.lower_array) / (grid_size - 1)
        sq = np.zeros(tuple(n - 1 for n in shape))
        for axis in range(d):
            diff = np.diff(f, axis=axis) / steps[axis]
            sl = tuple(slice(0, grid_size - 1) for _ in range(d))
            sq += diff[sl] ** 2
        return LIPSCHITZ_SAFETY_FACTOR * float(np.sqrt(sq.max()))
    h = 1e-6 * float(np.min(domain.upper_array - domain.lower_array))
    inner = np.clip(pts, domain.lower_array + h, domain.upper_array - h)
    grads = np.empty_like(inner)
    for axis in range(d):
        e = np.zeros(d)
        e[axis] = h
        grads[:, axis] = (np.asarray(target(inner + e)) - np.asarray(target(inner - e))) / (2 * h)
    return LIPSCHITZ_SAFETY_FACTOR * float(np.sqrt((grads**2).sum(axis=1)).max())


def compute_threshold(target, domain, grid_size=2000):
    """``mean(f) - 0.2 * sd(f)`` over a fine grid (population sd)."""
    pts, _ = _evaluation_points(domain, grid_size)
    values = np.asarray(target(pts), dtype=float).ravel()
    return float(values.mean() - THRESHOLD_SD_FACTOR * values.std())


def initial_interval(values, level):
    """Index range [lo, hi] of the contiguous run ``values >= level`` around the argmax."""
    values = np.asarray(values, dtype=float)
    top = int(np.argmax(values))
    if values[top] < level:
        raise InstanceRejected("no grid point satisfies f >= h + E")
    lo = top
    while lo > 0 and values[lo - 1] >= level:
        lo -= 1
    hi = top
    while hi < len(values) - 1 and values[hi + 1] >= level:
        hi += 1
    return lo, hi


def pick_initial_safe_index(values, threshold, noise_margin, rng):
    """Grid index drawn uniformly from the super-level interval of ``h + E``."""
    lo, hi = initial_interval(values, threshold + noise_margin)
    return int(rng.integers(lo, hi + 1))


def pick_initial_safe_set(target, domain, h, E, rng_seed=None, grid=None):
    """Singleton initial safe set for a 1d target, as an array of shape (1, 1).

    ``grid`` is the candidate set (default: 500 uniform points of the domain).
    """
    if domain.dimension != 1:
        raise ValueError("initial-set rule is defined for 1d targets")
    grid = domain.grid(500) if grid is None else as_points(grid, 1)
    values = np.asarray(target(grid), dtype=float).ravel()
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return grid[[pick_initial_safe_index(values, h, E, rng)]]


def normalized_value(value, f_star, h):
    """``(f(x) - h) / (f* - h)``; not clamped."""
    return (value - h) / (f_star - h)


def normalized_metric(target, posterior, safe_points, h, f_star):
    """Normalized value of the safe point maximizing the posterior mean."""
    safe_points = as_points(safe_points, posterior.dimension)
    if len(safe_points) == 0:
        raise ValueError("the safe set is empty")
    best = safe_points[int(np.argmax(posterior.mean(safe_points)))]
    return normalized_value(float(np.asarray(target(best[None, :])).ravel()[0]), f_star, h)


@dataclass
class ProblemInstance:
    """Target with its threshold, Lipschitz bound, noise and search grid.

    ``grid_values`` are the exact target values on ``grid``; ``f_star`` is the
    fine-grid maximum of the target.
    """

    target: object
    domain: Domain
    grid: np.ndarray
    grid_values: np.ndarray
    threshold: float
    lipschitz: float
    noise_margin: float
    noise: NoiseSpec
    f_star: float
    rkhs_norm: float | None = None

    def __post_init__(self):
        if not self.f_star > self.threshold:
            raise InstanceRejected("degenerate instance: f* <= h")
        if not self.lipschitz > 0:
            raise InstanceRejected("constant target: Lipschitz estimate is zero")

    def draw_initial_index(self, rng):
        index = pick_initial_safe_index(self.grid_values, self.threshold, self.noise_margin, rng)
        if self.grid_values[index] < self.threshold:
            raise InstanceRejected("initial safe input is unsafe")
        return index


def prepare_instance(target, domain, noise, noise_margin, grid_size=500, fine_grid_size=2000,
                     rkhs_norm=None):
    """Build a 1d instance from a known target."""
    grid = domain.grid(grid_size)
    fine = domain.grid(fine_grid_size)
    fine_values = np.asarray(target(fine), dtype=float).ravel()
    h = float(fine_values.mean() - THRESHOLD_SD_FACTOR * fine_values.std())
    L = estimate_lipschitz(target, domain, fine_grid_size)
    grid_values = np.asarray(target(grid), dtype=float).ravel()
    f_star = float(max(fine_values.max(), grid_values.max()))
    inst = ProblemInstance(target, domain, grid, grid_values, h, L, noise_margin, noise, f_star, rkhs_norm)
    initial_interval(grid_values, h + noise_margin)
    return inst
