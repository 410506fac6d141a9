"""Lipschitz-only safe GP-UCB on continuous box domains.

The certified safe region after ``t`` observations is a union of closed
balls ``B(z_j, r_j)`` with ``r_j = max(0, (y_j - E - h) / L)``.  Each step
maximizes ``mu + beta * sigma`` over that union by multistart projected
gradient ascent inside every ball.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import gp as gpmod
from .bounds import beta as compute_beta
from .kernels import Domain, as_points

__all__ = [
    "SafeRegion",
    "ConfigurationError",
    "add_observation",
    "contains",
    "select_next",
    "LoSGPUCB",
    "UCBStepRecord",
    "project_to_ball_and_box",
]

MAX_ASCENT_ITERATIONS = 100
MAX_PROJECTION_ALTERNATIONS = 20
PROJECTION_TOLERANCE = 1e-10
_MAX_BACKTRACKS = 30
_ARMIJO = 1e-4
# a local search stops once its accepted step is shorter than this fraction
# of the kernel length scale
STEP_TOLERANCE = 1e-8
# ... or once its accepted gain is below this relative tolerance
GAIN_TOLERANCE = 1e-12


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SafeRegion:
    """Union of closed balls intersected with the domain box."""

    centers: np.ndarray
    radii: np.ndarray
    domain: Domain

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float).reshape(-1, self.domain.dimension)
        radii = np.array(self.radii, dtype=float).ravel()
        if len(centers) != len(radii):
            raise ValueError("need one radius per center")
        if np.any(radii < 0):
            raise ValueError("radii must be nonnegative")
        for c in centers:
            if not self.domain.contains(c):
                raise ValueError(f"ball center {c} lies outside the domain")
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @classmethod
    def from_points(cls, points, domain, radii=None):
        points = as_points(points, domain.dimension)
        radii = np.zeros(len(points)) if radii is None else radii
        return cls(points, radii, domain)

    @property
    def num_balls(self):
        return len(self.radii)

    def contains_many(self, x):
        x = as_points(x, self.domain.dimension)
        in_box = np.all((x >= self.domain.lower_array) & (x <= self.domain.upper_array), axis=1)
        if self.num_balls == 0:
            return np.zeros(len(x), dtype=bool)
        dist = np.sqrt(((x[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2))
        return in_box & np.any(dist <= self.radii[None, :], axis=1)

    def contains(self, x):
        return bool(self.contains_many(x)[0])

    def add(self, center, radius):
        return SafeRegion(np.vstack([self.centers, np.atleast_2d(center)]),
                          np.append(self.radii, radius), self.domain)


def contains(region, x):
    return region.contains(x)


def add_observation(region, x, y, lipschitz, noise_margin, threshold):
    """Region with the ball certified by the observation ``(x, y)`` appended."""
    if not lipschitz > 0:
        raise ConfigurationError("the Lipschitz bound must be positive")
    radius = max(0.0, (float(y) - noise_margin - threshold) / lipschitz)
    return region.add(np.asarray(x, dtype=float), radius)


def _in_balls(x, centers, radii):
    return np.sqrt(((x - centers) ** 2).sum(axis=1)) <= radii


def project_to_ball_and_box(x, centers, radii, lower, upper):
    """Feasible point of ``ball cap box`` for each row, by alternating projections.

    A final repair pulls any remaining infeasible point towards its (feasible)
    ball center, so every returned row is in its ball and in the box.
    """
    x = np.array(x, dtype=float)
    for _ in range(MAX_PROJECTION_ALTERNATIONS):
        prev = x
        x = np.clip(x, lower, upper)
        diff = x - centers
        norm = np.sqrt((diff**2).sum(axis=1))
        over = norm > radii
        if over.any():
            scale = np.where(over, radii / np.where(over, norm, 1.0), 1.0)
            x = centers + diff * scale[:, None]
        if np.max(np.abs(x - prev), initial=0.0) < PROJECTION_TOLERANCE:
            break
    x = np.clip(x, lower, upper)
    for shrink in (1.0, 1.0 - 1e-12, 1.0 - 1e-9, 0.0):
        bad = ~_in_balls(x, centers, radii)
        if not bad.any():
            break
        diff = x[bad] - centers[bad]
        norm = np.sqrt((diff**2).sum(axis=1))
        x[bad] = centers[bad] + diff * (shrink * radii[bad] / norm)[:, None]
    return x


def _starting_points(region, starts_per_ball, rng):
    """Ball centers first, then uniform draws inside each ball (positive radii only)."""
    d = region.domain.dimension
    centers, radii, owner = [], [], []
    for j, (z, r) in enumerate(zip(region.centers, region.radii)):
        centers.append(z)
        radii.append(r)
        owner.append(j)
        if r <= 0:
            continue
        for _ in range(starts_per_ball - 1):
            direction = rng.standard_normal(d)
            direction /= np.linalg.norm(direction)
            centers.append(z + direction * r * rng.uniform() ** (1.0 / d))
            radii.append(r)
            owner.append(j)
    return np.array(centers), np.array(radii), np.array(owner)


class _Acquisition:
    """``mu + beta * sigma`` and its gradient over a fitted posterior.

    Same algebra as :meth:`GPPosterior.predict`, with the triangular solve
    replaced by a product with the precomputed inverse Cholesky factor; the
    local searches evaluate it thousands of times on a handful of rows.
    """

    def __init__(self, posterior, beta):
        cfg = posterior.config
        self.kernel = cfg.kernel
        self.prior_mean = cfg.prior_mean
        self.prior_var = self.kernel.output_variance
        self.beta = beta
        self.floor = -gpmod.NEGATIVE_VARIANCE_TOLERANCE * self.prior_var
        self.empty = posterior.num_data == 0
        if self.empty:
            return
        self.inputs = posterior.inputs
        self.inputs_sq = (self.inputs * self.inputs).sum(axis=1)
        self.alpha = posterior._alpha
        self.linv = solve_triangular(posterior.cholesky_factor, np.eye(posterior.num_data), lower=True)

    def _parts(self, x):
        # expanded squared distances: one matmul instead of an (n, t, d) temporary
        sq = (x * x).sum(axis=1)[:, None] + self.inputs_sq[None, :] - 2.0 * (x @ self.inputs.T)
        r = np.sqrt(np.maximum(sq, 0.0))
        kx = self.kernel.from_distance(r)
        v = kx @ self.linv.T
        var = self.prior_var - (v * v).sum(axis=1)
        if var.min() < self.floor:
            raise gpmod.NumericalError(f"posterior variance {var.min():.3g} is negative")
        return r, kx, v, np.sqrt(np.maximum(var, 0.0))

    def __call__(self, x):
        if self.empty:
            return np.full(len(x), self.prior_mean + self.beta * np.sqrt(self.prior_var))
        _, kx, _, sd = self._parts(x)
        return self.prior_mean + kx @ self.alpha + self.beta * sd

    def gradient(self, x):
        if self.empty:
            return np.zeros_like(x)
        r, _, v, sd = self._parts(x)
        w = self.kernel.gradient_weight(r)

        def pull(coef):
            # sum_j coef_ij * w_ij * (x_i - z_j)
            a = coef * w
            return a.sum(axis=1)[:, None] * x - a @ self.inputs

        grad = -pull(np.broadcast_to(self.alpha, w.shape))
        # d sigma = -(sum_j c_j d k_j) / sigma with c = K^-1 k(x)
        c = v @ self.linv
        pos = sd > 0
        grad[pos] += self.beta * pull(c)[pos] / sd[pos, None]
        return grad


def _acquisition(posterior, beta):
    return _Acquisition(posterior, beta)


def _fd_gradient(acq, x, h):
    n, d = x.shape
    offsets = np.eye(d) * h
    pts = np.concatenate([x[:, None, :] + offsets[None], x[:, None, :] - offsets[None]], axis=1)
    vals = acq(pts.reshape(-1, d)).reshape(n, 2 * d)
    return (vals[:, :d] - vals[:, d:]) / (2.0 * h)


def _ascend(acq, x0, centers, radii, lower, upper, fd_step, min_step=0.0):
    """Projected gradient ascent with backtracking, run for all rows at once."""
    gradient = getattr(acq, "gradient", None)
    x = project_to_ball_and_box(x0, centers, radii, lower, upper)
    fx = acq(x)
    active = radii > 0
    step = np.maximum(radii, 1e-12)
    for _ in range(MAX_ASCENT_ITERATIONS):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        g = gradient(x[idx]) if gradient is not None else _fd_gradient(acq, x[idx], fd_step)
        gnorm = np.sqrt((g**2).sum(axis=1))
        flat = gnorm == 0
        active[idx[flat]] = False
        idx, g, gnorm = idx[~flat], g[~flat], gnorm[~flat]
        direction = g / gnorm[:, None] if idx.size else g
        alpha = np.minimum(2.0 * step[idx], 2.0 * radii[idx])
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(_MAX_BACKTRACKS):
            p = np.flatnonzero(pending)
            if p.size == 0:
                break
            rows = idx[p]
            cand = project_to_ball_and_box(x[rows] + alpha[p, None] * direction[p],
                                           centers[rows], radii[rows], lower, upper)
            move = cand - x[rows]
            disp = np.sqrt((move**2).sum(axis=1))
            fc = acq(cand)
            ok = (fc > fx[rows]) & (fc - fx[rows] >= _ARMIJO * (g[p] * move).sum(axis=1))
            tiny = disp < PROJECTION_TOLERANCE
            accept = ok & ~tiny
            small_gain = fc - fx[rows] <= GAIN_TOLERANCE * (1.0 + np.abs(fx[rows]))
            x[rows[accept]] = cand[accept]
            fx[rows[accept]] = fc[accept]
            step[rows[accept]] = alpha[p][accept]
            active[rows[(tiny & ~ok) | (accept & ((disp < min_step) | small_gain))]] = False
            pending[p[accept | tiny]] = False
            alpha[p] *= 0.5
            # trial steps below the tolerance cannot move the iterate meaningfully
            exhausted = pending[p] & (alpha[p] < min_step)
            active[rows[exhausted]] = False
            pending[p[exhausted]] = False
        # no acceptable step found: converged
        active[idx[pending]] = False
    return x, fx


def select_next(region, posterior, beta, starts_per_ball=2, rng=None, return_value=False):
    """Maximize ``mu + beta * sigma`` over the safe region.

    Every iterate is projected onto its ball and the box, so the result is
    always contained in the region.
    """
    if region.num_balls == 0:
        raise ConfigurationError("cannot select from an empty safe region")
    if starts_per_ball < 1:
        raise ValueError("starts_per_ball must be >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    dom = region.domain
    acq = _acquisition(posterior, beta)
    x0, radii, owner = _starting_points(region, starts_per_ball, rng)
    centers = region.centers[owner]
    fd_step = 1e-6 * posterior.kernel.length_scale
    x, fx = _ascend(acq, x0, centers, radii, dom.lower_array, dom.upper_array, fd_step,
                    STEP_TOLERANCE * posterior.kernel.length_scale)
    best = int(np.argmax(fx))
    x_best = x[best]
    if not region.contains(x_best):
        raise AssertionError("acquisition optimizer left the safe region")
    if return_value:
        return x_best, float(fx[best])
    return x_best


@dataclass
class UCBStepRecord:
    t: int
    x: np.ndarray
    y: float
    num_balls: int
    acquisition: float
    beta: float


@dataclass
class LoSGPUCB:
    """Per-run state of LoS-GP-UCB.

    ``initial_points`` are the known safe inputs; they enter the region as
    zero-radius balls.
    """

    domain: Domain
    oracle: object
    threshold: float
    lipschitz: float
    noise_margin: float
    initial_points: np.ndarray
    gp_config: gpmod.GPConfig
    bound_spec: object
    starts_per_ball: int = 2
    rng: object = None
    t: int = 0
    history: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if not self.lipschitz > 0:
            raise ConfigurationError("the Lipschitz bound must be positive")
        self.rng = np.random.default_rng(self.rng) if not isinstance(self.rng, np.random.Generator) else self.rng
        self.region = SafeRegion.from_points(self.initial_points, self.domain)
        if self.region.num_balls == 0:
            raise ConfigurationError("the initial safe set must be nonempty")
        self.posterior = gpmod.fit(self.gp_config, np.zeros((0, self.domain.dimension)), [])
        self.beta = compute_beta(self.bound_spec, self.posterior, 0)

    def step(self):
        x, value = select_next(self.region, self.posterior, self.beta, self.starts_per_ball,
                               self.rng, return_value=True)
        y = float(self.oracle(x))
        self.t += 1
        self.history.append((x, y))
        xs = np.array([h[0] for h in self.history])
        ys = [h[1] for h in self.history]
        self.posterior = gpmod.fit(self.gp_config, xs, ys)
        self.beta = compute_beta(self.bound_spec, self.posterior, self.t)
        self.region = add_observation(self.region, x, y, self.lipschitz, self.noise_margin, self.threshold)
        self.trace.append(UCBStepRecord(self.t, x, y, self.region.num_balls, value, self.beta))
        return x

    def run(self, iterations):
        for _ in range(iterations):
            self.step()
        return self

    def recommend(self, candidates):
        """Point maximizing the posterior mean among safe ``candidates`` and ball centers."""
        candidates = as_points(candidates, self.domain.dimension)
        pts = np.vstack([self.region.centers, candidates[self.region.contains_many(candidates)]])
        return pts[int(np.argmax(self.posterior.mean(pts)))]
