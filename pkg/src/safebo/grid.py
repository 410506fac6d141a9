"""SafeOpt and LoSBO on a finite input grid.

Both variants share one state machine; they differ only in how the safe set
grows.  SafeOpt certifies new inputs from the lower confidence bounds of the
safe inputs, LoSBO from the most recent noisy observation, its noise bound
``E`` and the Lipschitz constant.  Real-beta-SafeOpt is SafeOpt driven by an
Abbasi-Yadkori :class:`~safebo.bounds.BoundSpec`.

Confidence intervals ``C_t`` are stored as ``lower``/``upper`` arrays over
the grid, with the unbounded interval represented by ``+-HUGE``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gp as gpmod
from .bounds import beta as compute_beta
from .kernels import pairwise_distances

__all__ = [
    "SAFEOPT",
    "LOSBO",
    "RUNNING",
    "STUCK",
    "HUGE",
    "GridProblem",
    "GridSafeBO",
    "StepRecord",
    "intersect_intervals",
    "update_safe_set_safeopt",
    "update_safe_set_losbo",
    "compute_expanders",
    "compute_maximizers",
    "select_query",
]

SAFEOPT = "safeopt"
LOSBO = "losbo"
RUNNING = "running"
STUCK = "stuck"
HUGE = 1e12


class ConfigurationError(ValueError):
    pass


@dataclass
class GridProblem:
    """Discretized safe optimization problem.

    ``oracle(x)`` returns a noisy observation of the target at the grid point
    ``x``.  ``noise_margin`` is the noise bound ``E`` used by LoSBO.
    """

    grid: np.ndarray
    oracle: Callable
    threshold: float
    lipschitz: float
    initial_safe: tuple
    noise_margin: float = 0.0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim == 1:
            self.grid = self.grid.reshape(-1, 1)
        self.initial_safe = tuple(int(i) for i in np.atleast_1d(self.initial_safe))
        if not self.initial_safe:
            raise ConfigurationError("the initial safe set must be nonempty")
        n = len(self.grid)
        if any(i < 0 or i >= n for i in self.initial_safe):
            raise ConfigurationError("initial safe index outside the grid")
        if not self.lipschitz > 0:
            raise ConfigurationError("the Lipschitz bound must be positive")
        if self.noise_margin < 0:
            raise ConfigurationError("the noise margin must be nonnegative")


@dataclass
class StepRecord:
    t: int
    index: int | None
    x: np.ndarray | None
    y: float | None
    safe_size: int
    expanders: int
    maximizers: int
    beta: float
    status: str


def intersect_intervals(lower, upper, q_lower, q_upper):
    """``C_{t-1} cap Q_{t-1}``, collapsing an empty intersection to the nearest endpoint.

    An empty intersection only happens when the confidence intervals are
    invalid; the result stays nested in ``C_{t-1}`` and ordered.
    """
    new_lower = np.minimum(np.maximum(lower, q_lower), upper)
    new_upper = np.maximum(np.minimum(upper, q_upper), new_lower)
    return new_lower, new_upper


def update_safe_set_safeopt(safe, lower, distances, lipschitz, threshold):
    """``S_{t-1} cup {x : exists s in S_{t-1}, l_t(s) - L d(s, x) >= h}``."""
    new = safe.copy()
    # l(s) - L d >= h needs l(s) >= h since d >= 0
    sources = np.flatnonzero(safe & (lower >= threshold))
    if sources.size == 0:
        return new
    targets = np.flatnonzero(~safe)
    if targets.size == 0:
        return new
    cone = lower[sources, None] - lipschitz * distances[np.ix_(sources, targets)] >= threshold
    new[targets[cone.any(axis=0)]] = True
    return new


def update_safe_set_losbo(safe, last_index, last_y, distances, lipschitz, noise_margin, threshold):
    """``S_{t-1} cup {x : y_{t-1} - E - L d(x_{t-1}, x) >= h}``."""
    new = safe.copy()
    if last_index is None:
        return new
    new |= last_y - noise_margin - lipschitz * distances[last_index] >= threshold
    return new


def compute_expanders(safe, upper, distances, lipschitz, threshold):
    """Safe points whose optimistic Lipschitz cone reaches an unsafe grid point."""
    expanders = np.zeros_like(safe)
    outside = np.flatnonzero(~safe)
    if outside.size == 0:
        return expanders
    candidates = np.flatnonzero(safe & (upper >= threshold))
    if candidates.size == 0:
        return expanders
    nearest = distances[np.ix_(candidates, outside)].min(axis=1)
    expanders[candidates[upper[candidates] - lipschitz * nearest >= threshold]] = True
    return expanders


def compute_maximizers(safe, lower, upper):
    """Safe points whose upper bound reaches the best safe lower bound."""
    maximizers = np.zeros_like(safe)
    if not safe.any():
        return maximizers
    best_lower = lower[safe].max()
    maximizers[safe] = upper[safe] >= best_lower
    return maximizers


def select_query(candidates, lower, upper):
    """Index of the widest interval among ``candidates`` (lowest index on ties), or None."""
    if not candidates.any():
        return None
    width = np.where(candidates, upper - lower, -np.inf)
    return int(np.argmax(width))


@dataclass
class GridSafeBO:
    """Per-run state of SafeOpt/LoSBO.

    Call :meth:`step` repeatedly; each call performs one full iteration
    (interval update, safe set, expanders, maximizers, query, GP refit).
    """

    problem: GridProblem
    variant: str
    bound_spec: object
    gp_config: gpmod.GPConfig
    distances: np.ndarray | None = None
    t: int = 0
    status: str = RUNNING
    history: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.variant not in (SAFEOPT, LOSBO):
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        grid = self.problem.grid
        n = len(grid)
        if self.distances is None:
            self.distances = pairwise_distances(grid, grid)
        h = self.problem.threshold
        self.initial_mask = np.zeros(n, dtype=bool)
        self.initial_mask[list(self.problem.initial_safe)] = True
        # C_0 = [h, inf) on S_0, R elsewhere; Q_0 = R
        self.lower = np.where(self.initial_mask, h, -HUGE)
        self.upper = np.full(n, HUGE)
        self.q_lower = np.full(n, -HUGE)
        self.q_upper = np.full(n, HUGE)
        self.safe = self.initial_mask.copy()
        self.expanders = np.zeros(n, dtype=bool)
        self.maximizers = np.zeros(n, dtype=bool)
        self.posterior = gpmod.fit(self.gp_config, np.zeros((0, grid.shape[1])), [])
        self.beta = float("nan")
        self.grid_mean = np.full(n, self.gp_config.prior_mean)
        self.ever_expanded = False

    @property
    def num_grid(self):
        return len(self.problem.grid)

    def update_intervals(self):
        self.lower, self.upper = intersect_intervals(self.lower, self.upper, self.q_lower, self.q_upper)

    def update_safe_set(self):
        p = self.problem
        if self.variant == SAFEOPT:
            return update_safe_set_safeopt(self.safe, self.lower, self.distances, p.lipschitz, p.threshold)
        last_index, _, last_y = self.history[-1] if self.history else (None, None, None)
        return update_safe_set_losbo(self.safe, last_index, last_y, self.distances,
                                     p.lipschitz, p.noise_margin, p.threshold)

    def step(self):
        """Run one iteration; returns the queried grid index, or None when stuck."""
        if self.status != RUNNING:
            raise RuntimeError(f"cannot step a run with status {self.status!r}")
        p = self.problem
        t = self.t + 1
        self.update_intervals()
        if t > 1:
            self.safe = self.update_safe_set()
            if not self.ever_expanded and (self.safe & ~self.initial_mask).any():
                self.ever_expanded = True
        self.expanders = compute_expanders(self.safe, self.upper, self.distances, p.lipschitz, p.threshold)
        self.maximizers = compute_maximizers(self.safe, self.lower, self.upper)
        index = select_query(self.expanders | self.maximizers, self.lower, self.upper)
        self.t = t
        if index is None:
            self.status = STUCK
            self._record(t, None, None, None)
            return None
        x = p.grid[index]
        y = float(p.oracle(x))
        self.history.append((index, x, y))
        self.refit()
        self._record(t, index, x, y)
        return index

    def refit(self):
        idx = [h[0] for h in self.history]
        ys = [h[2] for h in self.history]
        self.posterior = gpmod.fit(self.gp_config, self.problem.grid[idx], ys)
        self.beta = compute_beta(self.bound_spec, self.posterior, self.t)
        mean, std = self.posterior.predict(self.problem.grid, return_std=True)
        self.grid_mean = mean
        self.q_lower = mean - self.beta * std
        self.q_upper = mean + self.beta * std

    def _record(self, t, index, x, y):
        self.trace.append(StepRecord(
            t=t, index=index, x=None if x is None else np.array(x), y=y,
            safe_size=int(self.safe.sum()), expanders=int(self.expanders.sum()),
            maximizers=int(self.maximizers.sum()), beta=self.beta, status=self.status,
        ))

    def recommend(self):
        """Grid index maximizing the posterior mean over the current safe set."""
        mean = self.grid_mean
        return int(np.argmax(np.where(self.safe, mean, -np.inf)))

    def run(self, iterations):
        for _ in range(iterations):
            if self.status != RUNNING:
                break
            self.step()
        return self
