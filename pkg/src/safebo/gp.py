"""Exact GP regression with a constant prior mean."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .kernels import Kernel, as_points

__all__ = [
    "GPConfig",
    "GPPosterior",
    "NumericalError",
    "fit",
    "posterior_mean",
    "posterior_variance",
    "log_det_scaled",
    "NEGATIVE_VARIANCE_TOLERANCE",
]

# relative to output_variance; anything below -tol * output_variance is an error
NEGATIVE_VARIANCE_TOLERANCE = 1e-10
_JITTER = 1e-10


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class GPConfig:
    """Kernel, nominal noise variance ``noise_variance`` (lambda) and prior mean."""

    kernel: Kernel
    noise_variance: float
    prior_mean: float = 0.0

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        object.__setattr__(self, "prior_mean", float(self.prior_mean))


class GPPosterior:
    """Fitted posterior; holds the Cholesky factor of ``K + lambda I``.

    Instances are not modified after :func:`fit` apart from
    ``clamped_variances``, a diagnostic counter of tiny negative variances
    that were clamped to zero.
    """

    def __init__(self, config, inputs, targets, cholesky_factor, jittered=False):
        self.config = config
        self.inputs = inputs
        self.targets = targets
        self.cholesky_factor = cholesky_factor
        self.jittered = jittered
        self.clamped_variances = 0
        centered = targets - config.prior_mean
        if len(targets):
            self._alpha = solve_triangular(
                cholesky_factor.T,
                solve_triangular(cholesky_factor, centered, lower=True, check_finite=False),
                lower=False,
                check_finite=False,
            )
        else:
            self._alpha = np.zeros(0)

    @property
    def num_data(self):
        return len(self.targets)

    @property
    def kernel(self):
        return self.config.kernel

    @property
    def dimension(self):
        return self.inputs.shape[1]

    def predict(self, x, return_std=False):
        """Posterior mean and variance (or standard deviation) at the rows of ``x``."""
        x = as_points(x, self.dimension)
        kern = self.config.kernel
        prior_var = kern.output_variance
        if self.num_data == 0:
            mean = np.full(x.shape[0], self.config.prior_mean)
            var = np.full(x.shape[0], prior_var)
        else:
            kx = kern(x, self.inputs)
            mean = self.config.prior_mean + kx @ self._alpha
            v = solve_triangular(self.cholesky_factor, kx.T, lower=True, check_finite=False)
            var = prior_var - np.einsum("ij,ij->j", v, v)
            negative = var < 0
            if negative.any():
                if var.min() < -NEGATIVE_VARIANCE_TOLERANCE * prior_var:
                    raise NumericalError(f"posterior variance {var.min():.3g} is negative")
                self.clamped_variances += int(negative.sum())
                var = np.where(negative, 0.0, var)
        if return_std:
            return mean, np.sqrt(var)
        return mean, var

    def mean(self, x):
        return self.predict(x)[0]

    def variance(self, x):
        return self.predict(x)[1]

    def log_det_scaled(self):
        """ln det(I + K / lambda) from the Cholesky factor of K + lambda I."""
        t = self.num_data
        if t == 0:
            return 0.0
        return float(2.0 * np.sum(np.log(np.diag(self.cholesky_factor))) - t * np.log(self.config.noise_variance))


def fit(config, inputs, targets):
    """Condition the prior on ``(inputs, targets)``; ``t = 0`` gives the prior."""
    targets = np.asarray(targets, dtype=float).ravel()
    inputs = np.asarray(inputs, dtype=float)
    # 1d input arrays are read as n scalar inputs
    if inputs.ndim == 1:
        inputs = inputs.reshape(-1, 1)
    if inputs.ndim != 2:
        raise ValueError("inputs must be an (n, d) array")
    if inputs.shape[0] != len(targets):
        raise ValueError(f"{inputs.shape[0]} inputs but {len(targets)} targets")
    t = len(targets)
    if t == 0:
        return GPPosterior(config, inputs, targets, np.zeros((0, 0)))
    kern = config.kernel
    K = kern(inputs)
    A = 0.5 * (K + K.T) + config.noise_variance * np.eye(t)
    jittered = False
    try:
        L = cholesky(A, lower=True, check_finite=False)
    except LinAlgError:
        jittered = True
        try:
            L = cholesky(A + _JITTER * kern.output_variance * np.eye(t), lower=True, check_finite=False)
        except LinAlgError as exc:
            raise NumericalError("Cholesky factorization failed after jitter") from exc
    return GPPosterior(config, inputs, targets, L, jittered)


def posterior_mean(posterior, x):
    return posterior.mean(x)


def posterior_variance(posterior, x):
    return posterior.variance(x)


def log_det_scaled(posterior):
    return posterior.log_det_scaled()
