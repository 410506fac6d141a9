"""Covariance functions, the input metric and Gram matrices.

The squared-exponential kernel is parameterized as

    k(x, x') = output_variance * exp(-||x - x'||^2 / (2 * length_scale^2)),

i.e. with the factor 2 in the denominator.  The orthonormal basis used in
:mod:`safebo.rkhs` is written in terms of ``sigma^2 = 1 / (2 length_scale^2)``
and therefore depends on this convention.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "SQUARED_EXPONENTIAL",
    "MATERN32",
    "Kernel",
    "Domain",
    "metric",
    "pairwise_distances",
    "gram",
    "as_points",
]

SQUARED_EXPONENTIAL = "se"
MATERN32 = "matern32"

_FAMILY_ALIASES = {
    "se": SQUARED_EXPONENTIAL,
    "squaredexponential": SQUARED_EXPONENTIAL,
    "squared_exponential": SQUARED_EXPONENTIAL,
    "rbf": SQUARED_EXPONENTIAL,
    "matern32": MATERN32,
    "matern-3/2": MATERN32,
    "matern_32": MATERN32,
}

_SQRT3 = np.sqrt(3.0)


def as_points(x, dim=None):
    """Return ``x`` as a 2d float array of shape (n, dim).

    A scalar or 1d array is read as a single point when ``dim`` matches its
    length, otherwise (for ``dim == 1``) as a column of 1d points.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        if dim is None or dim == x.shape[0]:
            x = x.reshape(1, -1)
        elif dim == 1:
            x = x.reshape(-1, 1)
        else:
            raise ValueError(f"cannot read shape {x.shape} as points of dimension {dim}")
    elif x.ndim != 2:
        raise ValueError(f"points must be at most 2d, got shape {x.shape}")
    if dim is not None and x.shape[1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {x.shape[1]}")
    return x


def metric(x, x_prime):
    """Euclidean distance between two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != x_prime.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    return float(np.linalg.norm(x - x_prime))


def pairwise_distances(a, b):
    """Matrix of Euclidean distances between the rows of ``a`` and ``b``."""
    a = as_points(a)
    b = as_points(b, a.shape[1])
    return cdist(a, b)


@dataclass(frozen=True)
class Kernel:
    """Stationary isotropic kernel.

    Parameters
    ----------
    family : str
        ``"se"`` (squared exponential) or ``"matern32"``.
    length_scale : float
        Positive length scale, same units as the inputs.
    output_variance : float
        Positive signal variance, ``k(x, x)``.
    """

    family: str = SQUARED_EXPONENTIAL
    length_scale: float = 1.0
    output_variance: float = 1.0

    def __post_init__(self):
        key = str(self.family).lower().replace(" ", "")
        if key not in _FAMILY_ALIASES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", _FAMILY_ALIASES[key])
        if not self.length_scale > 0:
            raise ValueError("length_scale must be positive")
        if not self.output_variance > 0:
            raise ValueError("output_variance must be positive")
        object.__setattr__(self, "length_scale", float(self.length_scale))
        object.__setattr__(self, "output_variance", float(self.output_variance))

    def from_distance(self, r):
        """Kernel value as a function of the distance ``r`` (array-valued)."""
        r = np.asarray(r, dtype=float)
        if self.family == SQUARED_EXPONENTIAL:
            return self.output_variance * np.exp(-0.5 * (r / self.length_scale) ** 2)
        s = _SQRT3 * r / self.length_scale
        return self.output_variance * (1.0 + s) * np.exp(-s)

    def gradient_weight(self, r):
        """``w(r)`` with ``grad_x k(x, z) = -w(|x - z|) * (x - z)``."""
        r = np.asarray(r, dtype=float)
        if self.family == SQUARED_EXPONENTIAL:
            return self.from_distance(r) / self.length_scale**2
        s = _SQRT3 * r / self.length_scale
        return 3.0 * self.output_variance / self.length_scale**2 * np.exp(-s)

    def eval(self, x, x_prime):
        """k(x, x') for two single points."""
        return float(self.from_distance(metric(x, x_prime)))

    def __call__(self, a, b=None):
        """Cross-covariance matrix between two point sets."""
        a = as_points(a)
        b = a if b is None else as_points(b, a.shape[1])
        if self.family == SQUARED_EXPONENTIAL:
            sq = cdist(a, b, "sqeuclidean")
            return self.output_variance * np.exp(-0.5 * sq / self.length_scale**2)
        return self.from_distance(cdist(a, b))

    def diag(self, a):
        """Prior variances k(x, x) for each row of ``a``."""
        return np.full(as_points(a).shape[0], self.output_variance)

    def scaled(self, length_scale_factor=1.0, family=None):
        """Copy with a rescaled length scale and/or another family."""
        return Kernel(
            family=self.family if family is None else family,
            length_scale=self.length_scale * length_scale_factor,
            output_variance=self.output_variance,
        )

    def to_dict(self):
        return {
            "family": self.family,
            "length_scale": self.length_scale,
            "output_variance": self.output_variance,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            family=d.get("family", SQUARED_EXPONENTIAL),
            length_scale=float(d["length_scale"]),
            output_variance=float(d.get("output_variance", 1.0)),
        )


def gram(kernel, points):
    """Gram matrix ``[k(x_i, x_j)]`` of a list of points (0x0 when empty)."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return np.zeros((0, 0))
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    K = kernel(points)
    # exact symmetry; cdist can differ in the last bit across the diagonal
    return 0.5 * (K + K.T)


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower, upper]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper) or not lower:
            raise ValueError("lower and upper must be nonempty and of equal length")
        if any(lo >= up for lo, up in zip(lower, upper)):
            raise ValueError("need lower[i] < upper[i] for every coordinate")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def interval(cls, lo, hi):
        return cls((lo,), (hi,))

    @classmethod
    def cube(cls, lo, hi, dim):
        return cls((lo,) * dim, (hi,) * dim)

    @property
    def dimension(self):
        return len(self.lower)

    @property
    def lower_array(self):
        return np.array(self.lower)

    @property
    def upper_array(self):
        return np.array(self.upper)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower_array) and np.all(x <= self.upper_array))

    def clip(self, x):
        return np.clip(x, self.lower_array, self.upper_array)

    def uniform(self, rng, n):
        """``n`` points drawn uniformly from the box."""
        return rng.uniform(self.lower_array, self.upper_array, size=(n, self.dimension))

    def grid(self, size):
        """Uniform grid with ``size`` points per coordinate, shape (size**d, d)."""
        axes = [np.linspace(lo, up, size) for lo, up in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
