"""Benchmark targets for the continuous-domain experiments.

All three are maximization problems with values in [0, 1]:

* ``camelback2``: six-hump camel on [-2, 2] x [-1, 1], negated and rescaled;
* ``hartmann6``: six-dimensional Hartmann on [0, 1]^6, negated and divided by
  its optimal value;
* ``gaussian10``: ``exp(-4 ||x||^2)`` on [-1, 1]^10.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..kernels import Domain, as_points

__all__ = [
    "Benchmark",
    "BENCHMARKS",
    "benchmark",
    "get_benchmark",
    "camelback2",
    "hartmann6",
    "gaussian10",
    "gaussian10_level_radius",
]

# six-hump camel: global minimum from a tight local solve started at
# (0.0898, -0.7126); the maximum on the box is 86/15 at the corner (-2, -1),
# checked on a 4001 x 2001 grid.
CAMELBACK_MIN = -1.0316284534898768
CAMELBACK_MAX = 86.0 / 15.0
# max of the rescaled gradient norm on the grid above, times 1.1
CAMELBACK_LIPSCHITZ = 1.1 * 2.513450492035987

# Hartmann-6 optimum from a tight local solve at the published minimizer
HARTMANN6_OPT = 3.3223680114155134
# max gradient norm of the rescaled function: 2e6 uniform samples followed by
# local maximization from the 50 largest, times 1.1
HARTMANN6_LIPSCHITZ = 1.1 * 3.407885525133054

# exp(-4 r^2) has maximal slope 2 sqrt(2) exp(-1/2) at r = 1 / (2 sqrt(2))
GAUSSIAN10_LIPSCHITZ = 1.1 * 2.0 * np.sqrt(2.0) * np.exp(-0.5)
GAUSSIAN10_START_LEVEL = 0.4

_H6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
_H6_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])
_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])


def _check_box(x, domain):
    if np.any(x < domain.lower_array) or np.any(x > domain.upper_array):
        raise ValueError("input outside the benchmark box")


def _vectorized(func, domain):
    def wrapped(x):
        arr = np.asarray(x, dtype=float)
        pts = as_points(arr, domain.dimension)
        _check_box(pts, domain)
        out = func(pts)
        return float(out[0]) if arr.ndim <= 1 else out
    return wrapped


def _camelback(x):
    x1, x2 = x[:, 0], x[:, 1]
    raw = (4.0 - 2.1 * x1**2 + x1**4 / 3.0) * x1**2 + x1 * x2 + (-4.0 + 4.0 * x2**2) * x2**2
    return (CAMELBACK_MAX - raw) / (CAMELBACK_MAX - CAMELBACK_MIN)


def _hartmann6(x):
    d = x[:, None, :] - _H6_P[None]
    inner = np.einsum("ij,nij->ni", _H6_A, d**2)
    return np.exp(-inner) @ _H6_ALPHA / HARTMANN6_OPT


def _gaussian(x):
    return np.exp(-4.0 * np.sum(x**2, axis=1))


@dataclass(frozen=True)
class Benchmark:
    name: str
    domain: Domain
    function: Callable
    lipschitz: float
    optimum: float

    def __call__(self, x):
        return self.function(x)

    @property
    def dimension(self):
        return self.domain.dimension


_CAMEL_DOMAIN = Domain((-2.0, -1.0), (2.0, 1.0))
_H6_DOMAIN = Domain.cube(0.0, 1.0, 6)
_G10_DOMAIN = Domain.cube(-1.0, 1.0, 10)

BENCHMARKS = {
    "camelback2": Benchmark("camelback2", _CAMEL_DOMAIN, _vectorized(_camelback, _CAMEL_DOMAIN),
                            CAMELBACK_LIPSCHITZ, 1.0),
    "hartmann6": Benchmark("hartmann6", _H6_DOMAIN, _vectorized(_hartmann6, _H6_DOMAIN),
                           HARTMANN6_LIPSCHITZ, 1.0),
    "gaussian10": Benchmark("gaussian10", _G10_DOMAIN, _vectorized(_gaussian, _G10_DOMAIN),
                            GAUSSIAN10_LIPSCHITZ, 1.0),
}

_ALIASES = {"camelback": "camelback2", "hartmann": "hartmann6", "gaussian": "gaussian10"}


def get_benchmark(name):
    key = str(name).lower()
    key = _ALIASES.get(key, key)
    if key not in BENCHMARKS:
        raise KeyError(f"unknown benchmark {name!r}")
    return BENCHMARKS[key]


def benchmark(name, x):
    """Value of the named benchmark at ``x``."""
    return get_benchmark(name)(x)


def camelback2(x):
    return BENCHMARKS["camelback2"](x)


def hartmann6(x):
    return BENCHMARKS["hartmann6"](x)


def gaussian10(x):
    return BENCHMARKS["gaussian10"](x)


def gaussian10_level_radius(level=GAUSSIAN10_START_LEVEL):
    """Radius r with exp(-4 r^2) = level."""
    return float(np.sqrt(np.log(1.0 / level) / 4.0))
