"""Target functions with an exactly known RKHS norm.

Two generators are provided:

* pre-RKHS expansions ``f = sum_i alpha_i k(., x_i)`` for any kernel, whose
  squared norm is the quadratic form ``alpha^T K alpha``;
* weighted sums of the orthonormal basis of the 1d Gaussian RKHS,

      e_n(x) = sqrt((2 s)^n / n!) x^n exp(-s x^2),   s = 1 / (2 length_scale^2),

  whose norm is the Euclidean norm of the weight vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .kernels import SQUARED_EXPONENTIAL, Domain, Kernel, as_points, gram

__all__ = [
    "PRE_RKHS",
    "SE_ONB",
    "RKHSFunction",
    "RKHSSamplingError",
    "sample_pre_rkhs",
    "sample_se_onb",
    "se_onb_basis",
    "evaluate",
    "save_function",
    "load_function",
    "DEFAULT_ONB_TERMS",
    "GENERATION_DOMAIN",
]

PRE_RKHS = "pre_rkhs"
SE_ONB = "se_onb"

DEFAULT_ONB_TERMS = 40
GENERATION_DOMAIN = Domain.interval(-2.0, 2.0)

# log of the smallest positive normal double, with margin
_LOG_TINY = -700.0
_MAX_CENTER_ATTEMPTS = 10


class RKHSSamplingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class RKHSFunction:
    """Finite kernel expansion with its exact RKHS norm.

    For ``representation == "pre_rkhs"``, ``coefficients`` are the weights of
    the kernel sections centred at ``centers``; for ``"se_onb"`` they are the
    weights of the basis functions ``e_0, e_1, ...`` and ``centers`` is empty.
    """

    representation: str
    kernel: Kernel
    coefficients: np.ndarray
    rkhs_norm: float
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))

    def __post_init__(self):
        if self.representation not in (PRE_RKHS, SE_ONB):
            raise ValueError(f"unknown representation {self.representation!r}")
        coef = np.array(self.coefficients, dtype=float).ravel()
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        centers = np.array(self.centers, dtype=float)
        if self.representation == PRE_RKHS:
            centers = as_points(centers) if centers.ndim < 2 else centers
            if centers.shape[0] != coef.shape[0]:
                raise ValueError("need one center per coefficient")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "rkhs_norm", float(self.rkhs_norm))

    @property
    def dimension(self):
        return 1 if self.representation == SE_ONB else self.centers.shape[1]

    def __call__(self, x):
        """Evaluate at one or many points; returns a float for a single point."""
        x_arr = np.asarray(x, dtype=float)
        pts = as_points(x_arr, self.dimension)
        if self.representation == PRE_RKHS:
            values = self.kernel(pts, self.centers) @ self.coefficients
        else:
            s = 0.5 / self.kernel.length_scale**2
            values = se_onb_basis(pts[:, 0], len(self.coefficients), s) @ self.coefficients
        if x_arr.ndim == 0 or (x_arr.ndim == 1 and x_arr.shape[0] == self.dimension and self.dimension > 1):
            return float(values[0])
        return values

    def recompute_norm(self):
        """Norm recomputed from the representation (independent of ``rkhs_norm``)."""
        if self.representation == SE_ONB:
            return float(np.linalg.norm(self.coefficients))
        q = self.coefficients @ gram(self.kernel, self.centers) @ self.coefficients
        return float(np.sqrt(max(q, 0.0)))


def evaluate(f, x):
    """Value of ``f`` at the point ``x``."""
    return f(x)


def se_onb_basis(x, num_terms, s):
    """Matrix ``[e_n(x_i)]`` of shape (len(x), num_terms) computed in log space."""
    x = np.asarray(x, dtype=float).ravel()
    n = np.arange(num_terms)
    log_scale = 0.5 * (n * np.log(2.0 * s) - gammaln(n + 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_abs_x = np.log(np.abs(x))
        # n * log|x| with the convention 0 * log 0 = 0 (e_0(0) = 1)
        power = np.where(n[None, :] == 0, 0.0, n[None, :] * log_abs_x[:, None])
    log_val = log_scale[None, :] + power - s * x[:, None] ** 2
    sign = np.where((x[:, None] < 0) & (n[None, :] % 2 == 1), -1.0, 1.0)
    return sign * np.exp(log_val)


def _onb_peak_log(n, s, domain):
    """log of max_{x in domain} |e_n(x)|."""
    lo, hi = domain.lower[0], domain.upper[0]
    candidates = [lo, hi]
    peak = np.sqrt(n / (2.0 * s)) if n > 0 else 0.0
    for p in (peak, -peak):
        if lo <= p <= hi:
            candidates.append(p)
    vals = se_onb_basis(np.array(candidates), n + 1, s)[:, n]
    with np.errstate(divide="ignore"):
        return float(np.log(np.max(np.abs(vals))))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_pre_rkhs(kernel, domain, num_centers=None, target_norm=10.0, rng_seed=None):
    """Random pre-RKHS function ``sum_i alpha_i k(., x_i)`` of norm ``target_norm``.

    Centers are uniform on ``domain``, raw weights uniform on [-1, 1]; the
    weights are then rescaled so that ``sqrt(alpha^T K alpha) == target_norm``.
    ``num_centers=None`` draws the number of centers uniformly from {20, ..., 60}.
    """
    if not target_norm > 0:
        raise ValueError("target_norm must be positive")
    rng = _rng(rng_seed)
    if num_centers is None:
        num_centers = int(rng.integers(20, 61))
    if num_centers < 1:
        raise ValueError("num_centers must be >= 1")
    for _ in range(_MAX_CENTER_ATTEMPTS):
        centers = domain.uniform(rng, num_centers)
        alpha = rng.uniform(-1.0, 1.0, size=num_centers)
        q = float(alpha @ gram(kernel, centers) @ alpha)
        if q > 1e-12 * kernel.output_variance * float(alpha @ alpha):
            alpha = alpha * (target_norm / np.sqrt(q))
            return RKHSFunction(PRE_RKHS, kernel, alpha, target_norm, centers)
    raise RKHSSamplingError(
        f"degenerate pre-RKHS quadratic form after {_MAX_CENTER_ATTEMPTS} attempts (seed={rng_seed!r})"
    )


def sample_se_onb(length_scale, domain=GENERATION_DOMAIN, num_terms=DEFAULT_ONB_TERMS,
                  target_norm=10.0, rng_seed=None):
    """Random combination of the first ``num_terms`` Gaussian-RKHS basis functions."""
    if domain.dimension != 1:
        raise ValueError("the Gaussian ONB generator is one-dimensional")
    if num_terms < 1:
        raise ValueError("num_terms must be >= 1")
    if not target_norm > 0:
        raise ValueError("target_norm must be positive")
    s = 0.5 / length_scale**2
    if _onb_peak_log(num_terms - 1, s, domain) < _LOG_TINY:
        raise RKHSSamplingError(
            f"basis term e_{num_terms - 1} underflows on the domain; reduce num_terms"
        )
    rng = _rng(rng_seed)
    weights = rng.uniform(-1.0, 1.0, size=num_terms)
    weights *= target_norm / np.linalg.norm(weights)
    kernel = Kernel(SQUARED_EXPONENTIAL, length_scale, 1.0)
    return RKHSFunction(SE_ONB, kernel, weights, target_norm)


_HEADER = "safebo-rkhs-function"


def save_function(f, path):
    """Write ``f`` as text: one header line, then one line per coefficient."""
    k = f.kernel
    header = (
        f"{_HEADER} representation={f.representation} family={k.family} "
        f"length_scale={k.length_scale:.17g} output_variance={k.output_variance:.17g} "
        f"rkhs_norm={f.rkhs_norm:.17g} dimension={f.dimension} terms={len(f.coefficients)}"
    )
    lines = [header]
    for i, c in enumerate(f.coefficients):
        if f.representation == PRE_RKHS:
            lines.append(" ".join(f"{v:.17g}" for v in (c, *f.centers[i])))
        else:
            lines.append(f"{c:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_function(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    head = lines[0].split()
    if head[0] != _HEADER:
        raise ValueError(f"{path}: not a saved RKHS function")
    meta = dict(tok.split("=", 1) for tok in head[1:])
    kernel = Kernel(meta["family"], float(meta["length_scale"]), float(meta["output_variance"]))
    rows = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if len(rows) != int(meta["terms"]):
        raise ValueError(f"{path}: expected {meta['terms']} rows, found {len(rows)}")
    if meta["representation"] == PRE_RKHS:
        return RKHSFunction(PRE_RKHS, kernel, rows[:, 0], float(meta["rkhs_norm"]), rows[:, 1:])
    return RKHSFunction(SE_ONB, kernel, rows[:, 0], float(meta["rkhs_norm"]))
