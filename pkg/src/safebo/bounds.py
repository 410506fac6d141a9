"""Confidence scaling factors beta_t for bounds of the form |f - mu| <= beta * sigma.

Indexing convention used throughout the package: ``beta(spec, posterior)``
is evaluated on the posterior that it scales, i.e. the posterior fitted on
all observations made so far.  The rigorous bounds only need the log
determinant of ``I + K / lambda`` over those observations.

The Abbasi-Yadkori factor comes from the self-normalized martingale bound

    ||S||_{V^-1} <= R sqrt(2 ln(det(I + K / lambda)^(1/2) / delta)),

so its radicand is ``ln det(I + K / lambda) + 2 ln(1 / delta)``.  With this
(square-rooted) determinant the factor coincides with the Fiedler factor
whenever ``lambda <= 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "FIXED",
    "ABBASI_YADKORI",
    "FIEDLER",
    "BoundSpec",
    "BoundConfigError",
    "beta",
    "beta_from_log_det",
]

FIXED = "fixed"
ABBASI_YADKORI = "abbasi_yadkori"
FIEDLER = "fiedler"

_ALIASES = {
    "fixed": FIXED,
    "fixedheuristic": FIXED,
    "heuristic": FIXED,
    "abbasi_yadkori": ABBASI_YADKORI,
    "abbasiyadkori": ABBASI_YADKORI,
    "ay": ABBASI_YADKORI,
    "fiedler": FIEDLER,
}

_UNSUPPORTED = {"chowdhury", "srinivas", "gamma", "information_gain"}


class BoundConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BoundSpec:
    """How beta_t is computed.

    ``strategy`` is ``"fixed"`` (uses ``fixed_value``), ``"abbasi_yadkori"`` or
    ``"fiedler"``; the two rigorous strategies need the RKHS norm bound ``B``,
    the sub-Gaussian constant ``R`` and the confidence ``delta``.
    """

    strategy: str = FIXED
    fixed_value: float | None = 2.0
    B: float | None = None
    R: float | None = None
    delta: float | None = None

    def __post_init__(self):
        key = str(self.strategy).lower().replace("-", "_").replace(" ", "")
        if key in _UNSUPPORTED:
            raise BoundConfigError(
                f"beta strategy {self.strategy!r} needs the maximum information gain, "
                "which has no computable general form; use 'abbasi_yadkori' or 'fiedler'"
            )
        if key not in _ALIASES:
            raise BoundConfigError(f"unknown beta strategy {self.strategy!r}")
        object.__setattr__(self, "strategy", _ALIASES[key])
        if self.strategy == FIXED:
            if self.fixed_value is None or not self.fixed_value > 0:
                raise BoundConfigError("fixed strategy needs fixed_value > 0")
            return
        missing = [n for n in ("B", "R", "delta") if getattr(self, n) is None]
        if missing:
            raise BoundConfigError(f"{self.strategy} bound needs {', '.join(missing)}")
        if not self.B > 0 or not self.R > 0:
            raise BoundConfigError("B and R must be positive")
        if not 0.0 < self.delta < 1.0:
            raise BoundConfigError("delta must lie in (0, 1)")

    @property
    def rigorous(self):
        return self.strategy != FIXED


def beta_from_log_det(spec, log_det, t, noise_variance):
    """beta from ``log_det = ln det(I + K_t / lambda)`` over ``t`` observations."""
    if spec.strategy == FIXED:
        return float(spec.fixed_value)
    lam = noise_variance
    scale = spec.R / math.sqrt(lam)
    if spec.strategy == ABBASI_YADKORI:
        return spec.B + scale * math.sqrt(log_det + 2.0 * math.log(1.0 / spec.delta))
    # ln det(lbar/lam K + lbar I) = t ln(lbar) + ln det(I + K/lam)
    lam_bar = max(1.0, lam)
    return spec.B + scale * math.sqrt(log_det + t * math.log(lam_bar) - 2.0 * math.log(spec.delta))


def beta(spec, posterior, t=None):
    """beta for the confidence interval ``mu +- beta * sigma`` of ``posterior``.

    ``t`` is informational only; the number of observations is taken from the
    posterior.
    """
    if spec.strategy == FIXED:
        return float(spec.fixed_value)
    return beta_from_log_det(spec, posterior.log_det_scaled(), posterior.num_data,
                             posterior.config.noise_variance)
