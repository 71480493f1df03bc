"""Symmetric tempered alpha-stable jump measure in one dimension.

    nu(dy) = c_alpha * exp(-lam |y|) * |y|^(-1-alpha) dy
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .special import lower_incomplete_gamma, tempered_tail_weight

__all__ = [
    "TemperedStableParams",
    "check_alpha",
    "default_c_alpha",
    "levy_density",
    "second_moment_rate",
    "large_jump_rate",
    "small_jump_variance_rate",
]


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 2.0) or alpha == 1.0:
        raise ValueError(f"alpha must lie in (0,1)∪(1,2), got {alpha!r}")
    return alpha


def default_c_alpha(alpha: float) -> float:
    """Normalization of the symmetric alpha-stable measure in 1-d.

    ``alpha 2^(alpha-1) Gamma((1+alpha)/2) / (sqrt(pi) Gamma(1 - alpha/2))``;
    with it the untempered generator has symbol ``-|xi|^alpha``.
    """
    alpha = check_alpha(alpha)
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * math.gamma(0.5 * (1.0 + alpha))
        / (math.sqrt(math.pi) * math.gamma(1.0 - 0.5 * alpha))
    )


@dataclass(frozen=True)
class TemperedStableParams:
    """Stability index ``alpha``, tempering rate ``lam`` and normalization ``c_alpha``.

    ``lam == 0`` (pure stable) and ``c_alpha == 0`` (no jumps) are accepted as
    limiting cases; quantities that need a finite second moment reject them.
    """

    alpha: float
    lam: float
    c_alpha: float

    def __post_init__(self) -> None:
        check_alpha(self.alpha)
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if not (math.isfinite(self.c_alpha) and self.c_alpha >= 0.0):
            raise ValueError(f"c_alpha must be positive, got {self.c_alpha!r}")

    @classmethod
    def with_default_normalization(cls, alpha: float, lam: float) -> "TemperedStableParams":
        return cls(alpha, lam, default_c_alpha(alpha))


def levy_density(params: TemperedStableParams, y: float) -> float:
    if y == 0.0:
        raise ValueError("levy_density is singular at y = 0")
    ay = abs(y)
    return params.c_alpha * math.exp(-params.lam * ay) * ay ** (-1.0 - params.alpha)


def second_moment_rate(params: TemperedStableParams) -> float:
    """``int y^2 nu(dy) = 2 c_alpha lam^(alpha-2) Gamma(2-alpha)``, i.e. Var(L_t) / t."""
    if params.lam <= 0.0:
        raise ValueError("second moment is infinite for lambda = 0")
    return 2.0 * params.c_alpha * params.lam ** (params.alpha - 2.0) * math.gamma(2.0 - params.alpha)


def large_jump_rate(params: TemperedStableParams, eps: float) -> float:
    """Intensity ``nu(|y| > eps)`` of jumps larger than ``eps``."""
    return 2.0 * params.c_alpha * tempered_tail_weight(params.alpha, params.lam, eps)


def small_jump_variance_rate(params: TemperedStableParams, eps: float) -> float:
    """``int_{|y| <= eps} y^2 nu(dy)``."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    a = 2.0 - params.alpha
    if params.lam == 0.0:
        integral = eps**a / a
    else:
        integral = params.lam ** (-a) * lower_incomplete_gamma(a, params.lam * eps)
    return 2.0 * params.c_alpha * integral
