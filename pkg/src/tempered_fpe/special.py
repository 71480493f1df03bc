"""Real special functions used by the finite-difference scheme.

Only the narrow parameter ranges that the solver needs are supported:
``zeta(s)`` on ``[-1, 1)`` and the upper incomplete gamma function with a
first argument that may be negative (but not a non-positive integer).
"""

from __future__ import annotations

import math

__all__ = [
    "riemann_zeta",
    "upper_incomplete_gamma",
    "lower_incomplete_gamma",
    "tempered_tail_weight",
]

_BORWEIN_TERMS = 30
_CF_MAX_ITER = 500
_SERIES_MAX_ITER = 1000
_EPS = 1e-16
_TINY = 1e-300


def _borwein_coefficients(n: int) -> list[int]:
    # d_k = n * sum_{i<=k} (n+i-1)! 4^i / ((n-i)! (2i)!), exact in integers.
    d = []
    acc = 0
    for i in range(n + 1):
        num = math.factorial(n + i - 1) * 4**i * n
        den = math.factorial(n - i) * math.factorial(2 * i)
        acc += num // den
        d.append(acc)
    return d


_BORWEIN_D = _borwein_coefficients(_BORWEIN_TERMS)


def _dirichlet_eta(s: float) -> float:
    n = _BORWEIN_TERMS
    dn = _BORWEIN_D[n]
    total = 0.0
    for k in range(n):
        sign = -1.0 if k % 2 else 1.0
        total += sign * float(_BORWEIN_D[k] - dn) / dn * (k + 1.0) ** (-s)
    return -total


def _zeta_via_eta(s: float) -> float:
    # zeta(s) = eta(s) / (1 - 2^(1-s)); expm1 keeps the denominator accurate near s = 1.
    return _dirichlet_eta(s) / (-math.expm1((1.0 - s) * math.log(2.0)))


def riemann_zeta(s: float) -> float:
    """Riemann zeta function for real ``s`` in ``[-1, 1)``.

    Uses the Borwein-accelerated alternating (eta) series on ``[-0.5, 1)``
    and the functional equation for ``s < -0.5``. Accurate to about 1e-14
    relative.
    """
    s = float(s)
    if not (-1.0 <= s < 1.0):
        raise ValueError(f"riemann_zeta: s must lie in [-1, 1), got {s!r}")
    if s == 0.0:
        return -0.5
    if s >= -0.5:
        return _zeta_via_eta(s)
    # zeta(s) = 2^s pi^(s-1) sin(pi s / 2) Gamma(1-s) zeta(1-s), with 1-s in (1.5, 2].
    t = 1.0 - s
    return (
        2.0**s
        * math.pi ** (s - 1.0)
        * math.sin(0.5 * math.pi * s)
        * math.gamma(t)
        * _zeta_via_eta(t)
    )


def _upper_gamma_cf(a: float, x: float) -> float:
    """Legendre continued fraction (modified Lentz), any real ``a``, best for ``x > 1``."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")
    return math.exp(-x + a * math.log(x)) * h


def _lower_gamma_series(a: float, x: float) -> float:
    """gamma(a, x) = e^-x x^a sum_n x^n / (a (a+1) ... (a+n)), for a > 0."""
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_SERIES_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")
    return total * math.exp(-x + a * math.log(x))


def upper_incomplete_gamma(a: float, x: float) -> float:
    r"""Upper incomplete gamma :math:`\Gamma(a, x) = \int_x^\infty t^{a-1} e^{-t} dt`.

    ``a`` may be negative as long as it is not a non-positive integer; ``x``
    must be positive. For ``x > max(1, a + 1)`` a continued fraction is used
    directly. Otherwise the value for the shifted argument ``a + n`` in
    ``(0, 1]`` is obtained from the power series and brought back down with
    ``Gamma(a, x) = (Gamma(a + 1, x) - x^a e^{-x}) / a``.
    """
    a = float(a)
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"upper_incomplete_gamma: x must be positive, got {x!r}")
    if a <= 0.0 and a == math.floor(a):
        raise ValueError(f"upper_incomplete_gamma: a must not be a non-positive integer, got {a!r}")

    if x > max(1.0, a + 1.0):
        return _upper_gamma_cf(a, x)
    if a > 0.0:
        return math.gamma(a) - _lower_gamma_series(a, x)

    shift = math.ceil(-a)
    if a + shift == 0.0:
        shift += 1
    b = a + shift
    value = math.gamma(b) - _lower_gamma_series(b, x)
    ex = math.exp(-x)
    log_x = math.log(x)
    for _ in range(shift):
        b -= 1.0
        value = (value - math.exp(b * log_x) * ex) / b
    return value


def lower_incomplete_gamma(a: float, x: float) -> float:
    r""":math:`\gamma(a, x) = \int_0^x t^{a-1} e^{-t} dt` for ``a > 0`` and ``x >= 0``."""
    a = float(a)
    x = float(x)
    if not a > 0.0:
        raise ValueError(f"lower_incomplete_gamma: a must be positive, got {a!r}")
    if x < 0.0:
        raise ValueError(f"lower_incomplete_gamma: x must be non-negative, got {x!r}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _lower_gamma_series(a, x)
    return math.gamma(a) - _upper_gamma_cf(a, x)


def tempered_tail_weight(alpha: float, lam: float, s: float) -> float:
    r"""Tail mass :math:`\int_s^\infty e^{-\lambda y} y^{-(1+\alpha)} dy`.

    Equal to ``lam**alpha * Gamma(-alpha, lam * s)``. The untempered limit
    ``lam == 0`` is accepted and returns ``s**-alpha / alpha``.
    """
    alpha = float(alpha)
    lam = float(lam)
    s = float(s)
    if not s > 0.0:
        raise ValueError(f"tempered_tail_weight: s must be positive, got {s!r}")
    if not (0.0 < alpha < 2.0) or alpha == 1.0:
        raise ValueError(f"tempered_tail_weight: alpha must lie in (0,1)∪(1,2), got {alpha!r}")
    if lam < 0.0:
        raise ValueError(f"tempered_tail_weight: lambda must be non-negative, got {lam!r}")
    if lam == 0.0:
        return s ** (-alpha) / alpha
    return lam**alpha * upper_incomplete_gamma(-alpha, lam * s)
