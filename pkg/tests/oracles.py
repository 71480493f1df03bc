"""Independent reference computations (mpmath, straight loops) for tests."""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 30


def c_alpha(alpha):
    a = mp.mpf(alpha)
    return a * 2 ** (a - 1) * mp.gamma((1 + a) / 2) / (mp.sqrt(mp.pi) * mp.gamma(1 - a / 2))


def tail(alpha, lam, s):
    a, l = mp.mpf(alpha), mp.mpf(lam)
    return mp.quad(lambda y: mp.exp(-l * y) * y ** (-1 - a), [s, 2 * s, 10 * s, mp.inf])


def rhs_formula(alpha, lam, C, J, P, drift=None, bounded=True):
    """Literal evaluation of the semi-discrete right-hand side.

    ``P`` maps integer node index j (|j| <= J) to its value; anything else
    is zero. Returns {j: dP_j/dt} for the evolved nodes.
    """
    a, l, C = mp.mpf(alpha), mp.mpf(lam), mp.mpf(C)
    h = mp.mpf(1) / J if bounded else None
    return _rhs(a, l, C, J, h, P, drift, bounded)


def rhs_formula_truncated(alpha, lam, C, L, J, P, drift=None):
    a, l, C = mp.mpf(alpha), mp.mpf(lam), mp.mpf(C)
    return _rhs(a, l, C, J, mp.mpf(L) / J, P, drift, False)


def _rhs(a, l, C, J, h, P, drift, bounded):
    def p(j):
        return mp.mpf(P.get(j, 0))

    f = drift or (lambda x: 0)
    support = range(-J, J + 1)
    M = max(abs(mp.mpf(f(j * h))) for j in support)
    Ch = -C * mp.zeta(a - 1) * h ** (2 - a)
    rows = range(-J + 1, J) if bounded else range(-J, J + 1)
    out = {}
    for j in rows:
        val = Ch * (p(j + 1) - 2 * p(j) + p(j - 1)) / h**2
        fp = lambda m: (f(m * h) * p(m) + M * p(m)) / 2
        fm = lambda m: (f(m * h) * p(m) - M * p(m)) / 2
        val -= (fp(j) - fp(j - 1)) / h + (fm(j + 1) - fm(j)) / h
        if bounded:
            x = j * h
            val -= C * (tail(a, l, 1 + x) + tail(a, l, 1 - x)) * p(j)
        s = mp.mpf(0)
        lo, hi = -J - j, J - j
        for k in range(lo, hi + 1):
            if k == 0:
                continue
            xk = abs(k) * h
            term = (p(j + k) - p(j)) / (mp.exp(l * xk) * xk ** (1 + a))
            if k in (lo, hi):
                term /= 2
            s += term
        val += C * h * s
        out[j] = val
    return out
