"""Regularized incomplete gamma functions and the chi-square upper tail.

Series expansion below ``x = a + 1``, Lentz continued fraction above.
"""

import math

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000


def _prefactor(a, x):
    return math.exp(-x + a * math.log(x) - math.lgamma(a))


def _lower_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * _prefactor(a, x)
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _upper_fraction(a, x):
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
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
            return h * _prefactor(a, x)
    raise ArithmeticError(f"incomplete gamma fraction did not converge (a={a}, x={x})")


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _lower_series(a, x)
    return 1.0 - _upper_fraction(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _lower_series(a, x)
    return _upper_fraction(a, x)


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail probability of a chi-square variate with ``df`` degrees of freedom."""
    if int(df) != df or df < 1:
        raise ValueError(f"invalid degrees of freedom {df!r}")
    if x < 0:
        raise ValueError("chi-square statistic must be non-negative")
    return min(1.0, max(0.0, gammainc_upper(0.5 * df, 0.5 * x)))
