"""Double-double (~31 significant digits) scalar arithmetic.

A value is an ordinary ``(hi, lo)`` pair of floats with ``hi + lo`` exact and
``|lo| <= ulp(hi)/2``. Only the operations needed for summing alternating
power series with Gamma-function coefficients are provided: +, -, *, /, exp,
log and log-Gamma (Stirling with exact Bernoulli rationals, shifted up for
small arguments).
"""

from __future__ import annotations

import math

_SPLITTER = 134217729.0  # 2**27 + 1, Dekker splitting constant

ZERO = (0.0, 0.0)
ONE = (1.0, 0.0)
LN2 = (0.6931471805599453, 2.3190468138462996e-17)
HALF_LN_2PI = (0.9189385332046728, -3.8782941580672414e-17)


def _two_sum(a: float, b: float):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a: float, b: float):
    # requires |a| >= |b|
    s = a + b
    return s, b - (s - a)


def _two_prod(a: float, b: float):
    p = a * b
    at = _SPLITTER * a
    ahi = at - (at - a)
    alo = a - ahi
    bt = _SPLITTER * b
    bhi = bt - (bt - b)
    blo = b - bhi
    return p, ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo


def add(x, y):
    s, e = _two_sum(x[0], y[0])
    e += x[1] + y[1]
    return _quick_two_sum(s, e)


def add_d(x, a: float):
    s, e = _two_sum(x[0], a)
    e += x[1]
    return _quick_two_sum(s, e)


def neg(x):
    return (-x[0], -x[1])


def sub(x, y):
    return add(x, neg(y))


def mul(x, y):
    p, e = _two_prod(x[0], y[0])
    e += x[0] * y[1] + x[1] * y[0]
    return _quick_two_sum(p, e)


def mul_d(x, a: float):
    p, e = _two_prod(x[0], a)
    e += x[1] * a
    return _quick_two_sum(p, e)


def div(x, y):
    q1 = x[0] / y[0]
    r = sub(x, mul_d(y, q1))
    q2 = r[0] / y[0]
    r = sub(r, mul_d(y, q2))
    q3 = r[0] / y[0]
    s, e = _quick_two_sum(q1, q2)
    return add((s, e), (q3, 0.0))


def scale(x, a: float):
    # a must be a power of two: exact on both components
    return (x[0] * a, x[1] * a)


def from_float(a: float):
    return (a, 0.0)


def to_float(x) -> float:
    return x[0] + x[1]


def exp(x):
    """exp of a double-double via range reduction and a short Taylor tail."""
    if x[0] < -745.0:
        return ZERO
    if x[0] > 708.0:
        raise OverflowError("double-double exp overflow")
    m = round(x[0] / LN2[0])
    r = add(x, mul_d(LN2, -float(m)))
    # |r| <= ln2/2; halve 9 more times so the Taylor series converges fast
    k = 9
    r = scale(r, 2.0 ** -k)
    s = add(ONE, r)
    term = r
    for i in range(2, 24):
        term = div(mul(term, r), (float(i), 0.0))
        s = add(s, term)
        if abs(term[0]) < 1e-40 * abs(s[0]):
            break
    for _ in range(k):
        s = mul(s, s)
    f = 2.0 ** m
    return (s[0] * f, s[1] * f)


def log(x):
    """log of a positive double-double (one Newton correction of float log)."""
    if x[0] <= 0.0:
        raise ValueError("log of non-positive double-double")
    l = math.log(x[0])
    e = mul(x, exp((-l, 0.0)))  # 1 + eps with |eps| ~ 1e-16
    eps = add_d(e, -1.0)
    corr = add(eps, mul_d(mul(eps, eps), -0.5))
    corr = add(corr, mul_d(mul(mul(eps, eps), eps), 1.0 / 3.0))
    return add((l, 0.0), corr)


# Stirling coefficients B_{2j} / (2j (2j-1)) as exact rationals.
_STIRLING_NUM_DEN = (
    (1.0, 12.0),
    (-1.0, 360.0),
    (1.0, 1260.0),
    (-1.0, 1680.0),
    (1.0, 1188.0),
    (-691.0, 360360.0),
    (1.0, 156.0),
    (-3617.0, 122400.0),
    (43867.0, 244188.0),
    (-174611.0, 125400.0),
    (854513.0, 63756.0),
    (-236364091.0, 1506960.0),
    (8553103.0, 3900.0),
)
_STIRLING_COEFFS = tuple(div((n, 0.0), (d, 0.0)) for n, d in _STIRLING_NUM_DEN)
_STIRLING_MIN = 30.0


def lgamma(x):
    """log Gamma of a positive double-double.

    Arguments below 30 are shifted up with log Gamma(x) = log Gamma(x+1) - log x;
    the asymptotic series then leaves a relative truncation error ~ 1e-35.
    """
    if x[0] <= 0.0:
        raise ValueError("lgamma of non-positive double-double")
    acc = ZERO
    while x[0] < _STIRLING_MIN:
        acc = add(acc, log(x))
        x = add_d(x, 1.0)
    y = div(ONE, mul(x, x))
    s = from_float(0.0)
    for c in reversed(_STIRLING_COEFFS):
        s = add(mul(s, y), c)
    s = div(s, x)
    res = mul(add_d(x, -0.5), log(x))
    res = sub(res, x)
    res = add(res, HALF_LN_2PI)
    res = add(res, s)
    return sub(res, acc)
