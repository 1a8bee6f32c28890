"""Scalar saturation primitives.

All functions are numba-compiled so the integrator kernel can call them
directly; they are equally callable from Python with float arguments.
"""

import math

from numba import njit

# tanh(40) == 1.0 in double precision
TANH_CLAMP = 40.0


@njit(cache=True)
def sgn(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def signed_power(x, gamma):
    """``|x|**gamma * sgn(x)``; returns 0 at ``x == 0``."""
    if x == 0.0:
        return 0.0
    return sgn(x) * abs(x) ** gamma


@njit(cache=True)
def sigma(e, z, gamma):
    """Power-law error shaping, saturated at ``+-z**gamma`` outside ``[-z, z]``."""
    lam = z**gamma
    if e >= z:
        return lam
    if e <= -z:
        return -lam
    return signed_power(e, gamma)


@njit(cache=True)
def clamped_tanh(y):
    if y > TANH_CLAMP:
        y = TANH_CLAMP
    elif y < -TANH_CLAMP:
        y = -TANH_CLAMP
    return math.tanh(y)


@njit(cache=True)
def tanh_reference(eta, k, m):
    """``-m tanh(k eta / m)``, a reference velocity strictly inside ``(-m, m)``."""
    return -m * clamped_tanh(k * eta / m)


@njit(cache=True)
def varrho(s, k, m):
    """Linear near zero, quadratic blend, then flat at ``+-m``; C1 and odd."""
    lo = 2.0 * m / (3.0 * k)
    hi = 4.0 * m / (3.0 * k)
    if s >= hi:
        return m
    # the quadratic pieces can round one ulp past +-m next to hi
    if s >= lo:
        return min(2.0 * k * s - 3.0 / (4.0 * m) * k * k * s * s - m / 3.0, m)
    if s >= -lo:
        return k * s
    if s >= -hi:
        return max(2.0 * k * s + 3.0 / (4.0 * m) * k * k * s * s + m / 3.0, -m)
    return -m


@njit(cache=True)
def varrho_derivative(s, k, m):
    lo = 2.0 * m / (3.0 * k)
    hi = 4.0 * m / (3.0 * k)
    if s >= hi:
        return 0.0
    if s >= lo:
        return max(2.0 * k - 3.0 / (2.0 * m) * k * k * s, 0.0)
    if s >= -lo:
        return k
    if s >= -hi:
        return max(2.0 * k + 3.0 / (2.0 * m) * k * k * s, 0.0)
    return 0.0


@njit(cache=True)
def varrho_integral(s, k, m):
    """``int_0^s varrho(q) dq``; even, nonnegative, zero only at ``s = 0``."""
    a = abs(s)
    lo = 2.0 * m / (3.0 * k)
    hi = 4.0 * m / (3.0 * k)
    if a <= lo:
        return 0.5 * k * a * a
    base = 0.5 * k * lo * lo - (k * lo * lo - k * k / (4.0 * m) * lo**3 - m / 3.0 * lo)
    if a <= hi:
        return base + k * a * a - k * k / (4.0 * m) * a**3 - m / 3.0 * a
    top = base + k * hi * hi - k * k / (4.0 * m) * hi**3 - m / 3.0 * hi
    return top + m * (a - hi)
