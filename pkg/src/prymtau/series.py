"""Truncated complex power series helpers.

A series is a 1-d complex array ``a`` standing for ``sum a[k] u**k``; all
operations truncate to the length of their inputs.
"""

import numpy as np


def mul(a, b, order=None):
    order = len(a) if order is None else order
    return np.convolve(a, b)[:order]


def power(a, alpha, order=None):
    """Return ``a**alpha`` with the principal branch of ``a[0]**alpha``.

    Uses the standard recurrence for powers of a series with nonzero
    constant term.
    """
    order = len(a) if order is None else order
    a = np.asarray(a, dtype=complex)
    if a[0] == 0:
        raise ZeroDivisionError("series power needs a nonzero constant term")
    b = np.zeros(order, dtype=complex)
    b[0] = a[0] ** alpha
    for k in range(1, order):
        acc = 0j
        for j in range(1, min(k, len(a) - 1) + 1):
            acc += ((alpha + 1) * j - k) * a[j] * b[k - j]
        b[k] = acc / (k * a[0])
    return b


def compose_poly(coeffs, a, order=None):
    """Evaluate the polynomial ``sum coeffs[k] X**k`` at the series ``X = a``."""
    order = len(a) if order is None else order
    out = np.zeros(order, dtype=complex)
    for c in reversed(list(coeffs)):
        out = mul(out, a, order)
        out[0] += c
    return out


def revert(a):
    """Compositional inverse of a series with ``a[0] == 0`` and ``a[1] != 0``."""
    a = np.asarray(a, dtype=complex)
    order = len(a)
    if abs(a[0]) > 0 or a[1] == 0:
        raise ValueError("series is not invertible at the origin")
    y = np.zeros(order, dtype=complex)
    y[1] = 1.0 / a[1]
    # fixed point y = (u - sum_{k>=2} a_k y^k) / a_1; each pass fixes one more term
    for _ in range(order):
        acc = np.zeros(order, dtype=complex)
        yk = mul(y, y, order)
        for k in range(2, order):
            acc += a[k] * yk
            yk = mul(yk, y, order)
        new = -acc / a[1]
        new[1] += 1.0 / a[1]
        y = new
    return y


def derivative(a):
    k = np.arange(1, len(a))
    return np.concatenate([a[1:] * k, [0j]])


def evaluate(a, u):
    return np.polynomial.polynomial.polyval(u, a)
