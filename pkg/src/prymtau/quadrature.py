"""Vectorized adaptive Gauss-Legendre quadrature on [0, 1]."""

from functools import lru_cache

import numpy as np

from .errors import ToleranceNotMet

ROUNDOFF = 64 * np.finfo(float).eps


@lru_cache(maxsize=None)
def _gl(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1) / 2, w / 2


def _rule(f, a, b, order):
    x, w = _gl(order)
    vals = np.atleast_2d(f(a + (b - a) * x))
    return (vals * w).sum(axis=1) * (b - a)


def adaptive_gl(f, tol=1e-12, order=16, max_intervals=20000, atol=1e-300):
    """Integrate a vector-valued ``f`` over [0, 1].

    ``f`` maps an array of nodes to an array of shape ``(M, len(nodes))``.
    An interval is accepted when the rule on it and the sum over its two
    halves differ by less than its share of ``max(tol * scale, atol)``,
    where ``scale`` is the sup-norm of the first whole-interval estimate,
    or when it is at the roundoff level of the interval's own contribution.
    Returns ``(values, error_estimate)``.
    """
    whole = _rule(f, 0.0, 1.0, order)
    scale = max(np.max(np.abs(whole)), atol)
    budget = max(tol * scale, atol)
    total = np.zeros_like(whole)
    err = 0.0
    stack = [(0.0, 1.0, whole)]
    count = 0
    while stack:
        a, b, q = stack.pop()
        m = 0.5 * (a + b)
        ql = _rule(f, a, m, order)
        qr = _rule(f, m, b, order)
        e = np.max(np.abs(q - ql - qr))
        if not np.isfinite(e):
            raise ToleranceNotMet("integrand is not finite on the path")
        count += 1
        # below roundoff of the local contribution further splitting cannot help
        floor = ROUNDOFF * np.max(np.abs(ql) + np.abs(qr))
        if e <= max(budget * (b - a), floor) or (b - a) < 1e-14:
            total += ql + qr
            err += e
            continue
        if count > max_intervals:
            raise ToleranceNotMet(f"adaptive quadrature exceeded {max_intervals} intervals")
        stack.append((a, m, ql))
        stack.append((m, b, qr))
    return total, err
