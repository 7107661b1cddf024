"""Riemann theta functions with characteristics and a certified tail bound.

``theta[alpha, beta](z) = sum_m exp(pi i m.Omega.m + 2 pi i m.(z + beta))``
over ``m = n + alpha``, ``n`` in ``Z^g``.

With ``Y = Im Omega``, ``w = Y^-1 Im z`` and ``pi Y = T^T T`` the modulus of
a term is ``exp(pi w.Y.w) * exp(-|T(m + w)|^2)``.  The prefactor is carried
separately and the sum runs over lattice points with ``|T(m + w)| < R``.
Terms outside are bounded by averaging the (radially monotone) majorant
over disjoint balls of radius half the shortest lattice vector, which gives
a rigorous tail estimate evaluated by one-dimensional quadrature.
"""

from itertools import product
from math import gamma

import numpy as np
from scipy.integrate import quad

from .errors import NotPositiveDefinite

DEFAULT_EPS = 1e-14


def half_characteristics(g):
    """All ``2**(2g)`` characteristics with entries in {0, 1/2}."""
    out = []
    for bits in product((0, 1), repeat=2 * g):
        out.append((np.array(bits[:g]) / 2.0, np.array(bits[g:]) / 2.0))
    return out


def parity(char):
    a, b = char
    return 1 if int(round(4 * np.dot(a, b))) % 2 == 0 else -1


def _shortest_vector(T):
    """Length of the shortest nonzero vector of the lattice ``T Z^g``."""
    g = T.shape[0]
    best = np.min(np.linalg.norm(T, axis=0))
    Tinv = np.linalg.inv(T)
    box = np.ceil(best * np.linalg.norm(Tinv, axis=1)).astype(int)
    rngs = [np.arange(-b, b + 1) for b in box]
    pts = np.array(np.meshgrid(*rngs, indexing="ij")).reshape(g, -1).T
    pts = pts[np.any(pts != 0, axis=1)]
    return float(np.min(np.linalg.norm(pts @ T.T, axis=1)))


class ThetaEvaluator:
    """Theta evaluator for a fixed period matrix.

    Immutable apart from a cache of lattice point sets keyed by truncation
    radius; ``enumerations`` counts how many point sets were built.
    """

    def __init__(self, Omega, eps=DEFAULT_EPS):
        Omega = np.asarray(Omega, dtype=complex)
        Omega = 0.5 * (Omega + Omega.T)
        self.Omega = Omega
        self.g = Omega.shape[0]
        self.eps = eps
        self.Y = Omega.imag
        try:
            L = np.linalg.cholesky(np.pi * self.Y)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("Im Omega is not positive definite") from exc
        self.T = L.T
        self.Tinv = np.linalg.inv(self.T)
        self.Yinv = np.linalg.inv(self.Y)
        self.rho = 0.5 * _shortest_vector(self.T)
        corners = np.array(list(product((-0.5, 0.5), repeat=self.g)))
        self.cube_radius = float(np.max(np.linalg.norm(corners @ self.T.T, axis=1)))
        self._points = {}
        self.enumerations = 0

    # ------------------------------------------------------------ bounds

    def tail_bound(self, R, slopes=(), offsets=()):
        """Bound on the sum of scaled term moduli with ``|T(m+w)| >= R``.

        The polynomial factor of a derivative along ``d`` is bounded by
        ``2 pi (a |x| + b)`` with ``a = |T^-T d|`` and ``b = |w.d|``.
        """
        g, rho = self.g, self.rho
        lo = max(R - rho, 0.0)

        def integrand(r):
            poly = 1.0
            for a, b in zip(slopes, offsets):
                poly *= 2 * np.pi * (a * (r + rho) + b)
            return r ** (g - 1) * poly * np.exp(-max(r - rho, 0.0) ** 2)

        sphere = 2 * np.pi ** (g / 2) / gamma(g / 2)
        ball = np.pi ** (g / 2) * rho**g / gamma(g / 2 + 1)
        val, _ = quad(integrand, lo, np.inf, limit=200, epsabs=0, epsrel=1e-10)
        return sphere * val / ball

    def radius(self, eps=None, slopes=(), offsets=()):
        eps = self.eps if eps is None else eps
        R = self.rho + 1.0
        while self.tail_bound(R, slopes, offsets) > eps:
            R += 0.25
        return R

    def _lattice(self, R):
        key = round(float(np.ceil(R * 4) / 4), 2)
        if key not in self._points:
            self.enumerations += 1
            Rb = key + self.cube_radius
            box = np.ceil(Rb * np.linalg.norm(self.Tinv, axis=1)).astype(int) + 1
            rngs = [np.arange(-b, b + 1) for b in box]
            pts = np.array(np.meshgrid(*rngs, indexing="ij")).reshape(self.g, -1).T
            keep = np.linalg.norm(pts @ self.T.T, axis=1) < Rb
            self._points[key] = (pts[keep].astype(float), key)
        return self._points[key]

    # ------------------------------------------------------------ evaluation

    def _direction_params(self, dirs, w):
        slopes, offsets = [], []
        for d in dirs:
            d = np.atleast_2d(d)
            slopes.append(float(np.max(np.linalg.norm(d @ self.Tinv, axis=1))))
            offsets.append(float(np.max(np.abs(np.einsum("pg,pg->p", np.broadcast_to(d, w.shape), w)))))
        return slopes, offsets

    def scaled(self, z, char=None, dirs=(), R=None):
        """Return ``(sums, log_prefactor, bound)`` with
        ``value = exp(log_prefactor) * sums`` and the truncation error of
        ``sums`` at most ``bound``.

        ``z`` has shape ``(g,)`` or ``(P, g)``; each direction has shape
        ``(g,)`` or ``(P, g)``.
        """
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        alpha, beta = (np.zeros(self.g), np.zeros(self.g)) if char is None else map(np.asarray, char)
        w = z.imag @ self.Yinv.T
        slopes, offsets = self._direction_params(dirs, w)
        if R is None:
            R = self.radius(slopes=slopes, offsets=offsets)
        bound = self.tail_bound(R, slopes, offsets)
        pts, _ = self._lattice(R)
        c = alpha[None, :] + w
        rc = np.round(c)
        sums = np.empty(len(z), dtype=complex)
        dirs_b = [np.broadcast_to(np.atleast_2d(np.asarray(d, dtype=complex)), z.shape) for d in dirs]
        for p in range(len(z)):
            m = pts - rc[p] + alpha
            x = (m + w[p]) @ self.T.T
            keep = np.einsum("kg,kg->k", x, x) < R**2 + 2 * R * self.cube_radius + self.cube_radius**2
            m = m[keep]
            quad_form = np.einsum("kg,gh,kh->k", m, self.Omega, m)
            expo = 1j * np.pi * quad_form + 2j * np.pi * (m @ (z[p] + beta)) - np.pi * w[p] @ self.Y @ w[p]
            terms = np.exp(expo)
            for d in dirs_b:
                terms = terms * (2j * np.pi * (m @ d[p]))
            sums[p] = terms.sum()
        logpre = np.pi * np.einsum("pg,gh,ph->p", w, self.Y, w)
        if single:
            return sums[0], logpre[0], bound
        return sums, logpre, bound

    def theta(self, z, char=None, dirs=(), R=None):
        """Theta value (or iterated directional derivative along ``dirs``)."""
        s, lp, _ = self.scaled(z, char, dirs, R)
        return s * np.exp(lp)

    def directional_derivative(self, z, char, directions):
        if len(directions) > self.g + 2:
            raise ValueError("at most g + 2 directions are supported")
        return self.theta(z, char, tuple(directions))

    def log_theta(self, z, char=None, dirs=()):
        """``log`` of the theta value without forming the prefactor."""
        s, lp, _ = self.scaled(z, char, dirs)
        return np.log(s) + lp

    def gradient(self, z, char=None):
        eye = np.eye(self.g)
        return np.array([self.theta(z, char, (eye[i],)) for i in range(self.g)])

    def hessian(self, z, char=None):
        eye = np.eye(self.g)
        H = np.empty((self.g, self.g), dtype=complex)
        for i in range(self.g):
            for j in range(i, self.g):
                H[i, j] = H[j, i] = self.theta(z, char, (eye[i], eye[j]))
        return H

    def jet(self, z, char=None, order=2):
        """Scaled value, gradient and Hessian in one pass over the lattice.

        Returns ``(val, grad, hess, log_prefactor)`` for ``z`` of shape
        ``(P, g)``; every derivative shares the prefactor ``exp(lp)``.
        Points are grouped by their integer shift so each group is one
        vectorized sum.
        """
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        g = self.g
        alpha, beta = (np.zeros(g), np.zeros(g)) if char is None else map(np.asarray, char)
        w = z.imag @ self.Yinv.T
        a = float(np.max(np.linalg.norm(self.Tinv, axis=1)))
        b = float(np.max(np.abs(w))) if len(w) else 0.0
        R = self.radius(slopes=(a,) * order, offsets=(b,) * order)
        pts, _ = self._lattice(R)
        rc = np.round(alpha[None, :] + w)
        val = np.empty(len(z), dtype=complex)
        grad = np.empty((len(z), g), dtype=complex)
        hess = np.empty((len(z), g, g), dtype=complex)
        keys, inv = np.unique(rc, axis=0, return_inverse=True)
        inv = np.asarray(inv).reshape(-1)
        for gi, key in enumerate(keys):
            idx = np.nonzero(inv == gi)[0]
            m = pts - key + alpha
            quad_form = np.einsum("kg,gh,kh->k", m, self.Omega, m)
            zz = z[idx] + beta
            lp = np.pi * np.einsum("pg,gh,ph->p", w[idx], self.Y, w[idx])
            E = np.exp(1j * np.pi * quad_form[None, :] + 2j * np.pi * (zz @ m.T) - lp[:, None])
            val[idx] = E.sum(axis=1)
            tm = 2j * np.pi * m
            grad[idx] = E @ tm
            if order >= 2:
                hess[idx] = np.einsum("pk,ki,kj->pij", E, tm, tm)
        logpre = np.pi * np.einsum("pg,gh,ph->p", w, self.Y, w)
        return val, grad, hess, logpre

    def log_hessian(self, z, char=None):
        """``d_i d_j log theta`` at each point."""
        val, grad, hess, _ = self.jet(z, char, 2)
        return hess / val[:, None, None] - grad[:, :, None] * grad[:, None, :] / val[:, None, None] ** 2

    def third(self, z, char=None):
        eye = np.eye(self.g)
        D = np.empty((self.g,) * 3, dtype=complex)
        for idx in product(range(self.g), repeat=3):
            key = tuple(sorted(idx))
            if key == idx:
                D[idx] = self.theta(z, char, tuple(eye[i] for i in idx))
        for idx in product(range(self.g), repeat=3):
            D[idx] = D[tuple(sorted(idx))]
        return D


def theta_function(Omega, z, char=None, eps=DEFAULT_EPS):
    return ThetaEvaluator(Omega, eps).theta(z, char)
