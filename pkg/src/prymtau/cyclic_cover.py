"""Canonical cyclic cover ``{s**2 = p(x), t**n = q(x)}`` of a split
n-differential, its deck action and eigendifferentials.

Holomorphic differentials are searched among monomials
``x**a s**e t**(-b) dx/s`` and certified by exact valuations: over a point
where ``p`` and ``q`` vanish to orders ``(op, oq)`` the local ramification
index is ``lcm(2/gcd(2, op), n/gcd(n, oq))``, and ``x - x0``, ``s``, ``t``,
``dx`` have orders ``e``, ``e*op/2``, ``e*oq/n``, ``e - 1`` (with the
obvious changes at infinity).
"""

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm

import numpy as np

from .curve_model import NDifferential, ndiff_basis
from .errors import RankMismatch, SizeMismatch

ALGEBRAIC_TOL = 1e-12


@dataclass(frozen=True)
class Fiber:
    """Exact local data over one special value of ``x``."""

    label: str
    x: complex
    e: int
    count: int
    ord_x: Fraction
    ord_s: Fraction
    ord_t: Fraction
    ord_dx: Fraction


def _fiber(label, x, op, oq, n, at_infinity=False):
    es = 2 // gcd(2, abs(op))
    et = n // gcd(n, abs(oq))
    e = lcm(es, et)
    if at_infinity:
        return Fiber(label, x, e, 2 * n // e, Fraction(-e), Fraction(e * op, 2), Fraction(e * oq, n), Fraction(-e - 1))
    # ord_x is the order of the function x itself, nonzero only over x = 0
    ox = Fraction(e) if x == 0 else Fraction(0)
    return Fiber(label, x, e, 2 * n // e, ox, Fraction(e * op, 2), Fraction(e * oq, n), Fraction(e - 1))


def special_fibers(w: NDifferential):
    """Fibers over roots of ``p``, distinct roots of ``q`` and infinity."""
    c = w.curve
    fibers = []
    q_at = {}
    for r, m in zip(w.q_roots, w.q_mult):
        j = w._branch_index(r)
        if j is not None:
            q_at[j] = m
    for j, e in enumerate(c.roots):
        fibers.append(_fiber(f"p{j}", e, 1, q_at.get(j, 0), w.n))
    for i, (r, m) in enumerate(zip(w.q_roots, w.q_mult)):
        if w._branch_index(r) is None:
            fibers.append(_fiber(f"q{i}", r, 0, m, w.n))
    fibers.append(_fiber("inf", complex(np.inf), -c.degree, -sum(w.q_mult), w.n, at_infinity=True))
    return fibers


def riemann_hurwitz_genus(w: NDifferential):
    """Genus of the (normalized) cover from ramification over the x-line."""
    total = -2 * (2 * w.n)
    for f in special_fibers(w):
        total += f.count * (f.e - 1)
    return total // 2 + 1


def formula_genus(g, n):
    return n * n * (g - 1) + 1


def expected_eigen_rank(g, n, k):
    return g if k == 0 else (2 * n - 2 * k + 1) * (g - 1)


@dataclass(frozen=True)
class CoverMonomial:
    """``x**a * s**e * t**(-b) * dx/s`` on the cover, times
    ``prod (x - x0)**c`` over ``shifts``.

    Shifts are only needed off the simple stratum, where holomorphic
    differentials can be combinations of monomials vanishing at a special
    point; they are empty on the simple stratum.
    """

    a: int
    e: int
    b: int
    shifts: tuple = ()

    def eigen_index(self, n):
        return (-self.b) % n

    def value(self, x, s, t):
        """Coefficient of ``dx``."""
        x = np.asarray(x)
        out = x**self.a * np.asarray(s, dtype=complex) ** (self.e - 1) * np.asarray(t, dtype=complex) ** (-self.b)
        for x0, c in self.shifts:
            out = out * (x - x0) ** c
        return out

    def order(self, fiber: Fiber):
        base = self.a * fiber.ord_x + (self.e - 1) * fiber.ord_s - self.b * fiber.ord_t + fiber.ord_dx
        return base + sum(c * _linear_order(x0, fiber) for x0, c in self.shifts)

    def exponents(self, n):
        """Exponents of ``(x, s, t)`` in the coefficient of dx."""
        if self.shifts:
            raise ValueError("shifted monomials have no exponent triple")
        return self.a, self.e - 1, -self.b


def _linear_order(x0, fiber: Fiber):
    """Order of ``x - x0`` at the points of a fiber."""
    if fiber.label == "inf":
        return -fiber.e
    return fiber.e if fiber.x == x0 else 0


@dataclass(frozen=True)
class EigenDifferentialBasis:
    k: int
    elements: tuple

    @property
    def rank(self):
        return len(self.elements)


@dataclass(frozen=True)
class CyclicCover:
    base: NDifferential
    genus_hat: int
    formula_checked: bool

    @property
    def n(self):
        return self.base.n

    @property
    def deck_order(self):
        return self.base.n

    @property
    def rho(self):
        return np.exp(2j * np.pi / self.base.n)

    @property
    def genus(self):
        return self.base.curve.genus

    def t_principal(self, x):
        """Fixed single-valued branch of ``t``: product of principal roots."""
        x = np.asarray(x, dtype=complex)
        w = self.base
        out = np.full(x.shape, w.q_lead ** (1.0 / w.n), dtype=complex)
        for r, m in zip(w.q_roots, w.q_mult):
            out = out * (x - r) ** (m / w.n)
        return out

    def random_points(self, m, rng):
        x = rng.normal(size=m) + 1j * rng.normal(size=m)
        s = self.base.curve.s_principal(x) * rng.choice([-1, 1], size=m)
        t = self.t_principal(x) * self.rho ** rng.integers(0, self.n, size=m)
        return x, s, t

    def deck(self, x, s, t, power=1):
        return x, s, t * self.rho**power

    def to_json(self):
        return {"genus_hat": self.genus_hat,
                "eigen_ranks": [eigen_basis(self, k).rank for k in range(self.n)]}


def build_cover(w: NDifferential):
    """Build the canonical cover and certify its genus two ways.

    On the simple stratum the closed formula ``n**2 (g-1) + 1`` is compared
    with Riemann-Hurwitz; otherwise only Riemann-Hurwitz (for the
    normalization) is used and ``formula_checked`` is False.
    """
    rh = riemann_hurwitz_genus(w)
    if w.simple:
        f = formula_genus(w.curve.genus, w.n)
        if f != rh:
            raise RankMismatch(f"genus formula {f} disagrees with Riemann-Hurwitz {rh}")
        return CyclicCover(w, rh, True)
    return CyclicCover(w, rh, False)


def _candidates(cover, k):
    """Monomials spanning the ``rho**k`` eigendifferentials regular at
    every finite point.

    Every such differential is ``(R0(x) + R1(x) s) t**(-b) dx/s`` with
    ``b = -k mod n``, and the two parts are holomorphic separately (the
    involution ``s -> -s`` commutes with the deck map).  At each finite
    special fiber the least admissible power of ``x - x0`` is fixed by the
    valuations, so ``R_e`` is that product times an arbitrary polynomial.
    """
    n = cover.n
    b = (-k) % n
    fibers = [f for f in special_fibers(cover.base) if f.label != "inf"]
    amax = 2 * n * cover.base.curve.degree
    out = []
    for e in (0, 1):
        probe = CoverMonomial(0, e, b)
        shifts = []
        for f in fibers:
            o = probe.order(f)
            c = -(o // f.e)
            if c:
                shifts.append((f.x, int(c)))
        out += [CoverMonomial(a, e, b, tuple(shifts)) for a in range(amax + 1)]
    return out


def eigen_basis(cover: CyclicCover, k: int, check=True):
    """Monomial basis of the ``rho**k`` eigenspace of holomorphic
    differentials, filtered by exact valuations."""
    if not 0 <= k < cover.n:
        raise ValueError("k must lie in 0..n-1")
    fibers = special_fibers(cover.base)
    elems = tuple(m for m in _candidates(cover, k) if all(m.order(f) >= 0 for f in fibers))
    if check and cover.formula_checked:
        want = expected_eigen_rank(cover.genus, cover.n, k)
        if len(elems) != want:
            raise RankMismatch(f"eigen rank {len(elems)} != {want} for k={k}")
    if check and elems:
        rng = np.random.default_rng(12345 + k)
        x, s, t = cover.random_points(2 * cover.genus_hat, rng)
        mat = np.array([m.value(x, s, t) for m in elems])
        if np.linalg.matrix_rank(mat, tol=1e-10 * np.abs(mat).max()) != len(elems):
            raise RankMismatch("eigen basis is not linearly independent")
    return EigenDifferentialBasis(k, elems)


def canonical_v(cover: CyclicCover):
    """The canonical differential ``v = t dx/s``."""
    return CoverMonomial(0, 0, -1)


def divisor(cover: CyclicCover, mono: CoverMonomial):
    """Order of ``mono`` at the points of every special fiber."""
    return {f.label: mono.order(f) for f in special_fibers(cover.base)}


def phi_k_matrix(cover: CyclicCover, k: int, basis=None, target=None, npts=None, rng=None, square=True):
    """Matrix of ``u -> u * v**(n-k)`` from the ``rho**k`` eigenspace into
    holomorphic ``(n-k+1)``-differentials on the base.

    Columns are images of the eigen basis, rows coefficients in the target
    monomial basis, fitted by least squares from values at random points.
    Returns ``(matrix, descent_residual)``; the residual measures both the
    fit and the variation of the product along deck orbits.  With
    ``square=False`` the source may be any list of monomials of the
    eigenspace (holomorphic or not).
    """
    n = cover.n
    if not 1 <= k <= n - 1:
        raise ValueError("k must lie in 1..n-1")
    basis = basis or eigen_basis(cover, k)
    target = target or ndiff_basis(cover.base.curve, n - k + 1)
    if square and basis.rank != len(target):
        raise SizeMismatch(f"source rank {basis.rank} != target size {len(target)}")
    rng = rng or np.random.default_rng(7)
    m = npts or 3 * len(target) + 5
    x, s, t = cover.random_points(m, rng)
    v = canonical_v(cover)
    T = np.array([b.value(x, s) for b in target]).T
    cols, resid = [], 0.0
    for u in basis.elements:
        img = u.value(x, s, t) * v.value(x, s, t) ** (n - k)
        coef, *_ = np.linalg.lstsq(T, img, rcond=None)
        resid = max(resid, np.max(np.abs(T @ coef - img)) / np.max(np.abs(img)))
        for p in range(1, n):
            xs, ss, ts = cover.deck(x, s, t, p)
            orbit = u.value(xs, ss, ts) * v.value(xs, ss, ts) ** (n - k)
            resid = max(resid, np.max(np.abs(orbit - img)) / np.max(np.abs(img)))
        cols.append(coef)
    return np.array(cols).T, resid
